use std::collections::{BTreeMap, BTreeSet};

use super::SchemaError;

/// A rooted tree of categories; `depth(root) == 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaxonomyTree {
    name: String,
    root: String,
    parent: BTreeMap<String, String>,
    nodes: BTreeSet<String>,
    depth: BTreeMap<String, usize>,
}

impl TaxonomyTree {
    /// Builds a tree from child → parent edges.
    ///
    /// Every node other than `root` must have a parent, and every parent
    /// chain must end at `root`.
    pub fn new(
        name: impl Into<String>,
        root: impl Into<String>,
        parent: BTreeMap<String, String>,
    ) -> Result<Self, SchemaError> {
        let name = name.into();
        let root = root.into();
        if parent.contains_key(&root) {
            return Err(SchemaError::Taxonomy {
                taxonomy: name,
                reason: format!("root '{root}' has a parent"),
            });
        }
        let mut nodes: BTreeSet<String> = BTreeSet::from([root.clone()]);
        nodes.extend(parent.keys().cloned());
        for p in parent.values() {
            if !nodes.contains(p) {
                return Err(SchemaError::Taxonomy {
                    taxonomy: name,
                    reason: format!("parent '{p}' is neither the root nor a child"),
                });
            }
        }

        let mut depth = BTreeMap::from([(root.clone(), 1usize)]);
        for start in parent.keys() {
            let mut chain = Vec::new();
            let mut seen = BTreeSet::new();
            let mut cur = start.clone();
            while !depth.contains_key(&cur) {
                if !seen.insert(cur.clone()) {
                    return Err(SchemaError::TaxonomyCycle {
                        taxonomy: name,
                        node: cur,
                    });
                }
                chain.push(cur.clone());
                cur = parent[&cur].clone();
            }
            let mut d = depth[&cur];
            for node in chain.into_iter().rev() {
                d += 1;
                depth.insert(node, d);
            }
        }

        Ok(TaxonomyTree {
            name,
            root,
            parent,
            nodes,
            depth,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, node: &str) -> bool {
        self.nodes.contains(node)
    }

    pub fn parent(&self, node: &str) -> Option<&str> {
        self.parent.get(node).map(String::as_str)
    }

    pub fn parent_map(&self) -> &BTreeMap<String, String> {
        &self.parent
    }

    pub fn children<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.parent
            .iter()
            .filter(move |(_, p)| p.as_str() == node)
            .map(|(c, _)| c.as_str())
    }

    /// Number of nodes on the path from the root to `node`, both included.
    pub fn depth(&self, node: &str) -> Option<usize> {
        self.depth.get(node).copied()
    }

    /// `node` first, root last.
    pub fn ancestors<'a>(&'a self, node: &'a str) -> Vec<&'a str> {
        let mut out = Vec::new();
        if !self.contains(node) {
            return out;
        }
        let mut cur = node;
        loop {
            out.push(cur);
            match self.parent(cur) {
                Some(p) => cur = p,
                None => return out,
            }
        }
    }

    /// True when `ancestor` lies on the path from the root to `node` (inclusive).
    pub fn is_ancestor_or_self(&self, ancestor: &str, node: &str) -> bool {
        self.ancestors(node).contains(&ancestor)
    }

    /// Depth of the deepest common ancestor of `x` and `y`.
    pub fn common_depth(&self, x: &str, y: &str) -> Option<usize> {
        if !self.contains(x) || !self.contains(y) {
            return None;
        }
        let xs: BTreeSet<&str> = self.ancestors(x).into_iter().collect();
        self.ancestors(y)
            .into_iter()
            .find(|a| xs.contains(a))
            .and_then(|a| self.depth(a))
    }
}
