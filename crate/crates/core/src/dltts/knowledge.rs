//! The saturation step: closing a tag under deductions against the public
//! relations and count tables known to the querier.

use std::collections::BTreeSet;

use super::{DlttsError, Tag};
use crate::schema::{
    Cell, ColumnClass, DataTable, PrivacyPolicy, SchemaError, Signature, TuplePattern, Value,
};

pub const DEFAULT_MAX_ROUNDS: usize = 1000;

/// One aggregate row: how many rows with `key` have exactly `target`.
#[derive(Clone, Debug, PartialEq)]
pub struct CountRow {
    pub key: Vec<Value>,
    pub target: Value,
    pub count: u64,
}

/// A published aggregate such as "male Physics staff with CoVid: 1".
#[derive(Clone, Debug, PartialEq)]
pub struct CountTable {
    pub name: String,
    /// Signature indices of the key columns, in `CountRow::key` order.
    pub key: Vec<usize>,
    /// Signature index of the taxoral column being counted.
    pub target: usize,
    pub rows: Vec<CountRow>,
}

/// Reads a count table: signature columns plus one `count` column. The single
/// taxoral column is what is counted, the others form the key.
pub fn load_count_table(name: &str, text: &str, sig: &Signature) -> Result<CountTable, SchemaError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| SchemaError::Csv(e.to_string()))?
        .clone();
    let mut count_pos = None;
    let mut key = Vec::new();
    let mut target = None;
    for (pos, h) in header.iter().enumerate() {
        if h.eq_ignore_ascii_case("count") {
            count_pos = Some(pos);
            continue;
        }
        let idx = sig
            .index_of(h)
            .ok_or_else(|| SchemaError::UnknownColumn(h.to_string()))?;
        if sig.columns()[idx].class == ColumnClass::Taxoral {
            if target.is_some() {
                return Err(SchemaError::Malformed(format!(
                    "count table '{name}' has more than one taxoral column"
                )));
            }
            target = Some((pos, idx));
        } else {
            key.push((pos, idx));
        }
    }
    let count_pos = count_pos.ok_or_else(|| {
        SchemaError::Malformed(format!("count table '{name}' has no 'count' column"))
    })?;
    let (target_pos, target) = target.ok_or_else(|| {
        SchemaError::Malformed(format!("count table '{name}' has no taxoral column"))
    })?;

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| SchemaError::Csv(e.to_string()))?;
        let cell = |pos: usize, idx: usize| {
            Value::parse_cell(&record[pos], &sig.columns()[idx], sig.taxonomies())
        };
        let count = record[count_pos].parse::<u64>().map_err(|e| SchemaError::BadCell {
            column: "count".into(),
            text: record[count_pos].to_string(),
            reason: e.to_string(),
        })?;
        rows.push(CountRow {
            key: key
                .iter()
                .map(|&(p, i)| cell(p, i))
                .collect::<Result<_, _>>()?,
            target: cell(target_pos, target)?,
            count,
        });
    }
    Ok(CountTable {
        name: name.to_string(),
        key: key.into_iter().map(|(_, i)| i).collect(),
        target,
        rows,
    })
}

/// The outside sources a querier can combine with what it has learned.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExternalBases {
    pub relations: Vec<DataTable>,
    pub counts: Vec<CountTable>,
}

/// Saturation against fixed external bases.
///
/// Three rules run to a fixpoint, each reading one or two known facts and
/// the externals only, so the closure is monotone:
///
/// * lookup: a fact that agrees with exactly one external row, and shares
///   at least one bound column with it, is extended by that row;
/// * refinement: when a count table says `n` rows with some key have a
///   taxon and exactly `n` external rows with that key could have it, a
///   fact with that key and a coarser taxon gets the finer one;
/// * identity: two facts with the same bound identifiers that do not
///   contradict each other are merged.
#[derive(Clone, Debug)]
pub struct Knowledge<'a> {
    sig: &'a Signature,
    rows: Vec<TuplePattern>,
    counts: &'a [CountTable],
    max_rounds: usize,
}

impl<'a> Knowledge<'a> {
    pub fn new(sig: &'a Signature, externals: &'a ExternalBases) -> Self {
        let rows = externals
            .relations
            .iter()
            .flat_map(|t| t.rows().iter().map(move |r| TuplePattern::from_row(sig, t, r)))
            .collect();
        Knowledge {
            sig,
            rows,
            counts: &externals.counts,
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }

    pub fn with_max_rounds(mut self, rounds: usize) -> Self {
        self.max_rounds = rounds;
        self
    }

    pub fn signature(&self) -> &Signature {
        self.sig
    }

    pub fn saturate(&self, tag: &Tag) -> Result<Tag, DlttsError> {
        let mut current = tag.clone();
        for _ in 0..self.max_rounds {
            let fresh: BTreeSet<TuplePattern> = self
                .derive(&current)
                .into_iter()
                .filter(|f| !current.contains(f))
                .collect();
            if fresh.is_empty() {
                return Ok(current);
            }
            for f in fresh {
                current.insert(f);
            }
        }
        Err(DlttsError::SaturationBound(self.max_rounds))
    }

    fn derive(&self, tag: &Tag) -> Vec<TuplePattern> {
        let facts: Vec<&TuplePattern> = tag.positive().collect();
        let mut out = Vec::new();
        for k in &facts {
            self.lookup(k, &mut out);
            self.refine(k, &mut out);
        }
        self.identify(&facts, &mut out);
        out
    }

    fn lookup(&self, k: &TuplePattern, out: &mut Vec<TuplePattern>) {
        let mut hits = self
            .rows
            .iter()
            .filter(|r| r.arity() == k.arity() && k.shared_bound(r) > 0 && k.unifiable(r));
        if let (Some(r), None) = (hits.next(), hits.next()) {
            out.push(k.merge(r));
        }
    }

    fn refine(&self, k: &TuplePattern, out: &mut Vec<TuplePattern>) {
        for table in self.counts {
            let Some(tree) = self.sig.taxonomy_of(table.target) else {
                continue;
            };
            let Some(Value::Taxon(have)) = k.get(table.target) else {
                continue;
            };
            for row in &table.rows {
                let Value::Taxon(want) = &row.target else {
                    continue;
                };
                if row.count == 0 || have == want || !tree.is_ancestor_or_self(have, want) {
                    continue;
                }
                let keyed = |p: &TuplePattern| {
                    table
                        .key
                        .iter()
                        .zip(&row.key)
                        .all(|(&i, v)| p.get(i) == Some(v))
                };
                if !keyed(k) {
                    continue;
                }
                let candidates: Vec<&TuplePattern> = self
                    .rows
                    .iter()
                    .filter(|r| {
                        keyed(r)
                            && matches!(r.get(table.target),
                                Some(Value::Taxon(x)) if tree.is_ancestor_or_self(x, want))
                    })
                    .collect();
                if candidates.len() as u64 != row.count {
                    continue;
                }
                if candidates.iter().any(|c| c.unifiable(k)) {
                    out.push(k.with_cell(table.target, row.target.clone()));
                }
            }
        }
    }

    fn identify(&self, facts: &[&TuplePattern], out: &mut Vec<TuplePattern>) {
        let ids: Vec<usize> = self.sig.identifier_columns().collect();
        if ids.is_empty() {
            return;
        }
        for (i, a) in facts.iter().enumerate() {
            for b in &facts[i + 1..] {
                let linked = ids
                    .iter()
                    .any(|&c| matches!((&a.cells[c], &b.cells[c]), (Cell::Is(x), Cell::Is(y)) if x == y));
                if linked && a.unifiable(b) {
                    out.push(a.merge(b));
                }
            }
        }
    }
}

/// [`Knowledge::saturate`] with the default round bound.
pub fn saturate(tag: &Tag, externals: &ExternalBases, sig: &Signature) -> Result<Tag, DlttsError> {
    Knowledge::new(sig, externals).saturate(tag)
}

/// False when a known fact falls under a denial of the policy, or the tag
/// holds a fact together with its negation.
pub fn check_consistency(tag: &Tag, policy: &PrivacyPolicy) -> bool {
    first_conflict(tag, policy).is_none()
}

/// The pattern behind the first inconsistency found, if any.
pub(crate) fn first_conflict(tag: &Tag, policy: &PrivacyPolicy) -> Option<TuplePattern> {
    for fact in tag.positive() {
        if let Some(p) = policy.patterns.iter().find(|p| p.covers(fact)) {
            return Some(p.clone());
        }
        let neg = fact.negated();
        if tag.contains(&neg) {
            return Some(neg);
        }
    }
    None
}
