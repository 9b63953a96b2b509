use std::collections::BTreeMap;

use serde::Deserialize;

use super::{
    Cell, ColumnClass, ColumnGroup, ColumnSchema, PrivacyPolicy, SchemaError, Signature,
    TaxonomyTree, TuplePattern, Value,
};
use crate::scalar::parse_fraction;

#[derive(Deserialize)]
struct RawConfig {
    #[serde(default)]
    column: Vec<RawColumn>,
    #[serde(default)]
    taxonomy: Vec<RawTaxonomy>,
    #[serde(default)]
    policy: Option<RawPolicy>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawColumn {
    name: String,
    class: ColumnClass,
    group: ColumnGroup,
    taxonomy: Option<String>,
    normalizer: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTaxonomy {
    name: String,
    root: String,
    #[serde(default)]
    parent: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    #[serde(default)]
    deny: Vec<Vec<String>>,
}

/// Columns, taxonomies and policy of one analysis scenario.
#[derive(Clone, Debug)]
pub struct SchemaConfig {
    pub signature: Signature,
    pub policy: PrivacyPolicy,
}

impl SchemaConfig {
    pub fn columns(&self) -> &[ColumnSchema] {
        self.signature.columns()
    }

    pub fn taxonomies(&self) -> impl Iterator<Item = &TaxonomyTree> {
        self.signature.taxonomies().values()
    }
}

/// Reads the `[[column]]`, `[[taxonomy]]` and `[policy]` sections of a
/// scenario document. Other sections are ignored.
pub fn load_schema(config_text: &str) -> Result<SchemaConfig, SchemaError> {
    let raw: RawConfig =
        toml::from_str(config_text).map_err(|e| SchemaError::Malformed(e.message().to_string()))?;
    if raw.column.is_empty() {
        return Err(SchemaError::EmptySchema);
    }

    let taxonomies = raw
        .taxonomy
        .into_iter()
        .map(|t| TaxonomyTree::new(t.name, t.root, t.parent))
        .collect::<Result<Vec<_>, _>>()?;

    let columns = raw
        .column
        .into_iter()
        .map(|c| {
            let normalizer = c
                .normalizer
                .map(|d| parse_fraction(&d).ok_or_else(|| SchemaError::BadNormalizer(c.name.clone())))
                .transpose()?;
            Ok(ColumnSchema {
                name: c.name,
                class: c.class,
                group: c.group,
                taxonomy: c.taxonomy,
                normalizer,
            })
        })
        .collect::<Result<Vec<_>, SchemaError>>()?;

    let signature = Signature::new(columns, taxonomies)?;
    let patterns = raw
        .policy
        .map(|p| p.deny)
        .unwrap_or_default()
        .iter()
        .map(|cells| parse_pattern_cells(&signature, cells).map(TuplePattern::negative))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SchemaConfig {
        signature,
        policy: PrivacyPolicy::new(patterns)?,
    })
}

/// Reads one cell list (`"*"` is the wildcard) against the signature.
pub fn parse_pattern_cells(
    sig: &Signature,
    cells: &[impl AsRef<str>],
) -> Result<Vec<Cell>, SchemaError> {
    if cells.len() != sig.arity() {
        return Err(SchemaError::Arity {
            line: "pattern".into(),
            expected: sig.arity(),
            found: cells.len(),
        });
    }
    cells
        .iter()
        .zip(sig.columns())
        .map(|(text, col)| {
            let text = text.as_ref().trim();
            if text == "*" || text == "⋆" {
                Ok(Cell::Any)
            } else {
                Value::parse_cell(text, col, sig.taxonomies()).map(Cell::Is)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::fixtures;

    #[test]
    fn hospital_config() {
        let cfg = load_schema(fixtures::CONFIG).unwrap();
        assert_eq!(cfg.columns().len(), 5);
        let tree = cfg.signature.taxonomy("Ailment").unwrap();
        assert_eq!(tree.root(), "Ailment");
        let mut kids: Vec<_> = tree.children("Ailment").collect();
        kids.sort();
        assert_eq!(kids, ["Cancer", "Heart-Disease", "Viral-Infection"]);
        let mut viral: Vec<_> = tree.children("Viral-Infection").collect();
        viral.sort();
        assert_eq!(viral, ["CoVid", "Flu"]);
        assert_eq!(cfg.policy.patterns[0].to_string(), "¬(John, *, *, *, CoVid)");
        assert_eq!(cfg.columns()[4].group, ColumnGroup::Sensitive);
    }

    #[test]
    fn empty_columns() {
        assert_eq!(load_schema("").unwrap_err(), SchemaError::EmptySchema);
    }

    #[test]
    fn taxoral_without_taxonomy() {
        let text = r#"
[[column]]
name = "A"
class = "taxoral"
group = "sensitive"
"#;
        assert!(matches!(load_schema(text), Err(SchemaError::MissingTaxonomy(_))));
    }

    #[test]
    fn looping_taxonomy() {
        let text = r#"
[[column]]
name = "A"
class = "taxoral"
group = "sensitive"
taxonomy = "T"

[[taxonomy]]
name = "T"
root = "r"
[taxonomy.parent]
a = "b"
b = "c"
c = "a"
"#;
        assert!(matches!(load_schema(text), Err(SchemaError::TaxonomyCycle { .. })));
    }

    #[test]
    fn normalizer_only_on_numerical() {
        let text = r#"
[[column]]
name = "A"
class = "nominal"
group = "sensitive"
normalizer = "10"
"#;
        assert!(matches!(load_schema(text), Err(SchemaError::BadNormalizer(_))));
        let text = r#"
[[column]]
name = "A"
class = "numerical"
group = "sensitive"
normalizer = "0"
"#;
        assert!(matches!(load_schema(text), Err(SchemaError::BadNormalizer(_))));
    }
}
