//! Database model: column classes, typed values, tables, taxonomies,
//! tuple patterns and privacy policies.

mod compat;
mod config;
mod pattern;
mod table;
mod taxonomy;
mod value;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

pub use compat::{type_compatible, type_compatible_values, ColumnKind, Correspondence};
pub use config::{load_schema, parse_pattern_cells, SchemaConfig};
pub use pattern::{match_pattern, Cell, Polarity, PrivacyPolicy, TuplePattern};
pub use table::{load_table, DataTable, Row, Tuple};
pub use taxonomy::TaxonomyTree;
pub use value::Value;

use crate::Rational;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("schema has no columns")]
    EmptySchema,
    #[error("duplicate column '{0}'")]
    DuplicateColumn(String),
    #[error("taxoral column '{0}' has no taxonomy")]
    MissingTaxonomy(String),
    #[error("column '{0}' is not taxoral but names a taxonomy")]
    UnexpectedTaxonomy(String),
    #[error("unknown taxonomy '{0}'")]
    UnknownTaxonomy(String),
    #[error("taxonomy '{taxonomy}' has a cycle through '{node}'")]
    TaxonomyCycle { taxonomy: String, node: String },
    #[error("taxonomy '{taxonomy}': {reason}")]
    Taxonomy { taxonomy: String, reason: String },
    #[error("'{node}' is not a node of taxonomy '{taxonomy}'")]
    UnknownTaxon { taxonomy: String, node: String },
    #[error("column '{0}': normalizer must be positive and only on numerical columns")]
    BadNormalizer(String),
    #[error("column '{column}': normalizer {normalizer} is below the observed spread {spread}")]
    NormalizerTooSmall {
        column: String,
        normalizer: String,
        spread: String,
    },
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("line {line}: expected {expected} cells, found {found}")]
    Arity {
        line: String,
        expected: usize,
        found: usize,
    },
    #[error("column '{column}': cannot parse '{text}': {reason}")]
    BadCell {
        column: String,
        text: String,
        reason: String,
    },
    #[error("value {value} does not fit column '{column}'")]
    ClassMismatch { column: String, value: String },
    #[error("duplicate line id '{0}'")]
    DuplicateLine(String),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnClass {
    /// Literal atoms not in a taxonomy, or finite sets of them.
    Nominal,
    /// Integers or bounded integer intervals.
    Numerval,
    /// Single numbers.
    Numerical,
    /// Nodes of a taxonomy tree.
    Taxoral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnGroup {
    Identifier,
    QuasiIdentifier,
    Sensitive,
}

impl fmt::Display for ColumnClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnClass::Nominal => "nominal",
            ColumnClass::Numerval => "numerval",
            ColumnClass::Numerical => "numerical",
            ColumnClass::Taxoral => "taxoral",
        })
    }
}

impl FromStr for ColumnClass {
    type Err = SchemaError;
    fn from_str(s: &str) -> Result<Self, SchemaError> {
        match s.to_ascii_lowercase().as_str() {
            "nominal" => Ok(ColumnClass::Nominal),
            "numerval" => Ok(ColumnClass::Numerval),
            "numerical" => Ok(ColumnClass::Numerical),
            "taxoral" => Ok(ColumnClass::Taxoral),
            other => Err(SchemaError::Malformed(format!("unknown column class '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnSchema {
    pub name: String,
    pub class: ColumnClass,
    pub group: ColumnGroup,
    /// Required iff `class == Taxoral`.
    pub taxonomy: Option<String>,
    /// `D` of the normalized euclidean distance; numerical columns only.
    pub normalizer: Option<Rational>,
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, class: ColumnClass, group: ColumnGroup) -> Self {
        ColumnSchema {
            name: name.into(),
            class,
            group,
            taxonomy: None,
            normalizer: None,
        }
    }

    pub fn with_taxonomy(mut self, taxonomy: impl Into<String>) -> Self {
        self.taxonomy = Some(taxonomy.into());
        self
    }

    pub fn with_normalizer(mut self, d: Rational) -> Self {
        self.normalizer = Some(d);
        self
    }

    pub fn kind(&self) -> ColumnKind {
        ColumnKind {
            class: self.class,
            taxonomy: self.taxonomy.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        match (self.class, &self.taxonomy) {
            (ColumnClass::Taxoral, None) => {
                return Err(SchemaError::MissingTaxonomy(self.name.clone()))
            }
            (c, Some(_)) if c != ColumnClass::Taxoral => {
                return Err(SchemaError::UnexpectedTaxonomy(self.name.clone()))
            }
            _ => {}
        }
        if let Some(d) = &self.normalizer {
            if self.class != ColumnClass::Numerical || *d <= Rational::from_integer(0.into()) {
                return Err(SchemaError::BadNormalizer(self.name.clone()));
            }
        }
        Ok(())
    }
}

/// The analysis signature: every column any table of a scenario may use,
/// plus the taxonomies those columns refer to.
#[derive(Clone, Debug, PartialEq)]
pub struct Signature {
    columns: Vec<ColumnSchema>,
    taxonomies: BTreeMap<String, TaxonomyTree>,
}

impl Signature {
    pub fn new(
        columns: Vec<ColumnSchema>,
        taxonomies: impl IntoIterator<Item = TaxonomyTree>,
    ) -> Result<Self, SchemaError> {
        if columns.is_empty() {
            return Err(SchemaError::EmptySchema);
        }
        let taxonomies: BTreeMap<String, TaxonomyTree> = taxonomies
            .into_iter()
            .map(|t| (t.name().to_string(), t))
            .collect();
        for (i, c) in columns.iter().enumerate() {
            c.validate()?;
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(SchemaError::DuplicateColumn(c.name.clone()));
            }
            if let Some(t) = &c.taxonomy {
                if !taxonomies.contains_key(t) {
                    return Err(SchemaError::UnknownTaxonomy(t.clone()));
                }
            }
        }
        Ok(Signature {
            columns,
            taxonomies,
        })
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSchema> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn taxonomies(&self) -> &BTreeMap<String, TaxonomyTree> {
        &self.taxonomies
    }

    pub fn taxonomy(&self, name: &str) -> Option<&TaxonomyTree> {
        self.taxonomies.get(name)
    }

    /// Taxonomy of a taxoral column, by column index.
    pub fn taxonomy_of(&self, column: usize) -> Option<&TaxonomyTree> {
        self.columns[column]
            .taxonomy
            .as_deref()
            .and_then(|t| self.taxonomies.get(t))
    }

    pub fn identifier_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.group == ColumnGroup::Identifier)
            .map(|(i, _)| i)
    }

    /// Fills in missing numerical normalizers from the spread observed in
    /// `tables` (1 when the spread is 0) and checks configured ones cover it.
    pub fn settle_normalizers<'a>(
        &mut self,
        tables: impl IntoIterator<Item = &'a DataTable> + Clone,
    ) -> Result<(), SchemaError> {
        for col in self.columns.iter_mut() {
            if col.class != ColumnClass::Numerical {
                continue;
            }
            let mut lo: Option<Rational> = None;
            let mut hi: Option<Rational> = None;
            for table in tables.clone() {
                let Some(idx) = table.column_index(&col.name) else {
                    continue;
                };
                for row in table.rows() {
                    if let Value::Number(x) = &row.cells[idx] {
                        if lo.as_ref().is_none_or(|l| x < l) {
                            lo = Some(x.clone());
                        }
                        if hi.as_ref().is_none_or(|h| x > h) {
                            hi = Some(x.clone());
                        }
                    }
                }
            }
            let spread = match (lo, hi) {
                (Some(l), Some(h)) => h - l,
                _ => Rational::from_integer(0.into()),
            };
            match &col.normalizer {
                Some(d) if *d < spread => {
                    return Err(SchemaError::NormalizerTooSmall {
                        column: col.name.clone(),
                        normalizer: crate::scalar::format_fraction(d),
                        spread: crate::scalar::format_fraction(&spread),
                    })
                }
                Some(_) => {}
                None => {
                    col.normalizer = Some(if spread == Rational::from_integer(0.into()) {
                        Rational::from_integer(1.into())
                    } else {
                        spread
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    //! The hospital example used across unit tests.
    use super::*;

    pub const CONFIG: &str = r#"
[[column]]
name = "Name"
class = "nominal"
group = "identifier"

[[column]]
name = "Age"
class = "numerval"
group = "quasi-identifier"

[[column]]
name = "Gender"
class = "nominal"
group = "quasi-identifier"

[[column]]
name = "Dept"
class = "nominal"
group = "quasi-identifier"

[[column]]
name = "Ailment"
class = "taxoral"
group = "sensitive"
taxonomy = "Ailment"

[[taxonomy]]
name = "Ailment"
root = "Ailment"
[taxonomy.parent]
Heart-Disease = "Ailment"
Cancer = "Ailment"
Viral-Infection = "Ailment"
Flu = "Viral-Infection"
CoVid = "Viral-Infection"

[policy]
deny = [["John", "*", "*", "*", "CoVid"]]
"#;

    pub const SECRET: &str = "\
Name,Age,Gender,Dept,Ailment
Joan,24,F,Chemistry,Heart-Disease
Michel,46,M,Chemistry,Cancer
Aline,23,F,Physics,Flu
Harry,53,M,Maths,Flu
John,46,M,Physics,CoVid
";

    pub const PUBLISHED: &str = "\
Line,Age,Gender,Dept,Ailment
l1,[20-30],F,Chemistry,Heart-Disease
l2,[40-50],M,Chemistry,Cancer
l3,[20-30],F,Physics,Viral-Infection
l4,[50-60],M,Maths,Viral-Infection
l5,[40-50],M,Physics,Viral-Infection
";

    pub fn signature() -> (Signature, PrivacyPolicy) {
        let cfg = load_schema(CONFIG).unwrap();
        (cfg.signature, cfg.policy)
    }

    pub fn published(sig: &Signature) -> DataTable {
        load_table("published", PUBLISHED, sig, Some("Line")).unwrap()
    }

    pub fn secret(sig: &Signature) -> DataTable {
        load_table("secret", SECRET, sig, None).unwrap()
    }
}
