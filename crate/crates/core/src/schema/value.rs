use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{ColumnClass, ColumnSchema, SchemaError, TaxonomyTree};
use crate::scalar::parse_fraction;
use crate::Rational;

/// A single typed cell.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Atom(String),
    /// Nonempty, duplicate-free by construction.
    AtomSet(BTreeSet<String>),
    /// Closed integer interval `[lo, hi]`, `lo <= hi`.
    IntInterval { lo: i64, hi: i64 },
    Number(Rational),
    /// Node id in the taxonomy named by the owning column.
    Taxon(String),
}

impl Value {
    pub fn atom(s: impl Into<String>) -> Self {
        Value::Atom(s.into())
    }

    pub fn taxon(s: impl Into<String>) -> Self {
        Value::Taxon(s.into())
    }

    pub fn number(r: Rational) -> Self {
        Value::Number(r)
    }

    pub fn int(n: i64) -> Self {
        Value::Number(Rational::from_integer(n.into()))
    }

    pub fn interval(lo: i64, hi: i64) -> Result<Self, SchemaError> {
        if lo > hi {
            return Err(SchemaError::Malformed(format!(
                "interval [{lo}-{hi}] has lo > hi"
            )));
        }
        Ok(Value::IntInterval { lo, hi })
    }

    pub fn set<I, S>(items: I) -> Result<Self, SchemaError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = BTreeSet::new();
        for item in items {
            let item = item.into();
            if !set.insert(item.clone()) {
                return Err(SchemaError::Malformed(format!(
                    "duplicate element '{item}' in set value"
                )));
            }
        }
        if set.is_empty() {
            return Err(SchemaError::Malformed("empty set value".into()));
        }
        Ok(Value::AtomSet(set))
    }

    /// The column class a bare value belongs to when no column is known.
    pub fn class(&self) -> ColumnClass {
        match self {
            Value::Atom(_) | Value::AtomSet(_) => ColumnClass::Nominal,
            Value::IntInterval { .. } => ColumnClass::Numerval,
            Value::Number(_) => ColumnClass::Numerical,
            Value::Taxon(_) => ColumnClass::Taxoral,
        }
    }

    /// Whether this value may be stored under a column of `class`.
    pub fn fits(&self, class: ColumnClass) -> bool {
        matches!(
            (class, self),
            (ColumnClass::Nominal, Value::Atom(_) | Value::AtomSet(_))
                | (ColumnClass::Numerval, Value::Number(_) | Value::IntInterval { .. })
                | (ColumnClass::Numerical, Value::Number(_))
                | (ColumnClass::Taxoral, Value::Taxon(_))
        )
    }

    /// Atoms seen as singleton sets.
    pub fn as_atom_set(&self) -> Option<BTreeSet<String>> {
        match self {
            Value::Atom(a) => Some(BTreeSet::from([a.clone()])),
            Value::AtomSet(s) => Some(s.clone()),
            _ => None,
        }
    }

    /// Intervals as-is, integral numbers as degenerate intervals.
    pub fn as_interval(&self) -> Option<(i64, i64)> {
        match self {
            Value::IntInterval { lo, hi } => Some((*lo, *hi)),
            Value::Number(r) if r.is_integer() => {
                let n: i64 = r.to_integer().try_into().ok()?;
                Some((n, n))
            }
            _ => None,
        }
    }

    /// Parses one table cell under `column`.
    ///
    /// `[lo-hi]` (or `[lo, hi]`) is an interval, `{a,b}` a set, anything
    /// else a bare token read according to the column class.
    pub fn parse_cell(
        text: &str,
        column: &ColumnSchema,
        taxonomies: &BTreeMap<String, TaxonomyTree>,
    ) -> Result<Self, SchemaError> {
        let text = text.trim();
        let bad = |reason: &str| SchemaError::BadCell {
            column: column.name.clone(),
            text: text.to_string(),
            reason: reason.to_string(),
        };
        if text.is_empty() {
            return Err(bad("empty cell"));
        }
        match column.class {
            ColumnClass::Nominal => {
                if let Some(inner) = text.strip_prefix('{') {
                    let inner = inner.strip_suffix('}').ok_or_else(|| bad("unclosed set"))?;
                    let items: Vec<&str> = inner.split(',').map(str::trim).collect();
                    if items.iter().any(|s| s.is_empty()) {
                        return Err(bad("empty set element"));
                    }
                    Value::set(items).map_err(|e| bad(&e.to_string()))
                } else if text.starts_with('[') {
                    Err(bad("interval under a nominal column"))
                } else {
                    Ok(Value::Atom(text.to_string()))
                }
            }
            ColumnClass::Numerval => {
                if text.starts_with('[') {
                    let (lo, hi) = parse_interval(text).ok_or_else(|| bad("malformed interval"))?;
                    Value::interval(lo, hi).map_err(|e| bad(&e.to_string()))
                } else {
                    let r = parse_fraction(text).ok_or_else(|| bad("not a number"))?;
                    if r.is_integer() {
                        let n: i64 = r
                            .to_integer()
                            .try_into()
                            .map_err(|_| bad("integer out of range"))?;
                        Ok(Value::IntInterval { lo: n, hi: n })
                    } else {
                        Ok(Value::Number(r))
                    }
                }
            }
            ColumnClass::Numerical => parse_fraction(text)
                .map(Value::Number)
                .ok_or_else(|| bad("not a number")),
            ColumnClass::Taxoral => {
                let tree_name = column
                    .taxonomy
                    .as_deref()
                    .ok_or_else(|| SchemaError::MissingTaxonomy(column.name.clone()))?;
                let tree = taxonomies
                    .get(tree_name)
                    .ok_or_else(|| SchemaError::UnknownTaxonomy(tree_name.to_string()))?;
                if tree.contains(text) {
                    Ok(Value::Taxon(text.to_string()))
                } else {
                    Err(SchemaError::UnknownTaxon {
                        taxonomy: tree_name.to_string(),
                        node: text.to_string(),
                    })
                }
            }
        }
    }
}

/// Accepts `[40-50]`, `[40, 50]`, `[-5--1]` and the half-open spelling
/// `[30, 40[` (read as closed).
fn parse_interval(text: &str) -> Option<(i64, i64)> {
    let inner = text.strip_prefix('[')?;
    let inner = inner
        .strip_suffix(']')
        .or_else(|| inner.strip_suffix('['))?
        .trim();
    if let Some((lo, hi)) = inner.split_once(',') {
        return Some((lo.trim().parse().ok()?, hi.trim().parse().ok()?));
    }
    // separator is the first '-' that follows a digit
    let bytes = inner.as_bytes();
    let split = (1..bytes.len()).find(|&i| bytes[i] == b'-' && bytes[i - 1].is_ascii_digit())?;
    let lo = inner[..split].trim().parse().ok()?;
    let hi = inner[split + 1..].trim().parse().ok()?;
    Some((lo, hi))
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Atom(a) | Value::Taxon(a) => f.write_str(a),
            Value::AtomSet(s) => {
                let items: Vec<&str> = s.iter().map(String::as_str).collect();
                write!(f, "{{{}}}", items.join(","))
            }
            Value::IntInterval { lo, hi } if lo == hi => write!(f, "{lo}"),
            Value::IntInterval { lo, hi } => write!(f, "[{lo}-{hi}]"),
            Value::Number(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Value::Number(r) => write!(f, "{}/{}", r.numer(), r.denom()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::ColumnGroup;

    fn col(class: ColumnClass) -> ColumnSchema {
        ColumnSchema::new("c", class, ColumnGroup::QuasiIdentifier)
    }

    #[test]
    fn interval_spellings() {
        assert_eq!(parse_interval("[50-60]"), Some((50, 60)));
        assert_eq!(parse_interval("[30, 40]"), Some((30, 40)));
        assert_eq!(parse_interval("[30, 40["), Some((30, 40)));
        assert_eq!(parse_interval("[-5--1]"), Some((-5, -1)));
        assert_eq!(parse_interval("[5]"), None);
    }

    #[test]
    fn numerval_single_number_is_degenerate_interval() {
        let v = Value::parse_cell("24", &col(ColumnClass::Numerval), &BTreeMap::new()).unwrap();
        assert_eq!(v, Value::IntInterval { lo: 24, hi: 24 });
        assert_eq!(v.to_string(), "24");
    }

    #[test]
    fn nominal_cells() {
        let none = BTreeMap::new();
        let c = col(ColumnClass::Nominal);
        assert_eq!(Value::parse_cell("CoVid", &c, &none).unwrap(), Value::atom("CoVid"));
        assert_eq!(
            Value::parse_cell("{b, a}", &c, &none).unwrap(),
            Value::set(["a", "b"]).unwrap()
        );
        assert!(Value::parse_cell("{a,a}", &c, &none).is_err());
        assert!(Value::parse_cell("{}", &c, &none).is_err());
        assert!(Value::parse_cell("[1-2]", &c, &none).is_err());
    }

    #[test]
    fn reversed_interval_rejected() {
        assert!(Value::parse_cell("[60-50]", &col(ColumnClass::Numerval), &BTreeMap::new()).is_err());
        assert!(Value::interval(3, 2).is_err());
    }

    #[test]
    fn class_fit() {
        assert!(Value::int(3).fits(ColumnClass::Numerval));
        assert!(Value::int(3).fits(ColumnClass::Numerical));
        assert!(!Value::interval(1, 2).unwrap().fits(ColumnClass::Numerical));
        assert!(!Value::atom("x").fits(ColumnClass::Taxoral));
    }
}
