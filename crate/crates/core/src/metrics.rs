//! Per-class distances, the column-wise vector `d`, its sum `d̄`, the set
//! distance `ρ` and the partial Hamming distance `d_h`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use crate::scalar::{format_fraction, Scalar};
use crate::schema::{
    type_compatible, ColumnClass, ColumnSchema, Correspondence, Signature, TaxonomyTree, Tuple,
    Value,
};
use crate::Rational;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("set distance needs nonempty operands")]
    EmptySet,
    #[error("'{node}' is not a node of taxonomy '{taxonomy}'")]
    UnknownNode { taxonomy: String, node: String },
    #[error("unknown taxonomy '{0}'")]
    UnknownTaxonomy(String),
    #[error("column '{0}' has no normalizer")]
    MissingNormalizer(String),
    #[error("normalizer must be positive, got {0}")]
    BadNormalizer(String),
    #[error("|x - x'| = {diff} exceeds the normalizer {normalizer}")]
    OutOfRange { diff: String, normalizer: String },
    #[error("cannot compare {left} with {right}")]
    ClassMismatch { left: String, right: String },
    #[error("tuples are uncomparable")]
    Uncomparable,
}

/// How integer intervals are measured by `d_num`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalMeasureMode {
    /// Jaccard distance over the integer points of the closed intervals.
    #[default]
    IntegerSet,
    /// Shared integer points over the real length of the union.
    PaperCompat,
}

impl fmt::Display for IntervalMeasureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntervalMeasureMode::IntegerSet => "integer-set",
            IntervalMeasureMode::PaperCompat => "paper-compat",
        })
    }
}

impl FromStr for IntervalMeasureMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "integer-set" => Ok(IntervalMeasureMode::IntegerSet),
            "paper-compat" => Ok(IntervalMeasureMode::PaperCompat),
            other => Err(format!(
                "unknown interval mode '{other}' (expected integer-set or paper-compat)"
            )),
        }
    }
}

/// `|v Δ v'| / |v ∪ v'|`.
pub fn d_nom<S: Scalar>(a: &BTreeSet<String>, b: &BTreeSet<String>) -> Result<S, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let union = a.union(b).count();
    let sym = a.symmetric_difference(b).count();
    Ok(S::from_usize(sym) / S::from_usize(union))
}

/// Interval distance. Numbers with a fractional part are single points that
/// no interval contains.
pub fn d_num<S: Scalar>(a: &Value, b: &Value, mode: IntervalMeasureMode) -> Result<S, MetricError> {
    let (Some((lo1, hi1)), Some((lo2, hi2))) = (a.as_interval(), b.as_interval()) else {
        return match (a, b) {
            (Value::Number(x), Value::Number(y)) => Ok(if x == y { S::zero() } else { S::one() }),
            (Value::Number(_) | Value::IntInterval { .. }, Value::Number(_) | Value::IntInterval { .. }) => {
                Ok(S::one())
            }
            _ => Err(MetricError::ClassMismatch {
                left: a.to_string(),
                right: b.to_string(),
            }),
        };
    };
    if (lo1, hi1) == (lo2, hi2) {
        return Ok(S::zero());
    }
    let (lo1, hi1, lo2, hi2) = (lo1 as i128, hi1 as i128, lo2 as i128, hi2 as i128);
    let shared = (hi1.min(hi2) - lo1.max(lo2) + 1).max(0);
    if shared == 0 {
        return Ok(S::one());
    }
    let ratio = match mode {
        IntervalMeasureMode::IntegerSet => {
            let union = (hi1 - lo1 + 1) + (hi2 - lo2 + 1) - shared;
            Rational::new(shared.into(), union.into())
        }
        IntervalMeasureMode::PaperCompat => {
            let overlap = (hi1.min(hi2) - lo1.max(lo2)).max(0);
            let length = (hi1 - lo1) + (hi2 - lo2) - overlap;
            // a longer shared stretch can outnumber the length; clamp at 0
            Rational::new(shared.min(length).into(), length.into())
        }
    };
    Ok(S::one() - S::from_rational(&ratio))
}

/// `|x - x'| / D`.
pub fn d_eucl<S: Scalar>(x: &Rational, y: &Rational, d: &Rational) -> Result<S, MetricError> {
    if *d <= Rational::from_integer(0.into()) {
        return Err(MetricError::BadNormalizer(format_fraction(d)));
    }
    let diff = if x > y { x - y } else { y - x };
    if diff > *d {
        return Err(MetricError::OutOfRange {
            diff: format_fraction(&diff),
            normalizer: format_fraction(d),
        });
    }
    let (x, y, d) = (S::from_rational(x), S::from_rational(y), S::from_rational(d));
    Ok((x - y).abs() / d)
}

/// `1 - 2 c_xy / (c_x + c_y)` with depths counted in nodes from the root.
pub fn d_wp<S: Scalar>(tree: &TaxonomyTree, x: &str, y: &str) -> Result<S, MetricError> {
    let depth = |n: &str| {
        tree.depth(n).ok_or_else(|| MetricError::UnknownNode {
            taxonomy: tree.name().to_string(),
            node: n.to_string(),
        })
    };
    let (cx, cy) = (depth(x)?, depth(y)?);
    let cxy = tree.common_depth(x, y).expect("both nodes are in the tree");
    Ok(S::one() - S::from_usize(2 * cxy) / S::from_usize(cx + cy))
}

/// What the column-wise dispatch needs besides the tuples.
#[derive(Clone, Copy, Debug)]
pub struct MetricContext<'a> {
    pub taxonomies: &'a BTreeMap<String, TaxonomyTree>,
    pub mode: IntervalMeasureMode,
}

impl<'a> MetricContext<'a> {
    pub fn new(sig: &'a Signature, mode: IntervalMeasureMode) -> Self {
        MetricContext {
            taxonomies: sig.taxonomies(),
            mode,
        }
    }

    /// Distance between two cells, dispatched on the left column's class.
    pub fn column_distance<S: Scalar>(
        &self,
        lcol: &ColumnSchema,
        a: &Value,
        rcol: &ColumnSchema,
        b: &Value,
    ) -> Result<S, MetricError> {
        let mismatch = || MetricError::ClassMismatch {
            left: format!("{a} ({})", lcol.class),
            right: format!("{b} ({})", rcol.class),
        };
        if lcol.kind() != rcol.kind() {
            return Err(mismatch());
        }
        match lcol.class {
            ColumnClass::Nominal => {
                let (x, y) = a.as_atom_set().zip(b.as_atom_set()).ok_or_else(mismatch)?;
                d_nom(&x, &y)
            }
            ColumnClass::Numerval => d_num(a, b, self.mode),
            ColumnClass::Numerical => {
                let (Value::Number(x), Value::Number(y)) = (a, b) else {
                    return Err(mismatch());
                };
                let d = match (&lcol.normalizer, &rcol.normalizer) {
                    (Some(l), Some(r)) => l.max(r),
                    (Some(d), None) | (None, Some(d)) => d,
                    (None, None) => return Err(MetricError::MissingNormalizer(lcol.name.clone())),
                };
                d_eucl(x, y, d)
            }
            ColumnClass::Taxoral => {
                let (Value::Taxon(x), Value::Taxon(y)) = (a, b) else {
                    return Err(mismatch());
                };
                let name = lcol.taxonomy.as_deref().unwrap_or_default();
                let tree = self
                    .taxonomies
                    .get(name)
                    .ok_or_else(|| MetricError::UnknownTaxonomy(name.to_string()))?;
                d_wp(tree, x, y)
            }
        }
    }

    /// The vector `d(t, t')`, one entry per corresponding column pair.
    pub fn d_vector<S: Scalar>(
        &self,
        t: &Tuple,
        u: &Tuple,
        corr: &Correspondence,
    ) -> Result<Vec<S>, MetricError> {
        corr.pairs
            .iter()
            .map(|&(i, j)| {
                let (Some(lc), Some(rc)) = (t.columns.get(i), u.columns.get(j)) else {
                    return Err(MetricError::Uncomparable);
                };
                self.column_distance(lc, &t.values[i], rc, &u.values[j])
            })
            .collect()
    }

    /// `d̄(t, t')`, the sum of [`Self::d_vector`].
    pub fn d_bar<S: Scalar>(
        &self,
        t: &Tuple,
        u: &Tuple,
        corr: &Correspondence,
    ) -> Result<S, MetricError> {
        Ok(self
            .d_vector::<S>(t, u, corr)?
            .into_iter()
            .fold(S::zero(), |acc, x| acc + x))
    }

    /// `d̄` with the correspondence worked out; `None` when uncomparable.
    pub fn distance<S: Scalar>(&self, t: &Tuple, u: &Tuple) -> Result<Option<S>, MetricError> {
        match type_compatible(t, u) {
            Some(corr) => self.d_bar(t, u, &corr).map(Some),
            None => Ok(None),
        }
    }

    /// `ρ(S, S')`: the least `d̄` over comparable pairs, `None` if there are none.
    pub fn rho<S: Scalar>(&self, left: &[Tuple], right: &[Tuple]) -> Result<Option<S>, MetricError> {
        let mut best: Option<S> = None;
        for t in left {
            for u in right {
                if let Some(d) = self.distance::<S>(t, u)? {
                    best = Some(match best {
                        Some(b) => S::min_of(b, d),
                        None => d,
                    });
                }
            }
        }
        Ok(best)
    }
}

/// Generalized Hamming distance: corresponding positions whose values differ.
/// `None` when the tuples are uncomparable.
pub fn hamming(t: &Tuple, u: &Tuple) -> Option<usize> {
    type_compatible(t, u).map(|c| hamming_with(t, u, &c))
}

pub fn hamming_with(t: &Tuple, u: &Tuple, corr: &Correspondence) -> usize {
    corr.pairs
        .iter()
        .filter(|&&(i, j)| t.values[i] != u.values[j])
        .count()
}
