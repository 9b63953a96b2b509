use std::fmt;

use super::{DataTable, Row, SchemaError, Signature, Tuple, Value};

/// A pattern cell: a concrete value or the wildcard `*`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cell {
    Any,
    Is(Value),
}

impl Cell {
    pub fn value(&self) -> Option<&Value> {
        match self {
            Cell::Any => None,
            Cell::Is(v) => Some(v),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

/// A signed tuple over the analysis signature, `*` where nothing is known.
///
/// Positive patterns are facts (`t`), negative ones denials (`¬t`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TuplePattern {
    pub polarity: Polarity,
    pub cells: Vec<Cell>,
}

impl TuplePattern {
    pub fn new(cells: Vec<Cell>, polarity: Polarity) -> Self {
        TuplePattern { polarity, cells }
    }

    pub fn positive(cells: Vec<Cell>) -> Self {
        Self::new(cells, Polarity::Positive)
    }

    pub fn negative(cells: Vec<Cell>) -> Self {
        Self::new(cells, Polarity::Negative)
    }

    /// Pattern of the given arity with every cell a wildcard.
    pub fn wildcard(arity: usize, polarity: Polarity) -> Self {
        Self::new(vec![Cell::Any; arity], polarity)
    }

    /// Lifts a table row into the signature, `*` in the columns the table lacks.
    pub fn from_row(sig: &Signature, table: &DataTable, row: &Row) -> Self {
        let mut cells = vec![Cell::Any; sig.arity()];
        for (col, value) in table.schema().iter().zip(&row.cells) {
            if let Some(i) = sig.index_of(&col.name) {
                cells[i] = Cell::Is(value.clone());
            }
        }
        Self::positive(cells)
    }

    pub fn arity(&self) -> usize {
        self.cells.len()
    }

    pub fn is_positive(&self) -> bool {
        self.polarity == Polarity::Positive
    }

    pub fn negated(&self) -> Self {
        let polarity = match self.polarity {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        };
        Self::new(self.cells.clone(), polarity)
    }

    pub fn bound(&self) -> impl Iterator<Item = (usize, &Value)> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.value().map(|v| (i, v)))
    }

    pub fn get(&self, i: usize) -> Option<&Value> {
        self.cells.get(i).and_then(Cell::value)
    }

    /// True iff every bound cell of `self` equals the tuple's cell.
    pub fn matches(&self, tuple: &[Value]) -> Result<bool, SchemaError> {
        if tuple.len() != self.arity() {
            return Err(SchemaError::Arity {
                line: format!("{self}"),
                expected: self.arity(),
                found: tuple.len(),
            });
        }
        Ok(self.bound().all(|(i, v)| &tuple[i] == v))
    }

    /// True iff `fact` pins down every cell this pattern pins, to the same value.
    pub fn covers(&self, fact: &TuplePattern) -> bool {
        self.arity() == fact.arity() && self.bound().all(|(i, v)| fact.get(i) == Some(v))
    }

    /// No column is bound to different values in the two patterns.
    pub fn unifiable(&self, other: &TuplePattern) -> bool {
        self.arity() == other.arity()
            && self
                .cells
                .iter()
                .zip(&other.cells)
                .all(|(a, b)| match (a, b) {
                    (Cell::Is(x), Cell::Is(y)) => x == y,
                    _ => true,
                })
    }

    /// Columns bound in both.
    pub fn shared_bound(&self, other: &TuplePattern) -> usize {
        self.cells
            .iter()
            .zip(&other.cells)
            .filter(|(a, b)| matches!((a, b), (Cell::Is(_), Cell::Is(_))))
            .count()
    }

    /// Cell-wise union of two unifiable patterns, keeping `self`'s polarity.
    pub fn merge(&self, other: &TuplePattern) -> TuplePattern {
        let cells = self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| match a {
                Cell::Is(_) => a.clone(),
                Cell::Any => b.clone(),
            })
            .collect();
        TuplePattern::new(cells, self.polarity)
    }

    pub fn with_cell(&self, i: usize, value: Value) -> TuplePattern {
        let mut out = self.clone();
        out.cells[i] = Cell::Is(value);
        out
    }

    /// Projection onto the bound columns, typed by the signature.
    pub fn to_tuple(&self, sig: &Signature) -> Tuple {
        let mut columns = Vec::new();
        let mut values = Vec::new();
        for (i, v) in self.bound() {
            columns.push(sig.columns()[i].clone());
            values.push(v.clone());
        }
        Tuple::new(columns, values)
    }
}

impl fmt::Display for TuplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.polarity == Polarity::Negative {
            f.write_str("¬")?;
        }
        f.write_str("(")?;
        for (i, c) in self.cells.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match c {
                Cell::Any => f.write_str("*")?,
                Cell::Is(v) => write!(f, "{v}")?,
            }
        }
        f.write_str(")")
    }
}

/// `match_pattern(t, p)`: arity-checked match, polarity ignored.
pub fn match_pattern(tuple: &[Value], pattern: &TuplePattern) -> Result<bool, SchemaError> {
    pattern.matches(tuple)
}

/// The denials `¬p` whose matching tuples must stay underivable.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PrivacyPolicy {
    pub patterns: Vec<TuplePattern>,
}

impl PrivacyPolicy {
    pub fn new(patterns: Vec<TuplePattern>) -> Result<Self, SchemaError> {
        if let Some(p) = patterns.iter().find(|p| p.is_positive()) {
            return Err(SchemaError::Malformed(format!(
                "policy pattern {p} must be negative"
            )));
        }
        Ok(PrivacyPolicy { patterns })
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Rows of `table` (lifted into the signature) some denial matches: the
    /// protected tuples `P_A(D)`.
    pub fn protected_rows<'a>(&self, sig: &Signature, table: &'a DataTable) -> Vec<&'a Row> {
        table
            .rows()
            .iter()
            .filter(|row| {
                let lifted = TuplePattern::from_row(sig, table, row);
                self.patterns.iter().any(|p| p.covers(&lifted))
            })
            .collect()
    }
}
