use super::{ColumnClass, Tuple, Value};

/// What must agree for two columns to be compared: the class, and for
/// taxoral columns the taxonomy.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ColumnKind {
    pub class: ColumnClass,
    pub taxonomy: Option<String>,
}

/// Position pairs `(i, j)`: column `i` of the left tuple is compared with
/// column `j` of the right one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Correspondence {
    pub pairs: Vec<(usize, usize)>,
}

impl Correspondence {
    pub fn identity(n: usize) -> Self {
        Correspondence {
            pairs: (0..n).map(|i| (i, i)).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.pairs.iter().enumerate().all(|(k, &(i, j))| i == k && j == k)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn flipped(&self) -> Self {
        Correspondence {
            pairs: self.pairs.iter().map(|&(i, j)| (j, i)).collect(),
        }
    }
}

/// Finds how two typed tuples line up, or `None` when they are
/// uncomparable.
///
/// Same-named columns are matched first when every column of the shorter
/// tuple has a same-kind namesake in the longer one. Otherwise equal-length
/// tuples must agree kind-by-kind, and a longer tuple is projected onto the
/// leftmost order-preserving sub-tuple whose kinds match the shorter one.
pub fn type_compatible(left: &Tuple, right: &Tuple) -> Option<Correspondence> {
    if let Some(c) = by_name(left, right) {
        return Some(c);
    }
    let lk: Vec<_> = left.columns.iter().map(|c| c.kind()).collect();
    let rk: Vec<_> = right.columns.iter().map(|c| c.kind()).collect();
    by_kind(&lk, &rk)
}

/// [`type_compatible`] for bare values, kinds taken from the values.
pub fn type_compatible_values(left: &[Value], right: &[Value]) -> Option<Correspondence> {
    let lk: Vec<_> = left.iter().map(Value::class).collect();
    let rk: Vec<_> = right.iter().map(Value::class).collect();
    by_kind(&lk, &rk)
}

fn by_name(left: &Tuple, right: &Tuple) -> Option<Correspondence> {
    let (short, long, swapped) = if left.len() <= right.len() {
        (left, right, false)
    } else {
        (right, left, true)
    };
    if short.is_empty() {
        return None;
    }
    let mut pairs = Vec::with_capacity(short.len());
    for (i, col) in short.columns.iter().enumerate() {
        let j = long.columns.iter().position(|c| c.name == col.name)?;
        if long.columns[j].kind() != col.kind() {
            return None;
        }
        pairs.push((i, j));
    }
    let c = Correspondence { pairs };
    Some(if swapped { c.flipped() } else { c })
}

fn by_kind<K: PartialEq>(left: &[K], right: &[K]) -> Option<Correspondence> {
    if left.is_empty() || right.is_empty() {
        return None;
    }
    if left.len() == right.len() {
        return (left == right).then(|| Correspondence::identity(left.len()));
    }
    let (short, long, swapped) = if left.len() < right.len() {
        (left, right, false)
    } else {
        (right, left, true)
    };
    let mut pairs = Vec::with_capacity(short.len());
    let mut j = 0;
    for (i, k) in short.iter().enumerate() {
        while j < long.len() && &long[j] != k {
            j += 1;
        }
        if j == long.len() {
            return None;
        }
        pairs.push((i, j));
        j += 1;
    }
    let c = Correspondence { pairs };
    Some(if swapped { c.flipped() } else { c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::fixtures;

    fn iv(lo: i64, hi: i64) -> Value {
        Value::interval(lo, hi).unwrap()
    }

    #[test]
    fn mixed_value_tuples() {
        let a = [iv(1, 2), Value::atom("a")];
        let b = [iv(2, 3), Value::atom("b")];
        let c = [Value::atom("bd"), Value::atom("a")];
        assert!(type_compatible_values(&a, &b).unwrap().is_identity());
        assert_eq!(type_compatible_values(&c, &b), None);
        assert!(type_compatible_values(&a, &a).unwrap().is_identity());
    }

    #[test]
    fn projection_onto_shorter() {
        let short = [Value::atom("M"), Value::taxon("Flu")];
        let long = [iv(1, 2), Value::atom("M"), Value::atom("x"), Value::taxon("Flu")];
        let c = type_compatible_values(&short, &long).unwrap();
        assert_eq!(c.pairs, vec![(0, 1), (1, 3)]);
        assert_eq!(type_compatible_values(&long, &short).unwrap(), c.flipped());
    }

    #[test]
    fn named_columns_line_up() {
        let (sig, _) = fixtures::signature();
        let published = fixtures::published(&sig);
        let secret = fixtures::secret(&sig);
        let l5 = published.tuple_by_line("l5").unwrap();
        let john = secret.tuple_by_line("l5").unwrap();
        let c = type_compatible(&l5, &john).unwrap();
        assert_eq!(c.pairs, vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert_eq!(type_compatible(&john, &l5).unwrap(), c.flipped());
    }
}
