use std::cmp::Ordering;

use crate::scalar::Scalar;

/// Multiset extension of `>` on a total order: compare both sides sorted
/// in descending order, lexicographically, a proper prefix being smaller.
///
/// Over a total base order this coincides with the Dershowitz-Manna
/// ordering, and `Equal` means the multisets are identical.
pub fn multiset_compare<S: Scalar>(left: &[S], right: &[S]) -> Ordering {
    let desc = |xs: &[S]| {
        let mut v = xs.to_vec();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
        v
    };
    let (a, b) = (desc(left), desc(right));
    for (x, y) in a.iter().zip(&b) {
        match x.partial_cmp(y).unwrap_or(Ordering::Equal) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn examples() {
        assert_eq!(
            multiset_compare(&[r(2, 3), r(1, 3)], &[r(1, 2), r(1, 2)]),
            Ordering::Greater
        );
        assert_eq!(multiset_compare(&[r(1, 2), r(1, 2)], &[r(1, 3), r(2, 3)]), Ordering::Less);
        assert_eq!(multiset_compare(&[r(1, 5)], &[r(1, 5)]), Ordering::Equal);
        assert_eq!(
            multiset_compare(&[r(1, 4), r(3, 4)], &[r(3, 4), r(1, 4)]),
            Ordering::Equal
        );
        assert_eq!(multiset_compare::<Rational>(&[], &[]), Ordering::Equal);
        assert_eq!(multiset_compare(&[r(1, 2), r(1, 9)], &[r(1, 2)]), Ordering::Greater);
    }
}
