//! Numeric scalars the analyses are generic over.
//!
//! Everything that reproduces published numbers runs on [`Rational`]
//! (arbitrary precision, exact). The float impls exist for quick
//! exploratory runs where exactness does not matter.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};

use crate::Rational;

/// Tolerance used when a float scalar is compared against an exact target.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

pub trait Scalar:
    num_traits::Num + Signed + Clone + Debug + PartialOrd + Send + Sync + 'static
{
    /// True for arbitrary-precision types where `==` is exact.
    const EXACT: bool;

    fn from_rational(r: &Rational) -> Self;

    fn to_f64(&self) -> f64;

    /// The exact value, for types that have one.
    fn to_rational(&self) -> Option<Rational>;

    /// Equality, exact for rationals and tolerance-based for floats.
    fn approx_eq(&self, other: &Self) -> bool;

    /// Canonical text form: `num/den` for rationals, shortest decimal for floats.
    fn render(&self) -> String;

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_rational(&Rational::new(BigInt::from(num), BigInt::from(den)))
    }

    fn from_usize(n: usize) -> Self {
        Self::from_rational(&Rational::from_integer(BigInt::from(n)))
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }

    fn to_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }

    fn approx_eq(&self, other: &Self) -> bool {
        self == other
    }

    fn render(&self) -> String {
        format_fraction(self)
    }
}

macro_rules! impl_float_scalar {
    ($f:ty) => {
        impl Scalar for $f {
            const EXACT: bool = false;

            fn from_rational(r: &Rational) -> Self {
                ratio_to_f64(r) as $f
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }

            fn to_rational(&self) -> Option<Rational> {
                None
            }

            fn approx_eq(&self, other: &Self) -> bool {
                ((*self as f64) - (*other as f64)).abs() <= FLOAT_TOLERANCE
            }

            fn render(&self) -> String {
                format!("{}", self)
            }
        }
    };
}

impl_float_scalar!(f32);
impl_float_scalar!(f64);

/// Converts a big rational to the nearest-ish f64 without overflowing on
/// large numerators and denominators.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() {
            return n / d;
        }
    }
    // scale both down so they fit
    let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
    let n = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

/// `num/den`, always with an explicit denominator.
pub fn format_fraction(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `n`, `n/d`, or a finite decimal like `0.75` into an exact rational.
pub fn parse_fraction(text: &str) -> Option<Rational> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let negative = int.trim_start().starts_with('-');
        let int_part: BigInt = if int.is_empty() || int == "-" {
            BigInt::zero()
        } else {
            int.parse().ok()?
        };
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_part: BigInt = frac.parse().ok()?;
        let magnitude = int_part.abs() * &scale + frac_part;
        let numer = if negative { -magnitude } else { magnitude };
        return Some(Rational::new(numer, scale));
    }
    let n: BigInt = text.parse().ok()?;
    Some(Rational::from_integer(n))
}

/// Exact rational from an f64 (binary expansion), `None` for NaN/inf.
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    BigRational::from_f64(x)
}
