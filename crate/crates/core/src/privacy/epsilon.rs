use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};

use crate::scalar::{format_fraction, parse_fraction, ratio_to_f64, FLOAT_TOLERANCE};
use crate::Rational;

/// A privacy budget: `scale · ln(ratio)` when it is known exactly, a plain
/// real otherwise, or no finite bound at all.
#[derive(Clone, Debug, PartialEq)]
pub enum Epsilon {
    Log { scale: Rational, ratio: Rational },
    Real(f64),
    Unbounded,
}

impl Epsilon {
    pub fn zero() -> Self {
        Epsilon::ln(Rational::one())
    }

    /// `ln(ratio)`.
    pub fn ln(ratio: Rational) -> Self {
        Epsilon::Log {
            scale: Rational::one(),
            ratio,
        }
    }

    pub fn scaled_ln(scale: Rational, ratio: Rational) -> Self {
        if ratio.is_one() || scale.is_zero() {
            return Epsilon::zero();
        }
        Epsilon::Log { scale, ratio }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Epsilon::Log { scale, ratio } => ratio_to_f64(scale) * ratio_to_f64(ratio).ln(),
            Epsilon::Real(x) => *x,
            Epsilon::Unbounded => f64::INFINITY,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, Epsilon::Unbounded)
    }

    /// `e^ε` as an exact rational, when ε is the log of one.
    pub fn exp_exact(&self) -> Option<&Rational> {
        match self {
            Epsilon::Log { scale, ratio } if scale.is_one() => Some(ratio),
            _ => None,
        }
    }

    /// `ln(a/b)`, `s*ln(a/b)`, or `None` when only a decimal is known.
    pub fn exact_text(&self) -> Option<String> {
        match self {
            Epsilon::Log { scale, ratio } if scale.is_one() => {
                Some(format!("ln({})", format_fraction(ratio)))
            }
            Epsilon::Log { scale, ratio } => Some(format!(
                "{}*ln({})",
                format_fraction(scale),
                format_fraction(ratio)
            )),
            Epsilon::Real(_) => None,
            Epsilon::Unbounded => Some("unbounded".into()),
        }
    }

    /// Twelve significant digits.
    pub fn decimal_text(&self) -> String {
        match self {
            Epsilon::Unbounded => "inf".into(),
            other => decimal12(other.to_f64()),
        }
    }

    /// Exact comparison when both sides are plain logs, tolerance otherwise.
    pub fn compare(&self, other: &Epsilon) -> Ordering {
        match (self, other) {
            (Epsilon::Unbounded, Epsilon::Unbounded) => Ordering::Equal,
            (Epsilon::Unbounded, _) => Ordering::Greater,
            (_, Epsilon::Unbounded) => Ordering::Less,
            _ => {
                if let (Some(a), Some(b)) = (self.exp_exact(), other.exp_exact()) {
                    return a.cmp(b);
                }
                let (a, b) = (self.to_f64(), other.to_f64());
                if (a - b).abs() <= FLOAT_TOLERANCE {
                    Ordering::Equal
                } else {
                    a.total_cmp(&b)
                }
            }
        }
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self, self.exact_text()) {
            (Epsilon::Unbounded, _) => f.write_str("unbounded"),
            (_, Some(exact)) => write!(f, "{exact} = {}", self.decimal_text()),
            (_, None) => f.write_str(&self.decimal_text()),
        }
    }
}

impl FromStr for Epsilon {
    type Err = String;

    /// Accepts `ln(2)`, `ln(2/1)`, `20/39*ln(2)`, `(20/39)ln(2)`, a fraction
    /// or decimal such as `0.6`, and `inf`.
    fn from_str(text: &str) -> Result<Self, String> {
        let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || format!("cannot read epsilon '{text}'");
        if matches!(t.as_str(), "inf" | "unbounded" | "∞") {
            return Ok(Epsilon::Unbounded);
        }
        if let Some(pos) = t.find("ln(") {
            let inner = t[pos + 3..].strip_suffix(')').ok_or_else(bad)?;
            let ratio = parse_fraction(inner).ok_or_else(bad)?;
            if ratio < Rational::one() {
                return Err(format!("epsilon '{text}' is negative"));
            }
            let head = t[..pos].trim_end_matches('*');
            let head = head
                .strip_prefix('(')
                .and_then(|h| h.strip_suffix(')'))
                .unwrap_or(head);
            let scale = if head.is_empty() {
                Rational::one()
            } else {
                parse_fraction(head).ok_or_else(bad)?
            };
            if scale < Rational::zero() {
                return Err(format!("epsilon '{text}' is negative"));
            }
            return Ok(Epsilon::scaled_ln(scale, ratio));
        }
        let x = parse_fraction(&t).ok_or_else(bad)?;
        if x < Rational::zero() {
            return Err(format!("epsilon '{text}' is negative"));
        }
        Ok(Epsilon::Real(ratio_to_f64(&x)))
    }
}

/// `x` with twelve significant digits, no exponent.
pub fn decimal12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (11 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Which inputs and outputs attain a reported ε.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub left: String,
    pub right: String,
    pub outputs: Vec<String>,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}) on {{{}}}", self.left, self.right, self.outputs.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonResult {
    pub epsilon: Epsilon,
    pub witness: Option<Witness>,
    /// Set when the only evidence had probability zero on both sides.
    pub both_zero: bool,
}

impl EpsilonResult {
    pub fn zero() -> Self {
        EpsilonResult {
            epsilon: Epsilon::zero(),
            witness: None,
            both_zero: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn text_forms() {
        let e = Epsilon::ln(r(2, 1));
        assert_eq!(e.exact_text().unwrap(), "ln(2/1)");
        assert_eq!(e.decimal_text(), "0.693147180560");
        assert_eq!(e.to_string(), "ln(2/1) = 0.693147180560");
        let s = Epsilon::scaled_ln(r(20, 39), r(2, 1));
        assert_eq!(s.exact_text().unwrap(), "20/39*ln(2/1)");
        assert!((s.to_f64() - 20.0 / 39.0 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(Epsilon::Real(0.6).to_string(), "0.600000000000");
        assert_eq!(decimal12(1234.5), "1234.50000000");
    }

    #[test]
    fn parse_round_trip() {
        for text in ["ln(2/1)", "20/39*ln(2/1)", "unbounded"] {
            let e: Epsilon = text.parse().unwrap();
            assert_eq!(e.exact_text().unwrap(), text);
        }
        assert_eq!("ln(3)".parse::<Epsilon>().unwrap(), Epsilon::ln(r(3, 1)));
        assert_eq!(
            "(1/2) ln(2)".parse::<Epsilon>().unwrap(),
            Epsilon::scaled_ln(r(1, 2), r(2, 1))
        );
        assert_eq!("0.6".parse::<Epsilon>().unwrap(), Epsilon::Real(0.6));
        assert!("ln(1/2)".parse::<Epsilon>().is_err());
        assert!("-1".parse::<Epsilon>().is_err());
        assert!("ln2".parse::<Epsilon>().is_err());
    }

    #[test]
    fn ordering() {
        let ln2 = Epsilon::ln(r(2, 1));
        let ln3 = Epsilon::ln(r(3, 1));
        assert_eq!(ln2.compare(&ln3), Ordering::Less);
        assert_eq!(Epsilon::Real(0.6).compare(&ln2), Ordering::Less);
        assert_eq!(Epsilon::Real(std::f64::consts::LN_2).compare(&ln2), Ordering::Equal);
        assert_eq!(Epsilon::Unbounded.compare(&ln3), Ordering::Greater);
    }
}
