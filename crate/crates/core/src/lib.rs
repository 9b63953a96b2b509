//! Labeled-tagged transition systems for reasoning about what an attacker
//! can infer from an anonymized table.

pub mod scalar;
pub mod attack;
pub mod dltts;
pub mod io;
pub mod metrics;
pub mod privacy;
pub mod schema;

pub use scalar::Scalar;

/// Exact arbitrary-precision rational, the default scalar.
pub type Rational = num_rational::BigRational;

pub type ExactDltts = dltts::Dltts<Rational>;
pub type FloatDltts = dltts::Dltts<f64>;
pub type ExactMechanism = privacy::Mechanism<Rational>;
pub type FloatMechanism = privacy::Mechanism<f64>;
pub type ExactAttack = attack::AttackDltts<Rational>;
