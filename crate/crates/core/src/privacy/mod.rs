//! Mechanisms as finite probability tables, and the ε notions over them:
//! indistinguishability, local DP, and DP under an adjacency measure.

mod calculus;
mod epsilon;

pub use calculus::{
    check_dp, epsilon_equivalent_labels, is_eps_indistinguishable, min_dp_epsilon,
    min_eps_rho_indist, min_eps_scaled_indist, min_indist_epsilon, min_ldp_epsilon, Adjacency,
    MAX_ENUMERATED_OUTPUTS,
};
pub use epsilon::{decimal12, Epsilon, EpsilonResult, Witness};

use crate::dltts::{Dltts, DlttsError, DELTA, RESPONSE};
use crate::metrics::MetricError;
use crate::scalar::Scalar;
use crate::schema::{Tuple, Value};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PrivacyError {
    #[error("unknown input '{0}'")]
    UnknownInput(String),
    #[error("unknown output '{0}'")]
    UnknownOutput(String),
    #[error("input '{0}' declared twice")]
    DuplicateInput(String),
    #[error("output '{0}' declared twice")]
    DuplicateOutput(String),
    #[error("mechanism has no inputs or no outputs")]
    Empty,
    #[error("row of '{input}' has {found} entries for {expected} outputs")]
    Shape {
        input: String,
        expected: usize,
        found: usize,
    },
    #[error("probabilities of '{input}' sum to {sum}, not 1")]
    BadDistribution { input: String, sum: String },
    #[error("probability of '{input}' on '{output}' is outside [0, 1]")]
    OutOfRange { input: String, output: String },
    #[error("{0} outputs is too many to enumerate output sets")]
    TooManyOutputs(usize),
    #[error("input '{0}' has no tuple to measure distances with")]
    NoTuple(String),
    #[error("inputs '{0}' and '{1}' are uncomparable")]
    Uncomparable(String, String),
    #[error("no distance given for inputs '{0}' and '{1}'")]
    NoDistance(String, String),
    #[error("state '{0}' has no outgoing branches")]
    NoBranches(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Dltts(#[from] DlttsError),
}

/// A mechanism input: a name, and the tuple it stands for when distances
/// between inputs matter.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub name: String,
    pub tuple: Option<Tuple>,
}

impl Instance {
    pub fn named(name: impl Into<String>) -> Self {
        Instance {
            name: name.into(),
            tuple: None,
        }
    }

    pub fn with_tuple(name: impl Into<String>, tuple: Tuple) -> Self {
        Instance {
            name: name.into(),
            tuple: Some(tuple),
        }
    }
}

/// `prob[i][o] = Prob[M(input i) = output o]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mechanism<S> {
    inputs: Vec<Instance>,
    outputs: Vec<String>,
    prob: Vec<Vec<S>>,
}

impl<S: Scalar> Mechanism<S> {
    pub fn new(
        inputs: Vec<Instance>,
        outputs: Vec<String>,
        prob: Vec<Vec<S>>,
    ) -> Result<Self, PrivacyError> {
        if inputs.is_empty() || outputs.is_empty() {
            return Err(PrivacyError::Empty);
        }
        for (i, a) in inputs.iter().enumerate() {
            if inputs[..i].iter().any(|b| b.name == a.name) {
                return Err(PrivacyError::DuplicateInput(a.name.clone()));
            }
        }
        for (i, a) in outputs.iter().enumerate() {
            if outputs[..i].contains(a) {
                return Err(PrivacyError::DuplicateOutput(a.clone()));
            }
        }
        if prob.len() != inputs.len() {
            return Err(PrivacyError::Shape {
                input: "(table)".into(),
                expected: inputs.len(),
                found: prob.len(),
            });
        }
        for (inst, row) in inputs.iter().zip(&prob) {
            if row.len() != outputs.len() {
                return Err(PrivacyError::Shape {
                    input: inst.name.clone(),
                    expected: outputs.len(),
                    found: row.len(),
                });
            }
            for (o, p) in outputs.iter().zip(row) {
                if *p < S::zero() || *p > S::one() {
                    return Err(PrivacyError::OutOfRange {
                        input: inst.name.clone(),
                        output: o.clone(),
                    });
                }
            }
            let sum = row.iter().fold(S::zero(), |a, p| a + p.clone());
            if !sum.approx_eq(&S::one()) {
                return Err(PrivacyError::BadDistribution {
                    input: inst.name.clone(),
                    sum: sum.render(),
                });
            }
        }
        Ok(Mechanism {
            inputs,
            outputs,
            prob,
        })
    }

    pub fn inputs(&self) -> &[Instance] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn row(&self, input: usize) -> &[S] {
        &self.prob[input]
    }

    pub fn input_index(&self, name: &str) -> Result<usize, PrivacyError> {
        self.inputs
            .iter()
            .position(|i| i.name == name)
            .ok_or_else(|| PrivacyError::UnknownInput(name.to_string()))
    }

    pub fn output_index(&self, name: &str) -> Result<usize, PrivacyError> {
        self.outputs
            .iter()
            .position(|o| o == name)
            .ok_or_else(|| PrivacyError::UnknownOutput(name.to_string()))
    }

    /// `Prob[M(input) = output]`.
    pub fn prob(&self, input: &str, output: &str) -> Result<S, PrivacyError> {
        Ok(self.prob[self.input_index(input)?][self.output_index(output)?].clone())
    }

    /// Merges inputs with the same key into one, averaging their rows
    /// (each merged input equally likely).
    pub fn marginalize(&self, key: impl Fn(&Instance) -> Instance) -> Mechanism<S> {
        let mut groups: Vec<(Instance, Vec<usize>)> = Vec::new();
        for (i, inst) in self.inputs.iter().enumerate() {
            let k = key(inst);
            match groups.iter_mut().find(|(g, _)| g.name == k.name) {
                Some((_, members)) => members.push(i),
                None => groups.push((k, vec![i])),
            }
        }
        let prob = groups
            .iter()
            .map(|(_, members)| {
                let n = S::from_usize(members.len());
                (0..self.outputs.len())
                    .map(|o| {
                        members
                            .iter()
                            .fold(S::zero(), |acc, &i| acc + self.prob[i][o].clone())
                            / n.clone()
                    })
                    .collect()
            })
            .collect();
        Mechanism {
            inputs: groups.into_iter().map(|(g, _)| g).collect(),
            outputs: self.outputs.clone(),
            prob,
        }
    }

    /// The answer distribution behind the branches leaving `state`: one
    /// input per branch (named by its single row, else by its target), with
    /// `alpha` answered at the branch probability and `¬alpha` otherwise.
    pub fn from_branches(dltts: &Dltts<S>, state: &str, alpha: &str) -> Result<Self, PrivacyError> {
        if !dltts.contains(state) {
            return Err(DlttsError::UnknownState(state.to_string()).into());
        }
        let branches: Vec<_> = dltts
            .outgoing(state)
            .filter(|t| t.action != DELTA && t.action != RESPONSE)
            .flat_map(|t| t.branches.iter())
            .collect();
        if branches.is_empty() {
            return Err(PrivacyError::NoBranches(state.to_string()));
        }
        let inputs = branches
            .iter()
            .map(|b| Instance::named(b.label.singleton().unwrap_or(&b.to)))
            .collect();
        let prob = branches
            .iter()
            .map(|b| vec![b.prob.clone(), S::one() - b.prob.clone()])
            .collect();
        Mechanism::new(inputs, vec![alpha.to_string(), format!("¬{alpha}")], prob)
    }
}

/// Randomized response, at two levels of detail.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomizedResponse<S> {
    /// Inputs `(X, F1, F2)`: the true answer and two fair coins; each input
    /// answers deterministically.
    pub coins: Mechanism<S>,
    /// Inputs `X` alone, the coins averaged out.
    pub mechanism: Mechanism<S>,
}

/// Answers `X` if the first coin is heads, otherwise `True` on a second
/// heads and `False` on tails.
pub fn build_rr<S: Scalar>() -> RandomizedResponse<S> {
    let outputs = vec!["True".to_string(), "False".to_string()];
    let mut inputs = Vec::new();
    let mut prob = Vec::new();
    for x in ["True", "False"] {
        for f1 in ["H", "T"] {
            for f2 in ["H", "T"] {
                let answer = match (f1, f2) {
                    ("H", _) => x,
                    (_, "H") => "True",
                    _ => "False",
                };
                let tuple = Tuple::untyped(vec![Value::atom(x), Value::atom(f1), Value::atom(f2)]);
                inputs.push(Instance::with_tuple(format!("({x},{f1},{f2})"), tuple));
                prob.push(if answer == "True" {
                    vec![S::one(), S::zero()]
                } else {
                    vec![S::zero(), S::one()]
                });
            }
        }
    }
    let coins = Mechanism::new(inputs, outputs, prob).expect("well-formed table");
    let mechanism = coins.marginalize(|inst| {
        let x = &inst.tuple.as_ref().expect("coin inputs carry tuples").values[0];
        Instance::with_tuple(x.to_string(), Tuple::untyped(vec![x.clone()]))
    });
    RandomizedResponse { coins, mechanism }
}
