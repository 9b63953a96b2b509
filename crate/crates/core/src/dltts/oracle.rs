use std::collections::BTreeSet;

use super::knowledge::first_conflict;
use super::{Dltts, DlttsError, StateId, Tag};
use crate::metrics::MetricContext;
use crate::scalar::Scalar;
use crate::schema::{PrivacyPolicy, Signature, Tuple, TuplePattern};

#[derive(Clone, Debug, PartialEq)]
pub enum OracleVerdict<S> {
    Continue,
    /// The knowledge contradicts the policy; `pattern` is the denial (or
    /// negated fact) it runs into.
    Violation { pattern: TuplePattern },
    /// The knowledge comes within `rho` of a secret row.
    EpsilonViolation { rho: S },
}

impl<S> OracleVerdict<S> {
    pub fn is_violation(&self) -> bool {
        !matches!(self, OracleVerdict::Continue)
    }
}

/// Decides, state by state, whether a querier may go on.
#[derive(Clone, Debug)]
pub struct Oracle<'a, S> {
    pub sig: &'a Signature,
    pub policy: &'a PrivacyPolicy,
    /// The rows being protected, for the distance check.
    pub secret: Vec<Tuple>,
    /// Distance threshold; `None` disables the distance check.
    pub epsilon: Option<S>,
    pub metric: MetricContext<'a>,
}

impl<'a, S: Scalar> Oracle<'a, S> {
    pub fn verdict(&self, tag: &Tag) -> Result<OracleVerdict<S>, DlttsError> {
        if let Some(pattern) = first_conflict(tag, self.policy) {
            return Ok(OracleVerdict::Violation { pattern });
        }
        if let Some(eps) = &self.epsilon {
            let known: Vec<Tuple> = tag
                .positive()
                .map(|f| f.to_tuple(self.sig))
                .filter(|t| !t.is_empty())
                .collect();
            if let Some(rho) = self.metric.rho::<S>(&known, &self.secret)? {
                if rho <= *eps || rho.approx_eq(eps) {
                    return Ok(OracleVerdict::EpsilonViolation { rho });
                }
            }
        }
        Ok(OracleVerdict::Continue)
    }
}

impl<S: Scalar> Dltts<S> {
    /// Runs the oracle at `state`; on a violation the state's only outgoing
    /// transition becomes `(state, δ, ⊗)`.
    pub fn oracle_step(
        &mut self,
        state: &str,
        oracle: &Oracle<'_, S>,
    ) -> Result<OracleVerdict<S>, DlttsError> {
        if !self.contains(state) {
            return Err(DlttsError::UnknownState(state.to_string()));
        }
        if state == self.stop() {
            return Err(DlttsError::StopState);
        }
        let tag = self.knowledge(state).cloned().unwrap_or_default();
        let verdict = oracle.verdict(&tag)?;
        if verdict.is_violation() {
            self.install_violation(state)?;
        }
        Ok(verdict)
    }

    /// Walks the system breadth-first from the initial state, consulting the
    /// oracle at each state reached. States cut off by a violation are not
    /// visited.
    pub fn apply_oracle(
        &mut self,
        oracle: &Oracle<'_, S>,
    ) -> Result<Vec<(StateId, OracleVerdict<S>)>, DlttsError> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::from([self.initial().to_string()]);
        let mut queue = std::collections::VecDeque::from([self.initial().to_string()]);
        while let Some(s) = queue.pop_front() {
            if s == self.stop() {
                continue;
            }
            let verdict = self.oracle_step(&s, oracle)?;
            out.push((s.clone(), verdict));
            let next: Vec<StateId> = self
                .outgoing(&s)
                .flat_map(|t| t.branches.iter().map(|b| b.to.clone()))
                .collect();
            for n in next {
                if seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dltts::{Branch, DlttsBuilder, Label, DELTA};
    use crate::metrics::IntervalMeasureMode;
    use crate::schema::{fixtures, parse_pattern_cells};
    use crate::Rational;

    fn pattern(sig: &Signature, cells: &[&str]) -> TuplePattern {
        TuplePattern::positive(parse_pattern_cells(sig, cells).unwrap())
    }

    #[test]
    fn violation_installs_delta() {
        let (sig, policy) = fixtures::signature();
        let leak = pattern(&sig, &["John", "*", "*", "*", "CoVid"]);
        let mut d: Dltts<Rational> = DlttsBuilder::new("s0")
            .transition(
                "s0",
                "q",
                vec![Branch::new("s1", Rational::from_ratio(1, 1), Label::text("x").with_fact(leak))],
            )
            .transition("s1", "q", vec![Branch::new("s2", Rational::from_ratio(1, 1), Label::text("y"))])
            .build()
            .unwrap();
        let oracle = Oracle {
            sig: &sig,
            policy: &policy,
            secret: vec![],
            epsilon: None,
            metric: MetricContext::new(&sig, IntervalMeasureMode::IntegerSet),
        };
        let verdicts = d.apply_oracle(&oracle).unwrap();
        assert_eq!(verdicts[0], ("s0".to_string(), OracleVerdict::Continue));
        assert!(verdicts[1].1.is_violation());
        assert_eq!(verdicts.len(), 2);
        let out: Vec<_> = d.outgoing("s1").collect();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].action, DELTA);
        assert_eq!(out[0].branches[0].to, d.stop());
        assert!(d.reach_stop().0);
        assert_eq!(d.validate(), vec![]);
    }

    #[test]
    fn distance_violation() {
        let (sig, policy) = fixtures::signature();
        let published = fixtures::published(&sig);
        let l5 = published.tuple_by_line("l5").unwrap();
        let known = TuplePattern::from_row(&sig, &published, published.row("l5").unwrap());
        let oracle = Oracle {
            sig: &sig,
            policy: &policy,
            secret: vec![l5],
            epsilon: Some(Rational::from_ratio(0, 1)),
            metric: MetricContext::new(&sig, IntervalMeasureMode::IntegerSet),
        };
        assert_eq!(
            oracle.verdict(&Tag::new([known])).unwrap(),
            OracleVerdict::EpsilonViolation {
                rho: Rational::from_ratio(0, 1)
            }
        );
        assert_eq!(oracle.verdict(&Tag::top()).unwrap(), OracleVerdict::Continue);
    }
}
