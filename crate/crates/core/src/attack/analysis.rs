use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{multiset_compare, AttackDltts, AttackError, Switch};
use crate::dltts::{StateId, Transition, DELTA};
use crate::scalar::Scalar;
use crate::schema::{ColumnGroup, DataTable};

/// The best priority run found into a state.
#[derive(Clone, Debug, PartialEq)]
pub struct Access<S> {
    pub prob: S,
    pub run: Vec<StateId>,
}

impl<S: Scalar> AttackDltts<S> {
    /// Query transitions at `state` whose distribution is maximal under
    /// the multiset ordering; ties are all kept.
    pub fn priority_transitions<'a>(&'a self, state: &'a str) -> Vec<&'a Transition<S>> {
        let candidates: Vec<&Transition<S>> = self
            .dltts
            .outgoing(state)
            .filter(|t| !t.is_response() && t.action != DELTA)
            .collect();
        let dists: Vec<Vec<S>> = candidates.iter().map(|t| t.distribution()).collect();
        candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                dists
                    .iter()
                    .all(|d| multiset_compare(d, &dists[*i]) != Ordering::Greater)
            })
            .map(|(_, t)| *t)
            .collect()
    }

    /// For each state reached by priority transitions, the largest run
    /// probability into it.
    pub fn access(&self) -> BTreeMap<StateId, Access<S>> {
        let mut best = BTreeMap::new();
        let mut path = vec![self.dltts.initial().to_string()];
        self.explore(&mut path, S::one(), &mut best);
        best
    }

    fn explore(&self, path: &mut Vec<StateId>, prob: S, best: &mut BTreeMap<StateId, Access<S>>) {
        let here = path.last().expect("path is never empty").clone();
        let better = best.get(&here).is_none_or(|a: &Access<S>| prob > a.prob);
        if better {
            best.insert(
                here.clone(),
                Access {
                    prob: prob.clone(),
                    run: path.clone(),
                },
            );
        }
        for t in self.priority_transitions(&here) {
            for b in &t.branches {
                if path.contains(&b.to) {
                    continue;
                }
                path.push(b.to.clone());
                self.explore(path, prob.clone() * b.prob.clone(), best);
                path.pop();
            }
        }
    }
}

/// Probability of reaching `state`, entered by the single row `line`,
/// along priority transitions from the initial state.
pub fn pr_access<S: Scalar>(attack: &AttackDltts<S>, state: &str, line: &str) -> Result<S, AttackError> {
    if !attack.dltts.contains(state) {
        return Err(AttackError::UnknownState(state.to_string()));
    }
    if attack.incoming_line(state).as_deref() != Some(line) {
        return Err(AttackError::NotSingleton {
            state: state.to_string(),
            line: line.to_string(),
        });
    }
    Ok(attack
        .access()
        .remove(state)
        .map_or_else(S::zero, |a| a.prob))
}

fn max_from<S: Scalar>(attack: &AttackDltts<S>, access: &BTreeMap<StateId, Access<S>>, line: &str) -> S {
    attack
        .singleton_states()
        .into_iter()
        .filter(|(_, l)| l == line)
        .filter_map(|(s, _)| access.get(&s).map(|a| a.prob.clone()))
        .fold(S::zero(), S::max_of)
}

/// The largest [`pr_access`] over the states entered by `line`; zero when
/// there are none.
pub fn max_pr<S: Scalar>(attack: &AttackDltts<S>, line: &str) -> S {
    max_from(attack, &attack.access(), line)
}

/// `max_pr` of the baseline for every row it mentions.
pub fn baseline_thresholds<S: Scalar>(baseline: &AttackDltts<S>) -> BTreeMap<String, S> {
    let access = baseline.access();
    baseline
        .lines()
        .into_iter()
        .map(|l| {
            let m = max_from(baseline, &access, &l);
            (l, m)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuccessPoint<S> {
    pub state: StateId,
    pub line: String,
    pub pr: S,
    pub baseline: S,
}

/// States where the attacker reaches a row strictly more likely than the
/// baseline ever does.
pub fn attack_success_points<S: Scalar>(
    attack: &AttackDltts<S>,
    baseline: &AttackDltts<S>,
) -> Vec<SuccessPoint<S>> {
    let thresholds = baseline_thresholds(baseline);
    let access = attack.access();
    attack
        .singleton_states()
        .into_iter()
        .filter_map(|(state, line)| {
            let pr = access.get(&state)?.prob.clone();
            let baseline = thresholds.get(&line).cloned().unwrap_or_else(S::zero);
            (pr > baseline).then_some(SuccessPoint {
                state,
                line,
                pr,
                baseline,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyDecision<S> {
    pub state: StateId,
    pub line: String,
    pub pr: S,
    pub threshold: S,
    pub switch: Switch,
}

impl<S: Scalar> fmt::Display for StrategyDecision<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cmp = if self.switch == Switch::Off { ">" } else { "<=" };
        write!(
            f,
            "{}:{} {} (Pr {} {} threshold {})",
            self.state,
            self.line,
            self.switch,
            self.pr.render(),
            cmp,
            self.threshold.render()
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyReport<S> {
    pub decisions: Vec<StrategyDecision<S>>,
}

impl<S> StrategyReport<S> {
    /// `(state, row)` of every response switched off.
    pub fn off(&self) -> Vec<(StateId, String)> {
        self.decisions
            .iter()
            .filter(|d| d.switch == Switch::Off)
            .map(|d| (d.state.clone(), d.line.clone()))
            .collect()
    }
}

/// Switches off the response at every state where the attacker's access
/// probability exceeds the threshold for that row (rows without a
/// threshold count as 0). Other switches are left on.
pub fn apply_strategy_with<S: Scalar>(
    attack: &mut AttackDltts<S>,
    thresholds: &BTreeMap<String, S>,
) -> StrategyReport<S> {
    let access = attack.access();
    let mut decisions = Vec::new();
    for (state, line) in attack.singleton_states() {
        let key = (state.clone(), line.clone());
        if !attack.switches.contains_key(&key) {
            continue;
        }
        let pr = access.get(&state).map_or_else(S::zero, |a| a.prob.clone());
        let threshold = thresholds.get(&line).cloned().unwrap_or_else(S::zero);
        let switch = if pr > threshold { Switch::Off } else { Switch::On };
        attack.switches.insert(key, switch);
        decisions.push(StrategyDecision {
            state,
            line,
            pr,
            threshold,
            switch,
        });
    }
    StrategyReport { decisions }
}

/// [`apply_strategy_with`] the baseline's `max_pr` as thresholds.
pub fn apply_strategy<S: Scalar>(
    attack: &mut AttackDltts<S>,
    baseline: &AttackDltts<S>,
) -> StrategyReport<S> {
    apply_strategy_with(attack, &baseline_thresholds(baseline))
}

/// Access probability of one response, keyed by the revealed value and
/// the answer to the first query on the way there.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdEntry<S> {
    pub value: String,
    pub condition: String,
    pub prob: S,
    pub state: StateId,
    pub line: String,
}

impl<S> ThresholdEntry<S> {
    pub fn key(&self) -> String {
        format!("({}|{})", self.value, self.condition)
    }
}

impl<S: Scalar> fmt::Display for ThresholdEntry<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key(), self.prob.render())
    }
}

/// One entry per (value, condition), taking the best response for each.
pub fn threshold_report<S: Scalar>(attack: &AttackDltts<S>) -> Vec<ThresholdEntry<S>> {
    let access = attack.access();
    let mut out: Vec<ThresholdEntry<S>> = Vec::new();
    for (state, line) in attack.singleton_states() {
        if !attack.switches.contains_key(&(state.clone(), line.clone())) {
            continue;
        }
        let Some(a) = access.get(&state) else {
            continue;
        };
        let value = attack.response_value(&state).unwrap_or_else(|| "?".into());
        let condition = first_answer(attack, &a.run);
        let entry = ThresholdEntry {
            value,
            condition,
            prob: a.prob.clone(),
            state,
            line,
        };
        match out.iter_mut().find(|e| e.line == entry.line && e.key() == entry.key()) {
            Some(e) if entry.prob > e.prob => *e = entry,
            Some(_) => {}
            None => out.push(entry),
        }
    }
    out
}

/// The answer on the first branch of a run: the text after `=`, or the
/// whole label text.
fn first_answer<S: Scalar>(attack: &AttackDltts<S>, run: &[StateId]) -> String {
    let [from, to, ..] = run else {
        return "*".into();
    };
    attack
        .dltts
        .outgoing(from)
        .flat_map(|t| t.branches.iter())
        .find(|b| b.to == *to)
        .map(|b| match b.label.text.split_once('=') {
            Some((_, answer)) => answer.trim().to_string(),
            None if b.label.text.is_empty() => "*".into(),
            None => b.label.text.clone(),
        })
        .unwrap_or_else(|| "*".into())
}

/// A place where a system disagrees with itself or with the table.
#[derive(Clone, Debug, PartialEq)]
pub enum Discrepancy {
    /// The rows on the branches leaving `state` are not a partition of the
    /// rows entering it.
    LinesNotPartitioned {
        state: StateId,
        incoming: BTreeSet<String>,
        outgoing: BTreeSet<String>,
    },
    /// The same row is reached with different probabilities at different states.
    UnequalAccess {
        line: String,
        probs: Vec<(StateId, String)>,
    },
    /// A single-row state without a response.
    MissingResponse { state: StateId, line: String },
    /// A response shows a value other than the table's.
    WrongResponse {
        state: StateId,
        line: String,
        shown: String,
        actual: String,
    },
}

fn join(set: &BTreeSet<String>) -> String {
    set.iter().cloned().collect::<Vec<_>>().join(", ")
}

impl fmt::Display for Discrepancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Discrepancy::LinesNotPartitioned {
                state,
                incoming,
                outgoing,
            } => write!(
                f,
                "{state}: branches carry {{{}}} but the state is entered by {{{}}}",
                join(outgoing),
                join(incoming)
            ),
            Discrepancy::UnequalAccess { line, probs } => {
                let parts: Vec<String> = probs.iter().map(|(s, p)| format!("{s}: {p}")).collect();
                write!(f, "{line} is reached with differing probabilities ({})", parts.join(", "))
            }
            Discrepancy::MissingResponse { state, line } => {
                write!(f, "{state}: entered by {line} alone but has no response")
            }
            Discrepancy::WrongResponse {
                state,
                line,
                shown,
                actual,
            } => write!(f, "{state}: response({line}) shows {shown}, the table has {actual}"),
        }
    }
}

/// Inconsistencies in an attack system, checked against `db` when given.
pub fn discrepancies<S: Scalar>(attack: &AttackDltts<S>, db: Option<&DataTable>) -> Vec<Discrepancy> {
    let d = &attack.dltts;
    let mut out = Vec::new();
    for state in d.states() {
        let incoming: BTreeSet<String> = if state == d.initial() {
            match db {
                Some(db) => db.rows().iter().map(|r| r.line_id.clone()).collect(),
                None => continue,
            }
        } else {
            d.incoming(state)
                .filter(|(t, _)| !t.is_response())
                .flat_map(|(_, b)| b.label.lines.iter().cloned())
                .collect()
        };
        if incoming.is_empty() {
            continue;
        }
        for t in d.outgoing(state).filter(|t| !t.is_response() && t.action != DELTA) {
            let outgoing: BTreeSet<String> = t
                .branches
                .iter()
                .flat_map(|b| b.label.lines.iter().cloned())
                .collect();
            let total: usize = t.branches.iter().map(|b| b.label.lines.len()).sum();
            if outgoing != incoming || total != outgoing.len() {
                out.push(Discrepancy::LinesNotPartitioned {
                    state: state.clone(),
                    incoming: incoming.clone(),
                    outgoing,
                });
            }
        }
    }

    let access = attack.access();
    let singles = attack.singleton_states();
    let mut by_line: BTreeMap<&str, Vec<(StateId, S)>> = BTreeMap::new();
    for (state, line) in &singles {
        if let Some(a) = access.get(state) {
            by_line.entry(line).or_default().push((state.clone(), a.prob.clone()));
        }
        if !attack.switches.contains_key(&(state.clone(), line.clone())) {
            out.push(Discrepancy::MissingResponse {
                state: state.clone(),
                line: line.clone(),
            });
        }
    }
    for (line, probs) in by_line {
        if probs.iter().any(|(_, p)| !p.approx_eq(&probs[0].1)) {
            out.push(Discrepancy::UnequalAccess {
                line: line.to_string(),
                probs: probs.into_iter().map(|(s, p)| (s, p.render())).collect(),
            });
        }
    }

    if let Some(db) = db {
        if let Some(col) = db.schema().iter().position(|c| c.group == ColumnGroup::Sensitive) {
            for (state, line) in attack.switches.keys() {
                let (Some(row), Some(shown)) = (db.row(line), attack.response_value(state)) else {
                    continue;
                };
                let actual = row.cells[col].to_string();
                if shown != actual {
                    out.push(Discrepancy::WrongResponse {
                        state: state.clone(),
                        line: line.clone(),
                        shown,
                        actual,
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{build_attack_dltts, derive_baseline_profile, fixtures};
    use crate::dltts::{Branch, DlttsBuilder, Label, RESPONSE};
    use crate::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn q(text: &str, lines: &[&str]) -> Label {
        Label::text(text).with_lines(lines.iter().copied())
    }

    fn resp(b: DlttsBuilder<Rational>, at: &str, line: &str, value: &str) -> DlttsBuilder<Rational> {
        b.transition(
            at,
            RESPONSE,
            vec![Branch::new(format!("{at}'"), r(1, 1), Label::text(format!("response({line})={value}")))],
        )
    }

    /// DLTTS-B as drawn.
    fn figure_b(p: [Rational; 4]) -> AttackDltts<Rational> {
        let [m, f, young, old] = p;
        let mut b = DlttsBuilder::new("s0")
            .transition(
                "s0",
                "sex",
                vec![
                    Branch::new("s1", m, q("sex=M", &["l3", "l4"])),
                    Branch::new("s2", f, q("sex=F", &["l1", "l2"])),
                ],
            )
            .transition(
                "s1",
                "age",
                vec![
                    Branch::new("s8", old, q("age=[40,50]", &["l4"])),
                    Branch::new("s7", young, q("age=[30,40]", &["l3"])),
                ],
            )
            .transition("s2", "age", vec![Branch::new("s3", r(1, 1), q("age=[30,40]", &["l1", "l2"]))])
            .transition(
                "s3",
                "pick",
                vec![
                    Branch::new("s5", r(1, 2), q("", &["l1"])),
                    Branch::new("s6", r(1, 2), q("", &["l2"])),
                ],
            );
        for (at, line, v) in [("s5", "l1", "1"), ("s6", "l2", "8"), ("s7", "l3", "3"), ("s8", "l4", "7")] {
            b = resp(b, at, line, v);
        }
        AttackDltts::new("N", b.build().unwrap()).unwrap()
    }

    /// DLTTS-C as drawn, including its inconsistent labels.
    pub(crate) fn figure_c() -> AttackDltts<Rational> {
        let mut b = DlttsBuilder::new("s0")
            .transition(
                "s0",
                "age",
                vec![
                    Branch::new("s1", r(3, 4), q("age=[30,40[", &["l1", "l2", "l3"])),
                    Branch::new("s2", r(1, 4), q("age=[40,50]", &["l4"])),
                ],
            )
            .transition(
                "s1",
                "sex",
                vec![
                    Branch::new("s3", r(1, 2), q("sex=F", &["l1", "l2"])),
                    Branch::new("s4", r(1, 2), q("sex=M", &["l3", "l4"])),
                ],
            )
            .transition(
                "s3",
                "pick",
                vec![
                    Branch::new("s6", r(1, 2), q("", &["l1"])),
                    Branch::new("s10", r(1, 2), q("", &["l2"])),
                ],
            )
            .transition("s2", "sex", vec![Branch::new("s5", r(1, 1), q("sex=M", &["l4"]))])
            .transition(
                "s4",
                "pick",
                vec![
                    Branch::new("s7", r(1, 2), q("", &["l4"])),
                    Branch::new("s8", r(1, 2), q("", &["l3"])),
                ],
            );
        for (at, line, v) in [("s6", "l1", "1"), ("s10", "l2", "8"), ("s7", "l4", "7"), ("s8", "l3", "8"), ("s5", "l4", "7")] {
            b = resp(b, at, line, v);
        }
        AttackDltts::new("C", b.build().unwrap()).unwrap()
    }

    #[test]
    fn figure_c_thresholds() {
        let c = figure_c();
        assert_eq!(pr_access(&c, "s6", "l1").unwrap(), r(3, 16));
        for l in ["l1", "l2", "l3"] {
            assert_eq!(max_pr(&c, l), r(3, 16), "{l}");
        }
        assert_eq!(max_pr(&c, "l4"), r(1, 4));
        assert_eq!(max_pr(&c, "l9"), r(0, 1));
        assert!(matches!(pr_access(&c, "s1", "l1"), Err(AttackError::NotSingleton { .. })));
        assert!(matches!(pr_access(&c, "s6'", "l1"), Err(AttackError::NotSingleton { .. })));
    }

    #[test]
    fn figure_c_discrepancies() {
        let sig = fixtures::signature();
        let db = fixtures::table(&sig);
        let found = discrepancies(&figure_c(), Some(&db));
        assert!(found.iter().any(|d| matches!(d, Discrepancy::LinesNotPartitioned { state, .. } if state == "s1")));
        assert!(found.iter().any(|d| matches!(d, Discrepancy::UnequalAccess { line, .. } if line == "l4")));
        assert!(found.iter().any(|d| matches!(d, Discrepancy::MissingResponse { state, .. } if state == "s2")));
        assert!(found.iter().any(|d| matches!(d, Discrepancy::WrongResponse { state, shown, .. } if state == "s8" && shown == "8")));
        assert_eq!(found.len(), 4, "{found:?}");
    }

    fn attacker_b() -> AttackDltts<Rational> {
        figure_b([r(4, 5), r(1, 5), r(3, 4), r(1, 4)])
    }

    fn attacker_a() -> AttackDltts<Rational> {
        figure_b([r(1, 5), r(4, 5), r(7, 10), r(3, 10)])
    }

    fn keys(report: &[ThresholdEntry<Rational>]) -> Vec<String> {
        let mut out: Vec<String> = report.iter().map(|e| e.to_string()).collect();
        out.sort();
        out
    }

    fn sorted(mut v: Vec<(StateId, String)>) -> Vec<(StateId, String)> {
        v.sort();
        v
    }

    #[test]
    fn threshold_reports() {
        assert_eq!(pr_access(&attacker_b(), "s7", "l3").unwrap(), r(3, 5));
        assert_eq!(
            keys(&threshold_report(&attacker_b())),
            vec!["(1|F): 1/10", "(3|M): 3/5", "(7|M): 1/5", "(8|F): 1/10"]
        );
        assert_eq!(
            keys(&threshold_report(&attacker_a())),
            vec!["(1|F): 2/5", "(3|M): 7/50", "(7|M): 3/50", "(8|F): 2/5"]
        );
        let empty = AttackDltts::new("E", DlttsBuilder::<Rational>::new("s0").build().unwrap()).unwrap();
        assert!(threshold_report(&empty).is_empty());
        assert!(discrepancies(&attacker_b(), None).is_empty());
    }

    #[test]
    fn success_and_strategy() {
        let c = figure_c();
        let points: Vec<_> = attack_success_points(&attacker_b(), &c)
            .into_iter()
            .map(|p| p.state)
            .collect();
        assert_eq!(points, vec!["s7"]);
        assert!(attack_success_points(&c, &c).is_empty());

        let mut b = attacker_b();
        let report = apply_strategy(&mut b, &c);
        assert_eq!(report.off(), vec![("s7".to_string(), "l3".to_string())]);
        assert_eq!(b.switch("s8", "l4"), Some(Switch::On));

        let paper: BTreeMap<String, Rational> =
            ["l1", "l2", "l3", "l4"].map(|l| (l.to_string(), r(3, 16))).into();
        let mut b = attacker_b();
        let off = sorted(apply_strategy_with(&mut b, &paper).off());
        assert_eq!(off, vec![("s7".into(), "l3".into()), ("s8".into(), "l4".into())]);
        let mut a = attacker_a();
        let off = sorted(apply_strategy_with(&mut a, &paper).off());
        assert_eq!(off, vec![("s5".into(), "l1".into()), ("s6".into(), "l2".into())]);

        let mut same = c.clone();
        assert!(apply_strategy(&mut same, &c).off().is_empty());
    }

    #[test]
    fn boundary_is_strict() {
        let mut b = attacker_b();
        let exact: BTreeMap<String, Rational> = [("l3".to_string(), r(3, 5))].into();
        let report = apply_strategy_with(&mut b, &exact);
        assert_eq!(b.switch("s7", "l3"), Some(Switch::On));
        assert!(report.decisions.iter().any(|d| d.state == "s7" && d.switch == Switch::On));
    }

    #[test]
    fn priority_picks_maximal_transitions() {
        let b = DlttsBuilder::new("s0")
            .transition(
                "s0",
                "even",
                vec![
                    Branch::new("a", r(1, 2), q("", &["l1"])),
                    Branch::new("b", r(1, 2), q("", &["l2"])),
                ],
            )
            .transition(
                "s0",
                "skewed",
                vec![
                    Branch::new("c", r(2, 3), q("", &["l1"])),
                    Branch::new("d", r(1, 3), q("", &["l2"])),
                ],
            )
            .build()
            .unwrap();
        let t = AttackDltts::new("T", b).unwrap();
        assert_eq!(t.priority_transitions("s0").len(), 1);
        assert_eq!(pr_access(&t, "a", "l1").unwrap(), r(0, 1));
        assert_eq!(pr_access(&t, "c", "l1").unwrap(), r(2, 3));
        assert_eq!(max_pr(&t, "l2"), r(1, 3));
    }

    #[test]
    fn tied_transitions_are_both_explored() {
        let b = DlttsBuilder::new("s0")
            .transition(
                "s0",
                "x",
                vec![
                    Branch::new("a", r(3, 4), q("", &["l1"])),
                    Branch::new("b", r(1, 4), q("", &["l2"])),
                ],
            )
            .transition(
                "s0",
                "y",
                vec![
                    Branch::new("c", r(1, 4), q("", &["l1"])),
                    Branch::new("d", r(3, 4), q("", &["l2"])),
                ],
            )
            .build()
            .unwrap();
        let t = AttackDltts::new("T", b).unwrap();
        assert_eq!(t.priority_transitions("s0").len(), 2);
        assert_eq!(max_pr(&t, "l1"), r(3, 4));
        assert_eq!(max_pr(&t, "l2"), r(3, 4));
    }

    #[test]
    fn built_trees_against_baseline() {
        let sig = fixtures::signature();
        let db = fixtures::table(&sig);
        let mut c = derive_baseline_profile(&db, "C");
        c.attribute_order = vec!["Age".into(), "Sex".into()];
        let c: AttackDltts<Rational> = build_attack_dltts(&db, &c).unwrap();
        let b: AttackDltts<Rational> = build_attack_dltts(&db, &fixtures::attacker_b(&sig)).unwrap();
        let a: AttackDltts<Rational> = build_attack_dltts(&db, &fixtures::attacker_a(&sig)).unwrap();
        assert_eq!(
            keys(&threshold_report(&b)),
            vec!["(1|F): 1/10", "(3|M): 3/5", "(7|M): 1/5", "(8|F): 1/10"]
        );
        assert_eq!(
            keys(&threshold_report(&a)),
            vec!["(1|F): 2/5", "(3|M): 7/50", "(7|M): 3/50", "(8|F): 2/5"]
        );
        assert!(discrepancies(&b, Some(&db)).is_empty());
        let lines: Vec<_> = attack_success_points(&b, &c).into_iter().map(|p| p.line).collect();
        assert_eq!(lines, vec!["l3"]);
        let lines: Vec<_> = attack_success_points(&a, &c).into_iter().map(|p| p.line).collect();
        assert_eq!(lines, vec!["l1", "l2"]);
    }
}
