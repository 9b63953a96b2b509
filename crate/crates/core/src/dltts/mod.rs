//! Labeled-tagged probabilistic transition systems: states carry what the
//! querier knows, branches carry the answers.

mod knowledge;
mod oracle;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

pub use knowledge::{
    check_consistency, load_count_table, saturate, CountRow, CountTable, ExternalBases, Knowledge,
    DEFAULT_MAX_ROUNDS,
};
pub use oracle::{Oracle, OracleVerdict};

use crate::metrics::MetricError;
use crate::scalar::Scalar;
use crate::schema::{SchemaError, TuplePattern};

pub type StateId = String;

/// Action name of the violation transition installed by the oracle.
pub const DELTA: &str = "δ";
/// Action name of the internal saturation step.
pub const IOTA: &str = "ι";
/// Action name of the leaf transitions that hand out a row's sensitive value.
pub const RESPONSE: &str = "response";
/// Default name of the stop state.
pub const STOP: &str = "⊗";

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DlttsError {
    #[error("unknown state '{0}'")]
    UnknownState(String),
    #[error("state '{0}' declared twice")]
    DuplicateState(String),
    #[error("operation not defined on the stop state")]
    StopState,
    #[error("saturation did not reach a fixpoint within {0} rounds")]
    SaturationBound(usize),
    #[error("tags disagree at '{state}': reached with different knowledge from '{first}' and '{second}'")]
    ConflictingTags {
        state: String,
        first: String,
        second: String,
    },
    #[error("invalid DLTTS: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// Where a branch probability came from.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    /// Inferred from the database (`P_db`).
    Database,
    /// An attacker's own belief, tagged with the attacker's letter (`P_b`, `P_a`).
    Belief(String),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Database => f.write_str("P_db"),
            Provenance::Belief(who) => write!(f, "P_{who}"),
        }
    }
}

/// What a branch tells the querier.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Label {
    /// Free text: the query answer as drawn, e.g. `sex=M` or `Covid : 1`.
    pub text: String,
    pub provenance: Option<Provenance>,
    /// Rows still consistent with the answers so far.
    pub lines: BTreeSet<String>,
    /// Facts learned on this branch; they join the successor's tag.
    pub facts: Vec<TuplePattern>,
}

impl Label {
    pub fn text(text: impl Into<String>) -> Self {
        Label {
            text: text.into(),
            ..Label::default()
        }
    }

    pub fn with_lines<I, L>(mut self, lines: I) -> Self
    where
        I: IntoIterator<Item = L>,
        L: Into<String>,
    {
        self.lines = lines.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = Some(p);
        self
    }

    pub fn with_fact(mut self, fact: TuplePattern) -> Self {
        self.facts.push(fact);
        self
    }

    /// The single row this label narrows down to, if any.
    pub fn singleton(&self) -> Option<&str> {
        match self.lines.len() {
            1 => self.lines.iter().next().map(String::as_str),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.text.is_empty() {
            parts.push(self.text.clone());
        }
        if !self.lines.is_empty() {
            let lines: Vec<_> = self.lines.iter().map(String::as_str).collect();
            parts.push(format!("{{{}}}", lines.join(", ")));
        }
        f.write_str(&parts.join(" "))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch<S> {
    pub to: StateId,
    pub prob: S,
    pub label: Label,
}

impl<S> Branch<S> {
    pub fn new(to: impl Into<StateId>, prob: S, label: Label) -> Self {
        Branch {
            to: to.into(),
            prob,
            label,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition<S> {
    pub from: StateId,
    pub action: String,
    pub branches: Vec<Branch<S>>,
}

impl<S: Scalar> Transition<S> {
    pub fn successors(&self) -> BTreeSet<&str> {
        self.branches.iter().map(|b| b.to.as_str()).collect()
    }

    /// The multiset of branch probabilities.
    pub fn distribution(&self) -> Vec<S> {
        self.branches.iter().map(|b| b.prob.clone()).collect()
    }

    pub fn is_response(&self) -> bool {
        self.action == RESPONSE
    }
}

/// A set of signed ground tuples. The empty tag stands for `{⊤}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag {
    facts: BTreeSet<TuplePattern>,
}

impl Tag {
    pub fn top() -> Self {
        Tag::default()
    }

    pub fn new(facts: impl IntoIterator<Item = TuplePattern>) -> Self {
        Tag {
            facts: facts.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, fact: TuplePattern) -> bool {
        self.facts.insert(fact)
    }

    pub fn contains(&self, fact: &TuplePattern) -> bool {
        self.facts.contains(fact)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TuplePattern> {
        self.facts.iter()
    }

    pub fn positive(&self) -> impl Iterator<Item = &TuplePattern> {
        self.facts.iter().filter(|f| f.is_positive())
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn is_subset(&self, other: &Tag) -> bool {
        self.facts.is_subset(&other.facts)
    }

    pub fn union<'a>(&self, extra: impl IntoIterator<Item = &'a TuplePattern>) -> Tag {
        let mut out = self.clone();
        out.facts.extend(extra.into_iter().cloned());
        out
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.facts.is_empty() {
            return f.write_str("{⊤}");
        }
        let parts: Vec<_> = self.facts.iter().map(ToString::to_string).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Per-state data: the tag on arrival, its saturation, and the probability
/// of the state along the run that created it.
#[derive(Clone, Debug, PartialEq)]
pub struct StateInfo<S> {
    pub tag: Option<Tag>,
    pub saturated: Option<Tag>,
    pub prob: Option<S>,
}

impl<S> Default for StateInfo<S> {
    fn default() -> Self {
        StateInfo {
            tag: None,
            saturated: None,
            prob: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dltts<S> {
    states: Vec<StateId>,
    info: BTreeMap<StateId, StateInfo<S>>,
    initial: StateId,
    stop: StateId,
    transitions: Vec<Transition<S>>,
}

/// One way a system breaks the structural invariants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    UnknownState(String),
    EmptyTransition { from: String, action: String },
    NonPositiveProbability { from: String, to: String },
    ProbabilitySum { from: String, action: String, sum: String },
    RepeatedSuccessor { from: String, to: String },
    SameSuccessors { from: String },
    StopHasOutgoing,
    StopHasTag,
    InitialTag,
    NotTight { from: String, to: String },
    SaturationShrinks(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownState(s) => write!(f, "transition mentions unknown state '{s}'"),
            Violation::EmptyTransition { from, action } => {
                write!(f, "transition {from} --{action}--> has no branches")
            }
            Violation::NonPositiveProbability { from, to } => {
                write!(f, "branch {from} -> {to} has a non-positive probability")
            }
            Violation::ProbabilitySum { from, action, sum } => {
                write!(f, "branches of {from} --{action}--> sum to {sum}, not 1")
            }
            Violation::RepeatedSuccessor { from, to } => {
                write!(f, "a transition from {from} reaches {to} twice")
            }
            Violation::SameSuccessors { from } => {
                write!(f, "two transitions from {from} share their successor set")
            }
            Violation::StopHasOutgoing => f.write_str("the stop state has outgoing transitions"),
            Violation::StopHasTag => f.write_str("the stop state carries a tag"),
            Violation::InitialTag => f.write_str("the initial tag is not {⊤}"),
            Violation::NotTight { from, to } => {
                write!(f, "tag of {to} is not the saturated tag of {from} plus the label")
            }
            Violation::SaturationShrinks(s) => {
                write!(f, "saturated tag of {s} drops facts of its tag")
            }
        }
    }
}

/// A path from the initial state with the product of its branch probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct Run<S> {
    pub states: Vec<StateId>,
    pub prob: S,
}

impl<S> fmt::Display for Run<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.states.join("→"))
    }
}

impl<S: Scalar> Dltts<S> {
    /// Assembles a system without checking it; see [`Dltts::validate`].
    pub fn from_parts(
        states: Vec<StateId>,
        initial: StateId,
        stop: StateId,
        transitions: Vec<Transition<S>>,
    ) -> Result<Self, DlttsError> {
        let mut seen = BTreeSet::new();
        for s in &states {
            if !seen.insert(s.as_str()) {
                return Err(DlttsError::DuplicateState(s.clone()));
            }
        }
        for s in [&initial, &stop] {
            if !seen.contains(s.as_str()) {
                return Err(DlttsError::UnknownState(s.clone()));
            }
        }
        let info = states
            .iter()
            .map(|s| (s.clone(), StateInfo::default()))
            .collect();
        Ok(Dltts {
            states,
            info,
            initial,
            stop,
            transitions,
        })
    }

    pub fn states(&self) -> &[StateId] {
        &self.states
    }

    pub fn contains(&self, state: &str) -> bool {
        self.info.contains_key(state)
    }

    pub fn initial(&self) -> &str {
        &self.initial
    }

    pub fn stop(&self) -> &str {
        &self.stop
    }

    pub fn transitions(&self) -> &[Transition<S>] {
        &self.transitions
    }

    pub fn transitions_mut(&mut self) -> &mut Vec<Transition<S>> {
        &mut self.transitions
    }

    pub fn outgoing<'a>(&'a self, state: &'a str) -> impl Iterator<Item = &'a Transition<S>> + 'a {
        self.transitions.iter().filter(move |t| t.from == state)
    }

    /// Branches entering `state`, with the transition they belong to.
    pub fn incoming<'a>(
        &'a self,
        state: &'a str,
    ) -> impl Iterator<Item = (&'a Transition<S>, &'a Branch<S>)> + 'a {
        self.transitions
            .iter()
            .flat_map(|t| t.branches.iter().map(move |b| (t, b)))
            .filter(move |(_, b)| b.to == state)
    }

    pub fn info(&self, state: &str) -> Option<&StateInfo<S>> {
        self.info.get(state)
    }

    pub fn info_mut(&mut self, state: &str) -> Option<&mut StateInfo<S>> {
        self.info.get_mut(state)
    }

    pub fn tag(&self, state: &str) -> Option<&Tag> {
        self.info.get(state).and_then(|i| i.tag.as_ref())
    }

    /// The saturated tag, falling back to the plain tag.
    pub fn knowledge(&self, state: &str) -> Option<&Tag> {
        self.info
            .get(state)
            .and_then(|i| i.saturated.as_ref().or(i.tag.as_ref()))
    }

    /// Replaces every outgoing transition of `state` by `(state, δ, ⊗)`.
    pub fn install_violation(&mut self, state: &str) -> Result<(), DlttsError> {
        if !self.contains(state) {
            return Err(DlttsError::UnknownState(state.to_string()));
        }
        if state == self.stop {
            return Err(DlttsError::StopState);
        }
        self.transitions.retain(|t| t.from != state);
        self.transitions.push(Transition {
            from: state.to_string(),
            action: DELTA.to_string(),
            branches: vec![Branch::new(self.stop.clone(), S::one(), Label::text(DELTA))],
        });
        Ok(())
    }

    /// States in breadth-first order from the initial state.
    pub fn reachable(&self) -> Vec<&str> {
        let mut seen = BTreeSet::from([self.initial.as_str()]);
        let mut order = vec![self.initial.as_str()];
        let mut queue = VecDeque::from([self.initial.as_str()]);
        while let Some(s) = queue.pop_front() {
            for t in self.outgoing(s) {
                for b in &t.branches {
                    if seen.insert(b.to.as_str()) {
                        order.push(b.to.as_str());
                        queue.push_back(b.to.as_str());
                    }
                }
            }
        }
        order
    }

    /// Every structural problem, empty when the system is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let one = S::one();
        let mut successor_sets: BTreeMap<&str, Vec<BTreeSet<&str>>> = BTreeMap::new();
        for t in &self.transitions {
            if !self.contains(&t.from) {
                out.push(Violation::UnknownState(t.from.clone()));
            }
            if t.from == self.stop {
                out.push(Violation::StopHasOutgoing);
            }
            if t.branches.is_empty() {
                out.push(Violation::EmptyTransition {
                    from: t.from.clone(),
                    action: t.action.clone(),
                });
                continue;
            }
            let mut targets = BTreeSet::new();
            let mut sum = S::zero();
            for b in &t.branches {
                if !self.contains(&b.to) {
                    out.push(Violation::UnknownState(b.to.clone()));
                }
                if b.prob <= S::zero() {
                    out.push(Violation::NonPositiveProbability {
                        from: t.from.clone(),
                        to: b.to.clone(),
                    });
                }
                if !targets.insert(b.to.as_str()) {
                    out.push(Violation::RepeatedSuccessor {
                        from: t.from.clone(),
                        to: b.to.clone(),
                    });
                }
                sum = sum + b.prob.clone();
            }
            if !sum.approx_eq(&one) {
                out.push(Violation::ProbabilitySum {
                    from: t.from.clone(),
                    action: t.action.clone(),
                    sum: sum.render(),
                });
            }
            let sets = successor_sets.entry(t.from.as_str()).or_default();
            if sets.contains(&targets) {
                out.push(Violation::SameSuccessors {
                    from: t.from.clone(),
                });
            }
            sets.push(targets);
        }

        if let Some(info) = self.info.get(&self.stop) {
            if info.tag.is_some() || info.saturated.is_some() {
                out.push(Violation::StopHasTag);
            }
        }
        if let Some(tag) = self.tag(&self.initial) {
            if !tag.is_empty() {
                out.push(Violation::InitialTag);
            }
        }
        for s in &self.states {
            let info = &self.info[s];
            if let (Some(tag), Some(sat)) = (&info.tag, &info.saturated) {
                if !tag.is_subset(sat) {
                    out.push(Violation::SaturationShrinks(s.clone()));
                }
            }
        }
        for t in &self.transitions {
            let Some(parent) = self.knowledge(&t.from) else {
                continue;
            };
            for b in &t.branches {
                if b.to == self.stop {
                    continue;
                }
                let Some(child) = self.tag(&b.to) else {
                    continue;
                };
                if *child != parent.union(&b.label.facts) {
                    out.push(Violation::NotTight {
                        from: t.from.clone(),
                        to: b.to.clone(),
                    });
                }
            }
        }
        out
    }

    /// Whether the stop state can be reached, with every simple run that gets there.
    pub fn reach_stop(&self) -> (bool, Vec<Run<S>>) {
        let mut runs = Vec::new();
        let mut path = vec![self.initial.clone()];
        self.collect_runs(&self.stop, &mut path, S::one(), &mut |run| runs.push(run));
        (!runs.is_empty(), runs)
    }

    /// Simple runs from the initial state that end in a state without
    /// outgoing transitions (or the stop state).
    pub fn maximal_runs(&self) -> Vec<Run<S>> {
        let mut runs = Vec::new();
        let mut path = vec![self.initial.clone()];
        self.walk(&mut path, S::one(), &mut |run| runs.push(run));
        runs
    }

    fn collect_runs(
        &self,
        target: &str,
        path: &mut Vec<StateId>,
        prob: S,
        emit: &mut impl FnMut(Run<S>),
    ) {
        let here = path.last().expect("path starts at the initial state").clone();
        if here == target && path.len() > 1 {
            emit(Run {
                states: path.clone(),
                prob,
            });
            return;
        }
        for t in self.outgoing(&here) {
            for b in &t.branches {
                if path.contains(&b.to) {
                    continue;
                }
                path.push(b.to.clone());
                self.collect_runs(target, path, prob.clone() * b.prob.clone(), emit);
                path.pop();
            }
        }
    }

    fn walk(&self, path: &mut Vec<StateId>, prob: S, emit: &mut impl FnMut(Run<S>)) {
        let here = path.last().expect("path starts at the initial state").clone();
        let mut any = false;
        for t in self.outgoing(&here) {
            for b in &t.branches {
                if path.contains(&b.to) {
                    continue;
                }
                any = true;
                path.push(b.to.clone());
                self.walk(path, prob.clone() * b.prob.clone(), emit);
                path.pop();
            }
        }
        if !any {
            emit(Run {
                states: path.clone(),
                prob,
            });
        }
    }
}

/// Builds a system and fills in tags as it goes: `τ(s0) = {⊤}`, and each
/// successor gets the saturated tag of its parent plus the branch facts.
#[derive(Clone, Debug)]
pub struct DlttsBuilder<S> {
    initial: StateId,
    stop: StateId,
    states: Vec<StateId>,
    transitions: Vec<Transition<S>>,
}

impl<S: Scalar> DlttsBuilder<S> {
    pub fn new(initial: impl Into<StateId>) -> Self {
        let initial = initial.into();
        DlttsBuilder {
            states: vec![initial.clone(), STOP.to_string()],
            initial,
            stop: STOP.to_string(),
            transitions: Vec::new(),
        }
    }

    /// Renames the stop state.
    pub fn stop(mut self, name: impl Into<StateId>) -> Self {
        let name = name.into();
        self.states.retain(|s| *s != self.stop);
        self.stop = name.clone();
        self.add_state(name);
        self
    }

    fn add_state(&mut self, s: StateId) {
        if !self.states.contains(&s) {
            self.states.push(s);
        }
    }

    pub fn state(mut self, s: impl Into<StateId>) -> Self {
        self.add_state(s.into());
        self
    }

    pub fn transition(
        mut self,
        from: impl Into<StateId>,
        action: impl Into<String>,
        branches: Vec<Branch<S>>,
    ) -> Self {
        let from = from.into();
        self.add_state(from.clone());
        for b in &branches {
            self.add_state(b.to.clone());
        }
        self.transitions.push(Transition {
            from,
            action: action.into(),
            branches,
        });
        self
    }

    /// Builds with no outside knowledge: saturation is the identity.
    pub fn build(self) -> Result<Dltts<S>, DlttsError> {
        self.finish(|tag| Ok(tag.clone()))
    }

    /// Builds, saturating each tag against `knowledge`.
    pub fn build_with(self, knowledge: &Knowledge<'_>) -> Result<Dltts<S>, DlttsError> {
        self.finish(|tag| knowledge.saturate(tag))
    }

    fn finish(
        self,
        mut saturate: impl FnMut(&Tag) -> Result<Tag, DlttsError>,
    ) -> Result<Dltts<S>, DlttsError> {
        let mut d = Dltts::from_parts(self.states, self.initial, self.stop, self.transitions)?;
        let violations = d.validate();
        if !violations.is_empty() {
            return Err(DlttsError::Invalid(violations));
        }
        let mut parent_of: BTreeMap<StateId, StateId> = BTreeMap::new();
        let init = d.initial.clone();
        let top = Tag::top();
        let sat = saturate(&top)?;
        *d.info.get_mut(&init).expect("initial state exists") = StateInfo {
            tag: Some(top),
            saturated: Some(sat),
            prob: Some(S::one()),
        };
        let mut queue = VecDeque::from([init]);
        while let Some(s) = queue.pop_front() {
            let (parent_sat, parent_prob) = {
                let i = &d.info[&s];
                (
                    i.saturated.clone().expect("queued states are tagged"),
                    i.prob.clone().expect("queued states are tagged"),
                )
            };
            let branches: Vec<Branch<S>> = d
                .outgoing(&s)
                .flat_map(|t| t.branches.iter().cloned())
                .collect();
            for b in branches {
                if b.to == d.stop {
                    continue;
                }
                let tag = parent_sat.union(&b.label.facts);
                let info = d.info.get_mut(&b.to).expect("validated successor");
                match &info.tag {
                    Some(existing) if *existing != tag => {
                        return Err(DlttsError::ConflictingTags {
                            state: b.to.clone(),
                            first: parent_of[&b.to].clone(),
                            second: s.clone(),
                        });
                    }
                    Some(_) => {}
                    None => {
                        info.saturated = Some(saturate(&tag)?);
                        info.tag = Some(tag);
                        info.prob = Some(parent_prob.clone() * b.prob.clone());
                        parent_of.insert(b.to.clone(), s.clone());
                        queue.push_back(b.to.clone());
                    }
                }
            }
        }
        Ok(d)
    }
}
