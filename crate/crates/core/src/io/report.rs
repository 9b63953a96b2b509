use std::collections::BTreeMap;

use serde::Serialize;

use super::scenario::{AdjacencyKind, AttackerSource, Scenario, TableRole};
use super::text::read_dltts;
use super::IoError;
use crate::attack::{
    apply_strategy_with, attack_success_points, baseline_thresholds, build_attack_dltts,
    discrepancies, threshold_report, AttackDltts, Switch,
};
use crate::dltts::{Dltts, Knowledge, Oracle, OracleVerdict};
use crate::metrics::{hamming, MetricContext, IntervalMeasureMode};
use crate::privacy::{
    check_dp, is_eps_indistinguishable, min_dp_epsilon, min_eps_scaled_indist, min_indist_epsilon,
    min_ldp_epsilon, Adjacency, EpsilonResult,
};
use crate::scalar::Scalar;
use crate::schema::{type_compatible, Tuple};
use crate::Rational;

pub const TOOL: &str = concat!("dltts ", env!("CARGO_PKG_VERSION"));

/// Everything a scenario run found. Probabilities and distances are exact
/// fractions; ε values carry an exact form where one exists.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub tool: String,
    pub scenario: String,
    pub mode: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub metric: Vec<MetricEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dltts: Option<DlttsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<MechanismSection>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub attack: Vec<AttackSection>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub strategy: Vec<StrategySection>,
}

impl Report {
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("reports serialize")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricEntry {
    pub left: String,
    pub right: String,
    /// `absent` when the rows are uncomparable.
    pub hamming: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_bar: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub d_vector: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DlttsSection {
    pub source: String,
    pub saturated: bool,
    pub states: usize,
    pub stop_reachable: bool,
    pub verdicts: Vec<VerdictEntry>,
    pub runs: Vec<RunEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerdictEntry {
    pub state: String,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunEntry {
    pub run: String,
    pub prob: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsilonEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    pub decimal: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub both_zero: bool,
}

impl From<EpsilonResult> for EpsilonEntry {
    fn from(r: EpsilonResult) -> Self {
        EpsilonEntry {
            exact: r.epsilon.exact_text(),
            decimal: r.epsilon.decimal_text(),
            witness: r.witness.map(|w| w.to_string()),
            both_zero: r.both_zero,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MechanismSection {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub adjacency: String,
    pub ldp: EpsilonEntry,
    pub dp: EpsilonEntry,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dp_check: Option<DpCheck>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub indist: Vec<IndistEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DpCheck {
    pub epsilon: String,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndistEntry {
    pub left: String,
    pub right: String,
    pub output: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holds_at_epsilon: Option<bool>,
    pub epsilon: EpsilonEntry,
    /// ε per unit of distance under the adjacency.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaled: Option<EpsilonEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackSection {
    pub name: String,
    pub source: String,
    pub discrepancies: Vec<String>,
    pub max_pr: BTreeMap<String, String>,
    pub thresholds: Vec<ThresholdLine>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdLine {
    pub key: String,
    pub prob: String,
    pub state: String,
    pub line: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategySection {
    pub attacker: String,
    pub baseline: String,
    /// `baseline` or `override`.
    pub thresholds_from: String,
    pub off: Vec<String>,
    pub success: Vec<String>,
    pub thresholds: BTreeMap<String, String>,
    pub decisions: Vec<DecisionEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecisionEntry {
    pub state: String,
    pub line: String,
    pub pr: String,
    pub threshold: String,
    pub switch: String,
    /// The value shown, or `refused` when switched off.
    pub response: String,
}

fn module_err(module: &'static str, location: impl Into<String>) -> impl FnOnce(String) -> IoError {
    let location = location.into();
    move |message| IoError::Module {
        module,
        location,
        message,
    }
}

fn published(sc: &Scenario) -> Result<&crate::schema::DataTable, IoError> {
    sc.table_with(TableRole::Published)
        .ok_or_else(|| IoError::Invalid {
            location: "scenario".into(),
            message: "no published table".into(),
        })
}

fn row_tuple(sc: &Scenario, line: &str) -> Result<Tuple, IoError> {
    published(sc)?
        .tuple_by_line(line)
        .ok_or_else(|| IoError::Unresolved {
            kind: "row",
            name: line.to_string(),
        })
}

/// Distances between two published rows.
pub fn metric_entry(sc: &Scenario, left: &str, right: &str, mode: IntervalMeasureMode) -> Result<MetricEntry, IoError> {
    let (t, u) = (row_tuple(sc, left)?, row_tuple(sc, right)?);
    let ctx = MetricContext::new(&sc.schema.signature, mode);
    let err = |e: crate::metrics::MetricError| module_err("metrics", format!("{left}, {right}"))(e.to_string());
    let mut entry = MetricEntry {
        left: left.to_string(),
        right: right.to_string(),
        hamming: hamming(&t, &u).map_or_else(|| "absent".into(), |h| h.to_string()),
        d_bar: None,
        rho: None,
        d_vector: Vec::new(),
    };
    if let Some(corr) = type_compatible(&t, &u) {
        let v = ctx.d_vector::<Rational>(&t, &u, &corr).map_err(err)?;
        let sum = v.iter().fold(Rational::from_ratio(0, 1), |a, x| a + x);
        entry.d_vector = v.iter().map(Scalar::render).collect();
        entry.d_bar = Some(sum.render());
        let rho = ctx
            .rho::<Rational>(std::slice::from_ref(&t), std::slice::from_ref(&u))
            .map_err(err)?;
        entry.rho = rho.map(|r| r.render());
    }
    Ok(entry)
}

/// Builds the scenario's system (saturating against the externals), runs
/// the oracle over it and collects the runs into the stop state.
pub fn analyze_dltts(sc: &Scenario) -> Result<(DlttsSection, Dltts<Rational>), IoError> {
    let (path, text) = sc.dltts.as_ref().ok_or_else(|| IoError::Invalid {
        location: "scenario".into(),
        message: "no dltts".into(),
    })?;
    let sig = &sc.schema.signature;
    let knowledge = Knowledge::new(sig, &sc.externals);
    let mut d: Dltts<Rational> = read_dltts(text, Some(sig), sc.saturate.then_some(&knowledge))
        .map_err(|e| module_err("dltts", path.clone())(e.to_string()))?;
    let secret = sc
        .table_with(TableRole::Secret)
        .map(|t| t.rows().iter().map(|r| t.tuple(r)).collect())
        .unwrap_or_default();
    let oracle = Oracle {
        sig,
        policy: &sc.schema.policy,
        secret,
        epsilon: sc.options.rho_threshold.clone(),
        metric: MetricContext::new(sig, sc.options.mode),
    };
    let verdicts = d
        .apply_oracle(&oracle)
        .map_err(|e| module_err("dltts", path.clone())(e.to_string()))?;
    let (reachable, runs) = d.reach_stop();
    let section = DlttsSection {
        source: path.clone(),
        saturated: sc.saturate,
        states: d.states().len(),
        stop_reachable: reachable,
        verdicts: verdicts
            .into_iter()
            .map(|(state, v)| {
                let (verdict, detail) = match v {
                    OracleVerdict::Continue => ("continue", None),
                    OracleVerdict::Violation { pattern } => ("violation", Some(pattern.to_string())),
                    OracleVerdict::EpsilonViolation { rho } => ("epsilon-violation", Some(format!("rho = {}", rho.render()))),
                };
                VerdictEntry {
                    state,
                    verdict: verdict.into(),
                    detail,
                }
            })
            .collect(),
        runs: runs
            .iter()
            .map(|r| RunEntry {
                run: r.to_string(),
                prob: r.prob.render(),
            })
            .collect(),
    };
    Ok((section, d))
}

fn adjacency<'a>(sc: &'a Scenario, kind: AdjacencyKind, mode: IntervalMeasureMode) -> Adjacency<'a> {
    match kind {
        AdjacencyKind::Hamming => Adjacency::Hamming,
        AdjacencyKind::Rho => Adjacency::Rho(MetricContext::new(&sc.schema.signature, mode)),
        AdjacencyKind::Table => Adjacency::Table(
            sc.mechanism
                .as_ref()
                .map(|m| m.distances.clone())
                .unwrap_or_default(),
        ),
    }
}

/// ε figures for the scenario's mechanism.
pub fn analyze_mechanism(sc: &Scenario) -> Result<MechanismSection, IoError> {
    let spec = sc.mechanism.as_ref().ok_or_else(|| IoError::Invalid {
        location: "scenario".into(),
        message: "no mechanism".into(),
    })?;
    let m = &spec.mechanism;
    let err = |e: crate::privacy::PrivacyError| module_err("privacy", "mechanism")(e.to_string());
    let adj = adjacency(sc, sc.options.adjacency, sc.options.mode);
    let pairs = sc.options.dp_pairs.as_deref();
    let dp = min_dp_epsilon(m, &adj, pairs).map_err(err)?;
    let dp_check = match &sc.options.epsilon {
        Some(e) => Some(DpCheck {
            epsilon: e.to_string(),
            holds: check_dp(m, &adj, pairs, e).map_err(err)?,
        }),
        None => None,
    };
    let mut indist = Vec::new();
    for i in &sc.options.indist {
        let plain = min_indist_epsilon(m, &i.left, &i.right, &i.output).map_err(err)?;
        let has_tuples = [&i.left, &i.right]
            .iter()
            .all(|n| m.input_index(n).is_ok_and(|k| m.inputs()[k].tuple.is_some()));
        let scaled = if has_tuples || sc.options.adjacency == AdjacencyKind::Table {
            Some(min_eps_scaled_indist(m, &i.left, &i.right, &i.output, &adj).map_err(err)?.into())
        } else {
            None
        };
        let holds_at_epsilon = match &sc.options.epsilon {
            Some(e) => Some(is_eps_indistinguishable(m, &i.left, &i.right, &i.output, e).map_err(err)?),
            None => None,
        };
        indist.push(IndistEntry {
            left: i.left.clone(),
            right: i.right.clone(),
            output: i.output.clone(),
            holds_at_epsilon,
            epsilon: plain.into(),
            scaled,
        });
    }
    Ok(MechanismSection {
        inputs: m.inputs().iter().map(|i| i.name.clone()).collect(),
        outputs: m.outputs().to_vec(),
        adjacency: sc.options.adjacency.to_string(),
        ldp: min_ldp_epsilon(m).map_err(err)?.into(),
        dp: dp.into(),
        dp_check,
        indist,
    })
}

/// The named attacker's system: loaded as drawn, or built from its profile
/// over the published table.
pub fn attack_system(sc: &Scenario, name: &str) -> Result<AttackDltts<Rational>, IoError> {
    let spec = sc.attacker(name)?;
    let location = format!("attacker {name}");
    match &spec.source {
        AttackerSource::Figure { path, text } => {
            let d: Dltts<Rational> = read_dltts(text, Some(&sc.schema.signature), None)
                .map_err(|e| module_err("dltts", path.clone())(e.to_string()))?;
            AttackDltts::new(name, d).map_err(|e| module_err("attack", path.clone())(e.to_string()))
        }
        AttackerSource::Profile(profile) => build_attack_dltts(published(sc)?, profile)
            .map_err(|e| module_err("attack", location)(e.to_string())),
    }
}

pub fn attack_section(sc: &Scenario, name: &str) -> Result<(AttackSection, AttackDltts<Rational>), IoError> {
    let a = attack_system(sc, name)?;
    let source = match &sc.attacker(name)?.source {
        AttackerSource::Figure { path, .. } => format!("loaded from {path}"),
        AttackerSource::Profile(p) if p.from_database => "built from table frequencies".into(),
        AttackerSource::Profile(_) => "built from profile".into(),
    };
    let section = AttackSection {
        name: name.to_string(),
        source,
        discrepancies: discrepancies(&a, sc.table_with(TableRole::Published))
            .iter()
            .map(ToString::to_string)
            .collect(),
        max_pr: baseline_thresholds(&a)
            .into_iter()
            .map(|(l, p)| (l, p.render()))
            .collect(),
        thresholds: threshold_report(&a)
            .into_iter()
            .map(|e| ThresholdLine {
                key: e.key(),
                prob: e.prob.render(),
                state: e.state,
                line: e.line,
            })
            .collect(),
    };
    Ok((section, a))
}

/// The strategy for `attacker` against `baseline`, once with the baseline's
/// own thresholds and, when the scenario overrides some, once more with them.
pub fn strategy_sections(sc: &Scenario, attacker: &str, baseline: &str) -> Result<Vec<StrategySection>, IoError> {
    let base = attack_system(sc, baseline)?;
    let derived = baseline_thresholds(&base);
    let mut runs = vec![("baseline", derived.clone())];
    if !sc.options.thresholds.is_empty() {
        let mut merged = derived;
        merged.extend(sc.options.thresholds.clone());
        runs.push(("override", merged));
    }
    let success: Vec<String> = {
        let a = attack_system(sc, attacker)?;
        attack_success_points(&a, &base)
            .into_iter()
            .map(|p| format!("{}:{}", p.state, p.line))
            .collect()
    };
    let mut out = Vec::new();
    for (from, thresholds) in runs {
        let mut a = attack_system(sc, attacker)?;
        let report = apply_strategy_with(&mut a, &thresholds);
        out.push(StrategySection {
            attacker: attacker.to_string(),
            baseline: baseline.to_string(),
            thresholds_from: from.to_string(),
            off: {
                let mut off: Vec<String> = report.off().into_iter().map(|(s, l)| format!("{s}:{l}")).collect();
                off.sort();
                off
            },
            success: success.clone(),
            thresholds: thresholds.iter().map(|(l, p)| (l.clone(), p.render())).collect(),
            decisions: report
                .decisions
                .iter()
                .map(|d| DecisionEntry {
                    state: d.state.clone(),
                    line: d.line.clone(),
                    pr: d.pr.render(),
                    threshold: d.threshold.render(),
                    switch: d.switch.to_string(),
                    response: match d.switch {
                        Switch::Off => "refused".into(),
                        Switch::On => a.response_value(&d.state).unwrap_or_default(),
                    },
                })
                .collect(),
        });
    }
    Ok(out)
}

/// Runs every analysis the scenario has inputs for.
pub fn run_scenario(sc: &Scenario) -> Result<Report, IoError> {
    let mode = sc.options.mode;
    let metric = sc
        .options
        .metric_pairs
        .iter()
        .map(|(l, r)| metric_entry(sc, l, r, mode))
        .collect::<Result<Vec<_>, _>>()?;
    let dltts = match &sc.dltts {
        Some(_) => Some(analyze_dltts(sc)?.0),
        None => None,
    };
    let mechanism = match &sc.mechanism {
        Some(_) => Some(analyze_mechanism(sc)?),
        None => None,
    };
    let attack = sc
        .attackers
        .iter()
        .map(|a| attack_section(sc, &a.name).map(|(s, _)| s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut strategy = Vec::new();
    if let Some(b) = &sc.options.baseline {
        for a in sc.attackers.iter().filter(|a| a.name != *b) {
            strategy.extend(strategy_sections(sc, &a.name, b)?);
        }
    }
    Ok(Report {
        tool: TOOL.to_string(),
        scenario: sc.name.clone(),
        mode: mode.to_string(),
        metric,
        dltts,
        mechanism,
        attack,
        strategy,
    })
}
