//! Attacks on a published table: attacker profiles, the query trees they
//! induce, how likely each attacker is to reach each row's sensitive value,
//! and switching responses off where an attacker beats the baseline.

mod analysis;
mod order;

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};

pub use analysis::{
    apply_strategy, apply_strategy_with, attack_success_points, baseline_thresholds,
    discrepancies, max_pr, pr_access, threshold_report, Access, Discrepancy, StrategyDecision,
    StrategyReport, SuccessPoint, ThresholdEntry,
};
pub use order::multiset_compare;

use crate::dltts::{Branch, Dltts, DlttsBuilder, DlttsError, Label, Provenance, StateId, RESPONSE};
use crate::scalar::{format_fraction, Scalar};
use crate::schema::{ColumnGroup, DataTable, SchemaError, Signature, Value};
use crate::Rational;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("column '{0}' is not a quasi-identifier")]
    NotQuasiIdentifier(String),
    #[error("priors of '{column}' sum to {sum}, not 1")]
    PriorSum { column: String, sum: String },
    #[error("prior of {value} in '{column}' is negative")]
    NegativePrior { column: String, value: String },
    #[error("prior of {value} in '{column}' given twice")]
    DuplicatePrior { column: String, value: String },
    #[error("{value} occurs in '{column}' but has prior 0")]
    ZeroPrior { column: String, value: String },
    #[error("column '{0}' is listed twice in the query order")]
    RepeatedAttribute(String),
    #[error("table has no sensitive column")]
    NoSensitiveColumn,
    #[error("table has no rows")]
    EmptyTable,
    #[error("unknown state '{0}'")]
    UnknownState(String),
    #[error("state '{state}' is not entered by the single row '{line}'")]
    NotSingleton { state: String, line: String },
    #[error("bad response at '{state}': {reason}")]
    BadResponse { state: String, reason: String },
    #[error(transparent)]
    Dltts(#[from] DlttsError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// What an attacker believes about the quasi-identifiers before asking.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackerProfile {
    pub name: String,
    /// Columns in the order the attacker queries them.
    pub attribute_order: Vec<String>,
    /// Per column, a distribution over values.
    pub priors: BTreeMap<String, Vec<(Value, Rational)>>,
    pub objective: String,
    /// Priors read off the table itself; branches built from them count
    /// as database probabilities.
    pub from_database: bool,
}

impl AttackerProfile {
    pub fn new(
        sig: &Signature,
        name: impl Into<String>,
        attribute_order: Vec<String>,
        priors: BTreeMap<String, Vec<(Value, Rational)>>,
        objective: impl Into<String>,
    ) -> Result<Self, AttackError> {
        let qid = |c: &str| match sig.column(c) {
            None => Err(AttackError::UnknownColumn(c.to_string())),
            Some(col) if col.group != ColumnGroup::QuasiIdentifier => {
                Err(AttackError::NotQuasiIdentifier(c.to_string()))
            }
            Some(_) => Ok(()),
        };
        for (i, c) in attribute_order.iter().enumerate() {
            qid(c)?;
            if attribute_order[..i].contains(c) {
                return Err(AttackError::RepeatedAttribute(c.clone()));
            }
        }
        for (column, table) in &priors {
            qid(column)?;
            let mut sum = Rational::zero();
            for (i, (v, p)) in table.iter().enumerate() {
                if *p < Rational::zero() {
                    return Err(AttackError::NegativePrior {
                        column: column.clone(),
                        value: v.to_string(),
                    });
                }
                if table[..i].iter().any(|(w, _)| w == v) {
                    return Err(AttackError::DuplicatePrior {
                        column: column.clone(),
                        value: v.to_string(),
                    });
                }
                sum += p;
            }
            if !sum.is_one() {
                return Err(AttackError::PriorSum {
                    column: column.clone(),
                    sum: format_fraction(&sum),
                });
            }
        }
        Ok(AttackerProfile {
            name: name.into(),
            attribute_order,
            priors,
            objective: objective.into(),
            from_database: false,
        })
    }

    pub fn prior(&self, column: &str, value: &Value) -> Option<&Rational> {
        self.priors
            .get(column)?
            .iter()
            .find(|(v, _)| v == value)
            .map(|(_, p)| p)
    }

    fn provenance(&self) -> Provenance {
        if self.from_database {
            Provenance::Database
        } else {
            Provenance::Belief(self.name.clone())
        }
    }
}

/// Priors equal to the empirical frequencies of each quasi-identifier
/// column, queried in table order.
pub fn derive_baseline_profile(db: &DataTable, name: impl Into<String>) -> AttackerProfile {
    let total = Rational::from_integer(db.rows().len().into());
    let mut order = Vec::new();
    let mut priors = BTreeMap::new();
    for (i, col) in db.schema().iter().enumerate() {
        if col.group != ColumnGroup::QuasiIdentifier {
            continue;
        }
        order.push(col.name.clone());
        let table: Vec<(Value, Rational)> = distinct(db, i, (0..db.rows().len()).collect())
            .into_iter()
            .map(|(v, rows)| (v, Rational::from_integer(rows.len().into()) / total.clone()))
            .collect();
        priors.insert(col.name.clone(), table);
    }
    AttackerProfile {
        name: name.into(),
        attribute_order: order,
        priors,
        objective: "any row".into(),
        from_database: true,
    }
}

/// Values of column `col` among `rows`, in order of first appearance,
/// with the rows holding each.
fn distinct(db: &DataTable, col: usize, rows: Vec<usize>) -> Vec<(Value, Vec<usize>)> {
    let mut out: Vec<(Value, Vec<usize>)> = Vec::new();
    for r in rows {
        let v = &db.rows()[r].cells[col];
        match out.iter_mut().find(|(w, _)| w == v) {
            Some((_, members)) => members.push(r),
            None => out.push((v.clone(), vec![r])),
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Switch {
    On,
    Off,
}

impl fmt::Display for Switch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Switch::On => "ON",
            Switch::Off => "OFF",
        })
    }
}

/// A system whose branch labels are sets of rows, with a switchable
/// `response(ℓ)` transition at states entered by the single row `ℓ`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackDltts<S> {
    pub name: String,
    pub dltts: Dltts<S>,
    /// `(state, row) -> switch`.
    pub switches: BTreeMap<(StateId, String), Switch>,
}

/// Reads `response(l3)=3` as `("l3", Some("3"))`.
pub fn parse_response(text: &str) -> Option<(String, Option<String>)> {
    let rest = text.trim().strip_prefix("response(")?;
    let (line, tail) = rest.split_once(')')?;
    let tail = tail.trim();
    let value = match tail.strip_prefix('=') {
        Some(v) => Some(v.trim().to_string()),
        None if tail.is_empty() => None,
        None => return None,
    };
    Some((line.trim().to_string(), value))
}

impl<S: Scalar> AttackDltts<S> {
    /// Wraps a well-formed system, with every response switched on.
    pub fn new(name: impl Into<String>, dltts: Dltts<S>) -> Result<Self, AttackError> {
        let violations = dltts.validate();
        if !violations.is_empty() {
            return Err(DlttsError::Invalid(violations).into());
        }
        let mut switches = BTreeMap::new();
        for t in dltts.transitions().iter().filter(|t| t.is_response()) {
            let bad = |reason: &str| AttackError::BadResponse {
                state: t.from.clone(),
                reason: reason.to_string(),
            };
            let [b] = t.branches.as_slice() else {
                return Err(bad("needs exactly one branch"));
            };
            if !b.prob.is_one() {
                return Err(bad("probability must be 1"));
            }
            let (line, _) = parse_response(&b.label.text)
                .ok_or_else(|| bad("label is not of the form response(row)=value"))?;
            match incoming_line(&dltts, &t.from) {
                Some(l) if l == line => {}
                _ => return Err(bad(&format!("state is not entered by the single row {line}"))),
            }
            if switches.insert((t.from.clone(), line), Switch::On).is_some() {
                return Err(bad("two responses"));
            }
        }
        Ok(AttackDltts {
            name: name.into(),
            dltts,
            switches,
        })
    }

    /// The row `ℓ` if every query branch into `state` is labeled `{ℓ}`.
    pub fn incoming_line(&self, state: &str) -> Option<String> {
        incoming_line(&self.dltts, state)
    }

    /// States entered by a single row, with that row, in state order.
    pub fn singleton_states(&self) -> Vec<(StateId, String)> {
        self.dltts
            .states()
            .iter()
            .filter_map(|s| self.incoming_line(s).map(|l| (s.clone(), l)))
            .collect()
    }

    /// The value revealed by the response at `state`, if there is one.
    pub fn response_value(&self, state: &str) -> Option<String> {
        self.dltts
            .outgoing(state)
            .find(|t| t.is_response())
            .and_then(|t| parse_response(&t.branches[0].label.text))
            .and_then(|(_, v)| v)
    }

    /// Every row named in some label.
    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .dltts
            .transitions()
            .iter()
            .flat_map(|t| t.branches.iter())
            .flat_map(|b| b.label.lines.iter().cloned())
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn switch(&self, state: &str, line: &str) -> Option<Switch> {
        self.switches
            .get(&(state.to_string(), line.to_string()))
            .copied()
    }
}

fn incoming_line<S: Scalar>(dltts: &Dltts<S>, state: &str) -> Option<String> {
    let mut line: Option<&str> = None;
    for (t, b) in dltts.incoming(state) {
        if t.is_response() {
            return None;
        }
        let l = b.label.singleton()?;
        if line.is_some_and(|prev| prev != l) {
            return None;
        }
        line = Some(l);
    }
    line.map(str::to_string)
}

/// One query level per attribute of the profile, then a uniform split
/// down to single rows; every state entered by a single row gets a
/// response revealing that row's sensitive value.
///
/// A level's probabilities come from the priors, renormalized over the
/// values still possible, when all of those values have priors; otherwise
/// from the frequencies among the rows still matching.
pub fn build_attack_dltts<S: Scalar>(
    db: &DataTable,
    profile: &AttackerProfile,
) -> Result<AttackDltts<S>, AttackError> {
    if db.rows().is_empty() {
        return Err(AttackError::EmptyTable);
    }
    let sensitive = db
        .schema()
        .iter()
        .position(|c| c.group == ColumnGroup::Sensitive)
        .ok_or(AttackError::NoSensitiveColumn)?;
    let columns = profile
        .attribute_order
        .iter()
        .map(|c| {
            db.column_index(c)
                .ok_or_else(|| AttackError::UnknownColumn(c.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut builder = DlttsBuilder::<S>::new("s0");
    let mut fresh = 1usize;
    let mut queue = std::collections::VecDeque::from([("s0".to_string(), (0..db.rows().len()).collect::<Vec<_>>(), 0usize)]);
    while let Some((state, rows, depth)) = queue.pop_front() {
        if rows.len() == 1 && depth > 0 {
            let row = &db.rows()[rows[0]];
            let text = format!("response({})={}", row.line_id, row.cells[sensitive]);
            builder = builder.transition(
                state.clone(),
                RESPONSE,
                vec![Branch::new(
                    format!("{state}'"),
                    S::one(),
                    Label::text(text).with_provenance(Provenance::Database),
                )],
            );
        }
        let mut branches = Vec::new();
        let action;
        if let Some(&col) = columns.get(depth) {
            let name = &profile.attribute_order[depth];
            action = name.clone();
            let groups = distinct(db, col, rows);
            let (probs, provenance) = level(profile, name, &groups)?;
            for ((value, members), p) in groups.into_iter().zip(probs) {
                let next = format!("s{fresh}");
                fresh += 1;
                let lines = members.iter().map(|&r| db.rows()[r].line_id.clone());
                let label = Label::text(format!("{name}={value}"))
                    .with_lines(lines)
                    .with_provenance(provenance.clone());
                branches.push(Branch::new(next.clone(), p, label));
                queue.push_back((next, members, depth + 1));
            }
        } else if rows.len() > 1 || depth == 0 {
            action = "pick".to_string();
            let p = S::one() / S::from_usize(rows.len());
            for r in rows {
                let next = format!("s{fresh}");
                fresh += 1;
                let label = Label::text("")
                    .with_lines([db.rows()[r].line_id.clone()])
                    .with_provenance(Provenance::Database);
                branches.push(Branch::new(next.clone(), p.clone(), label));
                queue.push_back((next, vec![r], depth + 1));
            }
        } else {
            continue;
        }
        builder = builder.transition(state, action, branches);
    }
    AttackDltts::new(profile.name.clone(), builder.build()?)
}

fn level<S: Scalar>(
    profile: &AttackerProfile,
    column: &str,
    groups: &[(Value, Vec<usize>)],
) -> Result<(Vec<S>, Provenance), AttackError> {
    if groups.len() == 1 {
        return Ok((vec![S::one()], Provenance::Database));
    }
    let priors: Option<Vec<&Rational>> = groups
        .iter()
        .map(|(v, _)| profile.prior(column, v))
        .collect();
    if let Some(priors) = priors {
        let sum = priors.iter().fold(Rational::zero(), |a, p| a + *p);
        if !sum.is_zero() {
            if let Some(((v, _), _)) = groups.iter().zip(&priors).find(|(_, p)| p.is_zero()) {
                return Err(AttackError::ZeroPrior {
                    column: column.to_string(),
                    value: v.to_string(),
                });
            }
            let probs = priors
                .into_iter()
                .map(|p| S::from_rational(&(p / &sum)))
                .collect();
            return Ok((probs, profile.provenance()));
        }
    }
    let total: usize = groups.iter().map(|(_, rows)| rows.len()).sum();
    let probs = groups
        .iter()
        .map(|(_, rows)| S::from_usize(rows.len()) / S::from_usize(total))
        .collect();
    Ok((probs, Provenance::Database))
}

#[cfg(test)]
pub(crate) mod fixtures {
    //! The enterprise questionnaire example.
    use super::*;
    use crate::schema::{load_schema, load_table};

    pub const CONFIG: &str = r#"
[[column]]
name = "Sex"
class = "nominal"
group = "quasi-identifier"

[[column]]
name = "Age"
class = "numerval"
group = "quasi-identifier"

[[column]]
name = "Response"
class = "numerval"
group = "sensitive"
"#;

    pub const TABLE: &str = "\
id,Sex,Age,Response
l1,F,[30-40],1
l2,F,[30-40],8
l3,M,[30-40],3
l4,M,[40-50],7
";

    pub fn signature() -> Signature {
        load_schema(CONFIG).unwrap().signature
    }

    pub fn table(sig: &Signature) -> DataTable {
        load_table("enterprise", TABLE, sig, Some("id")).unwrap()
    }

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    pub fn profile(sig: &Signature, name: &str, sex: [(&str, Rational); 2], age: [Rational; 2]) -> AttackerProfile {
        let mut priors = BTreeMap::new();
        priors.insert(
            "Sex".to_string(),
            sex.iter().map(|(v, p)| (Value::atom(*v), p.clone())).collect(),
        );
        priors.insert(
            "Age".to_string(),
            vec![
                (Value::interval(30, 40).unwrap(), age[0].clone()),
                (Value::interval(40, 50).unwrap(), age[1].clone()),
            ],
        );
        AttackerProfile::new(sig, name, vec!["Sex".into(), "Age".into()], priors, "").unwrap()
    }

    pub fn attacker_b(sig: &Signature) -> AttackerProfile {
        profile(sig, "B", [("M", r(4, 5)), ("F", r(1, 5))], [r(3, 4), r(1, 4)])
    }

    pub fn attacker_a(sig: &Signature) -> AttackerProfile {
        profile(sig, "A", [("F", r(4, 5)), ("M", r(1, 5))], [r(7, 10), r(3, 10)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn baseline_profile_is_empirical() {
        let sig = fixtures::signature();
        let db = fixtures::table(&sig);
        let c = derive_baseline_profile(&db, "C");
        assert_eq!(c.attribute_order, vec!["Sex", "Age"]);
        assert_eq!(c.prior("Sex", &Value::atom("F")), Some(&r(1, 2)));
        assert_eq!(c.prior("Sex", &Value::atom("M")), Some(&r(1, 2)));
        assert_eq!(c.prior("Age", &Value::interval(30, 40).unwrap()), Some(&r(3, 4)));
        assert_eq!(c.prior("Age", &Value::interval(40, 50).unwrap()), Some(&r(1, 4)));

        let one = crate::schema::load_table("one", "id,Sex,Age,Response\nl1,F,[30-40],1\n", &sig, Some("id")).unwrap();
        let p = derive_baseline_profile(&one, "C");
        assert!(p.priors.values().all(|t| t.len() == 1 && t[0].1 == r(1, 1)));
    }

    #[test]
    fn profile_validation() {
        let sig = fixtures::signature();
        let mut priors = BTreeMap::new();
        priors.insert("Sex".to_string(), vec![(Value::atom("M"), r(1, 2))]);
        assert!(matches!(
            AttackerProfile::new(&sig, "X", vec!["Sex".into()], priors.clone(), ""),
            Err(AttackError::PriorSum { .. })
        ));
        priors.clear();
        assert_eq!(
            AttackerProfile::new(&sig, "X", vec!["Response".into()], priors.clone(), ""),
            Err(AttackError::NotQuasiIdentifier("Response".into()))
        );
        assert_eq!(
            AttackerProfile::new(&sig, "X", vec!["Sex".into(), "Sex".into()], priors, ""),
            Err(AttackError::RepeatedAttribute("Sex".into()))
        );
    }

    #[test]
    fn builds_attacker_b_tree() {
        let sig = fixtures::signature();
        let db = fixtures::table(&sig);
        let b: AttackDltts<Rational> = build_attack_dltts(&db, &fixtures::attacker_b(&sig)).unwrap();
        let d = &b.dltts;
        let root: Vec<_> = d.outgoing("s0").collect();
        assert_eq!(root.len(), 1);
        let male = root[0]
            .branches
            .iter()
            .find(|br| br.label.text == "Sex=M")
            .unwrap();
        assert_eq!(male.prob, r(4, 5));
        assert_eq!(male.label.lines, ["l3", "l4"].map(String::from).into());
        assert_eq!(male.label.provenance, Some(Provenance::Belief("B".into())));
        let ages: Vec<_> = d.outgoing(&male.to).flat_map(|t| t.branches.iter()).collect();
        assert_eq!(ages.len(), 2);
        assert_eq!((ages[0].prob.clone(), ages[0].label.singleton()), (r(3, 4), Some("l3")));
        assert_eq!((ages[1].prob.clone(), ages[1].label.singleton()), (r(1, 4), Some("l4")));
        // female side: certain age, then an even split
        let female = root[0].branches.iter().find(|br| br.label.text == "Sex=F").unwrap();
        let age = &d.outgoing(&female.to).next().unwrap().branches;
        assert_eq!(age.len(), 1);
        assert_eq!(age[0].prob, r(1, 1));
        assert_eq!(age[0].label.provenance, Some(Provenance::Database));
        let split = &d.outgoing(&age[0].to).next().unwrap().branches;
        assert_eq!(split.iter().map(|b| b.prob.clone()).collect::<Vec<_>>(), vec![r(1, 2), r(1, 2)]);
        // one switch per row, at the single-row states
        assert_eq!(b.switches.len(), 4);
        assert!(b.switches.values().all(|s| *s == Switch::On));
        assert_eq!(b.response_value(&ages[0].to).as_deref(), Some("3"));
    }

    #[test]
    fn baseline_tree_uses_database_probabilities() {
        let sig = fixtures::signature();
        let db = fixtures::table(&sig);
        let mut c = derive_baseline_profile(&db, "C");
        c.attribute_order = vec!["Age".into(), "Sex".into()];
        let t: AttackDltts<Rational> = build_attack_dltts(&db, &c).unwrap();
        assert!(t
            .dltts
            .transitions()
            .iter()
            .flat_map(|t| t.branches.iter())
            .all(|b| b.label.provenance == Some(Provenance::Database)));
        assert_eq!(max_pr(&t, "l1"), r(3, 16));
        assert_eq!(max_pr(&t, "l3"), r(3, 8));
        assert_eq!(max_pr(&t, "l4"), r(1, 4));
    }

    #[test]
    fn one_row_one_attribute() {
        let sig = fixtures::signature();
        let db = crate::schema::load_table("one", "id,Sex,Age,Response\nl1,F,[30-40],1\n", &sig, Some("id")).unwrap();
        let mut p = derive_baseline_profile(&db, "C");
        p.attribute_order.truncate(1);
        let t: AttackDltts<Rational> = build_attack_dltts(&db, &p).unwrap();
        assert_eq!(t.dltts.transitions().len(), 2);
        assert_eq!(t.switches.len(), 1);
        let runs = t.dltts.maximal_runs();
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].states, vec!["s0", "s1", "s1'"]);
        assert_eq!(max_pr(&t, "l1"), r(1, 1));
    }

    #[test]
    fn build_errors() {
        let sig = fixtures::signature();
        let db = fixtures::table(&sig);
        let mut p = derive_baseline_profile(&db, "C");
        p.attribute_order = vec!["Nope".into()];
        assert_eq!(
            build_attack_dltts::<Rational>(&db, &p).unwrap_err(),
            AttackError::UnknownColumn("Nope".into())
        );
        let mut z = fixtures::profile(&sig, "Z", [("M", r(1, 1)), ("F", r(0, 1))], [r(1, 2), r(1, 2)]);
        z.attribute_order = vec!["Sex".into()];
        assert!(matches!(
            build_attack_dltts::<Rational>(&db, &z),
            Err(AttackError::ZeroPrior { .. })
        ));
    }

    #[test]
    fn response_labels() {
        assert_eq!(parse_response("response(l3)=3"), Some(("l3".into(), Some("3".into()))));
        assert_eq!(parse_response("response(l1)= 1"), Some(("l1".into(), Some("1".into()))));
        assert_eq!(parse_response("response(l1)"), Some(("l1".into(), None)));
        assert_eq!(parse_response("respond(l1)"), None);
        assert_eq!(parse_response("response(l1) x"), None);
    }
}
