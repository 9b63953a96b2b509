use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use super::{read_file, IoError};
use crate::attack::{derive_baseline_profile, AttackerProfile};
use crate::dltts::{load_count_table, ExternalBases};
use crate::metrics::IntervalMeasureMode;
use crate::privacy::{build_rr, Epsilon, Instance, Mechanism};
use crate::scalar::parse_fraction;
use crate::schema::{load_schema, load_table, DataTable, SchemaConfig, Tuple, Value};
use crate::Rational;

#[derive(Deserialize)]
struct RawScenario {
    name: Option<String>,
    #[serde(default)]
    table: Vec<RawTable>,
    #[serde(default)]
    count_table: Vec<RawCountTable>,
    dltts: Option<RawDltts>,
    mechanism: Option<RawMechanism>,
    #[serde(default)]
    attacker: Vec<RawAttacker>,
    #[serde(default)]
    options: RawOptions,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableRole {
    /// The anonymized table: metric pairs, mechanism rows, attacks.
    Published,
    /// The original rows, for the distance check of the oracle.
    Secret,
    /// Public knowledge used by saturation.
    External,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    name: String,
    path: String,
    line_column: Option<String>,
    #[serde(default)]
    roles: Vec<TableRole>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCountTable {
    name: String,
    path: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDltts {
    path: String,
    #[serde(default = "yes")]
    saturate: bool,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMechanism {
    builtin: Option<String>,
    path: Option<String>,
    outputs: Option<Vec<String>>,
    #[serde(default)]
    input: Vec<RawInput>,
    #[serde(default)]
    distance: Vec<RawDistance>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    name: String,
    probs: Vec<String>,
    /// Row of the published table the input stands for.
    line: Option<String>,
    /// Or a bare tuple of atoms.
    values: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDistance {
    left: String,
    right: String,
    value: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttacker {
    name: String,
    #[serde(default)]
    order: Vec<String>,
    #[serde(default)]
    priors: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default)]
    objective: String,
    /// Take the priors from the published table.
    #[serde(default)]
    baseline: bool,
    /// Load this system as drawn instead of building one.
    dltts: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOptions {
    mode: Option<String>,
    epsilon: Option<String>,
    adjacency: Option<String>,
    rho_threshold: Option<String>,
    #[serde(default)]
    metric_pairs: Vec<[String; 2]>,
    #[serde(default)]
    indist: Vec<RawIndist>,
    dp_pairs: Option<Vec<[String; 2]>>,
    baseline: Option<String>,
    #[serde(default)]
    thresholds: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIndist {
    left: String,
    right: String,
    output: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdjacencyKind {
    Hamming,
    Rho,
    Table,
}

impl FromStr for AdjacencyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "hamming" => Ok(AdjacencyKind::Hamming),
            "rho" => Ok(AdjacencyKind::Rho),
            "table" => Ok(AdjacencyKind::Table),
            other => Err(format!("unknown adjacency '{other}' (hamming, rho or table)")),
        }
    }
}

impl std::fmt::Display for AdjacencyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AdjacencyKind::Hamming => "hamming",
            AdjacencyKind::Rho => "rho",
            AdjacencyKind::Table => "table",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Indist {
    pub left: String,
    pub right: String,
    pub output: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Options {
    pub mode: IntervalMeasureMode,
    pub epsilon: Option<Epsilon>,
    pub adjacency: AdjacencyKind,
    /// Distance at or below which known facts count as revealing a secret row.
    pub rho_threshold: Option<Rational>,
    pub metric_pairs: Vec<(String, String)>,
    pub indist: Vec<Indist>,
    pub dp_pairs: Option<Vec<(String, String)>>,
    pub baseline: Option<String>,
    /// Per-row thresholds used instead of the baseline's.
    pub thresholds: BTreeMap<String, Rational>,
}

/// How an attacker's system comes about.
#[derive(Clone, Debug, PartialEq)]
pub enum AttackerSource {
    Profile(AttackerProfile),
    /// Text of a system file, loaded as drawn.
    Figure { path: String, text: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackerSpec {
    pub name: String,
    pub source: AttackerSource,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MechanismSpec {
    pub mechanism: Mechanism<Rational>,
    /// Explicit distances, for the `table` adjacency.
    pub distances: BTreeMap<(String, String), Rational>,
}

/// Everything a run needs, read and cross-checked.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub schema: SchemaConfig,
    pub tables: Vec<(DataTable, Vec<TableRole>)>,
    pub externals: ExternalBases,
    pub dltts: Option<(String, String)>,
    pub saturate: bool,
    pub mechanism: Option<MechanismSpec>,
    pub attackers: Vec<AttackerSpec>,
    pub options: Options,
}

fn bad(location: impl Into<String>, message: impl ToString) -> IoError {
    IoError::Invalid {
        location: location.into(),
        message: message.to_string(),
    }
}

fn fraction(location: &str, text: &str) -> Result<Rational, IoError> {
    parse_fraction(text).ok_or_else(|| bad(location, format!("'{text}' is not a number")))
}

impl Scenario {
    /// Reads a scenario file; relative paths inside are resolved against
    /// its directory.
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = read_file(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Scenario::parse(&text, &base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, IoError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| bad("scenario", e.message()))?;
        let mut schema = load_schema(text).map_err(|e| IoError::Module {
            module: "schema",
            location: "scenario".into(),
            message: e.to_string(),
        })?;
        let resolve = |p: &str| -> PathBuf { base.join(p) };

        let mut sources = Vec::new();
        for t in &raw.table {
            if sources.iter().any(|(name, _): &(&str, String)| *name == t.name) {
                return Err(bad("table", format!("'{}' declared twice", t.name)));
            }
            sources.push((t.name.as_str(), read_file(&resolve(&t.path))?));
        }
        let load_all = |sig: &crate::schema::Signature| -> Result<Vec<(DataTable, Vec<TableRole>)>, IoError> {
            raw.table
                .iter()
                .zip(&sources)
                .map(|(t, (_, data))| {
                    let table = load_table(&t.name, data, sig, t.line_column.as_deref()).map_err(|e| IoError::Module {
                        module: "schema",
                        location: t.path.clone(),
                        message: e.to_string(),
                    })?;
                    Ok((table, t.roles.clone()))
                })
                .collect()
        };
        // numerical normalizers default to the spread seen in the tables,
        // so the tables are read once to find it and again to carry it
        let first = load_all(&schema.signature)?;
        schema
            .signature
            .settle_normalizers(first.iter().map(|(t, _)| t))
            .map_err(|e| IoError::Module {
                module: "schema",
                location: "normalizers".into(),
                message: e.to_string(),
            })?;
        let tables = load_all(&schema.signature)?;
        let sig = &schema.signature;
        for role in [TableRole::Published, TableRole::Secret] {
            if tables.iter().filter(|(_, r)| r.contains(&role)).count() > 1 {
                return Err(bad("table", format!("more than one {role:?} table").to_lowercase()));
            }
        }

        let mut externals = ExternalBases {
            relations: tables
                .iter()
                .filter(|(_, r)| r.contains(&TableRole::External))
                .map(|(t, _)| t.clone())
                .collect(),
            counts: Vec::new(),
        };
        for c in &raw.count_table {
            let data = read_file(&resolve(&c.path))?;
            externals
                .counts
                .push(load_count_table(&c.name, &data, sig).map_err(|e| IoError::Module {
                    module: "dltts",
                    location: c.path.clone(),
                    message: e.to_string(),
                })?);
        }

        let dltts = match &raw.dltts {
            Some(d) => Some((d.path.clone(), read_file(&resolve(&d.path))?)),
            None => None,
        };

        let published = tables
            .iter()
            .find(|(_, r)| r.contains(&TableRole::Published))
            .map(|(t, _)| t);

        let mechanism = match raw.mechanism {
            Some(m) => Some(load_mechanism(m, published, base)?),
            None => None,
        };

        let mut attackers = Vec::new();
        for a in &raw.attacker {
            if attackers.iter().any(|x: &AttackerSpec| x.name == a.name) {
                return Err(bad("attacker", format!("'{}' declared twice", a.name)));
            }
            let source = if let Some(p) = &a.dltts {
                AttackerSource::Figure {
                    path: p.clone(),
                    text: read_file(&resolve(p))?,
                }
            } else {
                AttackerSource::Profile(attacker_profile(a, &schema, published)?)
            };
            attackers.push(AttackerSpec {
                name: a.name.clone(),
                source,
            });
        }

        let options = load_options(raw.options)?;
        if let Some(b) = &options.baseline {
            if !attackers.iter().any(|a| a.name == *b) {
                return Err(IoError::Unresolved {
                    kind: "attacker",
                    name: b.clone(),
                });
            }
        }
        if options.rho_threshold.is_some() && !tables.iter().any(|(_, r)| r.contains(&TableRole::Secret)) {
            return Err(bad("options", "rho_threshold needs a secret table"));
        }
        for (l, r) in &options.metric_pairs {
            let table = published.ok_or_else(|| bad("options", "metric pairs need a published table"))?;
            for line in [l, r] {
                if table.row(line).is_none() {
                    return Err(IoError::Unresolved {
                        kind: "row",
                        name: line.clone(),
                    });
                }
            }
        }
        if let Some(m) = &mechanism {
            for i in &options.indist {
                for name in [&i.left, &i.right] {
                    m.mechanism.input_index(name).map_err(|e| bad("options.indist", e))?;
                }
                m.mechanism.output_index(&i.output).map_err(|e| bad("options.indist", e))?;
            }
        } else if !options.indist.is_empty() {
            return Err(bad("options.indist", "no mechanism"));
        }

        Ok(Scenario {
            name: raw.name.unwrap_or_else(|| "scenario".into()),
            schema,
            tables,
            externals,
            dltts,
            saturate: raw.dltts.is_none_or(|d| d.saturate),
            mechanism,
            attackers,
            options,
        })
    }

    pub fn table_with(&self, role: TableRole) -> Option<&DataTable> {
        self.tables
            .iter()
            .find(|(_, r)| r.contains(&role))
            .map(|(t, _)| t)
    }

    pub fn attacker(&self, name: &str) -> Result<&AttackerSpec, IoError> {
        self.attackers
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| IoError::Unresolved {
                kind: "attacker",
                name: name.to_string(),
            })
    }
}

fn load_mechanism(
    raw: RawMechanism,
    published: Option<&DataTable>,
    base: &Path,
) -> Result<MechanismSpec, IoError> {
    let raw = match raw.path {
        Some(p) => {
            let text = read_file(&base.join(&p))?;
            let inner: RawMechanism = toml::from_str(&text).map_err(|e| bad(p.clone(), e.message()))?;
            if inner.path.is_some() {
                return Err(bad(p, "a mechanism file cannot point to another"));
            }
            inner
        }
        None => raw,
    };
    let mut distances = BTreeMap::new();
    for d in &raw.distance {
        distances.insert((d.left.clone(), d.right.clone()), fraction("mechanism.distance", &d.value)?);
    }
    if let Some(b) = &raw.builtin {
        if b != "randomized-response" {
            return Err(bad("mechanism", format!("unknown builtin '{b}'")));
        }
        return Ok(MechanismSpec {
            mechanism: build_rr::<Rational>().mechanism,
            distances,
        });
    }
    let outputs = raw.outputs.ok_or_else(|| bad("mechanism", "missing outputs"))?;
    let mut inputs = Vec::new();
    let mut rows = Vec::new();
    for i in raw.input {
        let inst = match (&i.line, &i.values) {
            (Some(line), None) => {
                let table = published.ok_or_else(|| bad("mechanism", "inputs by row need a published table"))?;
                let tuple = table.tuple_by_line(line).ok_or_else(|| IoError::Unresolved {
                    kind: "row",
                    name: line.clone(),
                })?;
                Instance::with_tuple(&i.name, tuple)
            }
            (None, Some(values)) => Instance::with_tuple(
                &i.name,
                Tuple::untyped(values.iter().map(|v| Value::atom(v.as_str())).collect()),
            ),
            (None, None) => Instance::named(&i.name),
            (Some(_), Some(_)) => return Err(bad("mechanism", format!("input '{}' has both line and values", i.name))),
        };
        inputs.push(inst);
        rows.push(
            i.probs
                .iter()
                .map(|p| fraction("mechanism.input", p))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    let mechanism = Mechanism::new(inputs, outputs, rows).map_err(|e| IoError::Module {
        module: "privacy",
        location: "mechanism".into(),
        message: e.to_string(),
    })?;
    Ok(MechanismSpec { mechanism, distances })
}

fn attacker_profile(
    a: &RawAttacker,
    schema: &SchemaConfig,
    published: Option<&DataTable>,
) -> Result<AttackerProfile, IoError> {
    let location = format!("attacker {}", a.name);
    let attack_err = |e: crate::attack::AttackError| IoError::Module {
        module: "attack",
        location: location.clone(),
        message: e.to_string(),
    };
    let sig = &schema.signature;
    if a.baseline {
        let table = published.ok_or_else(|| bad(&location, "a baseline needs a published table"))?;
        let mut p = derive_baseline_profile(table, &a.name);
        if !a.order.is_empty() {
            // checks the order only
            AttackerProfile::new(sig, &a.name, a.order.clone(), BTreeMap::new(), "").map_err(attack_err)?;
            p.attribute_order = a.order.clone();
        }
        if !a.objective.is_empty() {
            p.objective = a.objective.clone();
        }
        return Ok(p);
    }
    let mut priors = BTreeMap::new();
    for (column, table) in &a.priors {
        let col = sig.column(column).ok_or_else(|| IoError::Unresolved {
            kind: "column",
            name: column.clone(),
        })?;
        let mut entries = Vec::new();
        for (text, p) in table {
            let v = Value::parse_cell(text, col, sig.taxonomies()).map_err(|e| bad(&location, e))?;
            entries.push((v, fraction(&location, p)?));
        }
        priors.insert(column.clone(), entries);
    }
    AttackerProfile::new(sig, &a.name, a.order.clone(), priors, &a.objective).map_err(attack_err)
}

fn load_options(raw: RawOptions) -> Result<Options, IoError> {
    let mode = match raw.mode {
        Some(m) => m.parse().map_err(|e| bad("options.mode", e))?,
        None => IntervalMeasureMode::default(),
    };
    let epsilon = raw
        .epsilon
        .map(|e| e.parse::<Epsilon>().map_err(|m| bad("options.epsilon", m)))
        .transpose()?;
    let adjacency = match raw.adjacency {
        Some(a) => a.parse().map_err(|e| bad("options.adjacency", e))?,
        None => AdjacencyKind::Hamming,
    };
    let rho_threshold = raw
        .rho_threshold
        .map(|t| fraction("options.rho_threshold", &t))
        .transpose()?;
    let thresholds = raw
        .thresholds
        .iter()
        .map(|(l, t)| Ok((l.clone(), fraction("options.thresholds", t)?)))
        .collect::<Result<_, IoError>>()?;
    let pair = |[a, b]: [String; 2]| (a, b);
    Ok(Options {
        mode,
        epsilon,
        adjacency,
        rho_threshold,
        metric_pairs: raw.metric_pairs.into_iter().map(pair).collect(),
        indist: raw
            .indist
            .into_iter()
            .map(|i| Indist {
                left: i.left,
                right: i.right,
                output: i.output,
            })
            .collect(),
        dp_pairs: raw.dp_pairs.map(|ps| ps.into_iter().map(pair).collect()),
        baseline: raw.baseline,
        thresholds,
    })
}
