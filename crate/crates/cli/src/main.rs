use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dltts::io::{
    analyze_dltts, analyze_mechanism, attack_section, attack_system, export_attack_dot, export_dot,
    metric_entry, run_scenario, strategy_sections, AdjacencyKind, IoError, Report, Scenario, TOOL,
};
use dltts::metrics::IntervalMeasureMode;
use dltts::privacy::Epsilon;
use dltts::scalar::parse_fraction;
use dltts::Rational;

#[derive(Parser)]
#[command(name = "dltts", version, about = "Privacy analysis of anonymized tables")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Scenario file.
    #[arg(long, global = true, default_value = "scenario.toml")]
    scenario: PathBuf,
    /// Interval measure: integer-set or paper-compat.
    #[arg(long, global = true)]
    mode: Option<IntervalMeasureMode>,
    /// ε as a fraction or `ln(frac)`.
    #[arg(long, global = true)]
    epsilon: Option<Epsilon>,
    /// hamming, rho or table.
    #[arg(long, global = true)]
    adjacency: Option<AdjacencyKind>,
    /// Worker threads for the ε searches.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write Graphviz text here.
    #[arg(long, global = true)]
    dot: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Distances between two published rows.
    Metric {
        #[arg(long, num_args = 2, value_names = ["LEFT", "RIGHT"])]
        pair: Vec<String>,
    },
    /// Saturate, run the oracle, and report everything the scenario asks for.
    Analyze {
        /// Exit 1 unless the stop state is reachable.
        #[arg(long)]
        require_stop: bool,
    },
    /// ε figures of the scenario's mechanism; exit 1 if it misses `--epsilon`.
    DpCheck,
    /// Build or load an attacker's system and report its thresholds.
    Attack {
        #[arg(long)]
        attacker: String,
    },
    /// Decide which responses to switch off against a baseline.
    Strategy {
        #[arg(long)]
        attacker: String,
        #[arg(long)]
        baseline: Option<String>,
        /// Per-row override such as `l4=3/16`.
        #[arg(long = "threshold", value_parser = parse_threshold)]
        thresholds: Vec<(String, Rational)>,
    },
    /// Graphviz text of the scenario's system, or of an attacker's.
    ExportDot {
        #[arg(long)]
        attacker: Option<String>,
    },
    /// Read and cross-check the scenario.
    Validate,
}

fn parse_threshold(s: &str) -> Result<(String, Rational), String> {
    let (line, value) = s.split_once('=').ok_or("expected LINE=FRACTION")?;
    let v = parse_fraction(value).ok_or_else(|| format!("'{value}' is not a fraction"))?;
    Ok((line.trim().to_string(), v))
}

enum Failure {
    Input(String),
    Absent(String),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Input(e.to_string())
    }
}

fn write_dot(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

fn empty_report(sc: &Scenario) -> Report {
    Report {
        tool: TOOL.to_string(),
        scenario: sc.name.clone(),
        mode: sc.options.mode.to_string(),
        metric: Vec::new(),
        dltts: None,
        mechanism: None,
        attack: Vec::new(),
        strategy: Vec::new(),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = cli.global;
    if let Some(n) = g.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Input(e.to_string()))?;
    }
    let mut sc = Scenario::load(&g.scenario)?;
    if let Some(m) = g.mode {
        sc.options.mode = m;
    }
    if let Some(e) = g.epsilon {
        sc.options.epsilon = Some(e);
    }
    if let Some(a) = g.adjacency {
        sc.options.adjacency = a;
    }
    let mut report = empty_report(&sc);
    match cli.command {
        Command::Validate => {
            if sc.dltts.is_some() {
                analyze_dltts(&sc)?;
            }
            for a in &sc.attackers {
                attack_system(&sc, &a.name)?;
            }
            println!("{}: ok", g.scenario.display());
            return Ok(());
        }
        Command::Metric { pair } => {
            let pairs = match pair.as_slice() {
                [l, r] => vec![(l.clone(), r.clone())],
                _ => sc.options.metric_pairs.clone(),
            };
            if pairs.is_empty() {
                return Err(Failure::Input("no pair given and none in the scenario".into()));
            }
            for (l, r) in pairs {
                report.metric.push(metric_entry(&sc, &l, &r, sc.options.mode)?);
            }
        }
        Command::Analyze { require_stop } => {
            report = run_scenario(&sc)?;
            if let Some(path) = &g.dot {
                if sc.dltts.is_some() {
                    write_dot(path, &export_dot(&analyze_dltts(&sc)?.1))?;
                }
            }
            print!("{}", report.to_text());
            if require_stop && !report.dltts.as_ref().is_some_and(|d| d.stop_reachable) {
                return Err(Failure::Absent("stop state not reachable".into()));
            }
            return Ok(());
        }
        Command::DpCheck => {
            let m = analyze_mechanism(&sc)?;
            let fails = m.dp_check.as_ref().is_some_and(|c| !c.holds);
            report.mechanism = Some(m);
            print!("{}", report.to_text());
            if fails {
                return Err(Failure::Absent("mechanism is not ε-DP at the given ε".into()));
            }
            return Ok(());
        }
        Command::Attack { attacker } => {
            let (section, a) = attack_section(&sc, &attacker)?;
            if let Some(path) = &g.dot {
                write_dot(path, &export_attack_dot(&a))?;
            }
            report.attack.push(section);
        }
        Command::Strategy {
            attacker,
            baseline,
            thresholds,
        } => {
            sc.options.thresholds.extend(thresholds);
            let baseline = baseline
                .or_else(|| sc.options.baseline.clone())
                .ok_or_else(|| Failure::Input("no baseline given and none in the scenario".into()))?;
            report.strategy = strategy_sections(&sc, &attacker, &baseline)?;
            if let Some(path) = &g.dot {
                let mut a = attack_system(&sc, &attacker)?;
                let last = report.strategy.last().expect("at least the baseline run");
                let chosen = last
                    .thresholds
                    .iter()
                    .map(|(l, p)| (l.clone(), parse_fraction(p).expect("rendered fraction")))
                    .collect();
                dltts::attack::apply_strategy_with(&mut a, &chosen);
                write_dot(path, &export_attack_dot(&a))?;
            }
        }
        Command::ExportDot { attacker } => {
            let text = match attacker {
                Some(name) => export_attack_dot(&attack_system(&sc, &name)?),
                None => export_dot(&analyze_dltts(&sc)?.1),
            };
            match &g.dot {
                Some(path) => write_dot(path, &text)?,
                None => print!("{text}"),
            }
            return Ok(());
        }
    }
    print!("{}", report.to_text());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Absent(m)) => {
            eprintln!("{m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
