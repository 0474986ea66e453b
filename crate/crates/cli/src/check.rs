//! `squall check`: build one model and check a list of properties on it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::Args;
use thiserror::Error;

use squall::builder::{build_model, BuildOptions, DtmcOverlap};
use squall::checkers::{check, CheckOptions, CheckResult, Extended, Values};
use squall::explicit::read_explicit;
use squall::model::{Model, ModelKind};
use squall::prism::{parse_bindings, parse_program, substitute_constants, PrismError, Program};
use squall::props::{parse_properties, parse_property, Property};
use squall::solvers::{BellmanMethod, LinearMethod, SolveOptions};
use squall::{Rational, Value};

use crate::exit;
use crate::report::{approx, display_value, json_value, Palette, ResultRecord, Stats};

#[derive(Args, Debug, Clone)]
pub struct CheckArgs {
    /// PRISM-language model file.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["explicit", "kind"])]
    pub prism: Option<PathBuf>,
    /// Constant bindings, `N=3,p=0.5`; may be repeated.
    #[arg(long = "const", value_name = "N=V,...")]
    pub consts: Vec<String>,
    /// Explicit transition and label files.
    #[arg(long, num_args = 2, value_names = ["TRA", "LAB"], requires = "kind")]
    pub explicit: Option<Vec<PathBuf>>,
    /// Model kind of an explicit model: dtmc, ctmc, mdp or ma.
    #[arg(long)]
    pub kind: Option<ModelKind>,
    /// A property; may be repeated.
    #[arg(long)]
    pub prop: Vec<String>,
    /// A file with one property per line.
    #[arg(long, value_name = "FILE")]
    pub props: Option<PathBuf>,
    #[arg(long, default_value = "sparse", value_parser = ["sparse"])]
    pub engine: String,
    /// Rational arithmetic throughout.
    #[arg(long)]
    pub exact: bool,
    #[arg(long, default_value_t = 1e-6)]
    pub precision: f64,
    /// Use an absolute instead of a relative convergence criterion.
    #[arg(long)]
    pub absolute: bool,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iterations: usize,
    #[arg(long, value_name = "METHOD")]
    pub linear_solver: Option<LinearMethod>,
    #[arg(long, value_name = "METHOD")]
    pub bellman_solver: Option<BellmanMethod>,
    /// Write the optimal choices for each property to FILE.
    #[arg(long, value_name = "FILE")]
    pub export_scheduler: Option<PathBuf>,
    /// Write the results as JSON to FILE.
    #[arg(long, value_name = "FILE")]
    pub export_result: Option<PathBuf>,
    /// Print JSON results instead of text.
    #[arg(long)]
    pub json: bool,
    /// Wall-clock limit in seconds for the whole run.
    #[arg(long, value_name = "SECONDS")]
    pub timeout: Option<f64>,
    /// Treat min/max on DTMCs and CTMCs as a warning.
    #[arg(long)]
    pub ignore_direction: bool,
    /// Fail on deadlock states instead of adding self-loops.
    #[arg(long)]
    pub no_fix_deadlocks: bool,
    /// Resolve overlapping DTMC commands uniformly instead of failing.
    #[arg(long)]
    pub uniform_overlap: bool,
}

#[derive(Debug, Error)]
enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Model(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => exit::USAGE,
            Failure::Model(_) => exit::MODEL,
        }
    }
}

pub fn run(args: CheckArgs) -> i32 {
    if let Some(limit) = args.timeout {
        if !(limit > 0.0 && limit.is_finite()) {
            eprintln!("error: --timeout must be a positive number of seconds");
            return exit::USAGE;
        }
        let json = args.json;
        std::thread::spawn(move || {
            std::thread::sleep(Duration::from_secs_f64(limit));
            if json {
                println!("{{\"error\":\"timeout after {limit} s\"}}");
            } else {
                eprintln!("timeout after {limit} s");
            }
            std::process::exit(exit::TIMEOUT);
        });
    }
    let outcome = if args.exact { run_with::<Rational>(&args) } else { run_with::<f64>(&args) };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            if args.json {
                let msg = serde_json::json!({ "error": e.to_string() });
                println!("{msg}");
            }
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

struct Loaded<V> {
    model: Model<V>,
    program: Option<Program>,
    parse: Duration,
    build: Duration,
}

fn load<V: Value>(args: &CheckArgs) -> Result<Loaded<V>, Failure> {
    let start = Instant::now();
    match (&args.prism, &args.explicit) {
        (Some(path), None) => {
            let text = read(path)?;
            let program = parse_program(&text).map_err(|e| Failure::Model(format!("{}: {e}", path.display())))?;
            let bindings = parse_bindings(&args.consts.join(",")).map_err(|e| Failure::Usage(format!("--const: {e}")))?;
            let parse = start.elapsed();
            let program = substitute_constants(&program, &bindings).map_err(|e| match e {
                PrismError::MissingConstants(_) | PrismError::ExtraBinding(_) | PrismError::Binding { .. } => {
                    Failure::Usage(e.to_string())
                }
                other => Failure::Model(other.to_string()),
            })?;
            let options = BuildOptions {
                fix_deadlocks: !args.no_fix_deadlocks,
                dtmc_overlap: if args.uniform_overlap { DtmcOverlap::Uniform } else { DtmcOverlap::Error },
                ..BuildOptions::default()
            };
            let (model, _) = build_model::<V>(&program, &options).map_err(|e| Failure::Model(e.to_string()))?;
            Ok(Loaded { model, program: Some(program), parse, build: start.elapsed() - parse })
        }
        (None, Some(files)) => {
            if !args.consts.is_empty() {
                return Err(Failure::Usage("--const needs a --prism model".into()));
            }
            let kind = args.kind.ok_or_else(|| Failure::Usage("--explicit needs --kind".into()))?;
            let (tra, lab) = (read(&files[0])?, read(&files[1])?);
            let model = read_explicit::<V>(&tra, &lab, kind).map_err(|e| Failure::Model(e.to_string()))?;
            Ok(Loaded { model, program: None, parse: Duration::ZERO, build: start.elapsed() })
        }
        _ => Err(Failure::Usage("give exactly one of --prism FILE or --explicit TRA LAB".into())),
    }
}

fn properties(args: &CheckArgs, program: Option<&Program>) -> Result<Vec<(String, Property)>, Failure> {
    let mut out = Vec::new();
    for text in &args.prop {
        let p = parse_property(text).map_err(|e| Failure::Model(format!("property '{text}': {e}")))?;
        out.push(p);
    }
    if let Some(path) = &args.props {
        let text = read(path)?;
        out.extend(parse_properties(&text).map_err(|e| Failure::Model(format!("{}: {e}", path.display())))?);
    }
    if out.is_empty() {
        return Err(Failure::Usage("no property given (use --prop or --props)".into()));
    }
    Ok(out
        .into_iter()
        .map(|p| {
            let closed = program.map_or_else(|| p.clone(), |prog| p.close(prog));
            (p.to_string(), closed)
        })
        .collect())
}

fn check_options(args: &CheckArgs) -> Result<CheckOptions, Failure> {
    if !(args.precision > 0.0 && args.precision < 1.0) {
        return Err(Failure::Usage("--precision must lie in (0, 1)".into()));
    }
    let solve = SolveOptions {
        linear: args.linear_solver,
        bellman: args.bellman_solver,
        precision: args.precision,
        relative: !args.absolute,
        max_iterations: args.max_iterations,
        ..SolveOptions::default()
    };
    Ok(CheckOptions { solve, ignore_direction_on_deterministic: args.ignore_direction })
}

fn run_with<V: Value>(args: &CheckArgs) -> Result<i32, Failure> {
    let options = check_options(args)?;
    let loaded = load::<V>(args)?;
    let props = properties(args, loaded.program.as_ref())?;
    let model = &loaded.model;
    let palette = Palette::from_env();
    let init: Vec<usize> = model.initial_states().ones().collect();

    if !args.json {
        println!(
            "{} model: {} states, {} transitions{}, {} initial (parse {:.1} ms, build {:.1} ms)",
            model.kind(),
            model.num_states(),
            model.num_transitions(),
            if model.kind().is_nondeterministic() { format!(", {} choices", model.num_choices()) } else { String::new() },
            init.len(),
            ms(loaded.parse),
            ms(loaded.build),
        );
    }

    let mut records = Vec::new();
    let mut schedulers = String::new();
    let mut failed = false;
    for (text, property) in &props {
        let start = Instant::now();
        let outcome = check(model, property, &options);
        let elapsed = start.elapsed();
        let mut record = ResultRecord {
            property: text.clone(),
            value: None,
            bit: None,
            exact: V::EXACT,
            scheduler: None,
            error: None,
            warnings: Vec::new(),
            stats: Stats {
                states: model.num_states(),
                transitions: model.num_transitions(),
                iterations: 0,
                build_ms: ms(loaded.parse + loaded.build),
                check_ms: ms(elapsed),
            },
        };
        match outcome {
            Ok(result) => {
                fill(&mut record, &result, &init);
                if !args.json {
                    print_result(text, &result, &init, elapsed, palette);
                }
                if let Some(choices) = &result.scheduler {
                    write_scheduler(&mut schedulers, text, model, choices);
                }
            }
            Err(e) => {
                failed = true;
                record.error = Some(e.to_string());
                if !args.json {
                    println!("\nProperty: {}", palette.strong(text));
                    println!("{} {e}", palette.bad("Error:"));
                }
            }
        }
        records.push(record);
    }

    let json = if records.len() == 1 {
        serde_json::to_string_pretty(&records[0])
    } else {
        serde_json::to_string_pretty(&records)
    }
    .expect("records serialize");
    if args.json {
        println!("{json}");
    }
    if let Some(path) = &args.export_result {
        std::fs::write(path, format!("{json}\n")).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    if let Some(path) = &args.export_scheduler {
        std::fs::write(path, schedulers).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(if failed { exit::MODEL } else { exit::OK })
}

fn ms(d: Duration) -> f64 {
    (d.as_secs_f64() * 1e6).round() / 1e3
}

/// The representative state of a result: the unique initial state, or the
/// first one when there are several.
fn fill<V: Value>(record: &mut ResultRecord, result: &CheckResult<V>, init: &[usize]) {
    let first = init.first().copied().unwrap_or(0);
    match &result.values {
        Values::Numbers(v) => record.value = v.get(first).map(json_value),
        Values::Truth(b) => {
            record.bit = Some(init.iter().all(|&s| b.contains(s)));
            record.value = result.operator_values.as_ref().and_then(|v| v.get(first)).map(json_value);
        }
    }
    record.scheduler = result.scheduler.clone();
    record.warnings = result.warnings.clone();
    record.stats.iterations = result.stats.iterations;
}

fn print_result<V: Value>(text: &str, result: &CheckResult<V>, init: &[usize], elapsed: Duration, palette: Palette) {
    println!("\nProperty: {}", palette.strong(text));
    let exactness = if V::EXACT { " (exact)" } else { "" };
    let many = init.len() > 1;
    for &s in init {
        let at = if many { format!(" in state {s}") } else { String::new() };
        match &result.values {
            Values::Numbers(v) => println!("Result{at}: {}{exactness}", display_value(&v[s])),
            Values::Truth(b) => {
                let bit = if b.contains(s) { palette.good("true") } else { palette.bad("false") };
                match result.operator_values.as_ref().map(|v| &v[s]) {
                    Some(value) => println!("Result{at}: {bit} (value {}){exactness}", display_value(value)),
                    None => println!("Result{at}: {bit}"),
                }
            }
        }
    }
    if !V::EXACT {
        if let Values::Numbers(v) = &result.values {
            if let Some(Extended::Finite(x)) = init.first().map(|&s| &v[s]) {
                let f = x.as_float();
                if approx(f) != x.canonical_text() {
                    println!("        ≈ {}", approx(f));
                }
            }
        }
    }
    let methods = if result.stats.methods.is_empty() { String::new() } else { format!(", {}", result.stats.methods.join("+")) };
    println!("Time: check {:.1} ms ({} iterations{methods})", ms(elapsed), result.stats.iterations);
    for w in &result.warnings {
        println!("Warning: {w}");
    }
}

fn write_scheduler<V: Value>(out: &mut String, text: &str, model: &Model<V>, choices: &[usize]) {
    let _ = writeln!(out, "# {text}");
    let labels = model.choice_labels();
    let valuations = model.valuations();
    for (s, &c) in choices.iter().enumerate() {
        let _ = write!(out, "{s} {c}");
        let row = model.grouping().rows(s).start + c;
        let label = labels.and_then(|l| l.get(row)).filter(|l| !l.is_empty());
        match (label, valuations) {
            (Some(l), Some(v)) => {
                let _ = write!(out, " // [{l}] {}", v.describe(s));
            }
            (Some(l), None) => {
                let _ = write!(out, " // [{l}]");
            }
            (None, Some(v)) => {
                let _ = write!(out, " // {}", v.describe(s));
            }
            (None, None) => {}
        }
        out.push('\n');
    }
}
