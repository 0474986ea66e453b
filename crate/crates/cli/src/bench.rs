//! `squall bench`: run every suite instance under every configuration in a
//! fresh `squall check` process and tabulate the outcome.

use std::collections::BTreeMap;
use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use clap::Args;
use serde::Serialize;
use thiserror::Error;

use squall::numeric::{parse_rational, rational_to_f64};

use crate::exit;
use crate::report::ResultRecord;

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    /// Suite file: `model ; constants ; property ; expected` per line.
    pub suite: PathBuf,
    /// Result table; derived tables are written next to it.
    #[arg(long, default_value = "bench.csv")]
    pub out: PathBuf,
    /// Per-instance wall-clock limit in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,
    /// Per-instance address-space limit in MiB (0 for none).
    #[arg(long, default_value_t = 4096)]
    pub memory_mb: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// A configuration `NAME=ARGS`, where ARGS are extra `check` options;
    /// may be repeated.
    #[arg(long = "config", value_name = "NAME=ARGS")]
    pub configs: Vec<String>,
    /// Relative tolerance for comparing with expected values.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Debug, Error)]
#[error("{0}")]
pub struct SuiteError(String);

#[derive(Debug, Clone, PartialEq)]
enum Source {
    Prism(PathBuf),
    Explicit { tra: PathBuf, lab: PathBuf, kind: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Expected {
    Bit(bool),
    Number(f64),
    Infinity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    source: Source,
    consts: String,
    property: String,
    expected: Option<Expected>,
    tolerance: Option<f64>,
    timeout: Option<f64>,
}

/// Read a suite. Malformed lines are skipped and reported in the second
/// component.
pub fn parse_suite(text: &str, base: &Path) -> (Vec<Instance>, Vec<String>) {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_line(line, base) {
            Ok(mut instance) => {
                instance.name = format!("{}@{}", instance.name, i + 1);
                out.push(instance);
            }
            Err(e) => warnings.push(format!("line {}: {e}; skipped", i + 1)),
        }
    }
    (out, warnings)
}

fn parse_line(line: &str, base: &Path) -> Result<Instance, SuiteError> {
    let fields: Vec<&str> = line.split(';').map(str::trim).collect();
    if !(3..=4).contains(&fields.len()) {
        return Err(SuiteError(format!("expected 3 or 4 ';'-separated fields, found {}", fields.len())));
    }
    let words: Vec<&str> = fields[0].split_whitespace().collect();
    let (source, stem) = match words.as_slice() {
        [path] => (Source::Prism(base.join(path)), stem(path)),
        [tra, lab, kind] => {
            kind.parse::<squall::model::ModelKind>().map_err(SuiteError)?;
            (Source::Explicit { tra: base.join(tra), lab: base.join(lab), kind: kind.to_string() }, stem(tra))
        }
        _ => return Err(SuiteError("model must be FILE or TRA LAB KIND".into())),
    };
    if fields[2].is_empty() {
        return Err(SuiteError("empty property".into()));
    }
    let mut instance = Instance {
        name: stem,
        source,
        consts: fields[1].to_string(),
        property: fields[2].to_string(),
        expected: None,
        tolerance: None,
        timeout: None,
    };
    for word in fields.get(3).map_or("", |f| *f).split_whitespace() {
        if let Some(v) = word.strip_prefix("tol=") {
            instance.tolerance = Some(positive(v, "tol")?);
        } else if let Some(v) = word.strip_prefix("timeout=") {
            instance.timeout = Some(positive(v, "timeout")?);
        } else if instance.expected.is_none() {
            instance.expected = Some(parse_expected(word)?);
        } else {
            return Err(SuiteError(format!("unexpected '{word}' in expected field")));
        }
    }
    Ok(instance)
}

fn stem(path: &str) -> String {
    Path::new(path).file_stem().map_or_else(|| path.to_string(), |s| s.to_string_lossy().into_owned())
}

fn positive(text: &str, what: &str) -> Result<f64, SuiteError> {
    match text.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(SuiteError(format!("{what} must be a positive number, got '{text}'"))),
    }
}

fn parse_expected(text: &str) -> Result<Expected, SuiteError> {
    match text {
        "true" => Ok(Expected::Bit(true)),
        "false" => Ok(Expected::Bit(false)),
        "inf" | "infinity" => Ok(Expected::Infinity),
        _ => parse_rational(text)
            .map(|q| Expected::Number(rational_to_f64(&q)))
            .map_err(|e| SuiteError(format!("bad expected value '{text}': {e}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Timeout,
    Error,
    Wrong,
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub instance: String,
    pub config: String,
    pub status: Status,
    pub build_ms: Option<f64>,
    pub check_ms: Option<f64>,
    pub total_ms: f64,
    pub result: String,
}

impl Row {
    fn solved(&self) -> bool {
        self.status == Status::Ok
    }

    /// Scatter cell: the total time when solved, else `OoR` (out of
    /// resources) or `Err`.
    fn cell(&self) -> String {
        match self.status {
            Status::Ok => format!("{:.3}", self.total_ms),
            Status::Timeout => "OoR".into(),
            Status::Error | Status::Wrong => "Err".into(),
        }
    }
}

struct Config {
    name: String,
    args: Vec<String>,
}

fn parse_configs(specs: &[String]) -> Result<Vec<Config>, String> {
    if specs.is_empty() {
        return Ok(vec![Config { name: "default".into(), args: Vec::new() }]);
    }
    let mut out: Vec<Config> = Vec::new();
    for spec in specs {
        let (name, args) = spec.split_once('=').unwrap_or((spec, ""));
        let name = name.trim();
        if name.is_empty() || out.iter().any(|c| c.name == name) {
            return Err(format!("bad or duplicate configuration name in '{spec}'"));
        }
        out.push(Config { name: name.to_string(), args: args.split_whitespace().map(String::from).collect() });
    }
    Ok(out)
}

pub fn run(args: BenchArgs) -> i32 {
    let configs = match parse_configs(&args.configs) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::USAGE;
        }
    };
    if args.jobs == 0 || args.timeout <= 0.0 || args.tolerance < 0.0 {
        eprintln!("error: --jobs and --timeout must be positive, --tolerance non-negative");
        return exit::USAGE;
    }
    let text = match std::fs::read_to_string(&args.suite) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.suite.display());
            return exit::USAGE;
        }
    };
    let base = args.suite.parent().map(Path::to_path_buf).unwrap_or_default();
    let (instances, warnings) = parse_suite(&text, &base);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let exe = match std::env::current_exe() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot locate own executable: {e}");
            return exit::USAGE;
        }
    };

    let jobs: Vec<(usize, usize)> = (0..instances.len()).flat_map(|i| (0..configs.len()).map(move |c| (i, c))).collect();
    let slots: Mutex<Vec<Option<Row>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..args.jobs.min(jobs.len().max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(i, c)) = jobs.get(k) else { break };
                let row = run_one(&exe, &instances[i], &configs[c], &args);
                eprintln!("{:<28} {:<12} {:<8} {}", row.instance, row.config, status_name(row.status), row.result);
                slots.lock().expect("no job panics")[k] = Some(row);
            });
        }
    });
    let rows: Vec<Row> = slots.into_inner().expect("no job panics").into_iter().map(|r| r.expect("every job ran")).collect();

    if let Err(e) = write_tables(&args.out, &rows, &configs) {
        eprintln!("error: {e}");
        return exit::USAGE;
    }
    let count = |s: Status| rows.iter().filter(|r| r.status == s).count();
    println!(
        "{} runs: {} ok, {} timeout, {} error, {} wrong ({} suite lines skipped); results in {}",
        rows.len(),
        count(Status::Ok),
        count(Status::Timeout),
        count(Status::Error),
        count(Status::Wrong),
        warnings.len(),
        args.out.display()
    );
    if count(Status::Wrong) > 0 {
        exit::MODEL
    } else {
        exit::OK
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Ok => "ok",
        Status::Timeout => "timeout",
        Status::Error => "error",
        Status::Wrong => "wrong",
    }
}

fn run_one(exe: &Path, instance: &Instance, config: &Config, args: &BenchArgs) -> Row {
    let timeout = instance.timeout.unwrap_or(args.timeout);
    let mut cmd = Command::new(exe);
    cmd.arg("check");
    match &instance.source {
        Source::Prism(path) => {
            cmd.arg("--prism").arg(path);
        }
        Source::Explicit { tra, lab, kind } => {
            cmd.arg("--explicit").arg(tra).arg(lab).arg("--kind").arg(kind);
        }
    }
    if !instance.consts.is_empty() {
        cmd.arg("--const").arg(&instance.consts);
    }
    cmd.arg("--prop").arg(&instance.property).arg("--json").arg("--timeout").arg(timeout.to_string());
    cmd.args(&config.args);
    cmd.stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::piped()).env("SQUALL_COLOR", "never");
    limit_memory(&mut cmd, args.memory_mb);

    let start = Instant::now();
    let mut row = Row {
        instance: instance.name.clone(),
        config: config.name.clone(),
        status: Status::Error,
        build_ms: None,
        check_ms: None,
        total_ms: 0.0,
        result: String::new(),
    };
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => {
            row.result = format!("cannot start: {e}");
            return row;
        }
    };
    let mut stdout = child.stdout.take().expect("piped");
    let mut stderr = child.stderr.take().expect("piped");
    let out_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let err_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });
    let deadline = Duration::from_secs_f64(timeout + 2.0);
    let pid = child.id();
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let _ = tx.send(child.wait().ok());
    });
    let mut killed = false;
    let status = match rx.recv_timeout(deadline.saturating_sub(start.elapsed())) {
        Ok(status) => status,
        Err(_) => {
            kill(pid);
            killed = true;
            rx.recv().ok().flatten()
        }
    };
    row.total_ms = (start.elapsed().as_secs_f64() * 1e6).round() / 1e3;
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();
    classify(&mut row, status, killed, &stdout, &stderr, instance, args.tolerance);
    row
}

#[cfg(unix)]
fn kill(pid: u32) {
    // SAFETY: plain syscall on a child we have not yet reaped.
    unsafe {
        libc::kill(pid as libc::pid_t, libc::SIGKILL);
    }
}

#[cfg(not(unix))]
fn kill(_pid: u32) {}

#[cfg(unix)]
fn limit_memory(cmd: &mut Command, mb: u64) {
    use std::os::unix::process::CommandExt;
    if mb == 0 {
        return;
    }
    let bytes = mb.saturating_mul(1 << 20) as libc::rlim_t;
    // SAFETY: setrlimit is async-signal-safe and touches no parent state.
    unsafe {
        cmd.pre_exec(move || {
            let limit = libc::rlimit { rlim_cur: bytes, rlim_max: bytes };
            if libc::setrlimit(libc::RLIMIT_AS, &limit) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            Ok(())
        });
    }
}

#[cfg(not(unix))]
fn limit_memory(_cmd: &mut Command, _mb: u64) {}

fn out_of_memory(stderr: &str) -> bool {
    stderr.contains("memory allocation of") || stderr.contains("out of memory") || stderr.contains("Cannot allocate memory")
}

fn classify(
    row: &mut Row,
    status: Option<ExitStatus>,
    killed: bool,
    stdout: &str,
    stderr: &str,
    instance: &Instance,
    tolerance: f64,
) {
    let code = status.and_then(|s| s.code());
    if killed || code == Some(exit::TIMEOUT) {
        row.status = Status::Timeout;
        row.result = "timeout".into();
        return;
    }
    if out_of_memory(stderr) {
        row.status = Status::Timeout;
        row.result = "out of memory".into();
        return;
    }
    let record: Option<ResultRecord> = serde_json::from_str(stdout.trim()).ok();
    match (code, record) {
        (Some(0), Some(record)) => {
            row.build_ms = Some(record.stats.build_ms);
            row.check_ms = Some(record.stats.check_ms);
            row.result = record.result_text();
            let tol = instance.tolerance.unwrap_or(tolerance);
            row.status = match &instance.expected {
                None => Status::Ok,
                Some(e) if matches(e, &record, tol) => Status::Ok,
                Some(_) => Status::Wrong,
            };
        }
        (_, record) => {
            row.status = Status::Error;
            let json_error = record.and_then(|r| r.error).or_else(|| {
                serde_json::from_str::<serde_json::Value>(stdout.trim())
                    .ok()
                    .and_then(|v| v.get("error").and_then(|e| e.as_str()).map(String::from))
            });
            let message = json_error.unwrap_or_else(|| {
                stderr
                    .lines()
                    .find(|l| !l.trim().is_empty())
                    .map_or_else(|| format!("exit status {status:?}"), |l| l.trim().to_string())
            });
            row.result = message.lines().next().unwrap_or_default().to_string();
        }
    }
}

fn matches(expected: &Expected, record: &ResultRecord, tol: f64) -> bool {
    match expected {
        Expected::Bit(b) => record.bit == Some(*b),
        Expected::Infinity => record.approx() == Some(f64::INFINITY),
        Expected::Number(e) => match record.approx() {
            Some(v) if v.is_finite() => {
                let scale = if *e == 0.0 { 1.0 } else { e.abs() };
                (v - e).abs() <= tol * scale
            }
            _ => false,
        },
    }
}

fn derived(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "bench".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn write_tables(out: &Path, rows: &[Row], configs: &[Config]) -> Result<(), String> {
    let io = |e: csv::Error| format!("cannot write results: {e}");
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    }
    let mut w = csv::Writer::from_path(out).map_err(io)?;
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush().map_err(|e| e.to_string())?;

    let mut by_instance: BTreeMap<&str, Vec<&Row>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for row in rows {
        by_instance.entry(&row.instance).or_insert_with(|| {
            order.push(&row.instance);
            Vec::new()
        });
        by_instance.get_mut(row.instance.as_str()).expect("inserted").push(row);
    }

    if configs.len() >= 2 {
        let (a, b) = (&configs[0].name, &configs[1].name);
        let mut w = csv::Writer::from_path(derived(out, "scatter")).map_err(io)?;
        w.write_record(["instance", a.as_str(), b.as_str()]).map_err(io)?;
        for name in &order {
            let cell = |c: &str| by_instance[name].iter().find(|r| r.config == c).map_or_else(|| "Err".into(), |r| r.cell());
            w.write_record([name.to_string(), cell(a), cell(b)]).map_err(io)?;
        }
        w.flush().map_err(|e| e.to_string())?;
    }

    let mut w = csv::Writer::from_path(derived(out, "quantile")).map_err(io)?;
    w.write_record(["config", "rank", "time_ms", "cumulative_ms"]).map_err(io)?;
    for q in quantiles(rows, configs) {
        w.write_record([q.0, q.1.to_string(), format!("{:.3}", q.2), format!("{:.3}", q.3)]).map_err(io)?;
    }
    w.flush().map_err(|e| e.to_string())?;

    let mut w = csv::Writer::from_path(derived(out, "best")).map_err(io)?;
    w.write_record(["instance", "best", "time_ms"]).map_err(io)?;
    for name in &order {
        let best = by_instance[name].iter().filter(|r| r.solved()).min_by(|x, y| x.total_ms.total_cmp(&y.total_ms));
        match best {
            Some(r) => w.write_record([name.to_string(), r.config.clone(), format!("{:.3}", r.total_ms)]),
            None => w.write_record([name.to_string(), "NR".into(), String::new()]),
        }
        .map_err(io)?;
    }
    w.flush().map_err(|e| e.to_string())
}

/// Per configuration, solved instances sorted by time with the running
/// total: `(config, rank, time, cumulative)`.
fn quantiles(rows: &[Row], configs: &[Config]) -> Vec<(String, usize, f64, f64)> {
    let mut out = Vec::new();
    for config in configs {
        let mut times: Vec<f64> = rows.iter().filter(|r| r.config == config.name && r.solved()).map(|r| r.total_ms).collect();
        times.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for (rank, t) in times.into_iter().enumerate() {
            total += t;
            out.push((config.name.clone(), rank + 1, t, total));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_lines() {
        let text = "# comment\nm.pm ; N=2 ; P=? [ F \"a\" ] ; 1/6 tol=1e-6\nbad line\na.tra a.lab mdp ; ; Pmax=? [ F \"b\" ] ; true timeout=0.5\nx.pm ; ; ; 1\n";
        let (suite, warnings) = parse_suite(text, Path::new("dir"));
        assert_eq!(suite.len(), 2);
        assert_eq!(warnings.len(), 2);
        assert_eq!(suite[0].name, "m@2");
        assert_eq!(suite[0].source, Source::Prism(PathBuf::from("dir/m.pm")));
        assert_eq!(suite[0].expected, Some(Expected::Number(1.0 / 6.0)));
        assert_eq!(suite[0].tolerance, Some(1e-6));
        assert_eq!(suite[1].expected, Some(Expected::Bit(true)));
        assert_eq!(suite[1].timeout, Some(0.5));
        assert!(warnings[0].starts_with("line 3"));
    }

    #[test]
    fn tolerance_is_relative() {
        let record = |v: serde_json::Value| ResultRecord {
            property: String::new(),
            value: Some(v),
            bit: None,
            exact: false,
            scheduler: None,
            error: None,
            warnings: Vec::new(),
            stats: Default::default(),
        };
        assert!(matches(&Expected::Number(1000.0), &record(serde_json::json!(1000.09)), 1e-4));
        assert!(!matches(&Expected::Number(1.0), &record(serde_json::json!(1.001)), 1e-4));
        assert!(matches(&Expected::Number(1.0 / 3.0), &record(serde_json::json!("1/3")), 0.0));
        assert!(matches(&Expected::Infinity, &record(serde_json::json!("inf")), 1e-4));
    }

    #[test]
    fn quantiles_are_cumulative() {
        let row = |c: &str, t: f64, status| Row {
            instance: "i".into(),
            config: c.into(),
            status,
            build_ms: None,
            check_ms: None,
            total_ms: t,
            result: String::new(),
        };
        let rows = vec![row("a", 3.0, Status::Ok), row("a", 1.0, Status::Ok), row("a", 2.0, Status::Timeout)];
        let q = quantiles(&rows, &[Config { name: "a".into(), args: vec![] }]);
        assert_eq!(q, vec![("a".into(), 1, 1.0, 1.0), ("a".into(), 2, 3.0, 4.0)]);
    }
}
