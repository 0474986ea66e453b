//! One pass/fail line per acceptance criterion; exits nonzero if any fails.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use oracle::criteria::{self, Outcome};
use squall::builder::{build_model, BuildOptions};
use squall::checkers::{check, CheckOptions, Extended};
use squall::model::Model;
use squall::prism::{parse_bindings, parse_program, substitute_constants};
use squall::props::parse_property;
use squall::Rational;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// The die's reachable states and distinct transitions by direct search
/// over its coin-flip rules.
fn die_counts() -> (usize, usize) {
    let step = |(s, d): (u8, u8)| -> Vec<(u8, u8)> {
        match s {
            0 => vec![(1, d), (2, d)],
            1 => vec![(3, d), (4, d)],
            2 => vec![(5, d), (6, d)],
            3 => vec![(1, d), (7, 1)],
            4 => vec![(7, 2), (7, 3)],
            5 => vec![(7, 4), (7, 5)],
            6 => vec![(2, d), (7, 6)],
            _ => vec![(7, d)],
        }
    };
    let mut seen = BTreeSet::from([(0, 0)]);
    let mut queue = VecDeque::from([(0u8, 0u8)]);
    let mut transitions = 0;
    while let Some(state) = queue.pop_front() {
        let succ: BTreeSet<_> = step(state).into_iter().collect();
        transitions += succ.len();
        for t in succ {
            if seen.insert(t) {
                queue.push_back(t);
            }
        }
    }
    (seen.len(), transitions)
}

fn die() -> Outcome {
    let start = Instant::now();
    let text = std::fs::read_to_string(root().join("benchmarks/models/die.pm")).map_err(|e| e.to_string())?;
    let program = parse_program(&text).map_err(|e| e.to_string())?;
    let prop = parse_property("P=? [ F s=7 & d=6 ]").map_err(|e| e.to_string())?;
    let (exact, _) = build_model::<Rational>(&program, &BuildOptions::default()).map_err(|e| e.to_string())?;
    let (float, _) = build_model::<f64>(&program, &BuildOptions::default()).map_err(|e| e.to_string())?;
    let init = exact.initial_states().ones().next().ok_or("no initial state")?;
    let q = check(&exact, &prop, &CheckOptions::default()).map_err(|e| e.to_string())?;
    let f = check(&float, &prop, &CheckOptions::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let sixth = Rational::new(1.into(), 6.into());
    if q.value(init) != Some(&Extended::Finite(sixth)) {
        return Err(format!("exact value {:?}", q.value(init)));
    }
    let fv = f.value(init).map(Extended::as_float).unwrap_or(f64::NAN);
    if (fv - 1.0 / 6.0).abs() > 1e-6 {
        return Err(format!("float value {fv}"));
    }
    let (states, transitions) = die_counts();
    if (exact.num_states(), exact.num_transitions()) != (states, transitions) {
        return Err(format!("{} states, {} transitions; search found {states}, {transitions}", exact.num_states(), exact.num_transitions()));
    }
    if elapsed.as_secs_f64() >= 1.0 {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("1/6 exactly, float {fv:.9}, {states} states, {transitions} transitions, {:.1} ms", elapsed.as_secs_f64() * 1e3))
}

fn timed(limit: f64, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let summary = f()?;
    let secs = start.elapsed().as_secs_f64();
    if secs >= limit {
        return Err(format!("{summary}, but took {secs:.1} s (limit {limit} s)"));
    }
    Ok(format!("{summary} in {secs:.2} s"))
}

/// The nondeterministic models of the bundled suite, checked exactly and
/// re-checked under their exported schedulers.
fn corpus_schedulers() -> Outcome {
    let suite = std::fs::read_to_string(root().join("benchmarks/suite.txt")).map_err(|e| e.to_string())?;
    let mut checks = 0;
    for line in suite.lines().filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(';').map(str::trim).collect();
        let words: Vec<&str> = fields[0].split_whitespace().collect();
        let model: Model<Rational> = match words.as_slice() {
            [path] if path.ends_with(".nm") => {
                let text = std::fs::read_to_string(root().join("benchmarks").join(path)).map_err(|e| e.to_string())?;
                let program = parse_program(&text).map_err(|e| e.to_string())?;
                let program = substitute_constants(&program, &parse_bindings(fields[1])?).map_err(|e| e.to_string())?;
                build_model(&program, &BuildOptions::default()).map_err(|e| e.to_string())?.0
            }
            [tra, lab, kind] if *kind == "mdp" || *kind == "ma" => {
                let read = |p: &str| std::fs::read_to_string(root().join("benchmarks").join(p)).map_err(|e| e.to_string());
                squall::explicit::read_explicit(&read(tra)?, &read(lab)?, kind.parse()?).map_err(|e| e.to_string())?
            }
            _ => continue,
        };
        let prop = parse_property(fields[2]).map_err(|e| e.to_string())?;
        let r = check(&model, &prop, &CheckOptions::default()).map_err(|e| format!("{}: {e}", fields[2]))?;
        let Some(sched) = r.scheduler.clone() else { continue };
        let induced = model.induced(&sched).map_err(|e| e.to_string())?;
        let relaxed = CheckOptions { ignore_direction_on_deterministic: true, ..CheckOptions::default() };
        let again = check(&induced, &prop, &relaxed).map_err(|e| e.to_string())?;
        if again.numbers() != r.numbers() {
            return Err(format!("{line}: induced model disagrees"));
        }
        checks += 1;
    }
    if checks == 0 {
        return Err("no nondeterministic instance in the suite".into());
    }
    Ok(format!("{checks} suite instances"))
}

fn schedulers() -> Outcome {
    let random = criteria::scheduler_soundness(60)?;
    let corpus = corpus_schedulers()?;
    Ok(format!("{random}; {corpus}"))
}

type Table = Vec<BTreeMap<String, String>>;

fn read_csv(path: &Path) -> Result<Table, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = r.headers().map_err(|e| e.to_string())?.clone();
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| e.to_string())?;
            Ok(headers.iter().zip(rec.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        })
        .collect()
}

fn bench_once(dir: &Path) -> Result<(Table, Table, Table, Table), String> {
    let out = dir.join("bench.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_squall"))
        .arg("bench")
        .arg(root().join("benchmarks/suite.txt"))
        .arg("--out")
        .arg(&out)
        .args(["--jobs", "4", "--config", "default=", "--config", "elim=--linear-solver elimination --bellman-solver pi"])
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("bench exited with {}: {}", status.status, String::from_utf8_lossy(&status.stderr)));
    }
    Ok((
        read_csv(&out)?,
        read_csv(&dir.join("bench.scatter.csv"))?,
        read_csv(&dir.join("bench.quantile.csv"))?,
        read_csv(&dir.join("bench.best.csv"))?,
    ))
}

fn harness() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let first = bench_once(&a)?;
    let second = bench_once(&b)?;
    let columns = |t: &Table| -> Vec<[String; 4]> {
        t.iter().map(|r| ["instance", "config", "status", "result"].map(|c| r[c].clone())).collect()
    };
    if columns(&first.0) != columns(&second.0) {
        return Err("result columns differ between runs".into());
    }
    let instances: BTreeSet<&str> = first.0.iter().map(|r| r["instance"].as_str()).collect();
    if instances.len() != 20 {
        return Err(format!("{} instances, expected 20", instances.len()));
    }
    let (rows, scatter, quantile, best) = &first;
    let timeouts: Vec<&str> = rows.iter().filter(|r| r["status"] == "timeout").map(|r| r["instance"].as_str()).collect();
    let errors: Vec<&str> = rows.iter().filter(|r| r["status"] == "error").map(|r| r["instance"].as_str()).collect();
    let ok = rows.iter().filter(|r| r["status"] == "ok").count();
    let (t, e) = match (timeouts.as_slice(), errors.as_slice()) {
        ([t1, t2], [e1, e2]) if t1 == t2 && e1 == e2 => (*t1, *e1),
        _ => return Err(format!("timeouts {timeouts:?}, errors {errors:?}")),
    };
    if ok != rows.len() - 4 {
        return Err(format!("only {ok} of {} runs ok", rows.len()));
    }
    let cell = |name: &str| scatter.iter().find(|r| r["instance"] == name).map(|r| (r["default"].clone(), r["elim"].clone()));
    if cell(t) != Some(("OoR".into(), "OoR".into())) || cell(e) != Some(("Err".into(), "Err".into())) {
        return Err(format!("scatter cells {:?} and {:?}", cell(t), cell(e)));
    }
    let nr: BTreeSet<&str> = best.iter().filter(|r| r["best"] == "NR").map(|r| r["instance"].as_str()).collect();
    if nr != BTreeSet::from([t, e]) {
        return Err(format!("NR instances {nr:?}"));
    }
    for config in ["default", "elim"] {
        let points: Vec<(f64, f64)> = quantile
            .iter()
            .filter(|r| r["config"] == config)
            .map(|r| (r["time_ms"].parse().unwrap_or(f64::NAN), r["cumulative_ms"].parse().unwrap_or(f64::NAN)))
            .collect();
        if points.len() != 18 || points.windows(2).any(|w| !(w[0].0 <= w[1].0 && w[0].1 <= w[1].1)) {
            return Err(format!("quantile data for {config} is not 18 non-decreasing points"));
        }
    }
    Ok(format!("two runs agree; {t} is OoR, {e} is Err, both NR"))
}

fn main() {
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome>)> = vec![
        ("die", Box::new(die)),
        ("random DTMC oracle", Box::new(|| timed(60.0, || criteria::random_dtmcs(200, 1e-12)))),
        ("MDP scheduler enumeration", Box::new(|| timed(120.0, || criteria::mdp_enumeration(100)))),
        ("CTMC transient oracle", Box::new(|| criteria::ctmc_transient(50))),
        ("Fox-Glynn weights", Box::new(criteria::fox_glynn_weights)),
        ("exact vs float on a stiff chain", Box::new(criteria::stiff_exact_vs_float)),
        ("scheduler soundness", Box::new(schedulers)),
        ("harness determinism", Box::new(harness)),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        match run() {
            Ok(summary) => println!("PASS  {name}: {summary}"),
            Err(e) => {
                println!("FAIL  {name}: {e}");
                failed.push(name);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
