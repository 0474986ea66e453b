//! Randomized agreement checks between the engine and the dense oracles.
//! Each returns a one-line summary on success and the first discrepancy on
//! failure.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use squall::checkers::{check, CheckOptions, CheckResult, Extended};
use squall::model::{Model, RewardModel};
use squall::props::parse_property;
use squall::solvers::{fox_glynn, LinearMethod, SolveOptions};
use squall::Value;
use statrs::distribution::{Discrete, Poisson};

use super::*;

pub type Outcome = Result<String, String>;

fn run<V: Value>(model: &Model<V>, prop: &str, options: &CheckOptions) -> Result<CheckResult<V>, String> {
    let p = parse_property(prop).map_err(|e| format!("{prop}: {e}"))?;
    check(model, &p, options).map_err(|e| format!("{prop}: {e}"))
}

fn numbers<V: Value>(r: &CheckResult<V>) -> Vec<Extended<V>> {
    r.numbers().expect("numeric result").to_vec()
}

fn as_ext(v: &Option<Q>) -> Extended<Q> {
    v.clone().map_or(Extended::Infinity, Extended::Finite)
}

fn ensure_nonempty(set: &mut [bool], rng: &mut impl Rng) {
    if !set.iter().any(|&b| b) {
        let i = rng.random_range(0..set.len());
        set[i] = true;
    }
}

fn close(got: &Extended<f64>, want: &Extended<Q>, tol: f64, relative: bool) -> bool {
    match (got, want) {
        (Extended::Finite(g), Extended::Finite(w)) => {
            let w = to_f64(w);
            let scale = if relative { w.abs().max(1.0) } else { 1.0 };
            (g - w).abs() <= tol * scale
        }
        (Extended::Infinity, Extended::Infinity) => true,
        _ => false,
    }
}

fn state_rewards(rng: &mut impl Rng, n: usize) -> Vec<Q> {
    (0..n).map(|_| q(rng.random_range(0..=3), 1)).collect()
}

/// Float iterative solvers against rational elimination on random DTMCs.
/// Probabilities compare absolutely, rewards relative to `max(1, |exact|)`.
pub fn random_dtmcs(instances: u64, precision: f64) -> Outcome {
    let solve = SolveOptions::default().with_precision(precision);
    let tol = (10.0 * solve.precision).max(1e-8);
    let options = CheckOptions::with_solve(solve);
    let mut states = 0;
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=50);
        states += n;
        let p = random_dtmc(&mut rng, n);
        let mut goal = random_set(&mut rng, n, 0.1);
        ensure_nonempty(&mut goal, &mut rng);
        let phi = random_set(&mut rng, n, 0.85);
        let r = state_rewards(&mut rng, n);
        let model = dtmc_model(&p, &[("goal", &goal), ("phi", &phi)])
            .with_reward(RewardModel { name: "r".into(), state_rewards: Some(r.clone()), action_rewards: None })
            .unwrap();
        let float = model.convert(to_f64);
        let cases: [(&str, Vec<Extended<Q>>, bool); 3] = [
            (r#"P=? [ "phi" U "goal" ]"#, until(&p, &phi, &goal).into_iter().map(Extended::Finite).collect(), false),
            (r#"R{"r"}=? [ F "goal" ]"#, reach_reward(&p, &r, &goal).iter().map(as_ext).collect(), true),
            (r#"LRA{"r"}=? [ ]"#, lra(&p, &r).into_iter().map(Extended::Finite).collect(), true),
        ];
        for (prop, want, relative) in cases {
            let got = numbers(&run(&float, prop, &options)?);
            if let Some(s) = (0..n).find(|&s| !close(&got[s], &want[s], tol, relative)) {
                return Err(format!("seed {seed}, {prop}, state {s}: {} vs {}", got[s], want[s]));
            }
            let exact = numbers(&run(&model, prop, &CheckOptions::default())?);
            if exact != want {
                return Err(format!("seed {seed}, {prop}: exact mode differs from elimination"));
            }
        }
    }
    Ok(format!("{instances} DTMCs ({states} states) at precision {precision:e} within {tol:e}"))
}

fn row_rewards(rng: &mut impl Rng, mdp: &DenseMdp) -> Vec<Q> {
    mdp.iter().flatten().map(|_| q(rng.random_range(0..=2), 1)).collect()
}

fn chosen(rewards: &[Q], mdp: &DenseMdp, sched: &[usize]) -> Vec<Q> {
    let mut offset = 0;
    let mut out = Vec::new();
    for (actions, &a) in mdp.iter().zip(sched) {
        out.push(rewards[offset + a].clone());
        offset += actions.len();
    }
    out
}

struct MdpCase {
    mdp: DenseMdp,
    phi: Vec<bool>,
    goal: Vec<bool>,
    rewards: Vec<Q>,
    model: Model<Q>,
}

fn mdp_case(seed: u64, max_states: usize, max_actions: usize) -> MdpCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_states);
    let mdp = random_mdp(&mut rng, n, max_actions);
    let mut goal = random_set(&mut rng, n, 0.3);
    ensure_nonempty(&mut goal, &mut rng);
    let phi = random_set(&mut rng, n, 0.8);
    let rewards = row_rewards(&mut rng, &mdp);
    let model = mdp_model(&mdp, &[("goal", &goal), ("phi", &phi)])
        .with_reward(RewardModel { name: "r".into(), state_rewards: None, action_rewards: Some(rewards.clone()) })
        .unwrap();
    MdpCase { mdp, phi, goal, rewards, model }
}

const MDP_PROPS: [&str; 3] = [r#"P{d}=? [ "phi" U "goal" ]"#, r#"R{{"r"}}{d}=? [ F "goal" ]"#, r#"LRA{{"r"}}{d}=? [ ]"#];

fn mdp_prop(kind: usize, dir: &str) -> String {
    MDP_PROPS[kind].replace("{d}", dir).replace("{{", "{").replace("}}", "}")
}

fn enumerate(case: &MdpCase, kind: usize, maximize: bool) -> Vec<Extended<Q>> {
    let best = optimum(&case.mdp, maximize, |p, sched| match kind {
        0 => until(p, &case.phi, &case.goal).into_iter().map(Some).collect(),
        1 => reach_reward(p, &chosen(&case.rewards, &case.mdp, sched), &case.goal),
        _ => lra(p, &chosen(&case.rewards, &case.mdp, sched)).into_iter().map(Some).collect(),
    });
    best.iter().map(as_ext).collect()
}

/// Optimal values on small MDPs equal the best or worst memoryless
/// deterministic scheduler, exactly.
pub fn mdp_enumeration(instances: u64) -> Outcome {
    let options = CheckOptions::default();
    let mut checks = 0;
    for seed in 0..instances {
        let case = mdp_case(1000 + seed, 4, 2);
        for kind in 0..3 {
            for (dir, maximize) in [("max", true), ("min", false)] {
                let prop = mdp_prop(kind, dir);
                let got = numbers(&run(&case.model, &prop, &options)?);
                let want = enumerate(&case, kind, maximize);
                if got != want {
                    return Err(format!("seed {}, {prop}: {got:?} vs {want:?}", 1000 + seed));
                }
                checks += 1;
            }
        }
    }
    Ok(format!("{instances} MDPs, {checks} queries equal to enumeration"))
}

/// Re-check every exported scheduler on the model it induces.
pub fn scheduler_soundness(instances: u64) -> Outcome {
    let options = CheckOptions::default();
    let mut checks = 0;
    for seed in 0..instances {
        let case = mdp_case(5000 + seed, 8, 3);
        for kind in 0..3 {
            for dir in ["max", "min"] {
                let prop = mdp_prop(kind, dir);
                let r = run(&case.model, &prop, &options)?;
                let sched = r.scheduler.clone().ok_or_else(|| format!("{prop}: no scheduler"))?;
                let induced = case.model.induced(&sched).map_err(|e| e.to_string())?;
                let again = run(&induced, &mdp_prop(kind, ""), &options)?;
                if numbers(&again) != numbers(&r) {
                    return Err(format!("seed {}, {prop}: induced {:?} vs {:?}", 5000 + seed, numbers(&again), numbers(&r)));
                }
                checks += 1;
            }
        }
    }
    let ma = super::ma_examples();
    for (model, prop) in &ma {
        let r = run(model, prop, &options)?;
        let sched = r.scheduler.clone().ok_or_else(|| format!("{prop}: no scheduler"))?;
        let induced = model.induced(&sched).map_err(|e| e.to_string())?;
        if numbers(&run(&induced, prop, &options)?) != numbers(&r) {
            return Err(format!("Markov automaton, {prop}: induced value differs"));
        }
        checks += 1;
    }
    Ok(format!("{checks} exported schedulers reproduce their values exactly"))
}

fn random_rates(rng: &mut impl Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|s| {
            let mut row = vec![0.0; n];
            for _ in 0..rng.random_range(1..=3) {
                let t = rng.random_range(0..n);
                if t != s {
                    row[t] += f64::from(rng.random_range(1..=10u32)) / 2.0;
                }
            }
            row
        })
        .collect()
}

/// Uniformization against a dense matrix exponential.
pub fn ctmc_transient(instances: u64) -> Outcome {
    let options = CheckOptions::with_solve(SolveOptions::default().with_precision(1e-10));
    let mut worst: f64 = 0.0;
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + seed);
        let n = rng.random_range(2..=6);
        let rates = random_rates(&mut rng, n);
        let mut psi = random_set(&mut rng, n, 0.3);
        ensure_nonempty(&mut psi, &mut rng);
        let phi = random_set(&mut rng, n, 0.8);
        let t = f64::from(rng.random_range(1..=30u32)) / 10.0;
        let dense: Dense = rates.iter().map(|r| r.iter().map(|&v| Q::from_f64(v).unwrap()).collect()).collect();
        let model = ctmc_model(&dense, &[("phi", &phi), ("psi", &psi)]).convert(to_f64);
        let got = numbers(&run(&model, &format!(r#"P=? [ "phi" U<={t} "psi" ]"#), &options)?);
        let want = ctmc_bounded_until(&rates, &phi, &psi, t);
        for s in 0..n {
            let err = (got[s].as_float() - want[s]).abs();
            worst = worst.max(err);
            if err > 1e-7 {
                return Err(format!("seed {}, t = {t}, state {s}: {} vs {}", 9000 + seed, got[s], want[s]));
            }
        }
    }
    let precise = CheckOptions::with_solve(SolveOptions::default().with_precision(1e-12));
    let two = ctmc_model(&vec![vec![q(0, 1), q(1, 1)], vec![q(0, 1), q(1, 1)]], &[("goal", &[false, true])]).convert(to_f64);
    for t in [0.0f64, 0.1, 1.0, 10.0] {
        let got = numbers(&run(&two, &format!(r#"P=? [ F<={t} "goal" ]"#), &precise)?)[0].as_float();
        let want = 1.0 - (-t).exp();
        if (got - want).abs() > 1e-9 {
            return Err(format!("two-state chain, t = {t}: {got} vs {want}"));
        }
    }
    Ok(format!("{instances} CTMCs within 1e-7 (worst {worst:.1e}); 1 - e^-t within 1e-9"))
}

/// Fox-Glynn weights against the Poisson pmf.
pub fn fox_glynn_weights() -> Outcome {
    for eps in [1e-6, 1e-10] {
        for lambda in [0.1, 1.0, 10.0, 100.0, 1000.0] {
            let fg = fox_glynn(lambda, eps).map_err(|e| e.to_string())?;
            let pmf = Poisson::new(lambda).unwrap();
            let normalized: f64 = (fg.left..=fg.right).map(|k| fg.probability(k)).sum();
            let covered: f64 = (fg.left..=fg.right).map(|k| pmf.pmf(k as u64)).sum();
            if !(normalized <= 1.0 + 1e-12 && normalized >= 1.0 - 2.0 * eps) {
                return Err(format!("lambda {lambda}, eps {eps}: weights sum to {normalized}"));
            }
            if !(covered >= 1.0 - 2.0 * eps && covered <= 1.0 + 1e-12) {
                return Err(format!("lambda {lambda}, eps {eps}: window [{}, {}] covers {covered}", fg.left, fg.right));
            }
            for k in fg.left..=fg.right {
                let (w, p) = (fg.probability(k), pmf.pmf(k as u64));
                if (w - p).abs() > 10.0 * eps {
                    return Err(format!("lambda {lambda}, eps {eps}, k {k}: {w} vs {p}"));
                }
            }
        }
    }
    Ok("lambda in {0.1, 1, 10, 100, 1000} at eps 1e-6 and 1e-10".into())
}

/// Slow-mixing chain: states 0 and 1 swap with probability `1 - d` and
/// split the rest evenly between a goal (2) and a sink (3).
pub fn stiff_chain(d: Q) -> Dense {
    let half = &d / q(2, 1);
    let swap = Q::one() - &d;
    vec![
        vec![Q::zero(), swap.clone(), half.clone(), half.clone()],
        vec![swap, Q::zero(), half.clone(), half],
        vec![Q::zero(), Q::zero(), Q::one(), Q::zero()],
        vec![Q::zero(), Q::zero(), Q::zero(), Q::one()],
    ]
}

/// Jacobi at a loose precision stops far from the true value; exact mode is
/// exact and reproducible.
pub fn stiff_exact_vs_float() -> Outcome {
    let p = stiff_chain(q(1, 100_000));
    let goal = [false, false, true, false];
    let model = dtmc_model(&p, &[("goal", &goal)]);
    let want = until(&p, &[true; 4], &goal)[0].clone();
    let prop = r#"P=? [ F "goal" ]"#;
    let jacobi = CheckOptions::with_solve(SolveOptions::default().with_linear(LinearMethod::Jacobi).with_precision(1e-4));
    let float = numbers(&run(&model.convert(to_f64), prop, &jacobi)?)[0].as_float();
    let gap = (float - to_f64(&want)).abs();
    if gap <= 1e-4 {
        return Err(format!("Jacobi at 1e-4 returned {float}, only {gap:e} from {want}"));
    }
    let first = numbers(&run(&model, prop, &CheckOptions::default())?);
    let second = numbers(&run(&model, prop, &CheckOptions::default())?);
    if first[0] != Extended::Finite(want.clone()) || first != second || first[0].to_string() != second[0].to_string() {
        return Err(format!("exact mode returned {} then {}; expected {want}", first[0], second[0]));
    }
    Ok(format!("Jacobi {float:.6} is {gap:.3} off; exact {want} twice"))
}
