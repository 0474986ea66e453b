//! Dense reference implementations used as test oracles. Everything here is
//! deliberately naive: explicit matrices, Gaussian elimination over the
//! rationals, graph closure by fixed point, and brute-force scheduler
//! enumeration.
#![allow(dead_code)]

use num_traits::{One, Zero};
use rand::Rng;
use squall::bitset;
use squall::model::{Model, RowGrouping, SparseMatrix, StateLabeling};
use squall::Rational;

pub type Q = Rational;
pub type Dense = Vec<Vec<Q>>;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

pub fn to_f64(x: &Q) -> f64 {
    squall::numeric::rational_to_f64(x)
}

/// Random distribution over `n` targets with small integer weights; at most
/// `support` targets get positive mass.
pub fn random_row(rng: &mut impl Rng, n: usize, support: usize) -> Vec<Q> {
    let mut weights = vec![0i64; n];
    let k = rng.random_range(1..=support.min(n));
    for _ in 0..k {
        weights[rng.random_range(0..n)] += rng.random_range(1..=4);
    }
    let total: i64 = weights.iter().sum();
    weights.into_iter().map(|w| q(w, total)).collect()
}

pub fn random_dtmc(rng: &mut impl Rng, n: usize) -> Dense {
    (0..n).map(|_| random_row(rng, n, 3)).collect()
}

/// `mdp[s][a]` is the distribution of action `a` in state `s`.
pub type DenseMdp = Vec<Vec<Vec<Q>>>;

pub fn random_mdp(rng: &mut impl Rng, n: usize, max_actions: usize) -> DenseMdp {
    (0..n).map(|_| (0..rng.random_range(1..=max_actions)).map(|_| random_row(rng, n, 3)).collect()).collect()
}

pub fn random_set(rng: &mut impl Rng, n: usize, p: f64) -> Vec<bool> {
    (0..n).map(|_| rng.random_bool(p)).collect()
}

fn sparse(rows: &[Vec<Q>]) -> SparseMatrix<Q> {
    let n = rows.first().map_or(0, Vec::len);
    let rows = rows
        .iter()
        .map(|r| r.iter().enumerate().filter(|(_, v)| !v.is_zero()).map(|(c, v)| (c, v.clone())).collect())
        .collect();
    SparseMatrix::from_rows(n, rows).unwrap()
}

pub fn labeling(n: usize, labels: &[(&str, &[bool])]) -> StateLabeling {
    let mut l = StateLabeling::new(n);
    l.add_state(StateLabeling::INIT, 0);
    for (name, set) in labels {
        l.insert(*name, bitset::from_indices(n, (0..n).filter(|&s| set[s]))).unwrap();
    }
    l
}

pub fn dtmc_model(p: &Dense, labels: &[(&str, &[bool])]) -> Model<Q> {
    Model::dtmc(sparse(p), labeling(p.len(), labels)).unwrap()
}

pub fn ctmc_model(rates: &Dense, labels: &[(&str, &[bool])]) -> Model<Q> {
    Model::ctmc(sparse(rates), labeling(rates.len(), labels)).unwrap()
}

pub fn mdp_model(mdp: &DenseMdp, labels: &[(&str, &[bool])]) -> Model<Q> {
    let rows: Vec<Vec<Q>> = mdp.iter().flatten().cloned().collect();
    let mut offsets = vec![0];
    for actions in mdp {
        offsets.push(offsets.last().unwrap() + actions.len());
    }
    Model::mdp(sparse(&rows), RowGrouping::new(offsets).unwrap(), labeling(mdp.len(), labels)).unwrap()
}

/// Solve `x = A·x + b` by Gaussian elimination on `I - A`.
pub fn solve(a: &Dense, b: &[Q]) -> Vec<Q> {
    let n = b.len();
    let mut m: Vec<Vec<Q>> = (0..n)
        .map(|i| {
            let mut row: Vec<Q> = (0..n).map(|j| if i == j { Q::one() - &a[i][j] } else { -a[i][j].clone() }).collect();
            row.push(b[i].clone());
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero()).expect("singular system");
        m.swap(col, pivot);
        let p = m[col][col].clone();
        for v in m[col].iter_mut() {
            *v = &*v / &p;
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in col..=n {
                    let d = &m[col][c] * &f;
                    m[r][c] = &m[r][c] - d;
                }
            }
        }
    }
    m.into_iter().map(|row| row[n].clone()).collect()
}

/// States that can reach `target` moving only through `through`.
pub fn can_reach(p: &Dense, through: &[bool], target: &[bool]) -> Vec<bool> {
    let n = p.len();
    let mut reach = target.to_vec();
    loop {
        let mut changed = false;
        for s in 0..n {
            if !reach[s] && through[s] && (0..n).any(|t| reach[t] && !p[s][t].is_zero()) {
                reach[s] = true;
                changed = true;
            }
        }
        if !changed {
            return reach;
        }
    }
}

pub fn until(p: &Dense, phi: &[bool], psi: &[bool]) -> Vec<Q> {
    let n = p.len();
    let positive = can_reach(p, phi, psi);
    let idx: Vec<usize> = (0..n).filter(|&s| positive[s] && !psi[s]).collect();
    let a: Dense = idx.iter().map(|&s| idx.iter().map(|&t| p[s][t].clone()).collect()).collect();
    let b: Vec<Q> = idx.iter().map(|&s| (0..n).filter(|&t| psi[t]).map(|t| p[s][t].clone()).sum()).collect();
    let y = solve(&a, &b);
    let mut x: Vec<Q> = psi.iter().map(|&g| if g { Q::one() } else { Q::zero() }).collect();
    for (i, &s) in idx.iter().enumerate() {
        x[s] = y[i].clone();
    }
    x
}

pub fn bounded_until(p: &Dense, phi: &[bool], psi: &[bool], k: usize) -> Vec<Q> {
    let n = p.len();
    let mut x: Vec<Q> = psi.iter().map(|&g| if g { Q::one() } else { Q::zero() }).collect();
    for _ in 0..k {
        x = (0..n)
            .map(|s| if psi[s] || !phi[s] { x[s].clone() } else { (0..n).map(|t| &p[s][t] * &x[t]).sum() })
            .collect();
    }
    x
}

/// Expected cost until `goal`; `None` is infinity.
pub fn reach_reward(p: &Dense, cost: &[Q], goal: &[bool]) -> Vec<Option<Q>> {
    let n = p.len();
    let pr = until(p, &vec![true; n], goal);
    let finite: Vec<bool> = pr.iter().map(|v| v.is_one()).collect();
    let idx: Vec<usize> = (0..n).filter(|&s| finite[s] && !goal[s]).collect();
    let a: Dense = idx.iter().map(|&s| idx.iter().map(|&t| p[s][t].clone()).collect()).collect();
    let b: Vec<Q> = idx.iter().map(|&s| cost[s].clone()).collect();
    let y = solve(&a, &b);
    let mut x: Vec<Option<Q>> = (0..n).map(|s| finite[s].then(Q::zero)).collect();
    for (i, &s) in idx.iter().enumerate() {
        x[s] = Some(y[i].clone());
    }
    x
}

pub fn bottom_components(p: &Dense) -> Vec<Vec<usize>> {
    let n = p.len();
    let all = vec![true; n];
    let reach: Vec<Vec<bool>> = (0..n)
        .map(|t| {
            let mut target = vec![false; n];
            target[t] = true;
            can_reach(p, &all, &target)
        })
        .collect();
    // reach[t][s]: s reaches t
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let forward: Vec<usize> = (0..n).filter(|&t| reach[t][s]).collect();
        if forward.iter().all(|&t| reach[s][t]) {
            for &t in &forward {
                seen[t] = true;
            }
            out.push(forward);
        }
    }
    out
}

/// Stationary distribution of an irreducible chain given by `states`.
pub fn stationary(p: &Dense, states: &[usize]) -> Vec<Q> {
    let k = states.len();
    // unknowns π; equations π(j) = Σ_i π(i) P(i,j) for j ≥ 1, and Σ π = 1
    let mut m: Vec<Vec<Q>> = Vec::with_capacity(k);
    m.push(vec![Q::one(); k + 1]);
    for j in 1..k {
        let mut row: Vec<Q> = (0..k).map(|i| p[states[i]][states[j]].clone() - if i == j { Q::one() } else { Q::zero() }).collect();
        row.push(Q::zero());
        m.push(row);
    }
    for col in 0..k {
        let pivot = (col..k).find(|&r| !m[r][col].is_zero()).expect("singular");
        m.swap(col, pivot);
        let pv = m[col][col].clone();
        for v in m[col].iter_mut() {
            *v = &*v / &pv;
        }
        for r in 0..k {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in col..=k {
                    let d = &m[col][c] * &f;
                    m[r][c] = &m[r][c] - d;
                }
            }
        }
    }
    m.into_iter().map(|row| row[k].clone()).collect()
}

/// Long-run average of per-state reward `r` from every state.
pub fn lra(p: &Dense, r: &[Q]) -> Vec<Q> {
    let n = p.len();
    let mut x = vec![Q::zero(); n];
    for b in bottom_components(p) {
        let pi = stationary(p, &b);
        let gain: Q = b.iter().zip(&pi).map(|(&s, w)| w * &r[s]).sum();
        let mut target = vec![false; n];
        for &s in &b {
            target[s] = true;
        }
        let pr = until(p, &vec![true; n], &target);
        for s in 0..n {
            x[s] += &pr[s] * &gain;
        }
    }
    x
}

/// Every deterministic memoryless scheduler of `mdp`.
pub fn schedulers(mdp: &DenseMdp) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for actions in mdp {
        out = out.into_iter().flat_map(|prefix| (0..actions.len()).map(move |a| [prefix.clone(), vec![a]].concat())).collect();
    }
    out
}

pub fn induced(mdp: &DenseMdp, scheduler: &[usize]) -> Dense {
    mdp.iter().zip(scheduler).map(|(actions, &a)| actions[a].clone()).collect()
}

/// Extended comparison where `None` is infinity.
pub fn ext_max(a: Option<Q>, b: Option<Q>) -> Option<Q> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if a > b { a } else { b }),
        _ => None,
    }
}

pub fn ext_min(a: Option<Q>, b: Option<Q>) -> Option<Q> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if a < b { a } else { b }),
        (Some(a), None) | (None, Some(a)) => Some(a),
        (None, None) => None,
    }
}

/// Optimum over all schedulers, per state, of a per-scheduler evaluation.
pub fn optimum(mdp: &DenseMdp, maximize: bool, eval: impl Fn(&Dense, &[usize]) -> Vec<Option<Q>>) -> Vec<Option<Q>> {
    let mut best: Option<Vec<Option<Q>>> = None;
    for sched in schedulers(mdp) {
        let v = eval(&induced(mdp, &sched), &sched);
        best = Some(match best {
            None => v,
            Some(b) => b.into_iter().zip(v).map(|(x, y)| if maximize { ext_max(x, y) } else { ext_min(x, y) }).collect(),
        });
    }
    best.unwrap()
}

/// `exp(Q·t)` by scaling, a Taylor series, and repeated squaring.
pub fn expm(generator: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let n = generator.len();
    let norm = generator.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max) * t;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = t / f64::from(1u32 << squarings);
    let a: Vec<Vec<f64>> = generator.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
    let mul = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| x[i][k] * y[k][j]).sum()).collect()).collect()
    };
    let mut result: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let mut term = result.clone();
    for k in 1..40 {
        term = mul(&term, &a).into_iter().map(|r| r.into_iter().map(|v| v / k as f64).collect()).collect();
        for i in 0..n {
            for j in 0..n {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = mul(&result, &result);
    }
    result
}

/// Time-bounded reachability `phi U<=t psi` of a CTMC by the matrix
/// exponential of the generator with `psi` and `¬phi` states made absorbing.
pub fn ctmc_bounded_until(rates: &[Vec<f64>], phi: &[bool], psi: &[bool], t: f64) -> Vec<f64> {
    let n = rates.len();
    let generator: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            if psi[s] || !phi[s] {
                return vec![0.0; n];
            }
            let exit: f64 = (0..n).filter(|&j| j != s).map(|j| rates[s][j]).sum();
            (0..n).map(|j| if j == s { -exit } else { rates[s][j] }).collect()
        })
        .collect();
    let e = expm(&generator, t);
    (0..n).map(|s| (0..n).filter(|&j| psi[j]).map(|j| e[s][j]).sum()).collect()
}

pub mod criteria;

/// Small Markov automata with nondeterminism, paired with a query.
pub fn ma_examples() -> Vec<(Model<Q>, &'static str)> {
    use squall::model::ModelKind;
    // 0 chooses between a slow (rate 1) and a fast (rate 4) Markovian state
    let tra = "STATES 4\nTRANSITIONS 5\n0 0 1 1\n0 1 2 1\n1 0 3 1 !\n2 0 3 4 !\n3 0 3 1 !\n";
    let lab = "#DECLARATION\ninit goal\n#END\n0 init\n3 goal\n";
    let m: Model<Q> = squall::explicit::read_explicit(tra, lab, ModelKind::Ma).unwrap();
    vec![(m.clone(), r#"Tmax=? [ F "goal" ]"#), (m.clone(), r#"Tmin=? [ F "goal" ]"#), (m, r#"Pmax=? [ F "goal" ]"#)]
}
