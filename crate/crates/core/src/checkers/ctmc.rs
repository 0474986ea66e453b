//! Transient analysis of CTMCs by uniformization.

use super::{dtmc, indicator, multiply, Result};
use crate::bitset::{self, BitSet};
use crate::model::{SparseMatrix, SparseMatrixBuilder};
use crate::numeric::Value;
use crate::solvers::{fox_glynn, FoxGlynn, SolveOptions, SolveStats, SolverError};

/// Uniformization rate relative to the largest exit rate.
pub const UNIFORMIZATION_FACTOR: f64 = 1.02;

/// `I + (R - diag(E)) / q` on the states of `active`; other states become
/// absorbing.
fn uniformized<V: Value>(rates: &SparseMatrix<V>, exit: &[V], active: &BitSet, q: &V) -> SparseMatrix<V> {
    let n = rates.num_rows();
    let mut builder = SparseMatrixBuilder::new(n);
    for s in 0..n {
        if active.contains(s) {
            let stay = V::one().sub_ref(&exit[s].div_ref(q));
            builder.add(s, stay);
            for (t, v) in rates.row(s) {
                builder.add(t, v.div_ref(q));
            }
        } else {
            builder.add(s, V::one());
        }
        builder.finish_row();
    }
    builder.finish(Some(n)).expect("square by construction")
}

struct Uniformization<V> {
    matrix: SparseMatrix<V>,
    rate: V,
    weights: Option<FoxGlynn>,
}

fn uniformize<V: Value>(rates: &SparseMatrix<V>, exit: &[V], active: &BitSet, t: f64, options: &SolveOptions) -> Result<Uniformization<V>> {
    let max_exit = active.ones().map(|s| exit[s].as_float()).fold(0.0, f64::max);
    let q = UNIFORMIZATION_FACTOR * max_exit;
    let rate = V::from_f64(q).ok_or_else(|| SolverError::Invalid(format!("uniformization rate {q}")))?;
    if q == 0.0 || t == 0.0 {
        return Ok(Uniformization { matrix: SparseMatrix::identity(rates.num_rows()), rate, weights: None });
    }
    let weights = fox_glynn(q * t, options.precision)?;
    Ok(Uniformization { matrix: uniformized(rates, exit, active, &rate), rate, weights: Some(weights) })
}

fn weight<V: Value>(w: f64) -> V {
    V::from_f64(w).expect("finite Poisson weight")
}

/// `Σ_k ψ(k)·P^k·x0`, accumulated by repeated multiplication.
fn poisson_sum<V: Value>(u: &Uniformization<V>, x0: Vec<V>, stats: &mut SolveStats) -> Vec<V> {
    let Some(fg) = &u.weights else { return x0 };
    let mut acc = vec![V::zero(); x0.len()];
    let mut x = x0;
    for k in 0..=fg.right {
        if k >= fg.left {
            let w: V = weight(fg.probability(k));
            for (a, v) in acc.iter_mut().zip(&x) {
                *a += &w.mul_ref(v);
            }
        }
        if k < fg.right {
            x = multiply(&u.matrix, &x);
            stats.iterations += 1;
        }
    }
    acc
}

pub(crate) fn bounded_until<V: Value>(
    rates: &SparseMatrix<V>,
    exit: &[V],
    phi: &BitSet,
    psi: &BitSet,
    t: f64,
    options: &SolveOptions,
) -> Result<(Vec<V>, SolveStats)> {
    let active = bitset::minus(phi, psi);
    let u = uniformize(rates, exit, &active, t, options)?;
    let mut stats = SolveStats { method: "uniformization", iterations: 0 };
    let x = poisson_sum(&u, indicator(psi, rates.num_rows()), &mut stats);
    Ok((x, stats))
}

pub(crate) fn instantaneous<V: Value>(
    rates: &SparseMatrix<V>,
    exit: &[V],
    state_reward: &[V],
    t: f64,
    options: &SolveOptions,
) -> Result<(Vec<V>, SolveStats)> {
    let all = bitset::full(rates.num_rows());
    let u = uniformize(rates, exit, &all, t, options)?;
    let mut stats = SolveStats { method: "uniformization", iterations: 0 };
    let x = poisson_sum(&u, state_reward.to_vec(), &mut stats);
    Ok((x, stats))
}

/// Expected reward accumulated up to time `t` for per-time `reward_rate`:
/// `Σ_k (1/q)·(1 - Σ_{i≤k} ψ(i))·P^k·ρ`.
pub(crate) fn cumulative<V: Value>(
    rates: &SparseMatrix<V>,
    exit: &[V],
    reward_rate: &[V],
    t: f64,
    options: &SolveOptions,
) -> Result<(Vec<V>, SolveStats)> {
    let n = rates.num_rows();
    let all = bitset::full(n);
    let u = uniformize(rates, exit, &all, t, options)?;
    let mut stats = SolveStats { method: "uniformization", iterations: 0 };
    let Some(fg) = &u.weights else {
        let tv: V = weight(t);
        return Ok((reward_rate.iter().map(|r| r.mul_ref(&tv)).collect(), stats));
    };
    let mut acc = vec![V::zero(); n];
    let mut x = reward_rate.to_vec();
    let mut mass = 0.0;
    for k in 0..=fg.right {
        mass += fg.probability(k);
        let w: V = weight((1.0 - mass).max(0.0) / u.rate.as_float());
        for (a, v) in acc.iter_mut().zip(&x) {
            *a += &w.mul_ref(v);
        }
        if k < fg.right {
            x = multiply(&u.matrix, &x);
            stats.iterations += 1;
        }
    }
    Ok((acc, stats))
}

/// Long-run average of a per-time reward rate.
pub(crate) fn lra<V: Value>(rates: &SparseMatrix<V>, exit: &[V], reward_rate: &[V], options: &SolveOptions) -> Result<(Vec<V>, SolveStats)> {
    let n = rates.num_rows();
    let mut builder = SparseMatrixBuilder::new(n);
    for s in 0..n {
        for (t, v) in rates.row(s) {
            builder.add(t, v.div_ref(&exit[s]));
        }
        builder.finish_row();
    }
    let embedded = builder.finish(Some(n))?;
    dtmc::lra_with(&embedded, rates, Some(exit), reward_rate, options)
}
