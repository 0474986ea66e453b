//! Discrete-time chains given by a (sub)stochastic probability matrix. The
//! CTMC checks reuse these on the embedded chain.

use super::{indicator, multiply, Extended, Result};
use crate::bitset::{self, BitSet};
use crate::graphs::{bsccs, prob0, prob1};
use crate::model::{RowGrouping, SparseMatrix, SparseMatrixBuilder};
use crate::numeric::Value;
use crate::solvers::{solve_linear, steady_state_bscc, SolveOptions, SolveStats};

pub(crate) fn next<V: Value>(p: &SparseMatrix<V>, set: &BitSet) -> Vec<V> {
    multiply(p, &indicator(set, p.num_rows()))
}

/// Solve `x = A·x + b` on `region`, returning a full-length vector with
/// `outside` outside the region; `b` is indexed by original state.
fn solve_on<V: Value>(
    p: &SparseMatrix<V>,
    region: &BitSet,
    b: impl Fn(usize) -> V,
    outside: impl Fn(usize) -> V,
    options: &SolveOptions,
) -> Result<(Vec<V>, SolveStats)> {
    let n = p.num_rows();
    let mut x: Vec<V> = (0..n).map(&outside).collect();
    if region.count_ones(..) == 0 {
        return Ok((x, SolveStats::default()));
    }
    let sub = p.submatrix(&RowGrouping::trivial(n), region, None);
    let rhs: Vec<V> = sub.new_to_state.iter().map(|&s| b(s)).collect();
    let (y, stats) = solve_linear(&sub.matrix, &rhs, options)?;
    for (i, &s) in sub.new_to_state.iter().enumerate() {
        x[s] = y[i].clone();
    }
    Ok((x, stats))
}

/// One-step mass from `s` into `set`.
fn mass_into<V: Value>(p: &SparseMatrix<V>, s: usize, set: &BitSet) -> V {
    let mut acc = V::zero();
    for (t, v) in p.row(s) {
        if set.contains(t) {
            acc += v;
        }
    }
    acc
}

pub(crate) fn until<V: Value>(p: &SparseMatrix<V>, phi: &BitSet, psi: &BitSet, options: &SolveOptions) -> Result<(Vec<V>, SolveStats)> {
    let zero = prob0(p, phi, psi);
    let one = prob1(p, phi, psi);
    let maybe = bitset::complement(&bitset::or(&zero, &one));
    solve_on(p, &maybe, |s| mass_into(p, s, &one), |s| if one.contains(s) { V::one() } else { V::zero() }, options)
}

pub(crate) fn bounded_until<V: Value>(p: &SparseMatrix<V>, phi: &BitSet, psi: &BitSet, k: usize) -> Vec<V> {
    let n = p.num_rows();
    let maybe = bitset::minus(phi, psi);
    let mut x: Vec<V> = indicator(psi, n);
    for _ in 0..k {
        let mut next = multiply(p, &x);
        for s in 0..n {
            if !maybe.contains(s) {
                next[s] = x[s].clone();
            }
        }
        x = next;
    }
    x
}

/// Expected cost accumulated before reaching `goal`; infinite wherever the
/// goal is missed with positive probability.
pub(crate) fn reach_reward<V: Value>(
    p: &SparseMatrix<V>,
    cost: &[V],
    goal: &BitSet,
    options: &SolveOptions,
) -> Result<(Vec<Extended<V>>, SolveStats)> {
    let n = p.num_rows();
    let finite = prob1(p, &bitset::full(n), goal);
    let region = bitset::minus(&finite, goal);
    let (x, stats) = solve_on(p, &region, |s| cost[s].clone(), |_| V::zero(), options)?;
    let out = x.into_iter().enumerate().map(|(s, v)| if finite.contains(s) { Extended::Finite(v) } else { Extended::Infinity });
    Ok((out.collect(), stats))
}

pub(crate) fn cumulative<V: Value>(p: &SparseMatrix<V>, cost: &[V], k: usize) -> Vec<V> {
    let mut x = vec![V::zero(); p.num_rows()];
    for _ in 0..k {
        x = multiply(p, &x).into_iter().zip(cost).map(|(v, c)| v.add_ref(c)).collect();
    }
    x
}

pub(crate) fn instantaneous<V: Value>(p: &SparseMatrix<V>, state_reward: &[V], k: usize) -> Vec<V> {
    let mut x = state_reward.to_vec();
    for _ in 0..k {
        x = multiply(p, &x);
    }
    x
}

/// Values fixed on `known` states, extended to the rest by absorption:
/// `x(s) = Σ_t P(s,t)·x(t)` off `known`. Every non-`known` state must be
/// transient.
pub(crate) fn absorb<V: Value>(p: &SparseMatrix<V>, known: &BitSet, values: &[V], options: &SolveOptions) -> Result<(Vec<V>, SolveStats)> {
    let transient = bitset::complement(known);
    solve_on(
        p,
        &transient,
        |s| {
            let mut acc = V::zero();
            for (t, v) in p.row(s) {
                if known.contains(t) {
                    acc += &v.mul_ref(&values[t]);
                }
            }
            acc
        },
        |s| if known.contains(s) { values[s].clone() } else { V::zero() },
        options,
    )
}

/// Long-run average of per-step `reward`, weighting each BSCC's average by
/// the probability of ending up in it.
pub(crate) fn lra<V: Value>(p: &SparseMatrix<V>, reward: &[V], options: &SolveOptions) -> Result<(Vec<V>, SolveStats)> {
    lra_with(p, p, None, reward, options)
}

/// `steady` is the matrix whose BSCC restrictions give stationary
/// distributions (rates, with `exit`, for CTMCs); `p` is the embedded
/// probability matrix used for reachability. BSCCs with equal averages are
/// reached as one target.
pub(crate) fn lra_with<V: Value>(
    p: &SparseMatrix<V>,
    steady: &SparseMatrix<V>,
    exit: Option<&[V]>,
    reward: &[V],
    options: &SolveOptions,
) -> Result<(Vec<V>, SolveStats)> {
    let n = p.num_rows();
    let mut stats = SolveStats::default();
    let trivial = RowGrouping::trivial(n);
    let mut groups: Vec<(V, BitSet)> = Vec::new();
    for b in bsccs(steady) {
        let sub = steady.submatrix(&trivial, &b, None);
        let sub_exit: Option<Vec<V>> = exit.map(|e| sub.new_to_state.iter().map(|&s| e[s].clone()).collect());
        let (pi, st) = steady_state_bscc(&sub.matrix, sub_exit.as_deref(), options)?;
        stats.absorb(&st);
        let mut avg = V::zero();
        for (i, &s) in sub.new_to_state.iter().enumerate() {
            avg += &pi[i].mul_ref(&reward[s]);
        }
        match groups.iter_mut().find(|(v, _)| *v == avg) {
            Some((_, set)) => set.union_with(&b),
            None => groups.push((avg, b)),
        }
    }
    let mut x = vec![V::zero(); n];
    let all = bitset::full(n);
    for (avg, set) in &groups {
        if avg.is_exactly_zero() {
            continue;
        }
        let (pr, st) = until(p, &all, set, options)?;
        stats.absorb(&st);
        for (v, w) in x.iter_mut().zip(&pr) {
            *v += &w.mul_ref(avg);
        }
    }
    Ok((x, stats))
}

/// `Pr(F goal | F cond)` via the product with a two-bit memory recording
/// whether `goal` and `cond` have been seen.
pub(crate) fn conditional<V: Value>(
    p: &SparseMatrix<V>,
    goal: &BitSet,
    cond: &BitSet,
    options: &SolveOptions,
) -> Result<(Vec<Extended<V>>, SolveStats)> {
    let n = p.num_rows();
    let bits = |s: usize| usize::from(goal.contains(s)) | (usize::from(cond.contains(s)) << 1);
    let mut builder = SparseMatrixBuilder::new(4 * n);
    for s in 0..n {
        for m in 0..4 {
            for (t, v) in p.row(s) {
                builder.add(4 * t + (m | bits(t)), v.clone());
            }
            builder.finish_row();
        }
    }
    let product = builder.finish(Some(4 * n))?;
    let both = bitset::from_indices(4 * n, (0..n).map(|s| 4 * s + 3));
    let (joint, mut stats) = until(&product, &bitset::full(4 * n), &both, options)?;
    let (denominator, st) = until(p, &bitset::full(n), cond, options)?;
    stats.absorb(&st);
    let out = (0..n).map(|s| {
        let d = &denominator[s];
        if d.is_exactly_zero() {
            Extended::Undefined
        } else {
            Extended::Finite(joint[4 * s + bits(s)].div_ref(d))
        }
    });
    Ok((out.collect(), stats))
}
