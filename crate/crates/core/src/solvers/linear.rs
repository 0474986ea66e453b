use std::collections::{BTreeMap, BTreeSet};

use super::{difference, diff_one, LinearMethod, SolveOptions, SolveStats, SolverError};
use crate::model::SparseMatrix;
use crate::numeric::Value;

/// Solve `x = A·x + b`. Iterative methods start from zero.
pub fn solve_linear<V: Value>(
    a: &SparseMatrix<V>,
    b: &[V],
    options: &SolveOptions,
) -> Result<(Vec<V>, SolveStats), SolverError> {
    solve_linear_from(a, b, None, options)
}

pub(crate) fn solve_linear_from<V: Value>(
    a: &SparseMatrix<V>,
    b: &[V],
    start: Option<Vec<V>>,
    options: &SolveOptions,
) -> Result<(Vec<V>, SolveStats), SolverError> {
    options.check()?;
    let n = a.num_rows();
    if a.num_cols() != n || b.len() != n {
        return Err(SolverError::Invalid(format!(
            "expected a square system, got {}x{} matrix with {} right-hand sides",
            n,
            a.num_cols(),
            b.len()
        )));
    }
    let method = options.linear_method::<V>();
    if V::EXACT && method.is_iterative() {
        return Err(SolverError::NotExact(method.name()));
    }
    let x = start.filter(|x| x.len() == n).unwrap_or_else(|| vec![V::zero(); n]);
    match method {
        LinearMethod::Jacobi => jacobi(a, b, x, options),
        LinearMethod::GaussSeidel => relaxed_sweeps(a, b, x, options, None),
        LinearMethod::Sor => relaxed_sweeps(a, b, x, options, Some(V::from_f64(options.omega).expect("finite omega"))),
        LinearMethod::Elimination => eliminate(a, b),
    }
}

fn diagonal<V: Value>(a: &SparseMatrix<V>) -> Result<Vec<V>, SolverError> {
    (0..a.num_rows())
        .map(|i| {
            let d = V::one().sub_ref(a.get(i, i).unwrap_or(&V::zero()));
            if d.is_exactly_zero() {
                Err(SolverError::Singular(i))
            } else {
                Ok(d)
            }
        })
        .collect()
}

fn off_diagonal_dot<V: Value>(a: &SparseMatrix<V>, i: usize, x: &[V], b: &V) -> V {
    let mut s = b.clone();
    for (j, v) in a.row(i) {
        if j != i {
            s += &v.mul_ref(&x[j]);
        }
    }
    s
}

fn jacobi<V: Value>(
    a: &SparseMatrix<V>,
    b: &[V],
    mut x: Vec<V>,
    options: &SolveOptions,
) -> Result<(Vec<V>, SolveStats), SolverError> {
    let diag = diagonal(a)?;
    let mut next = x.clone();
    let mut stats = SolveStats::new("jacobi");
    let mut residual = f64::INFINITY;
    while stats.iterations < options.max_iterations {
        stats.iterations += 1;
        for i in 0..x.len() {
            let mut s = off_diagonal_dot(a, i, &x, &b[i]);
            s /= &diag[i];
            next[i] = s;
        }
        residual = difference(&x, &next, options.relative);
        std::mem::swap(&mut x, &mut next);
        if residual < options.precision {
            return Ok((x, stats));
        }
    }
    Err(SolverError::NoConvergence { method: "jacobi", iterations: stats.iterations, residual })
}

/// Gauss-Seidel sweeps, over-relaxed when `omega` is given.
fn relaxed_sweeps<V: Value>(
    a: &SparseMatrix<V>,
    b: &[V],
    mut x: Vec<V>,
    options: &SolveOptions,
    omega: Option<V>,
) -> Result<(Vec<V>, SolveStats), SolverError> {
    let name = if omega.is_some() { "sor" } else { "gauss_seidel" };
    let diag = diagonal(a)?;
    let keep = omega.as_ref().map(|w| V::one().sub_ref(w));
    let mut stats = SolveStats::new(name);
    let mut residual = f64::INFINITY;
    while stats.iterations < options.max_iterations {
        stats.iterations += 1;
        residual = 0.0;
        for i in 0..x.len() {
            let mut s = off_diagonal_dot(a, i, &x, &b[i]);
            s /= &diag[i];
            if let (Some(w), Some(k)) = (&omega, &keep) {
                s *= w;
                s += &k.mul_ref(&x[i]);
            }
            residual = residual.max(diff_one(&x[i], &s, options.relative));
            x[i] = s;
        }
        if residual < options.precision {
            return Ok((x, stats));
        }
    }
    Err(SolverError::NoConvergence { method: name, iterations: stats.iterations, residual })
}

/// State elimination: remove unknowns one at a time, redirecting their
/// incoming coefficients to their successors, then back-substitute.
fn eliminate<V: Value>(a: &SparseMatrix<V>, b: &[V]) -> Result<(Vec<V>, SolveStats), SolverError> {
    let n = a.num_rows();
    let mut rows: Vec<BTreeMap<usize, V>> =
        (0..n).map(|i| a.row(i).filter(|(_, v)| !v.is_exactly_zero()).map(|(j, v)| (j, v.clone())).collect()).collect();
    let mut rhs = b.to_vec();
    let mut preds: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, row) in rows.iter().enumerate() {
        for &j in row.keys() {
            if j != i {
                preds[j].insert(i);
            }
        }
    }
    let mut done = vec![false; n];
    for i in 0..n {
        let self_loop = rows[i].remove(&i).unwrap_or_else(V::zero);
        let d = V::one().sub_ref(&self_loop);
        if d.is_exactly_zero() {
            return Err(SolverError::Singular(i));
        }
        if !d.is_one() {
            for v in rows[i].values_mut() {
                *v /= &d;
            }
            rhs[i] /= &d;
        }
        done[i] = true;
        let pivot: Vec<(usize, V)> = rows[i].iter().map(|(&j, v)| (j, v.clone())).collect();
        let incoming = std::mem::take(&mut preds[i]);
        for k in incoming {
            if done[k] {
                continue;
            }
            let Some(coef) = rows[k].remove(&i) else { continue };
            for (j, v) in &pivot {
                let add = coef.mul_ref(v);
                let entry = rows[k].entry(*j).or_insert_with(V::zero);
                *entry += &add;
                if *j != k {
                    preds[*j].insert(k);
                }
            }
            let add = coef.mul_ref(&rhs[i]);
            rhs[k] += &add;
        }
    }
    let mut x = vec![V::zero(); n];
    for i in (0..n).rev() {
        let mut s = rhs[i].clone();
        for (&j, v) in &rows[i] {
            s += &v.mul_ref(&x[j]);
        }
        x[i] = s;
    }
    Ok((x, SolveStats { method: "elimination", iterations: n }))
}
