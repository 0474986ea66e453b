use super::linear::solve_linear;
use super::{SolveOptions, SolveStats, SolverError};
use crate::bitset;
use crate::graphs::tarjan;
use crate::model::{SparseMatrix, SparseMatrixBuilder};
use crate::numeric::Value;

/// Stationary distribution of an irreducible chain. `matrix` is a
/// probability matrix, or a rate matrix when `exit_rates` is given.
///
/// Pinning `π[0] = 1` turns `π = πP` into `y = Pᵀ|₋₀·y + P[0,·]` over the
/// remaining states, which is transient and hence solvable by any linear
/// method; the result is then normalized.
pub fn steady_state_bscc<V: Value>(
    matrix: &SparseMatrix<V>,
    exit_rates: Option<&[V]>,
    options: &SolveOptions,
) -> Result<(Vec<V>, SolveStats), SolverError> {
    let n = matrix.num_rows();
    if n == 0 || matrix.num_cols() != n {
        return Err(SolverError::Invalid(format!("steady state needs a non-empty square matrix, got {n}x{}", matrix.num_cols())));
    }
    if tarjan(n, &bitset::full(n), |s| matrix.successors(s).to_vec()).len() != 1 {
        return Err(SolverError::Internal("steady-state input is not irreducible".into()));
    }
    let probs = match exit_rates {
        None => matrix.clone(),
        Some(rates) => {
            if rates.len() != n || rates.iter().any(|e| e.is_exactly_zero()) {
                return Err(SolverError::Invalid("exit rates must be positive, one per state".into()));
            }
            let mut b = SparseMatrixBuilder::new(n);
            for s in 0..n {
                for (j, v) in matrix.row(s) {
                    b.add(j, v.div_ref(&rates[s]));
                }
                b.finish_row();
            }
            b.finish(Some(n)).map_err(|e| SolverError::Invalid(e.to_string()))?
        }
    };
    let mut pi = vec![V::one(); n];
    let mut stats = SolveStats::new(options.linear_method::<V>().name());
    if n > 1 {
        let t = probs.transpose();
        let mut a = SparseMatrixBuilder::new(n - 1);
        let mut rhs = Vec::with_capacity(n - 1);
        for j in 1..n {
            let mut from_pinned = V::zero();
            for (i, v) in t.row(j) {
                if i == 0 {
                    from_pinned = v.clone();
                } else {
                    a.add(i - 1, v.clone());
                }
            }
            a.finish_row();
            rhs.push(from_pinned);
        }
        let a = a.finish(Some(n - 1)).map_err(|e| SolverError::Invalid(e.to_string()))?;
        let (y, s) = solve_linear(&a, &rhs, options)?;
        stats = s;
        pi[1..].clone_from_slice(&y);
    }
    if let Some(rates) = exit_rates {
        for (p, e) in pi.iter_mut().zip(rates) {
            *p /= e;
        }
    }
    let mut total = V::zero();
    for p in &pi {
        total += p;
    }
    for p in &mut pi {
        *p /= &total;
    }
    Ok((pi, stats))
}
