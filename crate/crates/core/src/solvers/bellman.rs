use super::linear::solve_linear_from;
use super::{difference, BellmanMethod, LinearMethod, SolveOptions, SolveStats, SolverError};
use crate::model::{reduce_rows, Direction, RowGrouping, SparseMatrix, SparseMatrixBuilder};
use crate::numeric::{Rational, Value};

/// Solve `x = opt_dir (A·x + b)`, one `b` entry per row. Returns the values,
/// the optimal row offset per state, and statistics.
pub fn solve_bellman<V: Value>(
    a: &SparseMatrix<V>,
    grouping: &RowGrouping,
    b: &[V],
    dir: Direction,
    options: &SolveOptions,
) -> Result<(Vec<V>, Vec<usize>, SolveStats), SolverError> {
    solve_bellman_from(a, grouping, b, dir, None, options)
}

/// As [`solve_bellman`]; policy iteration starts from `initial` when given
/// (it must induce a solvable system).
pub fn solve_bellman_from<V: Value>(
    a: &SparseMatrix<V>,
    grouping: &RowGrouping,
    b: &[V],
    dir: Direction,
    initial: Option<&[usize]>,
    options: &SolveOptions,
) -> Result<(Vec<V>, Vec<usize>, SolveStats), SolverError> {
    options.check()?;
    let n = grouping.num_groups();
    if a.num_rows() != grouping.num_rows() || a.num_cols() != n || b.len() != a.num_rows() {
        return Err(SolverError::Invalid(format!(
            "Bellman system shape mismatch: {}x{} matrix, {} groups over {} rows, {} right-hand sides",
            a.num_rows(),
            a.num_cols(),
            n,
            grouping.num_rows(),
            b.len()
        )));
    }
    if let Some(init) = initial {
        if init.len() != n || init.iter().enumerate().any(|(s, &c)| c >= grouping.group_size(s)) {
            return Err(SolverError::Invalid("initial scheduler does not fit the row grouping".into()));
        }
    }
    match options.bellman_method::<V>() {
        BellmanMethod::ValueIteration => {
            if V::EXACT {
                return Err(SolverError::NotExact("vi"));
            }
            value_iteration(a, grouping, b, dir, options)
        }
        BellmanMethod::PolicyIteration => policy_iteration(a, grouping, b, dir, initial, options, "pi"),
        BellmanMethod::ExactPolicyIteration => {
            if V::EXACT {
                return policy_iteration(a, grouping, b, dir, initial, options, "exact_pi");
            }
            let exact = |v: &V| v.to_rational().ok_or_else(|| SolverError::Invalid(format!("non-finite entry {v}")));
            for v in a.values().iter().chain(b) {
                exact(v)?;
            }
            let ar = a.map_values(|v| v.to_rational().expect("checked finite"));
            let br: Vec<Rational> = b.iter().map(|v| v.to_rational().expect("checked finite")).collect();
            let (x, sched, stats) = policy_iteration(&ar, grouping, &br, dir, initial, options, "exact_pi")?;
            Ok((x.iter().map(V::from_rational).collect(), sched, stats))
        }
    }
}

fn row_values<V: Value>(a: &SparseMatrix<V>, b: &[V], x: &[V]) -> Vec<V> {
    (0..a.num_rows()).map(|r| a.row_dot(r, x).add_ref(&b[r])).collect()
}

fn value_iteration<V: Value>(
    a: &SparseMatrix<V>,
    grouping: &RowGrouping,
    b: &[V],
    dir: Direction,
    options: &SolveOptions,
) -> Result<(Vec<V>, Vec<usize>, SolveStats), SolverError> {
    let n = grouping.num_groups();
    let mut x = vec![V::zero(); n];
    let mut stats = SolveStats::new("vi");
    let mut residual = f64::INFINITY;
    let monotone = cfg!(debug_assertions) && b.iter().all(|v| *v >= V::zero());
    while stats.iterations < options.max_iterations {
        stats.iterations += 1;
        let (next, choices) = reduce_rows(grouping, &row_values(a, b, &x), dir);
        if monotone {
            debug_assert!(x.iter().zip(&next).all(|(o, n)| n >= o), "value iteration lost monotonicity");
        }
        residual = difference(&x, &next, options.relative);
        x = next;
        if residual < options.precision {
            return Ok((x, choices, stats));
        }
    }
    Err(SolverError::NoConvergence { method: "vi", iterations: stats.iterations, residual })
}

/// The linear system `x = A_σ·x + b_σ` of a memoryless scheduler.
pub(crate) fn policy_system<V: Value>(
    a: &SparseMatrix<V>,
    grouping: &RowGrouping,
    b: &[V],
    policy: &[usize],
) -> (SparseMatrix<V>, Vec<V>) {
    let n = grouping.num_groups();
    let mut builder = SparseMatrixBuilder::new(n);
    let mut rhs = Vec::with_capacity(n);
    for (s, &c) in policy.iter().enumerate() {
        let r = grouping.rows(s).start + c;
        for (j, v) in a.row(r) {
            builder.add(j, v.clone());
        }
        builder.finish_row();
        rhs.push(b[r].clone());
    }
    (builder.finish(Some(n)).expect("rows of a valid matrix"), rhs)
}

fn policy_iteration<V: Value>(
    a: &SparseMatrix<V>,
    grouping: &RowGrouping,
    b: &[V],
    dir: Direction,
    initial: Option<&[usize]>,
    options: &SolveOptions,
    name: &'static str,
) -> Result<(Vec<V>, Vec<usize>, SolveStats), SolverError> {
    let n = grouping.num_groups();
    let mut policy: Vec<usize> = initial.map_or_else(|| vec![0; n], <[usize]>::to_vec);
    let eval = if V::EXACT {
        options.clone().with_linear(LinearMethod::Elimination)
    } else {
        let mut o = options.clone().with_linear(options.linear.filter(|m| m.is_iterative()).unwrap_or(LinearMethod::GaussSeidel));
        o.precision = options.precision * 0.1;
        o
    };
    let mut stats = SolveStats::new(name);
    let mut x: Option<Vec<V>> = None;
    let mut seen = std::collections::HashSet::new();
    while stats.iterations < options.max_iterations {
        stats.iterations += 1;
        let (m, rhs) = policy_system(a, grouping, b, &policy);
        let (values, _) = solve_linear_from(&m, &rhs, x.take(), &eval)?;
        let q = row_values(a, b, &values);
        let (best, choices) = reduce_rows(grouping, &q, dir);
        let mut changed = false;
        for s in 0..n {
            let cur = &q[grouping.rows(s).start + policy[s]];
            if improves(dir, &best[s], cur, options) {
                policy[s] = choices[s];
                changed = true;
            }
        }
        if !changed {
            return Ok((values, policy, stats));
        }
        if !seen.insert(policy.clone()) {
            return Err(SolverError::Internal("policy iteration revisited a policy".into()));
        }
        x = Some(values);
    }
    Err(SolverError::NoConvergence { method: name, iterations: stats.iterations, residual: f64::NAN })
}

fn improves<V: Value>(dir: Direction, candidate: &V, current: &V, options: &SolveOptions) -> bool {
    if !dir.better(candidate, current) {
        return false;
    }
    if V::EXACT {
        return true;
    }
    let gap = candidate.sub_ref(current).abs_value().as_float();
    let scale = if options.relative { candidate.abs_value().as_float().max(current.abs_value().as_float()) } else { 1.0 };
    gap > options.precision * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn two_actions_without_transitions() {
        let a = SparseMatrix::<f64>::empty(2, 1);
        let g = RowGrouping::new(vec![0, 2]).unwrap();
        for m in [BellmanMethod::ValueIteration, BellmanMethod::PolicyIteration, BellmanMethod::ExactPolicyIteration] {
            let opts = SolveOptions::default().with_bellman(m);
            let (x, s, _) = solve_bellman(&a, &g, &[0.3, 0.7], Direction::Maximize, &opts).unwrap();
            assert_eq!((x, s), (vec![0.7], vec![1]), "{m}");
            let (x, s, _) = solve_bellman(&a, &g, &[0.3, 0.7], Direction::Minimize, &opts).unwrap();
            assert_eq!((x, s), (vec![0.3], vec![0]), "{m}");
        }
    }

    #[test]
    fn single_row_groups_match_linear_solve() {
        let a = SparseMatrix::from_rows(2, vec![vec![(1, q(1, 2))], vec![(0, q(1, 3))]]).unwrap();
        let b = vec![q(1, 4), q(1, 2)];
        let g = RowGrouping::trivial(2);
        let (lin, _) = super::super::solve_linear(&a, &b, &SolveOptions::default()).unwrap();
        for dir in [Direction::Minimize, Direction::Maximize] {
            let (x, _, _) = solve_bellman(&a, &g, &b, dir, &SolveOptions::default()).unwrap();
            assert_eq!(x, lin);
        }
    }

    fn enumerate_best(a: &SparseMatrix<Rational>, g: &RowGrouping, b: &[Rational], dir: Direction) -> Vec<Rational> {
        let n = g.num_groups();
        let mut policy = vec![0usize; n];
        let mut best: Option<Vec<Rational>> = None;
        loop {
            let (m, rhs) = policy_system(a, g, b, &policy);
            let (x, _) = super::super::solve_linear(&m, &rhs, &SolveOptions::default()).unwrap();
            best = Some(match best {
                None => x,
                Some(cur) => cur.into_iter().zip(x).map(|(c, v)| if dir.better(&v, &c) { v } else { c }).collect(),
            });
            let mut s = 0;
            loop {
                if s == n {
                    return best.unwrap();
                }
                policy[s] += 1;
                if policy[s] < g.group_size(s) {
                    break;
                }
                policy[s] = 0;
                s += 1;
            }
        }
    }

    #[test]
    fn random_mdps_match_scheduler_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.random_range(1..=5);
            let mut rows = Vec::new();
            let mut b = Vec::new();
            let mut offsets = vec![0];
            for _ in 0..n {
                for _ in 0..rng.random_range(1..=2) {
                    let mut w: Vec<(usize, i64)> = (0..rng.random_range(1..=2)).map(|_| (rng.random_range(0..n), rng.random_range(1..=4))).collect();
                    let total = w.iter().map(|e| e.1).sum::<i64>() + rng.random_range(1..=4);
                    w.sort();
                    rows.push(w.iter().map(|&(j, k)| (j, q(k, total))).collect());
                    b.push(q(rng.random_range(0..=3), 3));
                }
                offsets.push(rows.len());
            }
            let a = SparseMatrix::from_rows(n, rows).unwrap();
            let g = RowGrouping::new(offsets).unwrap();
            for dir in [Direction::Minimize, Direction::Maximize] {
                let oracle = enumerate_best(&a, &g, &b, dir);
                let (x, sched, _) = solve_bellman(&a, &g, &b, dir, &SolveOptions::default()).unwrap();
                assert_eq!(x, oracle);
                let (m, rhs) = policy_system(&a, &g, &b, &sched);
                let (frozen, _) = super::super::solve_linear(&m, &rhs, &SolveOptions::default()).unwrap();
                assert_eq!(frozen, oracle);

                let af = a.map_values(|v| v.as_float());
                let bf: Vec<f64> = b.iter().map(|v| v.as_float()).collect();
                let opts = SolveOptions::default().with_precision(1e-8).with_bellman(BellmanMethod::ValueIteration);
                let (xf, schedf, _) = solve_bellman(&af, &g, &bf, dir, &opts).unwrap();
                let (mf, rf) = policy_system(&af, &g, &bf, &schedf);
                let (frozen_f, _) = super::super::solve_linear(&mf, &rf, &SolveOptions::default().with_precision(1e-12)).unwrap();
                for s in 0..n {
                    assert!((xf[s] - oracle[s].as_float()).abs() < 1e-6);
                    assert!((frozen_f[s] - oracle[s].as_float()).abs() < 1e-6);
                }
                let pf = SolveOptions::default().with_bellman(BellmanMethod::PolicyIteration).with_precision(1e-10);
                let (xp, _, _) = solve_bellman(&af, &g, &bf, dir, &pf).unwrap();
                for s in 0..n {
                    assert!((xp[s] - oracle[s].as_float()).abs() < 1e-6);
                }
                let (xe, _, _) = solve_bellman(&af, &g, &bf, dir, &SolveOptions::default().with_bellman(BellmanMethod::ExactPolicyIteration)).unwrap();
                for s in 0..n {
                    assert!((xe[s] - oracle[s].as_float()).abs() < 1e-12);
                }
            }
        }
    }
}
