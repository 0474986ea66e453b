//! Nondeterministic models (MDPs, and Markov automata through their
//! underlying MDP).

use std::collections::VecDeque;

use super::{dtmc, indicator, CheckError, Extended, Result};
use crate::bitset::{self, BitSet};
use crate::graphs::{
    bsccs, mecs, mecs_restricted, prob0_max, prob0_min_with_scheduler, prob1_max_with_scheduler, prob1_min,
    prob1_min_with_counter, EndComponent,
};
use crate::model::{reduce_rows, Direction, RowGrouping, SparseMatrix, SparseMatrixBuilder};
use crate::numeric::{Rational, Value};
use crate::solvers::{
    solve_bellman_from, steady_state_bscc, BellmanMethod, SolveOptions, SolveStats, SolverError,
};

fn row_values<V: Value>(a: &SparseMatrix<V>, b: &[V], x: &[V]) -> Vec<V> {
    (0..a.num_rows()).map(|r| a.row_dot(r, x).add_ref(&b[r])).collect()
}

pub(crate) fn next<V: Value>(m: &SparseMatrix<V>, g: &RowGrouping, dir: Direction, set: &BitSet) -> (Vec<V>, Vec<usize>) {
    m.multiply_and_reduce(g, &indicator(set, g.num_groups()), dir).expect("square model matrix")
}

pub(crate) fn bounded_until<V: Value>(
    m: &SparseMatrix<V>,
    g: &RowGrouping,
    dir: Direction,
    phi: &BitSet,
    psi: &BitSet,
    k: usize,
) -> Vec<V> {
    let n = g.num_groups();
    let maybe = bitset::minus(phi, psi);
    let mut x: Vec<V> = indicator(psi, n);
    for _ in 0..k {
        let (mut next, _) = m.multiply_and_reduce(g, &x, dir).expect("square model matrix");
        for s in 0..n {
            if !maybe.contains(s) {
                next[s] = x[s].clone();
            }
        }
        x = next;
    }
    x
}

pub(crate) fn cumulative<V: Value>(m: &SparseMatrix<V>, g: &RowGrouping, dir: Direction, cost: &[V], k: usize) -> Vec<V> {
    let mut x = vec![V::zero(); g.num_groups()];
    for _ in 0..k {
        x = reduce_rows(g, &row_values(m, cost, &x), dir).0;
    }
    x
}

pub(crate) fn instantaneous<V: Value>(m: &SparseMatrix<V>, g: &RowGrouping, dir: Direction, state_reward: &[V], k: usize) -> Vec<V> {
    let mut x = state_reward.to_vec();
    for _ in 0..k {
        x = m.multiply_and_reduce(g, &x, dir).expect("square model matrix").0;
    }
    x
}

/// A sub-MDP over `region` with end components collapsed into single
/// states. Mass leaving the region is folded into the right-hand side.
struct Quotient<V> {
    matrix: SparseMatrix<V>,
    grouping: RowGrouping,
    b: Vec<V>,
    /// Original row of every quotient row; `None` for "stay" rows.
    origin: Vec<Option<usize>>,
    /// Whether a row leaves the region with positive probability.
    exits: Vec<bool>,
    class_of: Vec<Option<usize>>,
    members: Vec<Vec<usize>>,
    ec_of: Vec<Option<usize>>,
}

struct QuotientSpec<'f, V> {
    region: &'f BitSet,
    ecs: &'f [EndComponent],
    allowed: &'f dyn Fn(usize) -> bool,
    cost: &'f dyn Fn(usize) -> V,
    outside: &'f dyn Fn(usize) -> V,
    stay: &'f dyn Fn(usize) -> Option<V>,
}

fn quotient<V: Value>(m: &SparseMatrix<V>, g: &RowGrouping, spec: &QuotientSpec<'_, V>) -> Result<Quotient<V>> {
    let n = g.num_groups();
    let mut ec_index = vec![None; n];
    for (i, ec) in spec.ecs.iter().enumerate() {
        for s in ec.states.ones() {
            ec_index[s] = Some(i);
        }
    }
    let mut class_of = vec![None; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut ec_of = Vec::new();
    let mut ec_class = vec![None; spec.ecs.len()];
    for s in spec.region.ones() {
        let q = match ec_index[s] {
            Some(i) => *ec_class[i].get_or_insert_with(|| {
                members.push(Vec::new());
                ec_of.push(Some(i));
                members.len() - 1
            }),
            None => {
                members.push(Vec::new());
                ec_of.push(None);
                members.len() - 1
            }
        };
        class_of[s] = Some(q);
        members[q].push(s);
    }
    let mut builder = SparseMatrixBuilder::new(members.len());
    let (mut offsets, mut b, mut origin, mut exits) = (vec![0], Vec::new(), Vec::new(), Vec::new());
    for (q, group) in members.iter().enumerate() {
        let internal = ec_of[q].map(|i| &spec.ecs[i].rows);
        for &s in group {
            for r in g.rows(s) {
                if !(spec.allowed)(r) || internal.is_some_and(|rows| rows.contains(r)) {
                    continue;
                }
                let mut rhs = (spec.cost)(r);
                let mut leaves = false;
                for (t, v) in m.row(r) {
                    match class_of[t] {
                        Some(c) => builder.add(c, v.clone()),
                        None => {
                            leaves = true;
                            rhs += &v.mul_ref(&(spec.outside)(t));
                        }
                    }
                }
                builder.finish_row();
                b.push(rhs);
                origin.push(Some(r));
                exits.push(leaves);
            }
        }
        if let Some(v) = ec_of[q].and_then(|i| (spec.stay)(i)) {
            builder.finish_row();
            b.push(v);
            origin.push(None);
            exits.push(true);
        }
        if origin.len() == *offsets.last().expect("non-empty") {
            return Err(SolverError::Internal(format!("state {} has no admissible choice", group[0])).into());
        }
        offsets.push(origin.len());
    }
    Ok(Quotient {
        matrix: builder.finish(Some(members.len()))?,
        grouping: RowGrouping::new(offsets)?,
        b,
        origin,
        exits,
        class_of,
        members,
        ec_of,
    })
}

impl<V: Value> Quotient<V> {
    fn num_states(&self) -> usize {
        self.members.len()
    }

    /// Predecessor rows of every quotient state.
    fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![Vec::new(); self.num_states()];
        for r in 0..self.matrix.num_rows() {
            for &t in self.matrix.successors(r) {
                preds[t].push(r);
            }
        }
        preds
    }

    /// A policy that leaves the region almost surely: every state picks a
    /// row that exits or moves closer to an exit.
    fn proper_policy(&self) -> Vec<usize> {
        let n = self.num_states();
        let owner = self.grouping.row_to_group();
        let mut policy = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for q in 0..n {
            if let Some(r) = self.grouping.rows(q).find(|&r| self.exits[r]) {
                policy[q] = r - self.grouping.offsets()[q];
                queue.push_back(q);
            }
        }
        let preds = self.predecessors();
        while let Some(t) = queue.pop_front() {
            for &r in &preds[t] {
                let q = owner[r];
                if policy[q] == usize::MAX {
                    policy[q] = r - self.grouping.offsets()[q];
                    queue.push_back(q);
                }
            }
        }
        policy.iter().map(|&c| if c == usize::MAX { 0 } else { c }).collect()
    }

    /// Replace the choices of states that would never leave the region
    /// under `policy` by those of [`proper_policy`](Self::proper_policy).
    fn make_proper(&self, mut policy: Vec<usize>) -> Vec<usize> {
        let n = self.num_states();
        let row = |q: usize, policy: &[usize]| self.grouping.offsets()[q] + policy[q];
        let mut reaches = bitset::empty(n);
        let mut queue = VecDeque::new();
        for q in 0..n {
            if self.exits[row(q, &policy)] {
                reaches.insert(q);
                queue.push_back(q);
            }
        }
        let preds = self.predecessors();
        let owner = self.grouping.row_to_group();
        while let Some(t) = queue.pop_front() {
            for &r in &preds[t] {
                let q = owner[r];
                if !reaches.contains(q) && row(q, &policy) == r {
                    reaches.insert(q);
                    queue.push_back(q);
                }
            }
        }
        if reaches.count_ones(..) == n {
            return policy;
        }
        let proper = self.proper_policy();
        for q in 0..n {
            if !reaches.contains(q) {
                policy[q] = proper[q];
            }
        }
        policy
    }

    fn solve(&self, dir: Direction, initial: Option<&[usize]>, options: &SolveOptions) -> Result<(Vec<V>, Vec<usize>, SolveStats)> {
        if self.num_states() == 0 {
            return Ok((Vec::new(), Vec::new(), SolveStats::default()));
        }
        Ok(solve_bellman_from(&self.matrix, &self.grouping, &self.b, dir, initial, options)?)
    }

    fn spread(&self, y: &[V], x: &mut [V]) {
        for (q, group) in self.members.iter().enumerate() {
            for &s in group {
                x[s] = y[q].clone();
            }
        }
    }

    /// Turn a quotient policy into choices of the original model. Inside a
    /// collapsed end component, states steer towards the member owning the
    /// chosen exit row; a "stay" choice defers to `inner`.
    fn lift(
        &self,
        g: &RowGrouping,
        m: &SparseMatrix<V>,
        ecs: &[EndComponent],
        policy: &[usize],
        inner: &dyn Fn(usize) -> Vec<(usize, usize)>,
        scheduler: &mut [usize],
    ) {
        let owner = g.row_to_group();
        for (q, &c) in policy.iter().enumerate() {
            let qr = self.grouping.offsets()[q] + c;
            match (self.origin[qr], self.ec_of[q]) {
                (Some(r), ec) => {
                    let s = owner[r];
                    scheduler[s] = r - g.offsets()[s];
                    if let Some(i) = ec {
                        attract(m, g, &ecs[i], s, scheduler);
                    }
                }
                (None, Some(i)) => {
                    for (s, choice) in inner(i) {
                        scheduler[s] = choice;
                    }
                }
                (None, None) => unreachable!("stay rows belong to end components"),
            }
        }
        debug_assert!(self.class_of.len() == g.num_groups());
    }
}

/// Within an end component, choose internal rows that reach `target`
/// almost surely.
fn attract<V: Value>(m: &SparseMatrix<V>, g: &RowGrouping, ec: &EndComponent, target: usize, scheduler: &mut [usize]) {
    let mut preds: std::collections::HashMap<usize, Vec<(usize, usize)>> = Default::default();
    for s in ec.states.ones() {
        for r in g.rows(s).filter(|&r| ec.rows.contains(r)) {
            for &t in m.successors(r) {
                preds.entry(t).or_default().push((s, r));
            }
        }
    }
    let mut done = bitset::from_indices(ec.states.len(), [target]);
    let mut queue = VecDeque::from([target]);
    while let Some(t) = queue.pop_front() {
        for &(s, r) in preds.get(&t).map_or(&[][..], Vec::as_slice) {
            if !done.contains(s) {
                done.insert(s);
                scheduler[s] = r - g.offsets()[s];
                queue.push_back(s);
            }
        }
    }
}

fn no_inner(_: usize) -> Vec<(usize, usize)> {
    Vec::new()
}

pub(crate) fn until<V: Value>(
    m: &SparseMatrix<V>,
    g: &RowGrouping,
    dir: Direction,
    phi: &BitSet,
    psi: &BitSet,
    options: &SolveOptions,
) -> Result<(Vec<V>, Vec<usize>, SolveStats)> {
    let n = g.num_groups();
    let (zero, one, mut scheduler) = match dir {
        Direction::Maximize => {
            let zero = prob0_max(m, g, phi, psi);
            let (one, sched) = prob1_max_with_scheduler(m, g, phi, psi);
            (zero, one, sched)
        }
        Direction::Minimize => {
            let (zero, sched) = prob0_min_with_scheduler(m, g, phi, psi);
            (zero, prob1_min(m, g, phi, psi), sched)
        }
    };
    for s in 0..n {
        let keep = match dir {
            Direction::Maximize => one.contains(s),
            Direction::Minimize => zero.contains(s),
        };
        if !keep {
            scheduler[s] = 0;
        }
    }
    let maybe = bitset::complement(&bitset::or(&zero, &one));
    let ecs = match dir {
        Direction::Maximize => mecs_restricted(m, g, &maybe, None),
        Direction::Minimize => Vec::new(),
    };
    let q = quotient(
        m,
        g,
        &QuotientSpec {
            region: &maybe,
            ecs: &ecs,
            allowed: &|_| true,
            cost: &|_| V::zero(),
            outside: &|t| if one.contains(t) { V::one() } else { V::zero() },
            stay: &|_| None,
        },
    )?;
    let (y, policy, stats) = q.solve(dir, None, options)?;
    let mut x: Vec<V> = indicator(&one, n);
    q.spread(&y, &mut x);
    q.lift(g, m, &ecs, &policy, &no_inner, &mut scheduler);
    Ok((x, scheduler, stats))
}

/// Expected total cost until `goal`. `Rmax` is infinite where some
/// scheduler misses the goal with positive probability, `Rmin` where every
/// scheduler does.
pub(crate) fn reach_reward<V: Value>(
    m: &SparseMatrix<V>,
    g: &RowGrouping,
    dir: Direction,
    cost: &[V],
    goal: &BitSet,
    options: &SolveOptions,
) -> Result<(Vec<Extended<V>>, Vec<usize>, SolveStats)> {
    let n = g.num_groups();
    let all = bitset::full(n);
    let (finite, mut scheduler) = match dir {
        Direction::Maximize => prob1_min_with_counter(m, g, &all, goal),
        Direction::Minimize => prob1_max_with_scheduler(m, g, &all, goal),
    };
    for s in finite.ones() {
        scheduler[s] = 0;
    }
    let region = bitset::minus(&finite, goal);
    let allowed = |r: usize| m.successors(r).iter().all(|&t| finite.contains(t));
    let ecs = match dir {
        Direction::Maximize => Vec::new(),
        Direction::Minimize => {
            let mut zero_rows = bitset::empty(m.num_rows());
            for s in region.ones() {
                for r in g.rows(s) {
                    if cost[r].is_exactly_zero() && allowed(r) {
                        zero_rows.insert(r);
                    }
                }
            }
            mecs_restricted(m, g, &region, Some(&zero_rows))
        }
    };
    let q = quotient(
        m,
        g,
        &QuotientSpec {
            region: &region,
            ecs: &ecs,
            allowed: &allowed,
            cost: &|r| cost[r].clone(),
            outside: &|_| V::zero(),
            stay: &|_| None,
        },
    )?;
    let initial = q.proper_policy();
    let (y, policy, stats) = q.solve(dir, Some(&initial), options)?;
    let policy = q.make_proper(policy);
    let mut x = vec![V::zero(); n];
    q.spread(&y, &mut x);
    q.lift(g, m, &ecs, &policy, &no_inner, &mut scheduler);
    let out = x.into_iter().enumerate().map(|(s, v)| if finite.contains(s) { Extended::Finite(v) } else { Extended::Infinity });
    Ok((out.collect(), scheduler, stats))
}

/// Optimal long-run average of per-row `reward`: the optimal gain of each
/// maximal end component, then the best (or worst) reachable gain.
pub(crate) fn lra<V: Value>(
    m: &SparseMatrix<V>,
    g: &RowGrouping,
    dir: Direction,
    reward: &[V],
    options: &SolveOptions,
) -> Result<(Vec<V>, Vec<usize>, SolveStats)> {
    let n = g.num_groups();
    let ecs = mecs(m, g);
    let mut stats = SolveStats::default();
    let mut gains = Vec::with_capacity(ecs.len());
    let mut inner = Vec::with_capacity(ecs.len());
    for ec in &ecs {
        let (gain, policy, st) = mec_gain(m, g, ec, reward, dir, options)?;
        stats.absorb(&st);
        gains.push(gain);
        inner.push(policy);
    }
    let all = bitset::full(n);
    let q = quotient(
        m,
        g,
        &QuotientSpec {
            region: &all,
            ecs: &ecs,
            allowed: &|_| true,
            cost: &|_| V::zero(),
            outside: &|_| V::zero(),
            stay: &|i| Some(gains[i].clone()),
        },
    )?;
    let (y, policy, st) = q.solve(dir, None, options)?;
    stats.absorb(&st);
    let mut x = vec![V::zero(); n];
    q.spread(&y, &mut x);
    let mut scheduler = vec![0; n];
    q.lift(g, m, &ecs, &policy, &|i| inner[i].clone(), &mut scheduler);
    Ok((x, scheduler, stats))
}

/// Aperiodicity damping for relative value iteration.
pub const LRA_DAMPING: f64 = 0.9;

/// Optimal gain of an end component and a policy attaining it, as
/// `(state, choice offset)` pairs.
fn mec_gain<V: Value>(
    m: &SparseMatrix<V>,
    g: &RowGrouping,
    ec: &EndComponent,
    reward: &[V],
    dir: Direction,
    options: &SolveOptions,
) -> Result<(V, Vec<(usize, usize)>, SolveStats)> {
    let sub = m.submatrix(g, &ec.states, Some(&ec.rows));
    let r: Vec<V> = sub.new_to_row.iter().map(|&row| reward[row].clone()).collect();
    let (gain, local, stats) = match options.bellman_method::<V>() {
        BellmanMethod::ValueIteration => {
            if V::EXACT {
                return Err(SolverError::NotExact("vi").into());
            }
            relative_value_iteration(&sub.matrix, &sub.grouping, &r, dir, options)?
        }
        BellmanMethod::ExactPolicyIteration if !V::EXACT => {
            let exact = |v: &V| v.to_rational().ok_or_else(|| SolverError::Invalid(format!("non-finite entry {v}")));
            let matrix = sub.matrix.map_values(|v| exact(v).expect("finite model entries"));
            let r: Vec<Rational> = r.iter().map(exact).collect::<std::result::Result<_, _>>()?;
            let init = vec![0; sub.grouping.num_groups()];
            let (gain, _, policy, stats) = multichain_policy_iteration(&matrix, &sub.grouping, &r, dir, init, options)?;
            (V::from_rational(&gain[0]), policy, stats)
        }
        _ => {
            let init = vec![0; sub.grouping.num_groups()];
            let (gain, _, policy, stats) = multichain_policy_iteration(&sub.matrix, &sub.grouping, &r, dir, init, options)?;
            (gain[0].clone(), policy, stats)
        }
    };
    let choices = sub
        .new_to_state
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let row = sub.new_to_row[sub.grouping.offsets()[i] + local[i]];
            (s, row - g.offsets()[s])
        })
        .collect();
    Ok((gain, choices, stats))
}

/// Relative value iteration on a communicating sub-MDP after the
/// transformation `P' = α·P + (1-α)·I`, stopping when the span of the
/// one-step differences drops below the precision.
fn relative_value_iteration<V: Value>(
    a: &SparseMatrix<V>,
    g: &RowGrouping,
    r: &[V],
    dir: Direction,
    options: &SolveOptions,
) -> Result<(V, Vec<usize>, SolveStats)> {
    let n = g.num_groups();
    let alpha = V::from_f64(LRA_DAMPING).expect("finite");
    let keep = V::one().sub_ref(&alpha);
    let mut x = vec![V::zero(); n];
    let mut stats = SolveStats { method: "rvi", iterations: 0 };
    let mut span = f64::INFINITY;
    while stats.iterations < options.max_iterations {
        stats.iterations += 1;
        let owner = g.row_to_group();
        let q: Vec<V> = (0..a.num_rows())
            .map(|row| r[row].add_ref(&alpha.mul_ref(&a.row_dot(row, &x))).add_ref(&keep.mul_ref(&x[owner[row]])))
            .collect();
        let (y, choices) = reduce_rows(g, &q, dir);
        let diffs: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a.sub_ref(b).as_float()).collect();
        let hi = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = diffs.iter().copied().fold(f64::INFINITY, f64::min);
        span = hi - lo;
        let scale = if options.relative { hi.abs().max(lo.abs()) } else { 1.0 };
        if span <= options.precision * scale {
            let gain = V::from_f64((hi + lo) / 2.0).expect("finite gain");
            return Ok((gain, choices, stats));
        }
        let base = y[0].clone();
        x = y.iter().map(|v| v.sub_ref(&base)).collect();
    }
    Err(SolverError::NoConvergence { method: "rvi", iterations: stats.iterations, residual: span }.into())
}

fn policy_chain<V: Value>(a: &SparseMatrix<V>, g: &RowGrouping, r: &[V], policy: &[usize]) -> (SparseMatrix<V>, Vec<V>) {
    let n = g.num_groups();
    let mut builder = SparseMatrixBuilder::new(n);
    let mut rhs = Vec::with_capacity(n);
    for (s, &c) in policy.iter().enumerate() {
        let row = g.offsets()[s] + c;
        for (t, v) in a.row(row) {
            builder.add(t, v.clone());
        }
        builder.finish_row();
        rhs.push(r[row].clone());
    }
    (builder.finish(Some(n)).expect("rows of a valid matrix"), rhs)
}

/// Gain and bias of a memoryless policy on a (multichain) Markov reward
/// chain. The bias is normalized so that it averages to zero over every
/// recurrent class.
fn evaluate_policy<V: Value>(p: &SparseMatrix<V>, r: &[V], options: &SolveOptions) -> Result<(Vec<V>, Vec<V>, SolveStats)> {
    let n = p.num_rows();
    let trivial = RowGrouping::trivial(n);
    let mut stats = SolveStats::default();
    let mut gain = vec![V::zero(); n];
    let mut recurrent = bitset::empty(n);
    let mut classes = Vec::new();
    for b in bsccs(p) {
        let sub = p.submatrix(&trivial, &b, None);
        let (pi, st) = steady_state_bscc(&sub.matrix, None, options)?;
        stats.absorb(&st);
        let mut avg = V::zero();
        for (i, &s) in sub.new_to_state.iter().enumerate() {
            avg += &pi[i].mul_ref(&r[s]);
        }
        for s in b.ones() {
            gain[s] = avg.clone();
        }
        recurrent.union_with(&b);
        classes.push((sub.new_to_state, pi));
    }
    let (gain, st) = dtmc::absorb(p, &recurrent, &gain, options)?;
    stats.absorb(&st);
    // bias on recurrent classes, pinned to zero at each class's first state
    let mut pinned = recurrent.clone();
    for (states, _) in &classes {
        pinned.set(states[0], false);
    }
    let excess: Vec<V> = (0..n).map(|s| r[s].sub_ref(&gain[s])).collect();
    let (mut bias, st) = solve_region(p, &pinned, &excess, &vec![V::zero(); n], options)?;
    stats.absorb(&st);
    for (states, pi) in &classes {
        let mut shift = V::zero();
        for (i, &s) in states.iter().enumerate() {
            shift += &pi[i].mul_ref(&bias[s]);
        }
        for &s in states {
            bias[s] = bias[s].sub_ref(&shift);
        }
    }
    let transient = bitset::complement(&recurrent);
    let (bias, st) = solve_region(p, &transient, &excess, &bias, options)?;
    stats.absorb(&st);
    Ok((gain, bias, stats))
}

/// Solve `x = r + P·x` on `region` with `x = fixed` elsewhere.
fn solve_region<V: Value>(p: &SparseMatrix<V>, region: &BitSet, r: &[V], fixed: &[V], options: &SolveOptions) -> Result<(Vec<V>, SolveStats)> {
    let n = p.num_rows();
    let mut x = fixed.to_vec();
    if region.count_ones(..) == 0 {
        return Ok((x, SolveStats::default()));
    }
    let sub = p.submatrix(&RowGrouping::trivial(n), region, None);
    let rhs: Vec<V> = sub
        .new_to_state
        .iter()
        .map(|&s| {
            let mut acc = r[s].clone();
            for (t, v) in p.row(s) {
                if !region.contains(t) {
                    acc += &v.mul_ref(&fixed[t]);
                }
            }
            acc
        })
        .collect();
    let (y, stats) = crate::solvers::solve_linear(&sub.matrix, &rhs, options)?;
    for (i, &s) in sub.new_to_state.iter().enumerate() {
        x[s] = y[i].clone();
    }
    Ok((x, stats))
}

fn improves<V: Value>(dir: Direction, candidate: &V, current: &V, tolerance: f64) -> bool {
    dir.better(candidate, current) && (V::EXACT || candidate.sub_ref(current).abs_value().as_float() > tolerance)
}

/// Howard's policy iteration for average reward on a multichain MDP:
/// improve on the gain first, then on the bias among gain-preserving rows.
/// Returns per-state gain and bias, the final policy, and statistics.
pub(crate) fn multichain_policy_iteration<V: Value>(
    a: &SparseMatrix<V>,
    g: &RowGrouping,
    r: &[V],
    dir: Direction,
    mut policy: Vec<usize>,
    options: &SolveOptions,
) -> std::result::Result<(Vec<V>, Vec<V>, Vec<usize>, SolveStats), CheckError> {
    let n = g.num_groups();
    let mut stats = SolveStats { method: "mpi", iterations: 0 };
    let inner = if V::EXACT {
        options.clone().with_linear(crate::solvers::LinearMethod::Elimination)
    } else {
        let mut o = options.clone();
        o.precision *= 0.1;
        o
    };
    let tolerance = options.precision;
    while stats.iterations < options.max_iterations {
        stats.iterations += 1;
        let (p, rs) = policy_chain(a, g, r, &policy);
        let (gain, bias, _) = evaluate_policy(&p, &rs, &inner)?;
        let pg: Vec<V> = (0..a.num_rows()).map(|row| a.row_dot(row, &gain)).collect();
        let mut changed = false;
        let (best, choice) = reduce_rows(g, &pg, dir);
        for s in 0..n {
            if improves(dir, &best[s], &pg[g.offsets()[s] + policy[s]], tolerance) {
                policy[s] = choice[s];
                changed = true;
            }
        }
        if !changed {
            for s in 0..n {
                let current = g.offsets()[s] + policy[s];
                let mut best: Option<(usize, V)> = None;
                for row in g.rows(s) {
                    let same_gain = if V::EXACT { pg[row] == pg[current] } else { pg[row].sub_ref(&pg[current]).abs_value().as_float() <= tolerance };
                    if !same_gain {
                        continue;
                    }
                    let v = r[row].add_ref(&a.row_dot(row, &bias));
                    if best.as_ref().is_none_or(|(_, b)| dir.better(&v, b)) {
                        best = Some((row, v));
                    }
                }
                let cur = r[current].add_ref(&a.row_dot(current, &bias));
                if let Some((row, v)) = best {
                    if improves(dir, &v, &cur, tolerance) {
                        policy[s] = row - g.offsets()[s];
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return Ok((gain, bias, policy, stats));
        }
    }
    Err(SolverError::NoConvergence { method: "mpi", iterations: stats.iterations, residual: f64::NAN }.into())
}
