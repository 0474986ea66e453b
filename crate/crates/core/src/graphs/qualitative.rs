//! Qualitative (graph-based) reachability: states whose probability of
//! `phi U psi` is exactly 0 or 1, for chains and for both optimization
//! directions of nondeterministic models.

use std::collections::VecDeque;

use crate::bitset::{self, BitSet};
use crate::model::{RowGrouping, SparseMatrix};
use crate::numeric::Value;

/// Reverse edges: for every state, the rows that have it as a successor.
pub(crate) struct Predecessors {
    offsets: Vec<usize>,
    rows: Vec<usize>,
}

impl Predecessors {
    pub(crate) fn new<V: Value>(matrix: &SparseMatrix<V>) -> Self {
        let n = matrix.num_cols();
        let mut offsets = vec![0usize; n + 1];
        for &c in matrix.col_indices() {
            offsets[c + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut next = offsets.clone();
        let mut rows = vec![0usize; matrix.num_entries()];
        for r in 0..matrix.num_rows() {
            for &c in matrix.successors(r) {
                rows[next[c]] = r;
                next[c] += 1;
            }
        }
        Self { offsets, rows }
    }

    pub(crate) fn of(&self, state: usize) -> &[usize] {
        &self.rows[self.offsets[state]..self.offsets[state + 1]]
    }
}

/// States that can reach `targets` through `through` states (targets
/// included). `row_owner` maps rows to states.
fn backward_reach(preds: &Predecessors, row_owner: &[usize], targets: &BitSet, through: &BitSet) -> BitSet {
    let mut seen = targets.clone();
    let mut queue: VecDeque<usize> = targets.ones().collect();
    while let Some(t) = queue.pop_front() {
        for &r in preds.of(t) {
            let s = row_owner[r];
            if !seen.contains(s) && through.contains(s) {
                seen.insert(s);
                queue.push_back(s);
            }
        }
    }
    seen
}

/// Like [`backward_reach`], recording for each added state the row that led
/// to an earlier state.
fn backward_reach_with_rows(
    preds: &Predecessors,
    row_owner: &[usize],
    targets: &BitSet,
    through: &BitSet,
    choice: &mut [Option<usize>],
) -> BitSet {
    let mut seen = targets.clone();
    let mut queue: VecDeque<usize> = targets.ones().collect();
    while let Some(t) = queue.pop_front() {
        for &r in preds.of(t) {
            let s = row_owner[r];
            if !seen.contains(s) && through.contains(s) {
                seen.insert(s);
                choice[s] = Some(r);
                queue.push_back(s);
            }
        }
    }
    seen
}

/// States of a chain with `Pr(phi U psi) = 0`.
pub fn prob0<V: Value>(matrix: &SparseMatrix<V>, phi: &BitSet, psi: &BitSet) -> BitSet {
    let grouping = RowGrouping::trivial(matrix.num_rows());
    prob0_max(matrix, &grouping, phi, psi)
}

/// States of a chain with `Pr(phi U psi) = 1`.
pub fn prob1<V: Value>(matrix: &SparseMatrix<V>, phi: &BitSet, psi: &BitSet) -> BitSet {
    let n = matrix.num_rows();
    let preds = Predecessors::new(matrix);
    let owner: Vec<usize> = (0..n).collect();
    let zero = bitset::complement(&backward_reach(&preds, &owner, psi, phi));
    let escape = backward_reach(&preds, &owner, &zero, &bitset::minus(phi, psi));
    bitset::complement(&escape)
}

/// States where no scheduler reaches `psi` via `phi` (Pmax = 0).
pub fn prob0_max<V: Value>(matrix: &SparseMatrix<V>, grouping: &RowGrouping, phi: &BitSet, psi: &BitSet) -> BitSet {
    let preds = Predecessors::new(matrix);
    let owner = grouping.row_to_group();
    bitset::complement(&backward_reach(&preds, &owner, psi, phi))
}

/// States where some scheduler avoids `phi U psi` surely (Pmin = 0).
pub fn prob0_min<V: Value>(matrix: &SparseMatrix<V>, grouping: &RowGrouping, phi: &BitSet, psi: &BitSet) -> BitSet {
    prob0_min_with_scheduler(matrix, grouping, phi, psi).0
}

/// Returns the Pmin = 0 set and, for each of its states, a row (offset in
/// the group) whose successors all stay inside it.
pub fn prob0_min_with_scheduler<V: Value>(
    matrix: &SparseMatrix<V>,
    grouping: &RowGrouping,
    phi: &BitSet,
    psi: &BitSet,
) -> (BitSet, Vec<usize>) {
    let n = grouping.num_groups();
    let preds = Predecessors::new(matrix);
    let owner = grouping.row_to_group();
    let candidates = bitset::minus(phi, psi);
    // rows of each state not yet known to hit the positive region
    let mut open_rows: Vec<usize> = (0..n).map(|s| grouping.group_size(s)).collect();
    let mut hits = bitset::empty(matrix.num_rows());
    let mut positive = psi.clone();
    let mut queue: VecDeque<usize> = psi.ones().collect();
    while let Some(t) = queue.pop_front() {
        for &r in preds.of(t) {
            if hits.put(r) {
                continue;
            }
            let s = owner[r];
            open_rows[s] -= 1;
            if open_rows[s] == 0 && candidates.contains(s) && !positive.contains(s) {
                positive.insert(s);
                queue.push_back(s);
            }
        }
    }
    let zero = bitset::complement(&positive);
    let mut scheduler = vec![0usize; n];
    for s in zero.ones() {
        if let Some(r) = grouping.rows(s).find(|&r| !hits.contains(r)) {
            scheduler[s] = r - grouping.offsets()[s];
        }
    }
    (zero, scheduler)
}

/// States where some scheduler achieves `Pr(phi U psi) = 1`.
pub fn prob1_max<V: Value>(matrix: &SparseMatrix<V>, grouping: &RowGrouping, phi: &BitSet, psi: &BitSet) -> BitSet {
    prob1_max_with_scheduler(matrix, grouping, phi, psi).0
}

/// Returns the Pmax = 1 set together with a scheduler attaining it: each
/// state's row keeps all mass inside the set and moves closer to `psi`.
pub fn prob1_max_with_scheduler<V: Value>(
    matrix: &SparseMatrix<V>,
    grouping: &RowGrouping,
    phi: &BitSet,
    psi: &BitSet,
) -> (BitSet, Vec<usize>) {
    let n = grouping.num_groups();
    let preds = Predecessors::new(matrix);
    let owner = grouping.row_to_group();
    let mut stay = bitset::full(n);
    let mut choice = vec![None; n];
    loop {
        let row_ok: Vec<bool> =
            (0..matrix.num_rows()).map(|r| matrix.successors(r).iter().all(|&t| stay.contains(t))).collect();
        let mut reach = bitset::and(psi, &stay);
        choice.iter_mut().for_each(|c| *c = None);
        let mut queue: VecDeque<usize> = reach.ones().collect();
        while let Some(t) = queue.pop_front() {
            for &r in preds.of(t) {
                let s = owner[r];
                if row_ok[r] && !reach.contains(s) && phi.contains(s) && stay.contains(s) {
                    reach.insert(s);
                    choice[s] = Some(r);
                    queue.push_back(s);
                }
            }
        }
        if reach == stay {
            break;
        }
        stay = reach;
    }
    let scheduler = (0..n).map(|s| choice[s].map_or(0, |r| r - grouping.offsets()[s])).collect();
    (stay, scheduler)
}

/// States where every scheduler achieves `Pr(phi U psi) = 1`.
pub fn prob1_min<V: Value>(matrix: &SparseMatrix<V>, grouping: &RowGrouping, phi: &BitSet, psi: &BitSet) -> BitSet {
    prob1_min_with_counter(matrix, grouping, phi, psi).0
}

/// Returns the Pmin = 1 set and a scheduler that, from every state outside
/// it, misses `phi U psi` with positive probability.
pub fn prob1_min_with_counter<V: Value>(
    matrix: &SparseMatrix<V>,
    grouping: &RowGrouping,
    phi: &BitSet,
    psi: &BitSet,
) -> (BitSet, Vec<usize>) {
    let n = grouping.num_groups();
    let (zero, mut scheduler) = prob0_min_with_scheduler(matrix, grouping, phi, psi);
    let preds = Predecessors::new(matrix);
    let owner = grouping.row_to_group();
    let mut choice = vec![None; n];
    let escape = backward_reach_with_rows(&preds, &owner, &zero, &bitset::minus(phi, psi), &mut choice);
    for (s, c) in choice.iter().enumerate() {
        if let Some(r) = c {
            scheduler[s] = r - grouping.offsets()[s];
        }
    }
    (bitset::complement(&escape), scheduler)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize, edges: &[(usize, usize, f64)]) -> SparseMatrix<f64> {
        let mut rows = vec![Vec::new(); n];
        for &(a, b, p) in edges {
            rows[a].push((b, p));
        }
        SparseMatrix::from_rows(n, rows).unwrap()
    }

    fn set(n: usize, xs: &[usize]) -> BitSet {
        bitset::from_indices(n, xs.iter().copied())
    }

    #[test]
    fn prob0_edge_cases() {
        let m = chain(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 2, 1.0)]);
        assert_eq!(prob0(&m, &bitset::full(3), &bitset::full(3)).count_ones(..), 0);
        assert_eq!(prob0(&m, &bitset::full(3), &bitset::empty(3)).count_ones(..), 3);
        assert_eq!(prob0(&m, &set(3, &[0, 1]), &set(3, &[2])).count_ones(..), 0);
    }

    #[test]
    fn prob1_cases() {
        let m = chain(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 2, 1.0)]);
        assert_eq!(prob1(&m, &bitset::full(3), &set(3, &[2])), bitset::full(3));
        // coin: 0 -> goal 1 / sink 2
        let coin = chain(3, &[(0, 1, 0.5), (0, 2, 0.5), (1, 1, 1.0), (2, 2, 1.0)]);
        assert_eq!(prob1(&coin, &bitset::full(3), &set(3, &[1])), set(3, &[1]));
        assert_eq!(prob1(&coin, &bitset::full(3), &bitset::empty(3)).count_ones(..), 0);
    }

    /// s0: a -> goal(1); b -> 0.5 goal / 0.5 sink(2); goal, sink absorbing.
    fn toy() -> (SparseMatrix<f64>, RowGrouping) {
        let m = chain(4, &[(0, 1, 1.0), (1, 1, 0.5), (1, 2, 0.5), (2, 1, 1.0), (3, 2, 1.0)]);
        (m, RowGrouping::new(vec![0, 2, 3, 4]).unwrap())
    }

    #[test]
    fn mdp_qualitative_toy() {
        let (m, g) = toy();
        let all = bitset::full(3);
        let goal = set(3, &[1]);
        assert!(prob1_max(&m, &g, &all, &goal).contains(0));
        assert!(!prob1_min(&m, &g, &all, &goal).contains(0));
        assert!(!prob0_min(&m, &g, &all, &goal).contains(0));
        assert!(!prob0_max(&m, &g, &all, &goal).contains(0));
        assert!(prob0_max(&m, &g, &all, &goal).contains(2));
        let (_, sched) = prob1_max_with_scheduler(&m, &g, &all, &goal);
        assert_eq!(sched[0], 0);
        let (_, counter) = prob1_min_with_counter(&m, &g, &all, &goal);
        assert_eq!(counter[0], 1);
    }

    #[test]
    fn unreachable_goal_collapses() {
        let (m, g) = toy();
        let all = bitset::full(3);
        let none = bitset::empty(3);
        assert_eq!(prob0_max(&m, &g, &all, &none), all);
        assert_eq!(prob0_min(&m, &g, &all, &none), all);
        assert_eq!(prob1_max(&m, &g, &all, &none).count_ones(..), 0);
        assert_eq!(prob1_min(&m, &g, &all, &none).count_ones(..), 0);
    }

    #[test]
    fn degenerate_grouping_matches_chain() {
        let m = chain(4, &[(0, 1, 0.5), (0, 2, 0.5), (1, 1, 1.0), (2, 3, 1.0), (3, 3, 1.0)]);
        let g = RowGrouping::trivial(4);
        let all = bitset::full(4);
        let goal = set(4, &[1]);
        let p0 = prob0(&m, &all, &goal);
        assert_eq!(prob0_max(&m, &g, &all, &goal), p0);
        assert_eq!(prob0_min(&m, &g, &all, &goal), p0);
        let p1 = prob1(&m, &all, &goal);
        assert_eq!(prob1_max(&m, &g, &all, &goal), p1);
        assert_eq!(prob1_min(&m, &g, &all, &goal), p1);
    }

    #[test]
    fn phi_restricts_paths() {
        let m = chain(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 2, 1.0)]);
        let phi = set(3, &[0]);
        let psi = set(3, &[2]);
        let z = prob0(&m, &phi, &psi);
        assert!(z.contains(0) && z.contains(1) && !z.contains(2));
    }
}
