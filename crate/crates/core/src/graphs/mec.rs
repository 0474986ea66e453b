//! Maximal end component decomposition.

use super::scc::tarjan;
use crate::bitset::{self, BitSet};
use crate::model::{RowGrouping, SparseMatrix};
use crate::numeric::Value;

/// An end component: a strongly connected set of states together with the
/// rows that keep it closed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndComponent {
    pub states: BitSet,
    pub rows: BitSet,
}

/// All maximal end components of the whole model.
pub fn mecs<V: Value>(matrix: &SparseMatrix<V>, grouping: &RowGrouping) -> Vec<EndComponent> {
    let n = grouping.num_groups();
    mecs_restricted(matrix, grouping, &bitset::full(n), None)
}

/// Maximal end components of the sub-model formed by `states` and (when
/// given) the rows in `rows`. Ordered by smallest member state.
pub fn mecs_restricted<V: Value>(
    matrix: &SparseMatrix<V>,
    grouping: &RowGrouping,
    states: &BitSet,
    rows: Option<&BitSet>,
) -> Vec<EndComponent> {
    let n = grouping.num_groups();
    let mut alive = states.clone();
    let mut row_on = bitset::empty(matrix.num_rows());
    for s in alive.ones() {
        for r in grouping.rows(s) {
            if rows.is_none_or(|k| k.contains(r)) && matrix.successors(r).iter().all(|&t| alive.contains(t)) {
                row_on.insert(r);
            }
        }
    }
    let mut component_of = vec![usize::MAX; n];
    let mut components;
    loop {
        for s in alive.clone().ones() {
            if !grouping.rows(s).any(|r| row_on.contains(r)) {
                alive.set(s, false);
            }
        }
        components = tarjan(n, &alive, |s| {
            grouping
                .rows(s)
                .filter(|&r| row_on.contains(r))
                .flat_map(|r| matrix.successors(r).iter().copied())
                .collect::<Vec<_>>()
        });
        component_of.iter_mut().for_each(|c| *c = usize::MAX);
        for (i, comp) in components.iter().enumerate() {
            for &s in comp {
                component_of[s] = i;
            }
        }
        let mut changed = false;
        for s in alive.ones() {
            for r in grouping.rows(s) {
                if row_on.contains(r) && matrix.successors(r).iter().any(|&t| component_of[t] != component_of[s]) {
                    row_on.set(r, false);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut out: Vec<EndComponent> = components
        .into_iter()
        .map(|comp| {
            let mut rows = bitset::empty(matrix.num_rows());
            for &s in &comp {
                for r in grouping.rows(s).filter(|&r| row_on.contains(r)) {
                    rows.insert(r);
                }
            }
            EndComponent { states: bitset::from_indices(n, comp), rows }
        })
        .filter(|ec| ec.rows.count_ones(..) > 0)
        .collect();
    out.sort_by_key(|ec| ec.states.minimum());
    out
}
