//! Strongly connected components (iterative Tarjan) and bottom SCCs.

use crate::bitset::{self, BitSet};
use crate::model::SparseMatrix;
use crate::numeric::Value;

const UNVISITED: usize = usize::MAX;

/// SCCs of the graph on `0..num_nodes` restricted to `alive` nodes, with
/// successors supplied by `succ`. Components come out in reverse topological
/// order (sinks first), each sorted ascending.
pub fn tarjan<F, I>(num_nodes: usize, alive: &BitSet, mut succ: F) -> Vec<Vec<usize>>
where
    F: FnMut(usize) -> I,
    I: IntoIterator<Item = usize>,
{
    let mut index = vec![UNVISITED; num_nodes];
    let mut lowlink = vec![0usize; num_nodes];
    let mut on_stack = bitset::empty(num_nodes);
    let mut stack: Vec<usize> = Vec::new();
    let mut components = Vec::new();
    let mut next_index = 0usize;
    // (node, successors, position in successors)
    let mut call: Vec<(usize, Vec<usize>, usize)> = Vec::new();

    for root in alive.ones() {
        if index[root] != UNVISITED {
            continue;
        }
        let succs: Vec<usize> = succ(root).into_iter().filter(|&t| alive.contains(t)).collect();
        index[root] = next_index;
        lowlink[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack.insert(root);
        call.push((root, succs, 0));

        while let Some((node, succs, pos)) = call.last_mut() {
            let node = *node;
            if *pos < succs.len() {
                let next = succs[*pos];
                *pos += 1;
                if index[next] == UNVISITED {
                    let next_succs: Vec<usize> = succ(next).into_iter().filter(|&t| alive.contains(t)).collect();
                    index[next] = next_index;
                    lowlink[next] = next_index;
                    next_index += 1;
                    stack.push(next);
                    on_stack.insert(next);
                    call.push((next, next_succs, 0));
                } else if on_stack.contains(next) {
                    lowlink[node] = lowlink[node].min(index[next]);
                }
                continue;
            }
            call.pop();
            if let Some((parent, _, _)) = call.last() {
                let parent = *parent;
                lowlink[parent] = lowlink[parent].min(lowlink[node]);
            }
            if lowlink[node] == index[node] {
                let mut component = Vec::new();
                loop {
                    let member = stack.pop().expect("tarjan stack");
                    on_stack.set(member, false);
                    component.push(member);
                    if member == node {
                        break;
                    }
                }
                component.sort_unstable();
                components.push(component);
            }
        }
    }
    components
}

/// Bottom strongly connected components of a square matrix, ordered by
/// smallest member.
pub fn bsccs<V: Value>(matrix: &SparseMatrix<V>) -> Vec<BitSet> {
    let n = matrix.num_rows();
    let all = bitset::full(n);
    let components = tarjan(n, &all, |s| matrix.successors(s).to_vec());
    let mut component_of = vec![0usize; n];
    for (i, comp) in components.iter().enumerate() {
        for &s in comp {
            component_of[s] = i;
        }
    }
    let mut out: Vec<BitSet> = components
        .iter()
        .enumerate()
        .filter(|(i, comp)| comp.iter().all(|&s| matrix.successors(s).iter().all(|&t| component_of[t] == *i)))
        .map(|(_, comp)| bitset::from_indices(n, comp.iter().copied()))
        .collect();
    out.sort_by_key(|set| set.minimum());
    out
}
