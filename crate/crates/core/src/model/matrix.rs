//! Compressed sparse row matrices and row groupings.

use std::ops::Range;

use crate::bitset::BitSet;
use crate::model::{Direction, ModelError};
use crate::numeric::Value;

// Indices are `usize`, which is 64 bits on every supported target.
const _: () = assert!(usize::BITS >= 64);

/// Row-major sparse matrix with sorted, duplicate-free columns per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<V> {
    num_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<V>,
}

/// Incremental row-by-row construction of a [`SparseMatrix`].
///
/// Entries within a row may arrive in any order; duplicates are summed and
/// exact zeros are dropped when the row is closed.
#[derive(Debug)]
pub struct SparseMatrixBuilder<V> {
    num_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<V>,
    pending: Vec<(usize, V)>,
}

impl<V: Value> SparseMatrixBuilder<V> {
    pub fn new(num_cols: usize) -> Self {
        Self {
            num_cols,
            row_offsets: vec![0],
            col_indices: Vec::new(),
            values: Vec::new(),
            pending: Vec::new(),
        }
    }

    /// Builder whose column count is fixed when [`finish`](Self::finish) is
    /// called (used during state-space exploration).
    pub fn growing() -> Self {
        Self::new(usize::MAX)
    }

    pub fn add(&mut self, col: usize, value: V) {
        self.pending.push((col, value));
    }

    /// Close the current row.
    pub fn finish_row(&mut self) {
        self.pending.sort_by_key(|(c, _)| *c);
        let mut iter = std::mem::take(&mut self.pending).into_iter().peekable();
        while let Some((col, mut value)) = iter.next() {
            while let Some((_, more)) = iter.next_if(|(c, _)| *c == col) {
                value += &more;
            }
            if !value.is_exactly_zero() {
                self.col_indices.push(col);
                self.values.push(value);
            }
        }
        self.row_offsets.push(self.col_indices.len());
    }

    pub fn num_rows(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn finish(mut self, num_cols: Option<usize>) -> Result<SparseMatrix<V>, ModelError> {
        if !self.pending.is_empty() {
            self.finish_row();
        }
        let num_cols = match num_cols {
            Some(n) => n,
            None if self.num_cols == usize::MAX => {
                self.col_indices.iter().max().map_or(0, |m| m + 1)
            }
            None => self.num_cols,
        };
        SparseMatrix::from_csr(num_cols, self.row_offsets, self.col_indices, self.values)
    }
}

impl<V: Value> SparseMatrix<V> {
    /// Validate and wrap raw CSR arrays.
    pub fn from_csr(
        num_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<V>,
    ) -> Result<Self, ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidMatrix(msg));
        if row_offsets.first() != Some(&0) {
            return bad("row_offsets must start at 0".into());
        }
        if *row_offsets.last().unwrap() != col_indices.len() || col_indices.len() != values.len() {
            return bad("row_offsets, col_indices and values disagree in length".into());
        }
        for (r, w) in row_offsets.windows(2).enumerate() {
            if w[0] > w[1] {
                return bad(format!("row_offsets decrease at row {r}"));
            }
            let cols = &col_indices[w[0]..w[1]];
            if cols.windows(2).any(|p| p[0] >= p[1]) {
                return bad(format!("columns of row {r} are not strictly increasing"));
            }
            if cols.last().is_some_and(|&c| c >= num_cols) {
                return bad(format!("column index out of range in row {r}"));
            }
        }
        Ok(Self { num_cols, row_offsets, col_indices, values })
    }

    /// Build from per-row entry lists (duplicates summed).
    pub fn from_rows(num_cols: usize, rows: Vec<Vec<(usize, V)>>) -> Result<Self, ModelError> {
        let mut builder = SparseMatrixBuilder::new(num_cols);
        for row in rows {
            for (c, v) in row {
                builder.add(c, v);
            }
            builder.finish_row();
        }
        builder.finish(Some(num_cols))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            num_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![V::one(); n],
        }
    }

    pub fn empty(num_rows: usize, num_cols: usize) -> Self {
        Self {
            num_cols,
            row_offsets: vec![0; num_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn num_rows(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    pub fn num_entries(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    pub fn row_range(&self, row: usize) -> Range<usize> {
        self.row_offsets[row]..self.row_offsets[row + 1]
    }

    /// Entries `(column, value)` of one row in ascending column order.
    pub fn row(&self, row: usize) -> impl ExactSizeIterator<Item = (usize, &V)> + '_ {
        let range = self.row_range(row);
        self.col_indices[range.clone()].iter().copied().zip(&self.values[range])
    }

    pub fn row_len(&self, row: usize) -> usize {
        let r = self.row_range(row);
        r.end - r.start
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&V> {
        let range = self.row_range(row);
        self.col_indices[range.clone()]
            .binary_search(&col)
            .ok()
            .map(|i| &self.values[range.start + i])
    }

    pub fn row_sum(&self, row: usize) -> V {
        let mut sum = V::zero();
        for v in &self.values[self.row_range(row)] {
            sum += v;
        }
        sum
    }

    /// `Σ_j A[row, j] · x[j]`, summed left to right.
    pub fn row_dot(&self, row: usize, x: &[V]) -> V {
        let mut sum = V::zero();
        for (c, v) in self.row(row) {
            sum += &v.mul_ref(&x[c]);
        }
        sum
    }

    pub fn multiply(&self, x: &[V]) -> Result<Vec<V>, ModelError> {
        self.check_cols(x.len())?;
        Ok((0..self.num_rows()).map(|r| self.row_dot(r, x)).collect())
    }

    /// Like [`multiply`](Self::multiply) but writes into `out`.
    pub fn multiply_into(&self, x: &[V], out: &mut [V]) {
        debug_assert_eq!(x.len(), self.num_cols);
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(r, x);
        }
    }

    /// One Bellman step: for every row group, the optimum over its rows of
    /// `A[r,·] · x`, with the winning row's offset inside the group.
    /// Ties go to the lowest row.
    pub fn multiply_and_reduce(
        &self,
        grouping: &RowGrouping,
        x: &[V],
        dir: Direction,
    ) -> Result<(Vec<V>, Vec<usize>), ModelError> {
        self.check_cols(x.len())?;
        if grouping.num_rows() != self.num_rows() {
            return Err(ModelError::DimensionMismatch {
                expected: self.num_rows(),
                found: grouping.num_rows(),
            });
        }
        let row_values: Vec<V> = (0..self.num_rows()).map(|r| self.row_dot(r, x)).collect();
        Ok(reduce_rows(grouping, &row_values, dir))
    }

    fn check_cols(&self, len: usize) -> Result<(), ModelError> {
        if len != self.num_cols {
            return Err(ModelError::DimensionMismatch { expected: self.num_cols, found: len });
        }
        Ok(())
    }

    pub fn transpose(&self) -> SparseMatrix<V> {
        let mut counts = vec![0usize; self.num_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.num_cols {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut next = counts;
        let mut cols = vec![0usize; self.values.len()];
        let mut vals: Vec<Option<V>> = vec![None; self.values.len()];
        for r in 0..self.num_rows() {
            for (c, v) in self.row(r) {
                let slot = next[c];
                next[c] += 1;
                cols[slot] = r;
                vals[slot] = Some(v.clone());
            }
        }
        SparseMatrix {
            num_cols: self.num_rows(),
            row_offsets: offsets,
            col_indices: cols,
            values: vals.into_iter().map(|v| v.expect("filled")).collect(),
        }
    }

    /// Restrict to the rows of `keep_states` (optionally filtered further by
    /// `keep_rows`) and to the columns of `keep_states`. Entries are copied
    /// unchanged.
    pub fn submatrix(
        &self,
        grouping: &RowGrouping,
        keep_states: &BitSet,
        keep_rows: Option<&BitSet>,
    ) -> Submatrix<V> {
        let num_states = grouping.num_groups();
        let mut state_to_new = vec![None; num_states];
        let mut new_to_state = Vec::new();
        for s in keep_states.ones().filter(|&s| s < num_states) {
            state_to_new[s] = Some(new_to_state.len());
            new_to_state.push(s);
        }
        let mut builder = SparseMatrixBuilder::new(new_to_state.len());
        let mut group_offsets = vec![0];
        let mut new_to_row = Vec::new();
        for &s in &new_to_state {
            for r in grouping.rows(s) {
                if keep_rows.is_some_and(|k| !k.contains(r)) {
                    continue;
                }
                for (c, v) in self.row(r) {
                    if let Some(nc) = state_to_new.get(c).copied().flatten() {
                        builder.add(nc, v.clone());
                    }
                }
                builder.finish_row();
                new_to_row.push(r);
            }
            group_offsets.push(new_to_row.len());
        }
        let matrix = builder.finish(Some(new_to_state.len())).expect("submatrix of a valid matrix");
        Submatrix {
            matrix,
            grouping: RowGrouping { offsets: group_offsets },
            state_to_new,
            new_to_state,
            new_to_row,
        }
    }

    /// Convert entries to another numeric backend.
    pub fn map_values<W: Value>(&self, f: impl Fn(&V) -> W) -> SparseMatrix<W> {
        SparseMatrix {
            num_cols: self.num_cols,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            values: self.values.iter().map(f).collect(),
        }
    }

    /// Successor columns of a row.
    pub fn successors(&self, row: usize) -> &[usize] {
        &self.col_indices[self.row_range(row)]
    }
}

/// Reduce per-row values to per-group optima.
pub fn reduce_rows<V: Value>(grouping: &RowGrouping, row_values: &[V], dir: Direction) -> (Vec<V>, Vec<usize>) {
    let mut out = Vec::with_capacity(grouping.num_groups());
    let mut choices = Vec::with_capacity(grouping.num_groups());
    for s in 0..grouping.num_groups() {
        let rows = grouping.rows(s);
        let start = rows.start;
        let mut best: Option<(usize, &V)> = None;
        for r in rows {
            let v = &row_values[r];
            best = match best {
                None => Some((r - start, v)),
                Some((_, b)) if dir.better(v, b) => Some((r - start, v)),
                keep => keep,
            };
        }
        let (choice, value) = best.map_or((0, V::zero()), |(c, v)| (c, v.clone()));
        out.push(value);
        choices.push(choice);
    }
    (out, choices)
}

/// A matrix restricted to a subset of states and rows, with the index maps
/// back to the original.
#[derive(Debug, Clone)]
pub struct Submatrix<V> {
    pub matrix: SparseMatrix<V>,
    pub grouping: RowGrouping,
    /// Old state index → new index (if kept).
    pub state_to_new: Vec<Option<usize>>,
    /// New state index → old state index.
    pub new_to_state: Vec<usize>,
    /// New row index → old row index.
    pub new_to_row: Vec<usize>,
}

/// Contiguous blocks of matrix rows, one block per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowGrouping {
    offsets: Vec<usize>,
}

impl RowGrouping {
    pub fn new(offsets: Vec<usize>) -> Result<Self, ModelError> {
        if offsets.first() != Some(&0) {
            return Err(ModelError::InvalidGrouping("offsets must start at 0".into()));
        }
        if let Some(s) = offsets.windows(2).position(|w| w[0] >= w[1]) {
            return Err(ModelError::InvalidGrouping(format!("state {s} has no rows")));
        }
        Ok(Self { offsets })
    }

    /// One row per state.
    pub fn trivial(num_states: usize) -> Self {
        Self { offsets: (0..=num_states).collect() }
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn num_groups(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_rows(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn rows(&self, state: usize) -> Range<usize> {
        self.offsets[state]..self.offsets[state + 1]
    }

    pub fn group_size(&self, state: usize) -> usize {
        self.offsets[state + 1] - self.offsets[state]
    }

    pub fn is_trivial(&self) -> bool {
        self.offsets.iter().enumerate().all(|(i, &o)| i == o)
    }

    /// Owning state of every row.
    pub fn row_to_group(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.num_rows());
        for s in 0..self.num_groups() {
            out.extend(std::iter::repeat_n(s, self.group_size(s)));
        }
        out
    }
}
