//! State and row sets.

pub use fixedbitset::FixedBitSet as BitSet;

pub fn empty(len: usize) -> BitSet {
    BitSet::with_capacity(len)
}

pub fn full(len: usize) -> BitSet {
    let mut set = BitSet::with_capacity(len);
    set.insert_range(..);
    set
}

pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> BitSet {
    let mut set = BitSet::with_capacity(len);
    for i in indices {
        set.insert(i);
    }
    set
}

pub fn complement(set: &BitSet) -> BitSet {
    let mut out = set.clone();
    out.toggle_range(..);
    out
}

pub fn and(a: &BitSet, b: &BitSet) -> BitSet {
    let mut out = a.clone();
    out.intersect_with(b);
    out
}

pub fn or(a: &BitSet, b: &BitSet) -> BitSet {
    let mut out = a.clone();
    out.union_with(b);
    out
}

pub fn minus(a: &BitSet, b: &BitSet) -> BitSet {
    let mut out = a.clone();
    out.difference_with(b);
    out
}
