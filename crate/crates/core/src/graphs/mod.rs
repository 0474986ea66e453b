//! Qualitative precomputations and structural decompositions.

mod mec;
mod qualitative;
mod scc;

pub use mec::{mecs, mecs_restricted, EndComponent};
pub use qualitative::{
    prob0, prob0_max, prob0_min, prob0_min_with_scheduler, prob1, prob1_max, prob1_max_with_scheduler, prob1_min,
    prob1_min_with_counter,
};
pub use scc::{bsccs, tarjan};
