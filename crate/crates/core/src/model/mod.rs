//! Markov models over sparse matrices.
//!
//! A [`Model`] is one of four kinds sharing a single representation: a
//! [`SparseMatrix`] whose rows are grouped per state by a [`RowGrouping`].
//! Deterministic kinds (DTMC, CTMC) have exactly one row per state. CTMC rows
//! hold rates; every other kind holds probability distributions, with the
//! Markovian rows of a Markov automaton normalized and their exit rates kept
//! separately.

mod matrix;

use std::collections::BTreeMap;
use std::fmt;

pub use matrix::{reduce_rows, RowGrouping, SparseMatrix, SparseMatrixBuilder, Submatrix};

use crate::bitset::{self, BitSet};
use crate::numeric::Value;

/// Tolerance on float row sums of probability rows.
pub const ROW_SUM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid row grouping: {0}")]
    InvalidGrouping(String),
    #[error("row {row} of state {state} sums to {sum} instead of 1")]
    RowSum { state: usize, row: usize, sum: String },
    #[error("negative entry in row {row}")]
    NegativeEntry { row: usize },
    #[error("invalid labeling: {0}")]
    InvalidLabeling(String),
    #[error("invalid reward model '{name}': {reason}")]
    InvalidReward { name: String, reason: String },
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// Optimization direction for nondeterministic choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// Whether `a` is strictly better than `b`.
    pub fn better<V: PartialOrd>(self, a: &V, b: &V) -> bool {
        match self {
            Direction::Minimize => a < b,
            Direction::Maximize => a > b,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Direction::Minimize => Direction::Maximize,
            Direction::Maximize => Direction::Minimize,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Minimize => "min",
            Direction::Maximize => "max",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Dtmc,
    Ctmc,
    Mdp,
    Ma,
}

impl ModelKind {
    pub fn is_nondeterministic(self) -> bool {
        matches!(self, ModelKind::Mdp | ModelKind::Ma)
    }

    pub fn is_continuous(self) -> bool {
        matches!(self, ModelKind::Ctmc | ModelKind::Ma)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dtmc => "dtmc",
            ModelKind::Ctmc => "ctmc",
            ModelKind::Mdp => "mdp",
            ModelKind::Ma => "ma",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dtmc" => Ok(ModelKind::Dtmc),
            "ctmc" => Ok(ModelKind::Ctmc),
            "mdp" => Ok(ModelKind::Mdp),
            "ma" => Ok(ModelKind::Ma),
            other => Err(format!("unknown model kind '{other}'")),
        }
    }
}

/// Named sets of states. `init` and `deadlock` always exist.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLabeling {
    num_states: usize,
    labels: BTreeMap<String, BitSet>,
}

impl StateLabeling {
    pub const INIT: &'static str = "init";
    pub const DEADLOCK: &'static str = "deadlock";

    pub fn new(num_states: usize) -> Self {
        let mut labels = BTreeMap::new();
        labels.insert(Self::INIT.to_string(), bitset::empty(num_states));
        labels.insert(Self::DEADLOCK.to_string(), bitset::empty(num_states));
        Self { num_states, labels }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Add (or replace) a label.
    pub fn insert(&mut self, name: impl Into<String>, states: BitSet) -> Result<(), ModelError> {
        let name = name.into();
        if states.len() != self.num_states {
            return Err(ModelError::InvalidLabeling(format!(
                "label '{name}' has {} bits for {} states",
                states.len(),
                self.num_states
            )));
        }
        self.labels.insert(name, states);
        Ok(())
    }

    /// Mark a single state, creating the label if needed.
    pub fn add_state(&mut self, name: &str, state: usize) {
        let n = self.num_states;
        self.labels.entry(name.to_string()).or_insert_with(|| bitset::empty(n)).insert(state);
    }

    pub fn get(&self, name: &str) -> Option<&BitSet> {
        self.labels.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.labels.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BitSet)> {
        self.labels.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Labels of one state, in name order.
    pub fn labels_of(&self, state: usize) -> Vec<&str> {
        self.labels.iter().filter(|(_, set)| set.contains(state)).map(|(k, _)| k.as_str()).collect()
    }
}

/// State and action rewards. State rewards are per visit for discrete-time
/// models and per time unit for continuous-time ones; action rewards attach
/// to matrix rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel<V> {
    pub name: String,
    pub state_rewards: Option<Vec<V>>,
    pub action_rewards: Option<Vec<V>>,
}

impl<V: Value> RewardModel<V> {
    pub fn state_reward(&self, state: usize) -> V {
        self.state_rewards.as_ref().map_or_else(V::zero, |r| r[state].clone())
    }

    pub fn action_reward(&self, row: usize) -> V {
        self.action_rewards.as_ref().map_or_else(V::zero, |r| r[row].clone())
    }
}

/// Variable assignment of every state, for models built from programs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateValuations {
    pub names: Vec<String>,
    pub is_bool: Vec<bool>,
    values: Vec<i64>,
}

impl StateValuations {
    pub fn new(names: Vec<String>, is_bool: Vec<bool>, values: Vec<i64>) -> Self {
        assert_eq!(names.len(), is_bool.len());
        assert!(names.is_empty() || values.len() % names.len() == 0);
        Self { names, is_bool, values }
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn state(&self, state: usize) -> &[i64] {
        let n = self.names.len();
        &self.values[state * n..(state + 1) * n]
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// `(s=3, d=0)` style rendering.
    pub fn describe(&self, state: usize) -> String {
        let vals = self.state(state);
        let parts: Vec<String> = self
            .names
            .iter()
            .zip(vals)
            .zip(&self.is_bool)
            .map(|((n, v), b)| if *b { format!("{n}={}", *v != 0) } else { format!("{n}={v}") })
            .collect();
        format!("({})", parts.join(", "))
    }
}

/// A DTMC, CTMC, MDP or Markov automaton.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<V> {
    kind: ModelKind,
    matrix: SparseMatrix<V>,
    grouping: RowGrouping,
    labeling: StateLabeling,
    rewards: BTreeMap<String, RewardModel<V>>,
    exit_rates: Option<Vec<V>>,
    markovian: Option<BitSet>,
    valuations: Option<StateValuations>,
    choice_labels: Option<Vec<String>>,
}

impl<V: Value> Model<V> {
    pub fn dtmc(matrix: SparseMatrix<V>, labeling: StateLabeling) -> Result<Self, ModelError> {
        let n = matrix.num_rows();
        Self::assemble(ModelKind::Dtmc, matrix, RowGrouping::trivial(n), labeling, None, None, ROW_SUM_TOLERANCE)
    }

    /// CTMC from a rate matrix; exit rates are the row sums.
    pub fn ctmc(rates: SparseMatrix<V>, labeling: StateLabeling) -> Result<Self, ModelError> {
        let n = rates.num_rows();
        let exit = (0..n).map(|s| rates.row_sum(s)).collect();
        Self::assemble(ModelKind::Ctmc, rates, RowGrouping::trivial(n), labeling, Some(exit), None, ROW_SUM_TOLERANCE)
    }

    pub fn mdp(matrix: SparseMatrix<V>, grouping: RowGrouping, labeling: StateLabeling) -> Result<Self, ModelError> {
        Self::assemble(ModelKind::Mdp, matrix, grouping, labeling, None, None, ROW_SUM_TOLERANCE)
    }

    /// Closed Markov automaton: Markovian states own exactly one row, a
    /// normalized distribution, and a positive exit rate.
    pub fn ma(
        matrix: SparseMatrix<V>,
        grouping: RowGrouping,
        labeling: StateLabeling,
        markovian: BitSet,
        exit_rates: Vec<V>,
    ) -> Result<Self, ModelError> {
        Self::assemble(ModelKind::Ma, matrix, grouping, labeling, Some(exit_rates), Some(markovian), ROW_SUM_TOLERANCE)
    }

    pub(crate) fn assemble(
        kind: ModelKind,
        matrix: SparseMatrix<V>,
        grouping: RowGrouping,
        labeling: StateLabeling,
        exit_rates: Option<Vec<V>>,
        markovian: Option<BitSet>,
        tolerance: f64,
    ) -> Result<Self, ModelError> {
        let model = Self {
            kind,
            matrix,
            grouping,
            labeling,
            rewards: BTreeMap::new(),
            exit_rates,
            markovian,
            valuations: None,
            choice_labels: None,
        };
        model.validate(tolerance)?;
        Ok(model)
    }

    pub fn with_reward(mut self, reward: RewardModel<V>) -> Result<Self, ModelError> {
        let bad = |reason: String| ModelError::InvalidReward { name: reward.name.clone(), reason };
        if let Some(r) = &reward.state_rewards {
            if r.len() != self.num_states() {
                return Err(bad(format!("{} state rewards for {} states", r.len(), self.num_states())));
            }
        }
        if let Some(r) = &reward.action_rewards {
            if r.len() != self.num_choices() {
                return Err(bad(format!("{} action rewards for {} rows", r.len(), self.num_choices())));
            }
        }
        let all = reward.state_rewards.iter().flatten().chain(reward.action_rewards.iter().flatten());
        if all.into_iter().any(|v| *v < V::zero()) {
            return Err(bad("negative reward".into()));
        }
        self.rewards.insert(reward.name.clone(), reward);
        Ok(self)
    }

    pub fn with_valuations(mut self, valuations: StateValuations) -> Result<Self, ModelError> {
        if valuations.num_vars() > 0 && valuations.values.len() != valuations.num_vars() * self.num_states() {
            return Err(ModelError::Invalid("valuation count does not match state count".into()));
        }
        self.valuations = Some(valuations);
        Ok(self)
    }

    /// Action name of every row (empty for unlabelled commands).
    pub fn with_choice_labels(mut self, labels: Vec<String>) -> Result<Self, ModelError> {
        if labels.len() != self.num_choices() {
            return Err(ModelError::DimensionMismatch { expected: self.num_choices(), found: labels.len() });
        }
        self.choice_labels = Some(labels);
        Ok(self)
    }

    /// Check the structural and kind-specific invariants.
    pub fn validate(&self, tolerance: f64) -> Result<(), ModelError> {
        let n = self.grouping.num_groups();
        if self.matrix.num_cols() != n {
            return Err(ModelError::DimensionMismatch { expected: n, found: self.matrix.num_cols() });
        }
        if self.matrix.num_rows() != self.grouping.num_rows() {
            return Err(ModelError::DimensionMismatch {
                expected: self.grouping.num_rows(),
                found: self.matrix.num_rows(),
            });
        }
        if self.labeling.num_states() != n {
            return Err(ModelError::InvalidLabeling("labeling size differs from state count".into()));
        }
        for reserved in [StateLabeling::INIT, StateLabeling::DEADLOCK] {
            if !self.labeling.contains(reserved) {
                return Err(ModelError::InvalidLabeling(format!("missing reserved label '{reserved}'")));
            }
        }
        if self.matrix.values().iter().any(|v| *v < V::zero()) {
            let row = (0..self.matrix.num_rows())
                .find(|&r| self.matrix.row(r).any(|(_, v)| *v < V::zero()))
                .unwrap_or(0);
            return Err(ModelError::NegativeEntry { row });
        }
        if !self.kind.is_nondeterministic() && !self.grouping.is_trivial() {
            return Err(ModelError::InvalidGrouping(format!("{} must have one row per state", self.kind)));
        }
        match self.kind {
            ModelKind::Ctmc => {
                let exit = self.exit_rates.as_ref().ok_or_else(|| ModelError::Invalid("ctmc without exit rates".into()))?;
                if exit.len() != n {
                    return Err(ModelError::DimensionMismatch { expected: n, found: exit.len() });
                }
                for (s, e) in exit.iter().enumerate() {
                    if *e != self.matrix.row_sum(s) {
                        return Err(ModelError::Invalid(format!("exit rate of state {s} differs from its row sum")));
                    }
                }
            }
            ModelKind::Ma => {
                let exit = self.exit_rates.as_ref().ok_or_else(|| ModelError::Invalid("ma without exit rates".into()))?;
                let markovian =
                    self.markovian.as_ref().ok_or_else(|| ModelError::Invalid("ma without markovian states".into()))?;
                if exit.len() != n || markovian.len() != n {
                    return Err(ModelError::Invalid("ma exit rates / markovian set sized wrongly".into()));
                }
                for s in markovian.ones() {
                    if self.grouping.group_size(s) != 1 {
                        return Err(ModelError::Invalid(format!("markovian state {s} has more than one row")));
                    }
                    if exit[s] <= V::zero() {
                        return Err(ModelError::Invalid(format!("markovian state {s} has no positive exit rate")));
                    }
                }
                self.check_distributions(tolerance)?;
            }
            ModelKind::Dtmc | ModelKind::Mdp => self.check_distributions(tolerance)?,
        }
        Ok(())
    }

    fn check_distributions(&self, tolerance: f64) -> Result<(), ModelError> {
        for s in 0..self.num_states() {
            for r in self.grouping.rows(s) {
                let sum = self.matrix.row_sum(r);
                let ok = if V::EXACT { sum == V::one() } else { (sum.as_float() - 1.0).abs() <= tolerance };
                if !ok {
                    return Err(ModelError::RowSum { state: s, row: r, sum: sum.to_string() });
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn matrix(&self) -> &SparseMatrix<V> {
        &self.matrix
    }

    pub fn grouping(&self) -> &RowGrouping {
        &self.grouping
    }

    pub fn labeling(&self) -> &StateLabeling {
        &self.labeling
    }

    pub fn rewards(&self) -> &BTreeMap<String, RewardModel<V>> {
        &self.rewards
    }

    pub fn reward(&self, name: &str) -> Option<&RewardModel<V>> {
        self.rewards.get(name)
    }

    pub fn exit_rates(&self) -> Option<&[V]> {
        self.exit_rates.as_deref()
    }

    pub fn markovian_states(&self) -> Option<&BitSet> {
        self.markovian.as_ref()
    }

    pub fn valuations(&self) -> Option<&StateValuations> {
        self.valuations.as_ref()
    }

    pub fn num_states(&self) -> usize {
        self.grouping.num_groups()
    }

    pub fn choice_labels(&self) -> Option<&[String]> {
        self.choice_labels.as_deref()
    }

    pub fn num_choices(&self) -> usize {
        self.matrix.num_rows()
    }

    pub fn num_transitions(&self) -> usize {
        self.matrix.num_entries()
    }

    pub fn initial_states(&self) -> &BitSet {
        self.labeling.get(StateLabeling::INIT).expect("reserved label")
    }

    pub fn is_markovian(&self, state: usize) -> bool {
        self.markovian.as_ref().is_some_and(|m| m.contains(state))
    }

    /// Probability matrix: the embedded jump chain for CTMCs (rows divided
    /// by exit rates), the matrix itself otherwise.
    pub fn probability_matrix(&self) -> SparseMatrix<V> {
        match (self.kind, &self.exit_rates) {
            (ModelKind::Ctmc, Some(exit)) => {
                let mut builder = SparseMatrixBuilder::new(self.num_states());
                for s in 0..self.num_states() {
                    for (c, v) in self.matrix.row(s) {
                        builder.add(c, v.div_ref(&exit[s]));
                    }
                    builder.finish_row();
                }
                builder.finish(Some(self.num_states())).expect("valid")
            }
            _ => self.matrix.clone(),
        }
    }

    /// Fix one row per state. The result is a DTMC for MDPs, a CTMC is
    /// returned unchanged, and a Markov automaton stays a (deterministic)
    /// Markov automaton. Action rewards follow the chosen rows.
    pub fn induced(&self, scheduler: &[usize]) -> Result<Self, ModelError> {
        if scheduler.len() != self.num_states() {
            return Err(ModelError::DimensionMismatch { expected: self.num_states(), found: scheduler.len() });
        }
        let mut rows = Vec::with_capacity(self.num_states());
        for (s, &c) in scheduler.iter().enumerate() {
            if c >= self.grouping.group_size(s) {
                return Err(ModelError::Invalid(format!("choice {c} out of range at state {s}")));
            }
            rows.push(self.grouping.offsets()[s] + c);
        }
        let mut builder = SparseMatrixBuilder::new(self.num_states());
        for &r in &rows {
            for (c, v) in self.matrix.row(r) {
                builder.add(c, v.clone());
            }
            builder.finish_row();
        }
        let matrix = builder.finish(Some(self.num_states()))?;
        let n = self.num_states();
        let kind = match self.kind {
            ModelKind::Mdp => ModelKind::Dtmc,
            k => k,
        };
        let mut model = Self::assemble(
            kind,
            matrix,
            RowGrouping::trivial(n),
            self.labeling.clone(),
            self.exit_rates.clone(),
            self.markovian.clone(),
            1e-8,
        )?;
        for reward in self.rewards.values() {
            model = model.with_reward(RewardModel {
                name: reward.name.clone(),
                state_rewards: reward.state_rewards.clone(),
                action_rewards: reward
                    .action_rewards
                    .as_ref()
                    .map(|a| rows.iter().map(|&r| a[r].clone()).collect()),
            })?;
        }
        model.valuations = self.valuations.clone();
        model.choice_labels = self.choice_labels.as_ref().map(|l| rows.iter().map(|&r| l[r].clone()).collect());
        Ok(model)
    }

    /// Same model over another numeric backend.
    pub fn convert<W: Value>(&self, f: impl Fn(&V) -> W + Copy) -> Model<W> {
        Model {
            kind: self.kind,
            matrix: self.matrix.map_values(f),
            grouping: self.grouping.clone(),
            labeling: self.labeling.clone(),
            rewards: self
                .rewards
                .iter()
                .map(|(k, r)| {
                    (
                        k.clone(),
                        RewardModel {
                            name: r.name.clone(),
                            state_rewards: r.state_rewards.as_ref().map(|v| v.iter().map(f).collect()),
                            action_rewards: r.action_rewards.as_ref().map(|v| v.iter().map(f).collect()),
                        },
                    )
                })
                .collect(),
            exit_rates: self.exit_rates.as_ref().map(|v| v.iter().map(f).collect()),
            markovian: self.markovian.clone(),
            valuations: self.valuations.clone(),
            choice_labels: self.choice_labels.clone(),
        }
    }
}
