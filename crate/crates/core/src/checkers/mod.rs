//! The sparse model-checking engine: evaluates a [`Property`] on a
//! [`Model`] bottom-up, dispatching quantitative operators to the
//! algorithms for the model's kind.

mod ctmc;
mod dtmc;
mod mdp;

use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::bitset::{self, BitSet};
use crate::builder::compile::compile;
use crate::model::{Direction, Model, ModelError, ModelKind, SparseMatrix};
use crate::numeric::{Rational, Value};
use crate::prism::{evaluate, EvalError, Expr, NoEnv};
use crate::props::{Bound, Cmp, LraTarget, OpInfo, PathFormula, Property, RewardFormula, StateFormula};
use crate::solvers::{SolveOptions, SolveStats, SolverError};

/// Probabilities may leave `[0, 1]` by this much through rounding before a
/// warning is issued; they are clamped either way.
pub const CLAMP_SLACK: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("{0} not supported")]
    Unsupported(String),
    #[error("{0} needs a min/max annotation on a nondeterministic model")]
    MissingDirection(String),
    #[error("direction annotation on deterministic model ({0})")]
    DirectionOnDeterministic(String),
    #[error("'=?' is only allowed at the outermost operator: {0}")]
    NestedQuery(String),
    #[error("{0}")]
    Reward(String),
    #[error("unknown label \"{0}\"")]
    UnknownLabel(String),
    #[error("invalid bound '{expr}': {msg}")]
    Bound { expr: String, msg: String },
    #[error("cannot evaluate '{expr}': {source}")]
    Atom { expr: String, source: EvalError },
    #[error("conditional undefined: the condition has probability 0 in state {0}")]
    UndefinedConditional(usize),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

type Result<T> = std::result::Result<T, CheckError>;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOptions {
    pub solve: SolveOptions,
    /// Ignore (with a warning) min/max annotations on DTMCs and CTMCs
    /// instead of rejecting them.
    pub ignore_direction_on_deterministic: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { solve: SolveOptions::default(), ignore_direction_on_deterministic: false }
    }
}

impl CheckOptions {
    pub fn with_solve(solve: SolveOptions) -> Self {
        Self { solve, ..Self::default() }
    }
}

/// A per-state quantity; expected rewards may diverge and conditional
/// probabilities may be undefined.
#[derive(Debug, Clone, PartialEq)]
pub enum Extended<V> {
    Finite(V),
    Infinity,
    Undefined,
}

impl<V: Value> Extended<V> {
    pub fn finite(&self) -> Option<&V> {
        match self {
            Extended::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Extended::Infinity)
    }

    pub fn as_float(&self) -> f64 {
        match self {
            Extended::Finite(v) => v.as_float(),
            Extended::Infinity => f64::INFINITY,
            Extended::Undefined => f64::NAN,
        }
    }

    fn holds(&self, cmp: Cmp, threshold: &V) -> Option<bool> {
        match self {
            Extended::Finite(v) => Some(cmp.holds(v, threshold)),
            Extended::Infinity => Some(matches!(cmp, Cmp::Gt | Cmp::Ge)),
            Extended::Undefined => None,
        }
    }
}

impl<V: Value> fmt::Display for Extended<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{}", v.canonical_text()),
            Extended::Infinity => f.write_str("inf"),
            Extended::Undefined => f.write_str("undefined"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Values<V> {
    Numbers(Vec<Extended<V>>),
    Truth(BitSet),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckStats {
    pub iterations: usize,
    pub methods: Vec<&'static str>,
    pub elapsed: Duration,
}

impl CheckStats {
    fn absorb(&mut self, solve: &SolveStats) {
        self.iterations += solve.iterations;
        if !solve.method.is_empty() && !self.methods.contains(&solve.method) {
            self.methods.push(solve.method);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult<V> {
    pub values: Values<V>,
    /// Choice offset per state for the outermost operator, when the model is
    /// nondeterministic and the objective admits a memoryless optimum.
    pub scheduler: Option<Vec<usize>>,
    /// For a thresholded outermost operator, its values before the
    /// comparison.
    pub operator_values: Option<Vec<Extended<V>>>,
    pub stats: CheckStats,
    pub warnings: Vec<String>,
}

impl<V: Value> CheckResult<V> {
    pub fn value(&self, state: usize) -> Option<&Extended<V>> {
        match &self.values {
            Values::Numbers(v) => v.get(state),
            Values::Truth(_) => None,
        }
    }

    pub fn holds(&self, state: usize) -> Option<bool> {
        match &self.values {
            Values::Truth(b) => Some(b.contains(state)),
            Values::Numbers(_) => None,
        }
    }

    pub fn numbers(&self) -> Option<&[Extended<V>]> {
        match &self.values {
            Values::Numbers(v) => Some(v),
            Values::Truth(_) => None,
        }
    }
}

/// Check `property` in every state of `model`.
pub fn check<V: Value>(model: &Model<V>, property: &Property, options: &CheckOptions) -> Result<CheckResult<V>> {
    let start = Instant::now();
    let mut checker = Checker { model, options, stats: CheckStats::default(), warnings: Vec::new() };
    let mut operator_values = None;
    let (values, scheduler) = match property.op() {
        Some(op) if op.is_query() => {
            let (values, scheduler) = checker.quantity(property)?;
            if let StateFormula::Conditional { .. } = property {
                if let Some(s) = model.initial_states().ones().find(|&s| values[s] == Extended::Undefined) {
                    return Err(CheckError::UndefinedConditional(s));
                }
            }
            (Values::Numbers(values), scheduler)
        }
        Some(_) => {
            let (values, scheduler) = checker.quantity(property)?;
            let truth = checker.threshold(property, &values)?;
            operator_values = Some(values);
            (Values::Truth(truth), scheduler)
        }
        None => (Values::Truth(checker.states(property)?), None),
    };
    let mut stats = checker.stats;
    stats.elapsed = start.elapsed();
    Ok(CheckResult { values, scheduler, operator_values, stats, warnings: checker.warnings })
}

struct Checker<'a, V> {
    model: &'a Model<V>,
    options: &'a CheckOptions,
    stats: CheckStats,
    warnings: Vec<String>,
}

/// An until problem `left U right` derived from a path formula; `negated`
/// means the path probability is `1 - Pr(left U right)`.
struct Until<'e> {
    left: BitSet,
    right: BitSet,
    bound: Option<&'e Expr>,
    negated: bool,
}

enum Bounded {
    Steps(usize),
    Time(f64),
}

impl<'a, V: Value> Checker<'a, V> {
    fn solve(&self) -> &SolveOptions {
        &self.options.solve
    }

    fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    fn nondeterministic(&self) -> bool {
        self.model.kind().is_nondeterministic()
    }

    fn num_states(&self) -> usize {
        self.model.num_states()
    }

    /// Satisfaction set of a state formula.
    fn states(&mut self, f: &StateFormula) -> Result<BitSet> {
        use StateFormula::*;
        let n = self.num_states();
        Ok(match f {
            Bool(true) => bitset::full(n),
            Bool(false) => bitset::empty(n),
            Label(l) => self.model.labeling().get(l).cloned().ok_or_else(|| CheckError::UnknownLabel(l.clone()))?,
            Atom(e) => self.atom(e)?,
            Not(a) => bitset::complement(&self.states(a)?),
            And(a, b) => bitset::and(&self.states(a)?, &self.states(b)?),
            Or(a, b) => bitset::or(&self.states(a)?, &self.states(b)?),
            Implies(a, b) => bitset::or(&bitset::complement(&self.states(a)?), &self.states(b)?),
            Iff(a, b) => {
                let (a, b) = (self.states(a)?, self.states(b)?);
                let mut out = bitset::empty(n);
                for s in 0..n {
                    out.set(s, a.contains(s) == b.contains(s));
                }
                out
            }
            op => {
                let info = op.op().expect("quantitative operator");
                if info.is_query() {
                    return Err(CheckError::NestedQuery(op.to_string()));
                }
                let (values, _) = self.quantity(op)?;
                self.threshold(op, &values)?
            }
        })
    }

    fn atom(&self, e: &Expr) -> Result<BitSet> {
        let n = self.num_states();
        let err = |source| CheckError::Atom { expr: e.to_string(), source };
        let vals = self.model.valuations();
        let slot = |name: &str| {
            let v = vals?;
            v.var_index(name).map(|i| (i, v.is_bool[i]))
        };
        let code = compile::<V>(e, &slot).map_err(err)?;
        if let Some(b) = code.constant_bool() {
            return Ok(if b { bitset::full(n) } else { bitset::empty(n) });
        }
        let vals = vals.expect("variables resolve only with valuations");
        let mut out = bitset::empty(n);
        for s in 0..n {
            if code.eval_bool(vals.state(s)).map_err(err)? {
                out.insert(s);
            }
        }
        Ok(out)
    }

    fn constant(&self, e: &Expr) -> Result<Rational> {
        let bad = |msg: String| CheckError::Bound { expr: e.to_string(), msg };
        let v = evaluate(e, &NoEnv, true).map_err(|err| bad(err.to_string()))?;
        v.to_rational().map_err(|err| bad(err.to_string()))
    }

    /// Compare an operator's values with its bound.
    fn threshold(&mut self, f: &StateFormula, values: &[Extended<V>]) -> Result<BitSet> {
        let op = f.op().expect("quantitative operator");
        let Bound::Compare(cmp, e) = &op.bound else { unreachable!("queries are not thresholded") };
        let t = self.constant(e)?;
        let is_prob = matches!(f, StateFormula::Prob { .. } | StateFormula::Conditional { .. } | StateFormula::Steady { .. })
            || matches!(f, StateFormula::Lra { target: LraTarget::States(_), .. });
        if is_prob && (t < Rational::from_integer(0.into()) || t > Rational::from_integer(1.into())) {
            return Err(CheckError::Bound { expr: e.to_string(), msg: "probability bound outside [0, 1]".into() });
        }
        if !is_prob && t < Rational::from_integer(0.into()) {
            return Err(CheckError::Bound { expr: e.to_string(), msg: "negative reward bound".into() });
        }
        let t = V::from_rational(&t);
        let mut out = bitset::empty(values.len());
        for (s, v) in values.iter().enumerate() {
            match v.holds(*cmp, &t) {
                Some(true) => out.insert(s),
                Some(false) => {}
                None => return Err(CheckError::UndefinedConditional(s)),
            }
        }
        Ok(out)
    }

    /// Optimization direction of an operator, checked against the model kind.
    fn direction(&mut self, f: &StateFormula, op: &OpInfo) -> Result<Option<Direction>> {
        if !self.nondeterministic() {
            if op.dir.is_some() {
                if !self.options.ignore_direction_on_deterministic {
                    return Err(CheckError::DirectionOnDeterministic(f.to_string()));
                }
                self.warn(format!("ignoring min/max annotation on {} in '{f}'", self.model.kind()));
            }
            return Ok(None);
        }
        match (op.dir, &op.bound) {
            (Some(d), _) => Ok(Some(d)),
            (None, Bound::Compare(Cmp::Gt | Cmp::Ge, _)) => Ok(Some(Direction::Minimize)),
            (None, Bound::Compare(Cmp::Lt | Cmp::Le, _)) => Ok(Some(Direction::Maximize)),
            (None, Bound::Query) => Err(CheckError::MissingDirection(f.to_string())),
        }
    }

    fn clamp(&mut self, values: &mut [V]) {
        if V::EXACT {
            return;
        }
        let (zero, one) = (V::zero(), V::one());
        let mut worst: Option<(usize, f64)> = None;
        for (s, v) in values.iter_mut().enumerate() {
            let x = v.as_float();
            if !(-CLAMP_SLACK..=1.0 + CLAMP_SLACK).contains(&x) && worst.is_none() {
                worst = Some((s, x));
            }
            if *v < zero {
                *v = zero.clone();
            } else if *v > one {
                *v = one.clone();
            }
        }
        if let Some((s, x)) = worst {
            self.warn(format!("probability {x:e} at state {s} lies outside [0, 1]; clamped"));
        }
    }

    fn steps_or_time(&self, e: &Expr) -> Result<Bounded> {
        let t = self.constant(e)?;
        let bad = |msg: &str| CheckError::Bound { expr: e.to_string(), msg: msg.into() };
        if t < Rational::from_integer(0.into()) {
            return Err(bad("negative bound"));
        }
        if self.model.kind().is_continuous() {
            if V::EXACT {
                return Err(CheckError::Unsupported("time-bounded operators in exact mode".into()));
            }
            if self.model.kind() == ModelKind::Ma {
                return Err(CheckError::Unsupported("time-bounded properties of Markov automata".into()));
            }
            return Ok(Bounded::Time(crate::numeric::rational_to_f64(&t)));
        }
        if !t.is_integer() {
            return Err(CheckError::Unsupported(format!("time bound {e} on a discrete-time model (use an integer step bound)")));
        }
        let k = t.to_integer();
        usize::try_from(k).map(Bounded::Steps).map_err(|_| bad("step bound too large"))
    }

    /// Values of a quantitative operator and, for nondeterministic models,
    /// an optimal scheduler when one was computed.
    fn quantity(&mut self, f: &StateFormula) -> Result<(Vec<Extended<V>>, Option<Vec<usize>>)> {
        let op = f.op().expect("quantitative operator");
        let dir = self.direction(f, op)?;
        match f {
            StateFormula::Prob { path, .. } => {
                let (mut x, sched) = self.probability(path, dir)?;
                self.clamp(&mut x);
                Ok((x.into_iter().map(Extended::Finite).collect(), sched))
            }
            StateFormula::Conditional { path, condition, .. } => self.conditional(path, condition),
            StateFormula::Reward { name, formula, .. } => self.reward(name.as_deref(), formula, dir),
            StateFormula::Time { target, .. } => {
                let goal = self.states(target)?;
                let costs = self.time_costs();
                self.reach_reward(&costs, &goal, dir)
            }
            StateFormula::Lra { target, .. } => {
                let rewards = match target {
                    LraTarget::States(s) => StateReward::Indicator(self.states(s)?),
                    LraTarget::Reward(name) => StateReward::Named(name.clone()),
                };
                let (x, sched) = self.long_run(rewards, dir)?;
                Ok((x.into_iter().map(Extended::Finite).collect(), sched))
            }
            StateFormula::Steady { formula, .. } => {
                if self.nondeterministic() {
                    return Err(CheckError::Unsupported(format!("steady-state operator on {}", self.model.kind())));
                }
                let set = self.states(formula)?;
                let (mut x, _) = self.long_run(StateReward::Indicator(set), None)?;
                self.clamp(&mut x);
                Ok((x.into_iter().map(Extended::Finite).collect(), None))
            }
            _ => unreachable!("not a quantitative operator"),
        }
    }

    fn until_problem<'e>(&mut self, path: &'e PathFormula) -> Result<Until<'e>> {
        let n = self.num_states();
        Ok(match path {
            PathFormula::Next(_) => unreachable!("handled separately"),
            PathFormula::Until { left, right, bound } => {
                Until { left: self.states(left)?, right: self.states(right)?, bound: bound.as_ref(), negated: false }
            }
            PathFormula::Globally { formula, bound } => Until {
                left: bitset::full(n),
                right: bitset::complement(&self.states(formula)?),
                bound: bound.as_ref(),
                negated: true,
            },
            PathFormula::WeakUntil { left, right, bound } => {
                let (l, r) = (self.states(left)?, self.states(right)?);
                let not_r = bitset::complement(&r);
                Until {
                    right: bitset::and(&bitset::complement(&l), &not_r),
                    left: not_r,
                    bound: bound.as_ref(),
                    negated: true,
                }
            }
        })
    }

    fn probability(&mut self, path: &PathFormula, dir: Option<Direction>) -> Result<(Vec<V>, Option<Vec<usize>>)> {
        let m = self.model;
        if let PathFormula::Next(a) = path {
            let set = self.states(a)?;
            return Ok(match m.kind() {
                ModelKind::Dtmc | ModelKind::Ctmc => (dtmc::next(&m.probability_matrix(), &set), None),
                ModelKind::Mdp | ModelKind::Ma => {
                    let (x, sched) = mdp::next(m.matrix(), m.grouping(), dir.expect("resolved"), &set);
                    (x, Some(sched))
                }
            });
        }
        let u = self.until_problem(path)?;
        let inner_dir = dir.map(|d| if u.negated { d.flip() } else { d });
        let bound = u.bound.map(|b| self.steps_or_time(b)).transpose()?;
        let (mut x, sched) = match (m.kind(), bound) {
            (ModelKind::Dtmc | ModelKind::Ctmc, None) => {
                let (x, st) = dtmc::until(&m.probability_matrix(), &u.left, &u.right, self.solve())?;
                self.stats.absorb(&st);
                (x, None)
            }
            (ModelKind::Dtmc, Some(Bounded::Steps(k))) => (dtmc::bounded_until(m.matrix(), &u.left, &u.right, k), None),
            (ModelKind::Ctmc, Some(Bounded::Time(t))) => {
                let exit = m.exit_rates().expect("ctmc has exit rates");
                let (x, st) = ctmc::bounded_until(m.matrix(), exit, &u.left, &u.right, t, self.solve())?;
                self.stats.absorb(&st);
                (x, None)
            }
            (ModelKind::Mdp | ModelKind::Ma, None) => {
                let (x, sched, st) = mdp::until(m.matrix(), m.grouping(), inner_dir.expect("resolved"), &u.left, &u.right, self.solve())?;
                self.stats.absorb(&st);
                (x, Some(sched))
            }
            (ModelKind::Mdp, Some(Bounded::Steps(k))) => {
                (mdp::bounded_until(m.matrix(), m.grouping(), inner_dir.expect("resolved"), &u.left, &u.right, k), None)
            }
            _ => unreachable!("bounds are validated against the model kind"),
        };
        if u.negated {
            for v in &mut x {
                *v = V::one().sub_ref(v);
            }
        }
        Ok((x, sched))
    }

    fn conditional(&mut self, path: &PathFormula, condition: &PathFormula) -> Result<(Vec<Extended<V>>, Option<Vec<usize>>)> {
        if !matches!(self.model.kind(), ModelKind::Dtmc | ModelKind::Ctmc) {
            return Err(CheckError::Unsupported(format!("conditional probabilities on {}", self.model.kind())));
        }
        let eventually = |p: &PathFormula| match p {
            PathFormula::Until { left, right, bound: None } if **left == StateFormula::Bool(true) => Some(right.clone()),
            _ => None,
        };
        let (Some(goal), Some(cond)) = (eventually(path), eventually(condition)) else {
            return Err(CheckError::Unsupported("conditional probabilities other than P=? [ F a || F b ]".into()));
        };
        let goal = self.states(&goal)?;
        let cond = self.states(&cond)?;
        let (mut x, st) = dtmc::conditional(&self.model.probability_matrix(), &goal, &cond, self.solve())?;
        self.stats.absorb(&st);
        let mut finite: Vec<V> = x.iter().map(|v| v.finite().cloned().unwrap_or_else(V::zero)).collect();
        self.clamp(&mut finite);
        for (v, c) in x.iter_mut().zip(finite) {
            if let Extended::Finite(old) = v {
                *old = c;
            }
        }
        Ok((x, None))
    }

    fn reward_model(&self, name: Option<&str>) -> Result<&'a crate::model::RewardModel<V>> {
        let rewards = self.model.rewards();
        match name {
            Some(n) => rewards.get(n).ok_or_else(|| CheckError::Reward(format!("unknown reward model \"{n}\""))),
            None if rewards.len() == 1 => Ok(rewards.values().next().expect("one reward model")),
            None if rewards.is_empty() => Err(CheckError::Reward("the model has no reward structure".into())),
            None => Err(CheckError::Reward("the model has several reward structures; name one with R{\"name\"}".into())),
        }
    }

    /// Reward earned on leaving a state through each row: per-step for
    /// discrete time, and for CTMC/MA Markovian rows the state reward rate
    /// times the mean sojourn time.
    fn row_costs(&self, name: Option<&str>) -> Result<Vec<V>> {
        let m = self.model;
        let r = self.reward_model(name)?;
        let mut out = Vec::with_capacity(m.num_choices());
        for s in 0..m.num_states() {
            let state = r.state_reward(s);
            let state = match (m.kind(), m.exit_rates()) {
                (ModelKind::Ctmc, Some(e)) => per_sojourn(&state, &e[s]),
                (ModelKind::Ma, Some(e)) if m.is_markovian(s) => per_sojourn(&state, &e[s]),
                (ModelKind::Ma, _) => V::zero(),
                _ => state,
            };
            for row in m.grouping().rows(s) {
                out.push(state.add_ref(&r.action_reward(row)));
            }
        }
        Ok(out)
    }

    fn time_costs(&self) -> Vec<V> {
        let m = self.model;
        let mut out = Vec::with_capacity(m.num_choices());
        for s in 0..m.num_states() {
            let c = match (m.kind(), m.exit_rates()) {
                (ModelKind::Ctmc, Some(e)) => per_sojourn(&V::one(), &e[s]),
                (ModelKind::Ma, Some(e)) if m.is_markovian(s) => per_sojourn(&V::one(), &e[s]),
                (ModelKind::Ma, _) => V::zero(),
                _ => V::one(),
            };
            out.extend(std::iter::repeat_n(c, m.grouping().group_size(s)));
        }
        out
    }

    fn reward(
        &mut self,
        name: Option<&str>,
        formula: &RewardFormula,
        dir: Option<Direction>,
    ) -> Result<(Vec<Extended<V>>, Option<Vec<usize>>)> {
        let m = self.model;
        let finite = |x: Vec<V>| x.into_iter().map(Extended::Finite).collect();
        match formula {
            RewardFormula::Reach(target) => {
                let costs = self.row_costs(name)?;
                let goal = self.states(target)?;
                self.reach_reward(&costs, &goal, dir)
            }
            RewardFormula::Cumulative(b) | RewardFormula::Instantaneous(b) => {
                let cumulative = matches!(formula, RewardFormula::Cumulative(_));
                let r = self.reward_model(name)?;
                let bound = self.steps_or_time(b)?;
                let state_rewards: Vec<V> = (0..m.num_states()).map(|s| r.state_reward(s)).collect();
                Ok(match (m.kind(), bound) {
                    (ModelKind::Dtmc, Bounded::Steps(k)) if cumulative => {
                        (finite(dtmc::cumulative(m.matrix(), &self.row_costs(name)?, k)), None)
                    }
                    (ModelKind::Dtmc, Bounded::Steps(k)) => (finite(dtmc::instantaneous(m.matrix(), &state_rewards, k)), None),
                    (ModelKind::Mdp, Bounded::Steps(k)) if cumulative => {
                        let costs = self.row_costs(name)?;
                        (finite(mdp::cumulative(m.matrix(), m.grouping(), dir.expect("resolved"), &costs, k)), None)
                    }
                    (ModelKind::Mdp, Bounded::Steps(k)) => {
                        (finite(mdp::instantaneous(m.matrix(), m.grouping(), dir.expect("resolved"), &state_rewards, k)), None)
                    }
                    (ModelKind::Ctmc, Bounded::Time(t)) => {
                        let exit = m.exit_rates().expect("ctmc has exit rates");
                        let (x, st) = if cumulative {
                            let rates: Vec<V> = (0..m.num_states())
                                .map(|s| state_rewards[s].add_ref(&exit[s].mul_ref(&r.action_reward(s))))
                                .collect();
                            ctmc::cumulative(m.matrix(), exit, &rates, t, self.solve())?
                        } else {
                            ctmc::instantaneous(m.matrix(), exit, &state_rewards, t, self.solve())?
                        };
                        self.stats.absorb(&st);
                        (finite(x), None)
                    }
                    _ => unreachable!("bounds are validated against the model kind"),
                })
            }
        }
    }

    fn reach_reward(
        &mut self,
        costs: &[V],
        goal: &BitSet,
        dir: Option<Direction>,
    ) -> Result<(Vec<Extended<V>>, Option<Vec<usize>>)> {
        let m = self.model;
        if m.kind().is_nondeterministic() {
            let (x, sched, st) = mdp::reach_reward(m.matrix(), m.grouping(), dir.expect("resolved"), costs, goal, self.solve())?;
            self.stats.absorb(&st);
            return Ok((x, Some(sched)));
        }
        let (x, st) = dtmc::reach_reward(&m.probability_matrix(), costs, goal, self.solve())?;
        self.stats.absorb(&st);
        Ok((x, None))
    }

    fn long_run(&mut self, rewards: StateReward, dir: Option<Direction>) -> Result<(Vec<V>, Option<Vec<usize>>)> {
        let m = self.model;
        let n = m.num_states();
        let named = match &rewards {
            StateReward::Named(name) => Some(self.reward_model(Some(name))?),
            StateReward::Indicator(_) => None,
        };
        let state_value = |s: usize| match (&rewards, named) {
            (StateReward::Indicator(set), _) => if set.contains(s) { V::one() } else { V::zero() },
            (_, Some(r)) => r.state_reward(s),
            _ => unreachable!(),
        };
        let action = |row: usize| named.map_or_else(V::zero, |r| r.action_reward(row));
        match m.kind() {
            ModelKind::Dtmc => {
                let r: Vec<V> = (0..n).map(|s| state_value(s).add_ref(&action(s))).collect();
                let (x, st) = dtmc::lra(m.matrix(), &r, self.solve())?;
                self.stats.absorb(&st);
                Ok((x, None))
            }
            ModelKind::Ctmc => {
                let exit = m.exit_rates().expect("ctmc has exit rates");
                let r: Vec<V> = (0..n).map(|s| state_value(s).add_ref(&exit[s].mul_ref(&action(s)))).collect();
                let (x, st) = ctmc::lra(m.matrix(), exit, &r, self.solve())?;
                self.stats.absorb(&st);
                Ok((x, None))
            }
            ModelKind::Mdp => {
                let mut rows = Vec::with_capacity(m.num_choices());
                for s in 0..n {
                    let sv = state_value(s);
                    rows.extend(m.grouping().rows(s).map(|row| sv.add_ref(&action(row))));
                }
                let (x, sched, st) = mdp::lra(m.matrix(), m.grouping(), dir.expect("resolved"), &rows, self.solve())?;
                self.stats.absorb(&st);
                Ok((x, Some(sched)))
            }
            ModelKind::Ma => Err(CheckError::Unsupported("long-run averages on Markov automata".into())),
        }
    }
}

enum StateReward {
    Indicator(BitSet),
    Named(String),
}

/// Reward rate over the mean sojourn time of a state (zero for absorbing
/// states, which never leave).
fn per_sojourn<V: Value>(rate: &V, exit: &V) -> V {
    if exit.is_exactly_zero() {
        V::zero()
    } else {
        rate.div_ref(exit)
    }
}

/// `matrix · x` restricted to rows of a trivial grouping.
fn multiply<V: Value>(matrix: &SparseMatrix<V>, x: &[V]) -> Vec<V> {
    (0..matrix.num_rows()).map(|r| matrix.row_dot(r, x)).collect()
}

fn indicator<V: Value>(set: &BitSet, n: usize) -> Vec<V> {
    (0..n).map(|s| if set.contains(s) { V::one() } else { V::zero() }).collect()
}
