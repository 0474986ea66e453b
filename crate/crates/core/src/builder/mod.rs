//! Explicit state-space construction from PRISM programs.
//!
//! States are variable valuations, discovered breadth-first from the initial
//! valuation(s) and hashed by their packed bit representation. State 0 is the
//! (first) initial state.

pub(crate) mod compile;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::bitset;
use crate::model::{Model, ModelError, ModelKind, RewardModel, RowGrouping, SparseMatrixBuilder, StateLabeling, StateValuations};
use crate::numeric::Value;
use crate::prism::{substitute_constants, Command, EvalError, Expr, PrismError, Program, RewardTarget, VarType};
use compile::{compile, Code};

/// Tolerance on the float sum of a probabilistic command's update weights.
pub const UPDATE_SUM_TOLERANCE: f64 = 1e-10;

/// What a DTMC does when several unsynchronized commands are enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DtmcOverlap {
    #[default]
    Error,
    Uniform,
}

impl FromStr for DtmcOverlap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "error" => Ok(DtmcOverlap::Error),
            "uniform" => Ok(DtmcOverlap::Uniform),
            other => Err(format!("unknown overlap mode '{other}' (expected error or uniform)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildOptions {
    pub fix_deadlocks: bool,
    pub max_states: usize,
    pub dtmc_overlap: DtmcOverlap,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { fix_deadlocks: true, max_states: 1 << 26, dtmc_overlap: DtmcOverlap::Error }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BuildStats {
    pub states: usize,
    pub transitions: usize,
    pub choices: usize,
    pub initial_states: usize,
    pub deadlocks: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error(transparent)]
    Prism(#[from] PrismError),
    #[error("in state {state}: {context}: {source}")]
    Eval { state: String, context: String, source: EvalError },
    #[error("in state {state}: {command} assigns {var}={value} outside [{lo}..{hi}]")]
    OutOfBounds { state: String, command: String, var: String, value: i64, lo: i64, hi: i64 },
    #[error("in state {state}: probabilities of {command} sum to {sum}")]
    Probabilities { state: String, command: String, sum: String },
    #[error("in state {state}: negative weight {value} in {command}")]
    NegativeWeight { state: String, command: String, value: String },
    #[error("in state {state}: several commands enabled in a dtmc: {}", commands.join("; "))]
    Overlap { state: String, commands: Vec<String> },
    #[error("deadlock in state {0}")]
    Deadlock(String),
    #[error("more than {0} states")]
    StateLimit(usize),
    #[error("in state {state}: synchronizing commands on [{action}] both write '{var}'")]
    WriteConflict { state: String, action: String, var: String },
    #[error("no initial state")]
    NoInitialState,
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

struct Layout {
    names: Vec<String>,
    is_bool: Vec<bool>,
    lo: Vec<i64>,
    hi: Vec<i64>,
    shift: Vec<u32>,
    width: Vec<u32>,
    words: usize,
}

impl Layout {
    fn new(program: &Program) -> Result<Self, BuildError> {
        let mut layout = Layout {
            names: Vec::new(),
            is_bool: Vec::new(),
            lo: Vec::new(),
            hi: Vec::new(),
            shift: Vec::new(),
            width: Vec::new(),
            words: 0,
        };
        let mut bit = 0u64;
        for v in program.variables() {
            let (lo, hi, is_bool) = match &v.ty {
                VarType::Bool => (0, 1, true),
                VarType::Range(lo, hi) => (const_int(lo)?, const_int(hi)?, false),
            };
            let span = (hi as i128 - lo as i128) as u128;
            let width = 128 - span.leading_zeros();
            if width > 64 {
                return Err(BuildError::Unsupported(format!("range of '{}' is too wide", v.name)));
            }
            // A variable never straddles two words.
            if bit % 64 + width as u64 > 64 {
                bit = bit.div_ceil(64) * 64;
            }
            layout.names.push(v.name.clone());
            layout.is_bool.push(is_bool);
            layout.lo.push(lo);
            layout.hi.push(hi);
            layout.shift.push(bit as u32);
            layout.width.push(width);
            bit += width as u64;
        }
        layout.words = bit.div_ceil(64).max(1) as usize;
        Ok(layout)
    }

    fn slot(&self, name: &str) -> Option<(usize, bool)> {
        self.names.iter().position(|n| n == name).map(|i| (i, self.is_bool[i]))
    }

    fn pack(&self, vals: &[i64], key: &mut Vec<u64>) {
        key.clear();
        key.resize(self.words, 0);
        for (i, &v) in vals.iter().enumerate() {
            let offset = (v - self.lo[i]) as u64;
            let s = self.shift[i];
            key[(s / 64) as usize] |= offset << (s % 64);
        }
    }

    fn describe(&self, vals: &[i64]) -> String {
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

fn const_int(e: &Expr) -> Result<i64, BuildError> {
    let code: Code<f64> = compile(e, &|_| None).map_err(|source| BuildError::Eval {
        state: "()".into(),
        context: format!("variable bound {e}"),
        source,
    })?;
    code.eval(&[])
        .and_then(|n| n.as_int())
        .map_err(|source| BuildError::Eval { state: "()".into(), context: format!("variable bound {e}"), source })
}

struct CUpdate<V> {
    weight: Code<V>,
    assignments: Vec<(usize, Code<V>)>,
}

struct CCommand<V> {
    action: Option<String>,
    markovian: bool,
    guard: Code<V>,
    updates: Vec<CUpdate<V>>,
    written: Vec<usize>,
    text: String,
}

/// One enabled transition: a local command or a synchronized combination.
struct Transition<V> {
    action: Option<String>,
    markovian: bool,
    commands: Vec<usize>,
    outcomes: Vec<(Vec<i64>, V)>,
}

struct Explorer<V> {
    kind: ModelKind,
    layout: Layout,
    commands: Vec<CCommand<V>>,
    local: Vec<usize>,
    // action, participating modules, commands per module
    sync: Vec<(String, Vec<Vec<usize>>)>,
}

fn command_text(module: &str, c: &Command) -> String {
    format!("module {module} line {}: {c}", c.pos)
}

impl<V: Value> Explorer<V> {
    fn new(program: &Program) -> Result<Self, BuildError> {
        let layout = Layout::new(program)?;
        let mut commands = Vec::new();
        let mut local = Vec::new();
        let mut actions: Vec<String> = program.modules.iter().flat_map(|m| m.actions()).map(str::to_string).collect();
        actions.sort();
        actions.dedup();
        let mut sync: Vec<(String, Vec<Vec<usize>>)> = actions
            .iter()
            .map(|a| {
                let per_module =
                    program.modules.iter().filter(|m| m.actions().contains(&a.as_str())).map(|_| Vec::new()).collect();
                (a.clone(), per_module)
            })
            .collect();
        for (mi, m) in program.modules.iter().enumerate() {
            for c in &m.commands {
                let text = command_text(&m.name, c);
                let err = |source| BuildError::Eval { state: "-".into(), context: text.clone(), source };
                let slot = |n: &str| layout.slot(n);
                let guard = compile(&c.guard, &slot).map_err(err)?;
                let mut updates = Vec::new();
                let mut written: Vec<usize> = Vec::new();
                for u in &c.updates {
                    let weight = compile(&u.weight, &slot).map_err(err)?;
                    let mut assignments = Vec::new();
                    for (var, e) in &u.assignments {
                        let (s, _) = layout.slot(var).ok_or_else(|| err(EvalError::Unbound(var.clone())))?;
                        assignments.push((s, compile(e, &slot).map_err(err)?));
                        if !written.contains(&s) {
                            written.push(s);
                        }
                    }
                    updates.push(CUpdate { weight, assignments });
                }
                // Guards that are constantly false never contribute.
                if guard.constant_bool() == Some(false) {
                    continue;
                }
                let index = commands.len();
                let synchronizing = c.action.is_some() && !c.markovian;
                commands.push(CCommand {
                    action: c.action.clone(),
                    markovian: c.markovian,
                    guard,
                    updates,
                    written,
                    text,
                });
                if synchronizing {
                    let a = c.action.as_ref().unwrap();
                    let entry = sync.iter_mut().find(|(name, _)| name == a).unwrap();
                    let position = program
                        .modules
                        .iter()
                        .filter(|m| m.actions().contains(&a.as_str()))
                        .position(|m| m.name == program.modules[mi].name)
                        .unwrap();
                    entry.1[position].push(index);
                } else {
                    local.push(index);
                }
            }
        }
        Ok(Self { kind: program.kind, layout, commands, local, sync })
    }

    fn eval_err(&self, state: &[i64], context: &str, source: EvalError) -> BuildError {
        BuildError::Eval { state: self.layout.describe(state), context: context.to_string(), source }
    }

    fn enabled(&self, c: usize, state: &[i64]) -> Result<bool, BuildError> {
        let cmd = &self.commands[c];
        cmd.guard.eval_bool(state).map_err(|e| self.eval_err(state, &cmd.text, e))
    }

    /// Weighted outcomes of one command, checked and bounded.
    fn outcomes(&self, c: usize, state: &[i64]) -> Result<Vec<(Vec<(usize, i64)>, V)>, BuildError> {
        let cmd = &self.commands[c];
        let is_rate = cmd.markovian || self.kind == ModelKind::Ctmc;
        let mut out = Vec::with_capacity(cmd.updates.len());
        let mut sum = V::zero();
        for u in &cmd.updates {
            let w = u.weight.eval_value(state).map_err(|e| self.eval_err(state, &cmd.text, e))?;
            if w < V::zero() {
                return Err(BuildError::NegativeWeight {
                    state: self.layout.describe(state),
                    command: cmd.text.clone(),
                    value: w.to_string(),
                });
            }
            sum += &w;
            if w.is_exactly_zero() {
                continue;
            }
            let mut assigned = Vec::with_capacity(u.assignments.len());
            for (s, e) in &u.assignments {
                let v = e.eval(state).and_then(|n| n.as_int()).map_err(|e| self.eval_err(state, &cmd.text, e))?;
                if v < self.layout.lo[*s] || v > self.layout.hi[*s] {
                    return Err(BuildError::OutOfBounds {
                        state: self.layout.describe(state),
                        command: cmd.text.clone(),
                        var: self.layout.names[*s].clone(),
                        value: v,
                        lo: self.layout.lo[*s],
                        hi: self.layout.hi[*s],
                    });
                }
                assigned.push((*s, v));
            }
            out.push((assigned, w));
        }
        if !is_rate {
            let ok = if V::EXACT { sum == V::one() } else { (sum.as_float() - 1.0).abs() <= UPDATE_SUM_TOLERANCE };
            if !ok {
                return Err(BuildError::Probabilities {
                    state: self.layout.describe(state),
                    command: cmd.text.clone(),
                    sum: sum.to_string(),
                });
            }
        }
        Ok(out)
    }

    fn transitions(&self, state: &[i64]) -> Result<Vec<Transition<V>>, BuildError> {
        let mut result = Vec::new();
        for &c in &self.local {
            if !self.enabled(c, state)? {
                continue;
            }
            let outcomes = self
                .outcomes(c, state)?
                .into_iter()
                .map(|(assigned, w)| {
                    let mut target = state.to_vec();
                    for (s, v) in assigned {
                        target[s] = v;
                    }
                    (target, w)
                })
                .collect();
            let cmd = &self.commands[c];
            result.push(Transition { action: cmd.action.clone(), markovian: cmd.markovian, commands: vec![c], outcomes });
        }
        for (action, per_module) in &self.sync {
            let mut enabled: Vec<Vec<usize>> = Vec::with_capacity(per_module.len());
            for cmds in per_module {
                let mut on = Vec::new();
                for &c in cmds {
                    if self.enabled(c, state)? {
                        on.push(c);
                    }
                }
                if on.is_empty() {
                    break;
                }
                enabled.push(on);
            }
            if enabled.len() < per_module.len() {
                continue;
            }
            // Cartesian product over the modules' enabled commands.
            let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
            for on in &enabled {
                combos = combos
                    .into_iter()
                    .flat_map(|prefix| {
                        on.iter().map(move |&c| {
                            let mut next = prefix.clone();
                            next.push(c);
                            next
                        })
                    })
                    .collect();
            }
            for combo in combos {
                let mut written: Vec<usize> = Vec::new();
                for &c in &combo {
                    for &s in &self.commands[c].written {
                        if written.contains(&s) {
                            return Err(BuildError::WriteConflict {
                                state: self.layout.describe(state),
                                action: action.clone(),
                                var: self.layout.names[s].clone(),
                            });
                        }
                        written.push(s);
                    }
                }
                let mut outcomes: Vec<(Vec<i64>, V)> = vec![(state.to_vec(), V::one())];
                for &c in &combo {
                    let parts = self.outcomes(c, state)?;
                    let mut next = Vec::with_capacity(outcomes.len() * parts.len());
                    for (target, w) in &outcomes {
                        for (assigned, p) in &parts {
                            let mut t = target.clone();
                            for &(s, v) in assigned {
                                t[s] = v;
                            }
                            next.push((t, w.mul_ref(p)));
                        }
                    }
                    outcomes = next;
                }
                result.push(Transition { action: Some(action.clone()), markovian: false, commands: combo, outcomes });
            }
        }
        Ok(result)
    }
}

struct Rows<V> {
    // (entries, action label, contributing transitions with their factor)
    rows: Vec<Row<V>>,
    markovian: Option<V>,
}

struct Row<V> {
    entries: Vec<(Vec<i64>, V)>,
    label: String,
    parts: Vec<(Option<String>, Vec<usize>, V)>,
}

/// Merge the enabled transitions of one state into matrix rows according to
/// the model kind. An empty result means deadlock.
fn compose<V: Value>(
    kind: ModelKind,
    overlap: DtmcOverlap,
    transitions: Vec<Transition<V>>,
    describe: impl Fn() -> String,
    commands: &[CCommand<V>],
) -> Result<Rows<V>, BuildError> {
    let label_of = |a: &Option<String>| a.clone().unwrap_or_default();
    match kind {
        ModelKind::Dtmc => {
            if transitions.is_empty() {
                return Ok(Rows { rows: Vec::new(), markovian: None });
            }
            let k = transitions.len();
            if k > 1 && overlap == DtmcOverlap::Error {
                return Err(BuildError::Overlap {
                    state: describe(),
                    commands: transitions.iter().flat_map(|t| t.commands.iter().map(|&c| commands[c].text.clone())).collect(),
                });
            }
            let factor = V::one().div_ref(&V::from_usize(k));
            let mut entries = Vec::new();
            let mut parts = Vec::new();
            let mut labels: Vec<String> = Vec::new();
            for t in transitions {
                for (target, w) in t.outcomes {
                    entries.push((target, if k > 1 { w.mul_ref(&factor) } else { w }));
                }
                let l = label_of(&t.action);
                if !labels.contains(&l) {
                    labels.push(l);
                }
                parts.push((t.action, t.commands, factor.clone()));
            }
            Ok(Rows { rows: vec![Row { entries, label: labels.join(","), parts }], markovian: None })
        }
        ModelKind::Ctmc => Ok(match rate_row(transitions) {
            Some((row, _)) => Rows { rows: vec![row], markovian: None },
            None => Rows { rows: Vec::new(), markovian: None },
        }),
        ModelKind::Mdp => Ok(Rows { rows: transitions.into_iter().map(probabilistic_row).collect(), markovian: None }),
        ModelKind::Ma => {
            let (rates, probabilistic): (Vec<_>, Vec<_>) = transitions.into_iter().partition(|t| t.markovian);
            if !probabilistic.is_empty() {
                return Ok(Rows { rows: probabilistic.into_iter().map(probabilistic_row).collect(), markovian: None });
            }
            Ok(match rate_row(rates) {
                Some((mut row, exit)) => {
                    for (_, w) in &mut row.entries {
                        *w = w.div_ref(&exit);
                    }
                    Rows { rows: vec![row], markovian: Some(exit) }
                }
                None => Rows { rows: Vec::new(), markovian: None },
            })
        }
    }
}

fn probabilistic_row<V: Value>(t: Transition<V>) -> Row<V> {
    Row { entries: t.outcomes, label: t.action.clone().unwrap_or_default(), parts: vec![(t.action, t.commands, V::one())] }
}

/// Sum of rate transitions; the part factors are each transition's share of
/// the exit rate. `None` when the total rate is zero.
fn rate_row<V: Value>(transitions: Vec<Transition<V>>) -> Option<(Row<V>, V)> {
    let mut exit = V::zero();
    let mut totals = Vec::with_capacity(transitions.len());
    for t in &transitions {
        let mut total = V::zero();
        for (_, w) in &t.outcomes {
            total += w;
        }
        exit += &total;
        totals.push(total);
    }
    if exit.is_exactly_zero() {
        return None;
    }
    let mut entries = Vec::new();
    let mut parts = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for (t, total) in transitions.into_iter().zip(totals) {
        entries.extend(t.outcomes);
        let l = t.action.clone().unwrap_or_default();
        if !labels.contains(&l) {
            labels.push(l);
        }
        parts.push((t.action, t.commands, total.div_ref(&exit)));
    }
    Some((Row { entries, label: labels.join(","), parts }, exit))
}

struct CReward<V> {
    name: String,
    state: Vec<(Code<V>, Code<V>)>,
    action: Vec<(Option<String>, Code<V>, Code<V>)>,
}

/// Build the model of a program. Constants must all be defined (see
/// [`substitute_constants`]); formulas are inlined here if still present.
pub fn build_model<V: Value>(program: &Program, options: &BuildOptions) -> Result<(Model<V>, BuildStats), BuildError> {
    let start = Instant::now();
    let program = substitute_constants(program, &Default::default())?;
    let explorer: Explorer<V> = Explorer::new(&program)?;
    let layout = &explorer.layout;
    let nvars = layout.names.len();
    let slot = |n: &str| layout.slot(n);

    let mut index: FxHashMap<Vec<u64>, usize> = FxHashMap::default();
    let mut store: Vec<i64> = Vec::new();
    let mut key = Vec::with_capacity(layout.words);
    let mut queue = VecDeque::new();

    let mut intern = |vals: &[i64], store: &mut Vec<i64>, queue: &mut VecDeque<usize>| -> Result<usize, BuildError> {
        layout.pack(vals, &mut key);
        if let Some(&i) = index.get(&key) {
            return Ok(i);
        }
        let i = index.len();
        if i >= options.max_states {
            return Err(BuildError::StateLimit(options.max_states));
        }
        index.insert(key.clone(), i);
        store.extend_from_slice(vals);
        queue.push_back(i);
        Ok(i)
    };

    let initial = initial_valuations(&program, layout, options.max_states)?;
    if initial.is_empty() {
        return Err(BuildError::NoInitialState);
    }
    for vals in &initial {
        intern(vals, &mut store, &mut queue)?;
    }
    let num_initial = queue.len();

    let mut builder = SparseMatrixBuilder::growing();
    let mut offsets = vec![0usize];
    let mut choice_labels = Vec::new();
    let mut row_parts: Vec<Vec<(Option<String>, Vec<usize>, V)>> = Vec::new();
    let mut deadlocks = Vec::new();
    let mut markovian = Vec::new();
    let mut exit_rates: Vec<V> = Vec::new();
    let mut current = vec![0i64; nvars];
    while let Some(s) = queue.pop_front() {
        current.copy_from_slice(&store[s * nvars..(s + 1) * nvars]);
        let transitions = explorer.transitions(&current)?;
        let mut rows = compose(
            explorer.kind,
            options.dtmc_overlap,
            transitions,
            || layout.describe(&current),
            &explorer.commands,
        )?;
        if rows.rows.is_empty() {
            if !options.fix_deadlocks {
                return Err(BuildError::Deadlock(layout.describe(&current)));
            }
            deadlocks.push(s);
            rows.rows.push(Row { entries: vec![(current.clone(), V::one())], label: String::new(), parts: Vec::new() });
            if explorer.kind == ModelKind::Ma {
                rows.markovian = Some(V::one());
            }
        }
        markovian.push(rows.markovian.is_some());
        exit_rates.push(rows.markovian.clone().unwrap_or_else(V::zero));
        offsets.push(offsets.last().unwrap() + rows.rows.len());
        for row in rows.rows {
            for (target, w) in row.entries {
                let t = intern(&target, &mut store, &mut queue)?;
                builder.add(t, w);
            }
            builder.finish_row();
            choice_labels.push(row.label);
            row_parts.push(row.parts);
        }
    }
    let n = index.len();
    let matrix = builder.finish(Some(n))?;

    let mut labeling = StateLabeling::new(n);
    for i in 0..num_initial {
        labeling.add_state(StateLabeling::INIT, i);
    }
    for &d in &deadlocks {
        labeling.add_state(StateLabeling::DEADLOCK, d);
    }
    let state = |i: usize| &store[i * nvars..(i + 1) * nvars];
    for l in &program.labels {
        if l.name == StateLabeling::INIT || l.name == StateLabeling::DEADLOCK {
            return Err(BuildError::Unsupported(format!("label \"{}\" is reserved", l.name)));
        }
        let code: Code<V> = compile(&l.expr, &slot).map_err(|e| explorer.eval_err(&[], &l.name, e))?;
        let mut set = bitset::empty(n);
        for i in 0..n {
            if code.eval_bool(state(i)).map_err(|e| explorer.eval_err(state(i), &format!("label \"{}\"", l.name), e))? {
                set.insert(i);
            }
        }
        labeling.insert(l.name.clone(), set)?;
    }

    let mut model = match explorer.kind {
        ModelKind::Dtmc => Model::dtmc(matrix, labeling)?,
        ModelKind::Ctmc => Model::ctmc(matrix, labeling)?,
        ModelKind::Mdp => Model::mdp(matrix, RowGrouping::new(offsets.clone())?, labeling)?,
        ModelKind::Ma => Model::ma(
            matrix,
            RowGrouping::new(offsets.clone())?,
            labeling,
            bitset::from_indices(n, markovian.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i)),
            exit_rates,
        )?,
    };

    for r in compile_rewards(&program, &slot, &explorer)? {
        let context = |what: &str| format!("reward structure \"{}\" ({what})", r.name);
        let mut state_rewards = None;
        if !r.state.is_empty() {
            let mut values = Vec::with_capacity(n);
            for i in 0..n {
                let mut total = V::zero();
                for (guard, value) in &r.state {
                    let on = guard.eval_bool(state(i)).map_err(|e| explorer.eval_err(state(i), &context("guard"), e))?;
                    if on {
                        total += &value.eval_value(state(i)).map_err(|e| explorer.eval_err(state(i), &context("value"), e))?;
                    }
                }
                values.push(total);
            }
            state_rewards = Some(values);
        }
        let mut action_rewards = None;
        if !r.action.is_empty() {
            let mut values = Vec::with_capacity(row_parts.len());
            for i in 0..n {
                for row in offsets[i]..offsets[i + 1] {
                    let mut total = V::zero();
                    for (action, _, factor) in &row_parts[row] {
                        for (want, guard, value) in &r.action {
                            if want != action {
                                continue;
                            }
                            let on =
                                guard.eval_bool(state(i)).map_err(|e| explorer.eval_err(state(i), &context("guard"), e))?;
                            if on {
                                let v = value
                                    .eval_value(state(i))
                                    .map_err(|e| explorer.eval_err(state(i), &context("value"), e))?;
                                total += &v.mul_ref(factor);
                            }
                        }
                    }
                    values.push(total);
                }
            }
            action_rewards = Some(values);
        }
        model = model.with_reward(RewardModel { name: r.name.clone(), state_rewards, action_rewards })?;
    }

    model = model.with_valuations(StateValuations::new(layout.names.clone(), layout.is_bool.clone(), store))?;
    model = model.with_choice_labels(choice_labels)?;
    let stats = BuildStats {
        states: n,
        transitions: model.num_transitions(),
        choices: model.num_choices(),
        initial_states: num_initial,
        deadlocks: deadlocks.len(),
        elapsed: start.elapsed(),
    };
    log::debug!("built {} with {} states, {} transitions in {:?}", model.kind(), n, stats.transitions, stats.elapsed);
    Ok((model, stats))
}

fn compile_rewards<V: Value>(
    program: &Program,
    slot: &dyn Fn(&str) -> Option<(usize, bool)>,
    explorer: &Explorer<V>,
) -> Result<Vec<CReward<V>>, BuildError> {
    let mut out = Vec::new();
    for r in &program.rewards {
        let name = r.name.clone().unwrap_or_default();
        let err = |e| explorer.eval_err(&[], &format!("reward structure \"{name}\""), e);
        let mut cr = CReward { name: name.clone(), state: Vec::new(), action: Vec::new() };
        for item in &r.items {
            let guard = compile(&item.guard, slot).map_err(err)?;
            let value = compile(&item.value, slot).map_err(err)?;
            match &item.target {
                RewardTarget::State => cr.state.push((guard, value)),
                RewardTarget::Action(a) => cr.action.push((a.clone(), guard, value)),
            }
        }
        out.push(cr);
    }
    Ok(out)
}

/// Initial valuations: the declared initial values, or every valuation of the
/// variable hypercube satisfying the `init` block (last variable fastest).
fn initial_valuations(program: &Program, layout: &Layout, limit: usize) -> Result<Vec<Vec<i64>>, BuildError> {
    let Some(init) = &program.init else {
        let mut vals = Vec::new();
        for (i, v) in program.variables().enumerate() {
            vals.push(match &v.init {
                Some(e) => {
                    let code: Code<f64> = compile(e, &|_| None)
                        .map_err(|source| BuildError::Eval { state: "()".into(), context: format!("init of {}", v.name), source })?;
                    code.eval(&[])
                        .and_then(|n| n.as_int())
                        .map_err(|source| BuildError::Eval { state: "()".into(), context: format!("init of {}", v.name), source })?
                }
                None => layout.lo[i],
            });
        }
        return Ok(vec![vals]);
    };
    let code: Code<f64> = compile(init, &|n| layout.slot(n))
        .map_err(|source| BuildError::Eval { state: "()".into(), context: "init block".into(), source })?;
    let nvars = layout.names.len();
    let mut size: u128 = 1;
    for i in 0..nvars {
        size = size.saturating_mul((layout.hi[i] - layout.lo[i]) as u128 + 1);
    }
    if size > limit as u128 {
        return Err(BuildError::Unsupported(format!("init block over a hypercube of {size} valuations")));
    }
    let mut out = Vec::new();
    let mut vals = layout.lo.clone();
    loop {
        if code
            .eval_bool(&vals)
            .map_err(|source| BuildError::Eval { state: layout.describe(&vals), context: "init block".into(), source })?
        {
            out.push(vals.clone());
        }
        let mut i = nvars;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if vals[i] < layout.hi[i] {
                vals[i] += 1;
                break;
            }
            vals[i] = layout.lo[i];
        }
    }
}

impl fmt::Display for BuildStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} states, {} transitions, {} choices, {} initial, {} deadlocks",
            self.states, self.transitions, self.choices, self.initial_states, self.deadlocks
        )
    }
}

#[cfg(test)]
mod tests;
