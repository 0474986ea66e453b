//! Explicit `.tra`/`.lab` model files.
//!
//! ```text
//! STATES 3
//! TRANSITIONS 4
//! 0 1 0.5        // dtmc/ctmc: src dst value
//! 0 2 0.5
//! 1 1 1
//! 2 2 1
//! ```
//!
//! MDPs and Markov automata use `src choice dst value`; a Markov automaton
//! marks the lines of its Markovian choice with a trailing `!`, and their
//! values are rates. Label files look like
//!
//! ```text
//! #DECLARATION
//! init goal
//! #END
//! 0 init
//! 2 goal
//! ```
//!
//! When `init` is not declared, state 0 is the initial state.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::bitset::{self, BitSet};
use crate::model::{Model, ModelError, ModelKind, RowGrouping, SparseMatrixBuilder, StateLabeling};
use crate::numeric::{parse_value, Value};

/// Row sums of probability rows may be off by at most this much.
pub const EXPLICIT_ROW_SUM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplicitError {
    #[error("{file}:{line}: {msg}")]
    Malformed { file: &'static str, line: usize, msg: String },
    #[error("{file}:{line}: state index {index} out of range (STATES {states})")]
    Dangling { file: &'static str, line: usize, index: usize, states: usize },
    #[error("tra:{line}: duplicate transition {src} {choice} {dst}")]
    Duplicate { line: usize, src: usize, choice: usize, dst: usize },
    #[error("state {state}, choice {choice}: probabilities sum to {sum}")]
    RowSum { state: usize, choice: usize, sum: String },
    #[error("state {0} has no transitions")]
    NoTransitions(usize),
    #[error("state {state}: {msg}")]
    Choices { state: usize, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn strip_comment(line: &str) -> &str {
    line.find("//").map_or(line, |i| &line[..i]).trim()
}

/// Non-empty lines with their 1-based numbers, comments removed.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l))).filter(|(_, l)| !l.is_empty())
}

struct Entry<V> {
    line: usize,
    dst: usize,
    value: V,
    markovian: bool,
}

/// Parse a `.tra`/`.lab` pair into a validated model.
pub fn read_explicit<V: Value>(tra: &str, lab: &str, kind: ModelKind) -> Result<Model<V>, ExplicitError> {
    let mut lines = content_lines(tra);
    let states = header_of(&mut lines, "STATES")?;
    let declared = header_of(&mut lines, "TRANSITIONS")?;

    let nondet = kind.is_nondeterministic();
    let width = if nondet { 4 } else { 3 };
    // state -> choice -> entries
    let mut table: Vec<BTreeMap<usize, Vec<Entry<V>>>> = (0..states).map(|_| BTreeMap::new()).collect();
    let mut count = 0usize;
    for (line, text) in lines {
        let malformed = |msg: String| ExplicitError::Malformed { file: "tra", line, msg };
        let mut parts: Vec<&str> = text.split_whitespace().collect();
        let markovian = parts.last() == Some(&"!");
        if markovian {
            if kind != ModelKind::Ma {
                return Err(malformed("'!' marker is only allowed for Markov automata".into()));
            }
            parts.pop();
        }
        if parts.len() != width {
            return Err(malformed(format!("expected {width} fields, found {}", parts.len())));
        }
        let index = |t: &str| -> Result<usize, ExplicitError> {
            t.parse::<usize>().map_err(|_| malformed(format!("invalid index '{t}'")))
        };
        let src = index(parts[0])?;
        let (choice, dst) = if nondet { (index(parts[1])?, index(parts[2])?) } else { (0, index(parts[1])?) };
        let value: V = parse_value(parts[width - 1]).map_err(|e| malformed(e.to_string()))?;
        for idx in [src, dst] {
            if idx >= states {
                return Err(ExplicitError::Dangling { file: "tra", line, index: idx, states });
            }
        }
        if value < V::zero() {
            return Err(malformed("negative value".into()));
        }
        let row = table[src].entry(choice).or_default();
        if row.iter().any(|e| e.dst == dst) {
            return Err(ExplicitError::Duplicate { line, src, choice, dst });
        }
        if let Some(first) = row.first() {
            if first.markovian != markovian {
                return Err(malformed(format!("choice {choice} of state {src} mixes '!' and unmarked lines")));
            }
        }
        row.push(Entry { line, dst, value, markovian });
        count += 1;
    }
    if count != declared {
        return Err(ExplicitError::Malformed {
            file: "tra",
            line: 2,
            msg: format!("TRANSITIONS {declared} but {count} transitions listed"),
        });
    }

    let mut builder = SparseMatrixBuilder::new(states);
    let mut offsets = vec![0usize];
    let mut markovian_states = bitset::empty(states);
    let mut exit_rates = vec![V::zero(); states];
    for (s, choices) in table.iter_mut().enumerate() {
        if choices.is_empty() {
            return Err(ExplicitError::NoTransitions(s));
        }
        if choices.keys().enumerate().any(|(i, &c)| i != c) {
            return Err(ExplicitError::Choices { state: s, msg: "choice indices are not 0, 1, 2, ...".into() });
        }
        if !nondet && choices.len() > 1 {
            return Err(ExplicitError::Choices { state: s, msg: "several choices in a deterministic model".into() });
        }
        let is_markovian = choices.values().any(|row| row[0].markovian);
        if is_markovian && choices.len() > 1 {
            return Err(ExplicitError::Choices {
                state: s,
                msg: "a Markovian choice cannot coexist with other choices".into(),
            });
        }
        for (&c, row) in choices.iter_mut() {
            row.sort_by_key(|e| e.dst);
            let mut sum = V::zero();
            for e in row.iter() {
                sum += &e.value;
            }
            if is_markovian {
                if sum.is_exactly_zero() {
                    return Err(ExplicitError::Malformed {
                        file: "tra",
                        line: row[0].line,
                        msg: format!("Markovian state {s} has zero exit rate"),
                    });
                }
                markovian_states.insert(s);
                for e in row.iter() {
                    builder.add(e.dst, e.value.div_ref(&sum));
                }
                exit_rates[s] = sum;
            } else {
                if kind != ModelKind::Ctmc {
                    let ok = if V::EXACT {
                        sum == V::one()
                    } else {
                        (sum.as_float() - 1.0).abs() <= EXPLICIT_ROW_SUM_TOLERANCE
                    };
                    if !ok {
                        return Err(ExplicitError::RowSum { state: s, choice: c, sum: sum.to_string() });
                    }
                }
                for e in row.iter() {
                    builder.add(e.dst, e.value.clone());
                }
            }
            builder.finish_row();
        }
        offsets.push(offsets.last().unwrap() + choices.len());
    }
    let matrix = builder.finish(Some(states))?;
    let labeling = read_labels(lab, states)?;
    let model = match kind {
        ModelKind::Dtmc => Model::assemble(
            kind,
            matrix,
            RowGrouping::trivial(states),
            labeling,
            None,
            None,
            EXPLICIT_ROW_SUM_TOLERANCE,
        )?,
        ModelKind::Ctmc => Model::ctmc(matrix, labeling)?,
        ModelKind::Mdp => Model::assemble(
            kind,
            matrix,
            RowGrouping::new(offsets)?,
            labeling,
            None,
            None,
            EXPLICIT_ROW_SUM_TOLERANCE,
        )?,
        ModelKind::Ma => Model::assemble(
            kind,
            matrix,
            RowGrouping::new(offsets)?,
            labeling,
            Some(exit_rates),
            Some(markovian_states),
            EXPLICIT_ROW_SUM_TOLERANCE,
        )?,
    };
    Ok(model)
}

fn header_of<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, word: &str) -> Result<usize, ExplicitError> {
    let (line, text) =
        lines.next().ok_or(ExplicitError::Malformed { file: "tra", line: 0, msg: format!("missing {word} header") })?;
    let bad = || ExplicitError::Malformed { file: "tra", line, msg: format!("expected '{word} <count>'") };
    let mut parts = text.split_whitespace();
    if parts.next() != Some(word) {
        return Err(bad());
    }
    let n = parts.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(n)
}

fn read_labels(lab: &str, states: usize) -> Result<StateLabeling, ExplicitError> {
    let mut labeling = StateLabeling::new(states);
    let mut sets: BTreeMap<String, BitSet> = BTreeMap::new();
    let mut lines = content_lines(lab);
    let malformed = |line: usize, msg: &str| ExplicitError::Malformed { file: "lab", line, msg: msg.to_string() };

    // Declaration block: tokens between #DECLARATION and #END, across lines.
    let mut in_decl = false;
    let mut closed = false;
    let mut last = 0;
    for (line, text) in lines.by_ref() {
        last = line;
        for tok in text.split_whitespace() {
            match tok {
                "#DECLARATION" if !in_decl && !closed => in_decl = true,
                "#END" if in_decl => {
                    in_decl = false;
                    closed = true;
                }
                _ if !in_decl => return Err(malformed(line, "expected '#DECLARATION' header")),
                name => {
                    if !is_label_name(name) {
                        return Err(malformed(line, &format!("invalid label name '{name}'")));
                    }
                    if sets.insert(name.to_string(), bitset::empty(states)).is_some() {
                        return Err(malformed(line, &format!("label '{name}' declared twice")));
                    }
                }
            }
        }
        if closed {
            break;
        }
    }
    if !closed {
        return Err(malformed(last, "missing '#END'"));
    }
    for (line, text) in lines {
        let mut parts = text.split_whitespace();
        let first = parts.next().unwrap_or_default();
        let state: usize = first.parse().map_err(|_| malformed(line, &format!("invalid state '{first}'")))?;
        if state >= states {
            return Err(ExplicitError::Dangling { file: "lab", line, index: state, states });
        }
        for name in parts {
            let set = sets.get_mut(name).ok_or_else(|| malformed(line, &format!("undeclared label '{name}'")))?;
            set.insert(state);
        }
    }
    if !sets.contains_key(StateLabeling::INIT) && states > 0 {
        labeling.add_state(StateLabeling::INIT, 0);
    }
    for (name, set) in sets {
        labeling.insert(name, set)?;
    }
    Ok(labeling)
}

fn is_label_name(name: &str) -> bool {
    let mut chars = name.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Canonical `.tra` and `.lab` text of a model. Markovian rows are written
/// back as rates. Labels are written when non-empty, in name order.
pub fn write_explicit<V: Value>(model: &Model<V>) -> (String, String) {
    let kind = model.kind();
    let matrix = model.matrix();
    let grouping = model.grouping();
    let mut tra = String::new();
    let _ = writeln!(tra, "STATES {}", model.num_states());
    let _ = writeln!(tra, "TRANSITIONS {}", model.num_transitions());
    for s in 0..model.num_states() {
        let markovian = kind == ModelKind::Ma && model.is_markovian(s);
        for (c, r) in grouping.rows(s).enumerate() {
            for (dst, v) in matrix.row(r) {
                let value = if markovian { v.mul_ref(&model.exit_rates().unwrap()[s]) } else { v.clone() };
                if kind.is_nondeterministic() {
                    let _ = write!(tra, "{s} {c} {dst} {}", value.canonical_text());
                } else {
                    let _ = write!(tra, "{s} {dst} {}", value.canonical_text());
                }
                tra.push_str(if markovian { " !\n" } else { "\n" });
            }
        }
    }

    let labeling = model.labeling();
    let names: Vec<&str> = labeling.iter().filter(|(_, set)| set.count_ones(..) > 0).map(|(n, _)| n).collect();
    let mut lab = String::from("#DECLARATION\n");
    if !names.is_empty() {
        lab.push_str(&names.join(" "));
        lab.push('\n');
    }
    lab.push_str("#END\n");
    for s in 0..model.num_states() {
        let of: Vec<&str> = names.iter().copied().filter(|n| labeling.get(n).unwrap().contains(s)).collect();
        if !of.is_empty() {
            let _ = writeln!(lab, "{s} {}", of.join(" "));
        }
    }
    (tra, lab)
}
