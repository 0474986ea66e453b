use std::collections::{BTreeMap, HashMap, VecDeque};

use num_traits::{One, Zero};
use proptest::prelude::*;

use super::*;
use crate::numeric::Rational;
use crate::prism::{evaluate, parse_program, Val};

const DIE: &str = include_str!("../../tests/data/die.pm");

fn build<V: Value>(src: &str) -> Result<Model<V>, BuildError> {
    build_with(src, &BuildOptions::default())
}

fn build_with<V: Value>(src: &str, options: &BuildOptions) -> Result<Model<V>, BuildError> {
    let program = parse_program(src).unwrap();
    build_model(&program, options).map(|(m, _)| m)
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

type Dist = BTreeMap<Vec<i64>, Rational>;

/// Straightforward reference semantics over the unbounded-integer evaluator:
/// the enabled transitions (action, distribution) of one valuation.
fn reference_transitions(program: &Program, vals: &[i64]) -> Vec<(Option<String>, bool, Dist)> {
    let vars: Vec<_> = program.variables().collect();
    let mut env = HashMap::new();
    for (v, x) in vars.iter().zip(vals) {
        let val = if v.ty == VarType::Bool { Val::Bool(*x != 0) } else { Val::Int((*x).into()) };
        env.insert(v.name.clone(), val);
    }
    let index = |name: &str| vars.iter().position(|v| v.name == name).unwrap();
    let dist_of = |c: &Command| -> Vec<(Vec<(usize, i64)>, Rational)> {
        c.updates
            .iter()
            .map(|u| {
                let w = evaluate(&u.weight, &env, true).unwrap().to_rational().unwrap();
                let assigned = u
                    .assignments
                    .iter()
                    .map(|(n, e)| {
                        let x = match evaluate(e, &env, true).unwrap() {
                            Val::Bool(b) => b as i64,
                            v => v.as_i64().unwrap(),
                        };
                        (index(n), x)
                    })
                    .collect();
                (assigned, w)
            })
            .collect()
    };
    let on = |c: &Command| evaluate(&c.guard, &env, true).unwrap().as_bool().unwrap();
    let apply = |base: &[i64], assigned: &[(usize, i64)]| {
        let mut t = base.to_vec();
        for &(i, x) in assigned {
            t[i] = x;
        }
        t
    };
    let mut out = Vec::new();
    for m in &program.modules {
        for c in &m.commands {
            if (c.action.is_none() || c.markovian) && on(c) {
                let mut d = Dist::new();
                for (assigned, w) in dist_of(c) {
                    if !w.is_zero() {
                        *d.entry(apply(vals, &assigned)).or_default() += w;
                    }
                }
                out.push((c.action.clone(), c.markovian, d));
            }
        }
    }
    let mut actions: Vec<&str> = program.modules.iter().flat_map(|m| m.actions()).collect();
    actions.sort();
    actions.dedup();
    for a in actions {
        let mut partial: Vec<Vec<(Vec<(usize, i64)>, Rational)>> = vec![vec![(Vec::new(), Rational::one())]];
        for m in program.modules.iter().filter(|m| m.actions().contains(&a)) {
            let enabled: Vec<&Command> = m.commands.iter().filter(|c| c.action.as_deref() == Some(a) && !c.markovian && on(c)).collect();
            let mut next = Vec::new();
            for p in &partial {
                for c in &enabled {
                    let mut combined = Vec::new();
                    for (pa, pw) in p {
                        for (ca, cw) in dist_of(c) {
                            let mut all = pa.clone();
                            all.extend(ca);
                            combined.push((all, pw * cw));
                        }
                    }
                    next.push(combined);
                }
            }
            partial = next;
        }
        for p in partial {
            let mut d = Dist::new();
            for (assigned, w) in p {
                if !w.is_zero() {
                    *d.entry(apply(vals, &assigned)).or_default() += w;
                }
            }
            out.push((Some(a.to_string()), false, d));
        }
    }
    out
}

/// Rows per reachable valuation (sorted, so row order does not matter), for
/// dtmc (uniform overlap), ctmc and mdp programs.
fn reference_model(program: &Program) -> BTreeMap<Vec<i64>, Vec<Dist>> {
    let init: Vec<i64> = program
        .variables()
        .map(|v| match (&v.init, &v.ty) {
            (Some(e), _) => match evaluate(e, &crate::prism::NoEnv, true).unwrap() {
                Val::Bool(b) => b as i64,
                x => x.as_i64().unwrap(),
            },
            (None, VarType::Bool) => 0,
            (None, VarType::Range(lo, _)) => evaluate(lo, &crate::prism::NoEnv, true).unwrap().as_i64().unwrap(),
        })
        .collect();
    let mut seen = BTreeMap::new();
    let mut queue = VecDeque::from([init]);
    while let Some(s) = queue.pop_front() {
        if seen.contains_key(&s) {
            continue;
        }
        let ts = reference_transitions(program, &s);
        let mut rows: Vec<Dist> = match program.kind {
            ModelKind::Mdp => ts.into_iter().map(|t| t.2).collect(),
            _ if ts.is_empty() => Vec::new(),
            ModelKind::Dtmc => {
                let k = Rational::from_integer(ts.len().into());
                let mut d = Dist::new();
                for (_, _, t) in ts {
                    for (x, w) in t {
                        *d.entry(x).or_default() += w / &k;
                    }
                }
                vec![d]
            }
            _ => {
                let mut d = Dist::new();
                for (_, _, t) in ts {
                    for (x, w) in t {
                        *d.entry(x).or_default() += w;
                    }
                }
                d.retain(|_, w| !w.is_zero());
                if d.is_empty() { Vec::new() } else { vec![d] }
            }
        };
        if rows.is_empty() {
            rows.push(Dist::from([(s.clone(), Rational::one())]));
        }
        rows.sort();
        for r in &rows {
            queue.extend(r.keys().cloned());
        }
        seen.insert(s, rows);
    }
    seen
}

fn model_rows(model: &Model<Rational>) -> BTreeMap<Vec<i64>, Vec<Dist>> {
    let vals = model.valuations().unwrap();
    let mut out = BTreeMap::new();
    for s in 0..model.num_states() {
        let mut rows: Vec<Dist> = model
            .grouping()
            .rows(s)
            .map(|r| model.matrix().row(r).map(|(c, w)| (vals.state(c).to_vec(), w.clone())).collect())
            .collect();
        rows.sort();
        out.insert(vals.state(s).to_vec(), rows);
    }
    out
}

fn audit(src: &str) {
    let program = parse_program(src).unwrap();
    let options = BuildOptions { dtmc_overlap: DtmcOverlap::Uniform, ..Default::default() };
    let (model, _) = build_model::<Rational>(&program, &options).unwrap();
    assert_eq!(model_rows(&model), reference_model(&program), "{src}");
}

#[test]
fn knuth_yao_die() {
    let program = parse_program(DIE).unwrap();
    let reference = reference_model(&program);
    assert_eq!(reference.len(), 13);
    assert_eq!(reference.values().map(|rows| rows[0].len()).sum::<usize>(), 20);

    let (model, stats) = build_model::<f64>(&program, &BuildOptions::default()).unwrap();
    assert_eq!((stats.states, stats.transitions), (13, 20));
    assert_eq!((model.num_states(), model.num_transitions()), (13, 20));
    for s in 0..model.num_states() {
        assert!((model.matrix().row_sum(s) - 1.0).abs() < 1e-12);
    }
    assert_eq!(model.valuations().unwrap().state(0), &[0, 0]);
    assert_eq!(model.initial_states().ones().collect::<Vec<_>>(), vec![0]);
    assert_eq!(model.labeling().get("six").unwrap().count_ones(..), 1);
    let coin = model.reward("coin_flips").unwrap();
    assert!(coin.state_rewards.is_none());
    assert_eq!(coin.action_rewards.as_ref().unwrap().iter().sum::<f64>(), 7.0);
    audit(DIE);
}

#[test]
fn single_flip() {
    let m: Model<f64> = build("dtmc module m x:[0..1] init 0; [] true -> 1:(x'=1-x); endmodule").unwrap();
    assert_eq!((m.num_states(), m.num_transitions()), (2, 2));
}

#[test]
fn guard_never_fires() {
    let m: Model<f64> = build("dtmc module m x:[0..1] init 0; [] x=1 -> (x'=0); endmodule").unwrap();
    assert_eq!((m.num_states(), m.num_transitions()), (1, 1));
    assert_eq!(m.matrix().get(0, 0), Some(&1.0));
    assert!(m.labeling().get("deadlock").unwrap().contains(0));

    let options = BuildOptions { fix_deadlocks: false, ..Default::default() };
    let err = build_with::<f64>("dtmc module m x:[0..1] init 0; [] x=1 -> (x'=0); endmodule", &options).unwrap_err();
    assert!(matches!(err, BuildError::Deadlock(ref s) if s == "(x=0)"), "{err}");
}

#[test]
fn ctmc_deadlock_gets_rate_one() {
    let m: Model<f64> = build("ctmc module m x:[0..1] init 0; [] x=0 -> 3:(x'=1); endmodule").unwrap();
    assert_eq!(m.exit_rates().unwrap(), &[3.0, 1.0]);
    assert!(m.labeling().get("deadlock").unwrap().contains(1));
}

#[test]
fn dtmc_overlap() {
    let src = "dtmc module m x:[0..2] init 0; [] x=0 -> (x'=1); [] x=0 -> (x'=2); endmodule";
    let err = build::<f64>(src).unwrap_err();
    assert!(matches!(err, BuildError::Overlap { .. }), "{err}");
    let options = BuildOptions { dtmc_overlap: DtmcOverlap::Uniform, ..Default::default() };
    let m: Model<Rational> = build_with(src, &options).unwrap();
    assert_eq!(m.matrix().get(0, 1), Some(&q(1, 2)));
    audit(src.replace("dtmc", "mdp").as_str());
}

#[test]
fn out_of_bounds_reports_state_and_command() {
    let err = build::<f64>("dtmc module m x:[0..2] init 0; [] true -> (x'=x+1); endmodule").unwrap_err();
    let BuildError::OutOfBounds { state, command, value, .. } = &err else { panic!("{err}") };
    assert_eq!(state, "(x=2)");
    assert!(command.contains("x' = x + 1") || command.contains("(x'=x + 1)"), "{command}");
    assert_eq!(*value, 3);
}

#[test]
fn probabilities_must_sum_to_one() {
    let thirds = "dtmc module m x:[0..2] init 0; [] x=0 -> 1/3:(x'=0) + 1/3:(x'=1) + 1/3:(x'=2); [] x>0 -> true; endmodule";
    let m: Model<Rational> = build(thirds).unwrap();
    assert_eq!(m.matrix().row_sum(0), Rational::one());
    assert!(build::<f64>(thirds).is_ok());
    let off = thirds.replace("1/3:(x'=2)", "0.3333:(x'=2)");
    assert!(matches!(build::<f64>(&off), Err(BuildError::Probabilities { .. })));
    assert!(matches!(build::<Rational>(&off), Err(BuildError::Probabilities { .. })));
    let near = thirds.replace("1/3:(x'=2)", "0.33333333333333333:(x'=2)");
    assert!(build::<f64>(&near).is_ok());
    assert!(matches!(build::<Rational>(&near), Err(BuildError::Probabilities { .. })));
    let negative = "dtmc module m x:[0..1] init 0; [] true -> -0.5:(x'=0) + 1.5:(x'=1); endmodule";
    assert!(matches!(build::<f64>(negative), Err(BuildError::NegativeWeight { .. })));
}

#[test]
fn ctmc_rates_accumulate() {
    let src = "ctmc module m x:[0..1] init 0; [] x=0 -> 2:(x'=1); [] x=0 -> 0.5:(x'=1) + 1:(x'=0); [] x=1 -> 4:(x'=0); endmodule";
    let m: Model<Rational> = build(src).unwrap();
    assert_eq!(m.matrix().get(0, 1), Some(&q(5, 2)));
    assert_eq!(m.exit_rates().unwrap(), &[q(7, 2), q(4, 1)]);
    for s in 0..2 {
        assert_eq!(m.exit_rates().unwrap()[s], m.matrix().row_sum(s));
    }
    audit(src);
}

#[test]
fn markov_automaton_maximal_progress() {
    let src = "ma module m x:[0..2] init 0;
        <> x=0 -> 3:(x'=1) + 1:(x'=2);
        [go] x=0 -> (x'=2);
        <> x=1 -> 2:(x'=0);
        [] x=2 -> true;
        endmodule";
    let m: Model<Rational> = build(src).unwrap();
    // x=0 is probabilistic by maximal progress; x=1 keeps its rate row.
    assert!(!m.is_markovian(0));
    assert_eq!(m.grouping().group_size(0), 1);
    let x1 = (0..m.num_states()).find(|&s| m.valuations().unwrap().state(s) == [1]);
    assert!(x1.is_none(), "x=1 is unreachable once the rate row is dropped");

    let src = "ma module m x:[0..2] init 0; <> x=0 -> 3:(x'=1) + 1:(x'=2); [] x>0 -> true; endmodule";
    let m: Model<Rational> = build(src).unwrap();
    assert!(m.is_markovian(0));
    assert_eq!(m.exit_rates().unwrap()[0], q(4, 1));
    assert_eq!(m.matrix().get(0, 1), Some(&q(3, 4)));
    assert_eq!(m.choice_labels().unwrap()[0], "");
}

#[test]
fn synchronization() {
    let src = "mdp
        global g : [0..2] init 0;
        module a x:[0..1] init 0; [s] x=0 -> 0.5:(x'=1) + 0.5:true; [t] true -> (g'=1); endmodule
        module b y:[0..1] init 0; [s] y=0 -> (y'=1); [s] y=0 -> (y'=0); [t] true -> true; endmodule";
    let m: Model<Rational> = build(src).unwrap();
    // Initial state: [s] with two partner choices, plus [t].
    assert_eq!(m.grouping().group_size(0), 3);
    let labels: Vec<&str> = m.grouping().rows(0).map(|r| m.choice_labels().unwrap()[r].as_str()).collect();
    assert_eq!(labels, vec!["s", "s", "t"]);
    audit(src);

    let conflict = "mdp global g : [0..2] init 0;
        module a [t] true -> (g'=1); endmodule
        module b [t] true -> (g'=2); endmodule";
    assert!(matches!(build::<f64>(conflict), Err(BuildError::WriteConflict { .. })));
}

#[test]
fn blocked_synchronization() {
    let src = "mdp module a x:[0..1] init 0; [s] true -> (x'=1); endmodule
        module b y:[0..1] init 0; [s] y=1 -> true; endmodule";
    let m: Model<f64> = build(src).unwrap();
    assert_eq!(m.num_states(), 1);
    assert!(m.labeling().get("deadlock").unwrap().contains(0));
}

#[test]
fn update_collisions_are_summed() {
    let src = "dtmc module m x:[0..1] init 0; [] x=0 -> 0.25:(x'=1) + 0.25:(x'=1) + 0.5:(x'=0); [] x=1 -> true; endmodule";
    let m: Model<Rational> = build(src).unwrap();
    assert_eq!(m.matrix().row_len(0), 2);
    assert_eq!(m.matrix().get(0, 1), Some(&q(1, 2)));
}

#[test]
fn rewards() {
    let src = "mdp module m x:[0..2] init 0;
        [a] x<2 -> (x'=x+1);
        [] x<2 -> (x'=0);
        [] x=2 -> true;
        endmodule
        rewards \"r\" x>0 : x; [a] true : 10; [] x=0 : 1; endrewards
        rewards [a] true : 2; endrewards";
    let m: Model<Rational> = build(src).unwrap();
    let r = m.reward("r").unwrap();
    let vals = m.valuations().unwrap();
    for s in 0..m.num_states() {
        let x = vals.state(s)[0];
        assert_eq!(r.state_reward(s), Rational::from_integer(x.into()));
        for row in m.grouping().rows(s) {
            let expected = match (m.choice_labels().unwrap()[row].as_str(), x) {
                ("a", _) => 10,
                ("", 0) => 1,
                _ => 0,
            };
            assert_eq!(r.action_reward(row), Rational::from_integer(expected.into()));
        }
    }
    assert!(m.reward("").unwrap().state_rewards.is_none());
}

#[test]
fn ctmc_action_rewards_are_rate_weighted() {
    let src = "ctmc module m x:[0..1] init 0; [a] x=0 -> 1:(x'=1); [b] x=0 -> 3:(x'=1); [] x=1 -> 1:(x'=0); endmodule
        rewards [a] true : 4; endrewards";
    let m: Model<Rational> = build(src).unwrap();
    assert_eq!(m.reward("").unwrap().action_reward(0), Rational::one());
}

#[test]
fn init_block_gives_several_initial_states() {
    let src = "dtmc module m x:[0..3]; [] true -> true; endmodule init x=1 | x=3 endinit";
    let m: Model<f64> = build(src).unwrap();
    assert_eq!(m.initial_states().ones().collect::<Vec<_>>(), vec![0, 1]);
    assert_eq!(m.valuations().unwrap().state(0), &[1]);
}

#[test]
fn state_limit() {
    let src = "dtmc module m x:[0..100] init 0; [] x<100 -> (x'=x+1); [] x=100 -> true; endmodule";
    let options = BuildOptions { max_states: 10, ..Default::default() };
    assert_eq!(build_with::<f64>(src, &options).unwrap_err(), BuildError::StateLimit(10));
}

#[test]
fn build_is_deterministic() {
    let a: Model<f64> = build(DIE).unwrap();
    let b: Model<f64> = build(DIE).unwrap();
    assert_eq!(a, b);
}

#[test]
fn constants_must_be_defined() {
    let src = "dtmc const int N; module m x:[0..N] init 0; [] true -> true; endmodule";
    assert!(matches!(build::<f64>(src), Err(BuildError::Prism(PrismError::MissingConstants(_)))));
}

#[test]
fn wide_packed_states() {
    let src = "dtmc
        module m a:[0..1000000000] init 0; b:[-5..5] init -5; c: bool init false;
        [] a<3 -> 0.5:(a'=a+1)&(c'=!c) + 0.5:(b'=min(b+1,5)); [] a>=3 -> true; endmodule";
    audit(src);
}

fn arb_program() -> impl Strategy<Value = String> {
    let guard = (0usize..3, prop::sample::select(vec!["=", "<", ">=", "!="]), 0i64..3)
        .prop_map(|(v, op, c)| format!("{} {op} {c}", ["x", "y", "z"][v]));
    let assign = (0usize..2, 0i64..3, prop::bool::ANY).prop_map(|(v, c, rel)| {
        let name = ["x", "y"][v];
        if rel {
            format!("({name}'=min(2, {name}+{c}))")
        } else {
            format!("({name}'={c})")
        }
    });
    let update = (1u32..4, prop::collection::vec(assign, 0..2));
    let command = (
        prop::sample::select(vec!["", "", "s", "t"]),
        guard,
        prop::collection::vec(update, 1..3),
        0usize..2,
    );
    (prop::sample::select(vec!["dtmc", "mdp", "ctmc"]), prop::collection::vec(command, 1..6)).prop_map(|(kind, commands)| {
        let mut modules = [String::new(), String::new()];
        for (action, guard, updates, module) in commands {
            let total: u32 = updates.iter().map(|u| u.0).sum();
            let body: Vec<String> = updates
                .iter()
                .map(|(w, assigns)| {
                    // Module 1 owns z; module 0 owns x and y.
                    let assigns: Vec<String> = if module == 1 {
                        assigns.iter().map(|a| a.replace('x', "z").replace('y', "z")).collect()
                    } else {
                        assigns.clone()
                    };
                    let a = if assigns.is_empty() { "true".to_string() } else { assigns.join(" & ") };
                    let w = if kind == "ctmc" { format!("{w}") } else { format!("{w}/{total}") };
                    format!("{w}:{a}")
                })
                .collect();
            modules[module].push_str(&format!("[{action}] {guard} -> {};\n", body.join(" + ")));
        }
        format!(
            "{kind}\nmodule a x:[0..2] init 0; y:[0..2] init 1;\n{}endmodule\nmodule b z:[0..2] init 0;\n{}endmodule\n",
            modules[0], modules[1]
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn hypercube_audit(src in arb_program()) {
        audit(&src);
    }
}
