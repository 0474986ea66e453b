use super::*;
use crate::prism::{parse_program, PrismError};
use proptest::prelude::*;

fn parse(text: &str) -> Property {
    parse_property(text).unwrap_or_else(|e| panic!("{text}: {e}"))
}

fn label(l: &str) -> Box<StateFormula> {
    Box::new(StateFormula::Label(l.into()))
}

#[test]
fn eventually_is_true_until() {
    let a = parse(r#"P=? [ F "six" ]"#);
    let b = parse(r#"P=? [ true U "six" ]"#);
    assert_eq!(a, b);
    let StateFormula::Prob { op, path } = a else { panic!() };
    assert!(op.is_query());
    assert_eq!(op.dir, None);
    assert_eq!(path, PathFormula::Until { left: Box::new(StateFormula::Bool(true)), right: label("six"), bound: None });
}

#[test]
fn bounded_until_with_direction() {
    let StateFormula::Prob { op, path } = parse(r#"Pmax=? [ "a" U<=3 "b" ]"#) else { panic!() };
    assert_eq!(op.dir, Some(Direction::Maximize));
    assert_eq!(path, PathFormula::Until { left: label("a"), right: label("b"), bound: Some(Expr::int(3)) });
    let spaced = parse(r#"P max =? [ "a" U<=3 "b" ]"#);
    assert_eq!(spaced.op().unwrap().dir, Some(Direction::Maximize));
}

#[test]
fn conditional() {
    let f = parse(r#"P=? [ F "g" || F "c" ]"#);
    let StateFormula::Conditional { path, condition, .. } = f else { panic!("{f:?}") };
    assert_eq!(path, PathFormula::eventually(StateFormula::Label("g".into()), None));
    assert_eq!(condition, PathFormula::eventually(StateFormula::Label("c".into()), None));
}

#[test]
fn reward_operators() {
    let f = parse(r#"R{"time"}min=? [ F "done" ]"#);
    let StateFormula::Reward { name, op, formula } = f else { panic!() };
    assert_eq!(name.as_deref(), Some("time"));
    assert_eq!(op.dir, Some(Direction::Minimize));
    assert_eq!(formula, RewardFormula::Reach(label("done")));

    let StateFormula::Reward { name, formula, .. } = parse("R=? [ C<=10 ]") else { panic!() };
    assert_eq!(name, None);
    assert_eq!(formula, RewardFormula::Cumulative(Expr::int(10)));
    let StateFormula::Reward { formula, .. } = parse(r#"Rmax{"q"}=? [ I=k+1 ]"#) else { panic!() };
    assert!(matches!(formula, RewardFormula::Instantaneous(Expr::Binary(..))));
}

#[test]
fn long_run_operators() {
    let StateFormula::Lra { target, .. } = parse(r#"LRA=? ["busy"]"#) else { panic!() };
    assert_eq!(target, LraTarget::States(label("busy")));
    let StateFormula::Lra { op, target } = parse(r#"LRA{"energy"}max=? [ ]"#) else { panic!() };
    assert_eq!(target, LraTarget::Reward("energy".into()));
    assert_eq!(op.dir, Some(Direction::Maximize));
    let StateFormula::Steady { formula, .. } = parse(r#"S=? ["full"]"#) else { panic!() };
    assert_eq!(formula, label("full"));
}

#[test]
fn thresholds_and_time_bounds() {
    let StateFormula::Prob { op, path } = parse(r#"P>=0.9 [ F<=1.5 "up" ]"#) else { panic!() };
    let Bound::Compare(Cmp::Ge, t) = op.bound else { panic!() };
    assert_eq!(t.to_string(), "0.9");
    assert_eq!(path.bound().unwrap().to_string(), "1.5");
    let interval = parse(r#"P<0.1 [ F[0,2] "up" ]"#);
    assert_eq!(interval, parse(r#"P<0.1 [ F<=2 "up" ]"#));
}

#[test]
fn lower_time_bounds_are_rejected() {
    for text in [r#"P=? [ F[1,2] "up" ]"#, r#"P=? [ F>=1 "up" ]"#, r#"P=? [ "a" U>2 "b" ]"#] {
        let err = parse_property(text).unwrap_err();
        assert!(matches!(err, PrismError::Unsupported { .. }), "{text}: {err}");
        assert!(err.to_string().contains("not supported"));
    }
}

#[test]
fn steady_state_rewards_are_rejected() {
    let err = parse_property("R=? [ S ]").unwrap_err();
    assert!(err.to_string().contains("LRA"), "{err}");
}

#[test]
fn state_formula_connectives() {
    let f = parse(r#"!"a" & s=7 | P>0.5 [ X "b" ] => "c""#);
    let StateFormula::Implies(lhs, rhs) = f else { panic!() };
    assert_eq!(rhs, label("c"));
    let StateFormula::Or(and, prob) = *lhs else { panic!() };
    assert!(matches!(*prob, StateFormula::Prob { .. }));
    let StateFormula::And(not, atom) = *and else { panic!() };
    assert_eq!(*not, StateFormula::Not(label("a")));
    assert!(matches!(*atom, StateFormula::Atom(Expr::Binary(..))));
}

#[test]
fn parentheses_around_formulas_and_expressions() {
    let a = parse(r#"P=? [ ("a" | "b") U (s+1)=2 ]"#);
    let StateFormula::Prob { path: PathFormula::Until { left, right, .. }, .. } = a else { panic!() };
    assert!(matches!(*left, StateFormula::Or(..)));
    assert!(matches!(*right, StateFormula::Atom(_)));
    assert_eq!(parse("(x > 2)"), parse("x > 2"));
}

#[test]
fn globally_and_weak_until() {
    let StateFormula::Prob { path, .. } = parse(r#"Pmin=? [ G<=5 !"fail" ]"#) else { panic!() };
    assert!(matches!(path, PathFormula::Globally { bound: Some(_), .. }));
    let StateFormula::Prob { path, .. } = parse(r#"P=? [ "a" W "b" ]"#) else { panic!() };
    assert!(matches!(path, PathFormula::WeakUntil { bound: None, .. }));
}

#[test]
fn syntax_errors() {
    for text in ["P=? [ F ]", "P=? F \"a\"", "P [ F \"a\" ]", r#"P=? [ F "a" ] junk"#, r#"P=? [ F<2 "a" ]"#, "R=? [ G x ]"] {
        assert!(parse_property(text).is_err(), "{text}");
    }
}

#[test]
fn property_files() {
    let text = "// header\nP=? [ F \"six\" ]\n\n  R{\"coin_flips\"}=? [ F \"done\" ] // trailing\nP=? [ F ]\n";
    let err = parse_properties(text).unwrap_err();
    assert!(err.to_string().starts_with("5:"), "{err}");
    let ok = parse_properties(&text.replace("P=? [ F ]\n", "")).unwrap();
    assert_eq!(ok.len(), 2);
}

#[test]
fn close_substitutes_constants() {
    let program = parse_program("dtmc\nconst int k;\nmodule m\n s : [0..7] init 0;\n d : [0..6] init 0;\n [] s<7 -> (s'=s+1);\nendmodule\n").unwrap();
    let f = parse("P=? [ F s=7 & d=k ]");
    let program = crate::prism::substitute_constants(&program, &crate::prism::parse_bindings("k=6").unwrap()).unwrap();
    let closed = f.close(&program);
    assert_eq!(closed.to_string(), "P=? [ F ((s = 7) & (d = 6)) ]");
}

#[test]
fn display_examples() {
    for text in [
        r#"P=? [ F "six" ]"#,
        r#"Pmax=? [ "a" U<=3 "b" ]"#,
        r#"P=? [ F "g" || F "c" ]"#,
        r#"R{"time"}min=? [ F "done" ]"#,
        r#"LRA=? [ "busy" ]"#,
        r#"LRA{"energy"}=? [ ]"#,
        r#"S=? [ "full" ]"#,
        r#"Tmin=? [ F "done" ]"#,
        r#"P>=0.9 [ F<=1.5 "up" ]"#,
        r#"R=? [ C<=10 ]"#,
        r#"R=? [ I=4 ]"#,
        r#"P=? [ X (s = 2) ]"#,
        r#"!("a" & P>0.5 [ G "b" ])"#,
    ] {
        assert_eq!(parse(text).to_string(), text);
    }
}

fn arb_state(depth: u32) -> BoxedStrategy<String> {
    let leaf = prop_oneof![
        Just("true".to_string()),
        Just("false".to_string()),
        "[abc]".prop_map(|l| format!("\"{l}\"")),
        (0..5i64, prop::sample::select(vec!["=", "!=", "<", ">=", "<="])).prop_map(|(k, r)| format!("s{r}{k}")),
        (0..3i64).prop_map(|k| format!("x+{k}>y*2")),
    ];
    if depth == 0 {
        return leaf.boxed();
    }
    let sub = || arb_state(depth - 1);
    prop_oneof![
        3 => leaf,
        1 => sub().prop_map(|a| format!("!({a})")),
        1 => (sub(), sub(), prop::sample::select(vec!["&", "|", "=>", "<=>"])).prop_map(|(a, b, o)| format!("({a}) {o} ({b})")),
        1 => (arb_op(), arb_path(depth - 1)).prop_map(|(o, p)| format!("P{o} [ {p} ]")),
        1 => (arb_op(), arb_path(depth - 1), arb_path(depth - 1)).prop_map(|(o, p, c)| format!("P{o} [ {p} || {c} ]")),
        1 => (arb_op(), sub()).prop_map(|(o, a)| format!("R{{\"r\"}}{o} [ F {a} ]")),
        1 => (arb_op(), 0..9u32).prop_map(|(o, k)| format!("R{o} [ C<={k} ]")),
        1 => (arb_op(), 0..9u32).prop_map(|(o, k)| format!("R{o} [ I=k+{k} ]")),
        1 => (arb_op(), sub()).prop_map(|(o, a)| format!("LRA{o} [ {a} ]")),
        1 => arb_op().prop_map(|o| format!("LRA{{\"r\"}}{o} [ ]")),
        1 => (arb_op(), sub()).prop_map(|(o, a)| format!("S{o} [ {a} ]")),
        1 => (arb_op(), sub()).prop_map(|(o, a)| format!("T{o} [ F {a} ]")),
    ]
    .boxed()
}

fn arb_op() -> impl Strategy<Value = String> {
    let dir = prop::sample::select(vec!["", "min", "max"]);
    let bound = prop_oneof![Just("=?".to_string()), (prop::sample::select(vec!["<", "<=", ">", ">="]), 0..=10u32).prop_map(|(c, t)| format!("{c}0.{t}"))];
    (dir, bound).prop_map(|(d, b)| format!("{d}{b}"))
}

fn arb_path(depth: u32) -> BoxedStrategy<String> {
    let s = || arb_state(depth);
    let bound = || prop_oneof![Just(String::new()), (0..20u32).prop_map(|k| format!("<={k}")), (1..20u32).prop_map(|k| format!("[0,{k}.5]"))];
    prop_oneof![
        s().prop_map(|a| format!("X ({a})")),
        (bound(), s()).prop_map(|(b, a)| format!("F{b} ({a})")),
        (bound(), s()).prop_map(|(b, a)| format!("G{b} ({a})")),
        (s(), bound(), s()).prop_map(|(a, b, c)| format!("({a}) U{b} ({c})")),
        (s(), bound(), s()).prop_map(|(a, b, c)| format!("({a}) W{b} ({c})")),
    ]
    .boxed()
}

proptest! {
    #[test]
    fn print_parse_round_trip(text in arb_state(3)) {
        let f = parse(&text);
        let printed = f.to_string();
        let g = parse_property(&printed).map_err(|e| TestCaseError::fail(format!("{printed}: {e}")))?;
        prop_assert_eq!(&g, &f, "{}", printed);
        prop_assert_eq!(g.to_string(), printed);
    }
}
