use std::collections::BTreeSet;

use pomcp_rules::logic::{parse_facts, parse_rule, prefer, shipped, Literal, Weight};
use pomcp_rules::{
    coverage, covers, evaluate, parse_program, rule_distance, suggested_actions, Cdpi, CdpiKind,
    GroundAtom, RuleError, Symbol,
};

const EQ2: &str = "sample(R) :- guess(R,V), V > 60.";
const EQ3: &str = ":~ sample(R), guess(R,V). [-V@1, R, V]";

fn atoms(s: &str) -> BTreeSet<GroundAtom> {
    parse_facts(s).unwrap()
}

fn preds(names: &[&str]) -> BTreeSet<Symbol> {
    names.iter().map(|n| Symbol::new(n)).collect()
}

#[test]
fn parses_sample_rule() {
    let r = parse_rule(EQ2).unwrap();
    assert_eq!(r.head.to_string(), "sample(R)");
    assert_eq!(r.body.len(), 2);
    assert_eq!(r.body[0].to_string(), "guess(R,V)");
    assert!(matches!(r.body[1], Literal::Guard(_)));
}

#[test]
fn parses_weak_constraint() {
    let p = parse_program(EQ3).unwrap();
    let wc = &p.weak_constraints()[0];
    assert_eq!(wc.level, 1);
    assert!(matches!(&wc.weight, Weight::Var { var, negated: true } if var.as_str() == "V"));
}

#[test]
fn unbound_guard_variable_is_unsafe() {
    assert!(matches!(
        parse_program("p(X) :- V > 3.").unwrap_err(),
        RuleError::Unsafe { .. }
    ));
}

#[test]
fn evaluate_derives_sample_two() {
    let p = parse_program(EQ2).unwrap();
    let out = evaluate(&p, &atoms("guess(1,50) guess(2,70)")).to_set();
    assert_eq!(out, atoms("guess(1,50) guess(2,70) sample(2)"));
}

#[test]
fn evaluate_without_rules_returns_facts() {
    let facts = atoms("guess(1,50) dist(1,0)");
    let out = evaluate(&parse_program("").unwrap(), &facts).to_set();
    assert_eq!(out, facts);
}

#[test]
fn negation_blocks_target_on_sampled_rock() {
    let out = evaluate(
        &shipped::rocksample(),
        &atoms("sampled(1) guess(1,90) dist(1,0)"),
    );
    assert!(!out.contains(&"target(1)".parse().unwrap()));
}

#[test]
fn preference_picks_higher_guess() {
    let p = parse_program(&format!("{EQ2}\n{EQ3}")).unwrap();
    let answer = evaluate(&p, &atoms("guess(1,70) guess(2,80)"));
    assert_eq!(
        prefer(&p, &answer, &Symbol::new("sample")),
        atoms("sample(2)")
    );
}

#[test]
fn preference_single_candidate() {
    let p = parse_program(&format!("{EQ2}\n{EQ3}")).unwrap();
    let answer = evaluate(&p, &atoms("guess(1,70) guess(2,40)"));
    assert_eq!(
        prefer(&p, &answer, &Symbol::new("sample")),
        atoms("sample(1)")
    );
}

#[test]
fn closer_target_preferred() {
    let p = shipped::rocksample();
    // Both targets through the guess band, neither is the nearest rock.
    let facts =
        atoms("guess(1,70) guess(2,80) dist(1,2) dist(2,3) dist(3,1) min_dist(3) sampled(3)");
    let answer = evaluate(&p, &facts);
    assert_eq!(
        prefer(&p, &answer, &Symbol::new("target")),
        atoms("target(1)")
    );
}

#[test]
fn battery_advance_when_station_near() {
    let s = suggested_actions(
        &shipped::battery(),
        &atoms("dist_next(3)"),
        &preds(&["advance", "check", "recharge"]),
    );
    assert_eq!(s, atoms("advance"));
}

#[test]
fn rocksample_sample_suggested_on_good_rock() {
    let facts = atoms("guess(1,90) dist(1,0) delta_x(1,0) delta_y(1,0) min_dist(1)");
    let vocab = preds(&["east", "west", "north", "south", "exit", "check", "sample"]);
    let s = suggested_actions(&shipped::rocksample(), &facts, &vocab);
    assert!(s.contains(&"sample(1)".parse().unwrap()));
}

#[test]
fn empty_facts_suggest_nothing() {
    let vocab = preds(&["east", "west", "north", "south", "exit", "check", "sample"]);
    assert!(suggested_actions(&shipped::rocksample(), &BTreeSet::new(), &vocab).is_empty());
}

#[test]
fn distance_examples() {
    let shipped = shipped::rocksample();
    let sample = shipped
        .rules()
        .iter()
        .find(|r| r.head.predicate.as_str() == "sample")
        .unwrap();
    let learned = parse_rule("sample(R) :- dist(R,V), V ≤ 2.").unwrap();
    assert_eq!(rule_distance(&learned, sample), 5);
    assert_eq!(rule_distance(sample, sample), 0);
    let a = parse_rule("p :- a, b.").unwrap();
    let b = parse_rule("q :- c, d.").unwrap();
    // Head plus body atoms: sizes 3 and 3, nothing shared.
    assert_eq!(rule_distance(&a, &b), 6);
    let c = parse_rule("p :- a.").unwrap();
    let d = parse_rule("q :- c, d.").unwrap();
    assert_eq!(rule_distance(&c, &d), 5);
}

fn cdpi(inc: &str, exc: &str, ctx: &str) -> Cdpi {
    Cdpi::new(
        "e",
        Symbol::new("sample"),
        CdpiKind::Positive,
        atoms(inc),
        atoms(exc),
        atoms(ctx),
    )
    .unwrap()
}

#[test]
fn coverage_examples() {
    let h = parse_program(EQ2).unwrap();
    assert!(covers(
        &h,
        &cdpi("sample(2)", "sample(1)", "guess(1,50) guess(2,70)")
    ));
    assert!(!covers(
        &parse_program("").unwrap(),
        &cdpi("sample(2)", "", "guess(2,70)")
    ));
    assert!(!covers(
        &h,
        &cdpi("", "sample(1)", "guess(1,70) guess(2,70)")
    ));
    let examples = vec![
        cdpi("sample(2)", "", "guess(2,70)"),
        cdpi("sample(1)", "", "guess(1,90)"),
        cdpi("", "sample(1)", "guess(1,10)"),
        cdpi("sample(1)", "", "guess(1,10)"),
    ];
    assert_eq!(coverage(&h, &examples), 0.75);
    assert_eq!(coverage(&h, &examples[..3]), 1.0);
    assert_eq!(coverage(&h, &examples[3..]), 0.0);
}

#[test]
fn evaluation_is_deterministic() {
    let p = shipped::rocksample();
    let facts = atoms("guess(1,70) guess(2,80) dist(1,0) dist(2,3) delta_x(2,3) delta_y(2,0) min_dist(1) num_sampled(0)");
    let first = evaluate(&p, &facts).to_set();
    for _ in 0..5 {
        assert_eq!(evaluate(&p, &facts).to_set(), first);
    }
}
