//! Frontend integration: parse/print round trips and semantic equivalence
//! of the desugared system against a direct AST interpreter.

mod common;

use common::{assert_bisimilar, load_corpus};
use dinv::ast::pretty_program;
use dinv::gen::{random_source, random_system, GenConfig};
use dinv::parser::parse;

#[test]
fn corpus_round_trips() {
    for entry in std::fs::read_dir(common::corpus(".")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().map_or(true, |e| e != "loop") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let p = parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let printed = pretty_program(&p);
        let p2 = parse(&printed).unwrap_or_else(|e| panic!("{} reprint: {e}", path.display()));
        assert_eq!(
            p.clone().strip_spans(),
            p2.strip_spans(),
            "{} does not round-trip",
            path.display()
        );
    }
}

#[test]
fn random_programs_round_trip() {
    for seed in 0..300 {
        let text = random_source(seed, GenConfig::small(3, 4));
        let p = parse(&text).unwrap();
        let p2 = parse(&pretty_program(&p)).unwrap();
        assert_eq!(p.strip_spans(), p2.strip_spans(), "seed {seed}:\n{text}");
    }
}

#[test]
fn overflow_guard_matches_reference_interpreter_at_w4() {
    let (p, l) = load_corpus("overflow_guard.loop", 4, &[]);
    assert_eq!(l.vars, vec!["x", "len", "i", "err"]);
    assert_bisimilar(&p, &l);
}

#[test]
fn break_escape_matches_reference_interpreter_at_w4() {
    let (p, l) = load_corpus("break_escape.loop", 4, &[(10, 5)]);
    assert_bisimilar(&p, &l);
}

#[test]
fn random_programs_match_reference_interpreter() {
    // nondet assignments, guarded assignments, breaks and in-loop asserts
    let mut cfg = GenConfig::small(2, 3);
    cfg.allow_inloop_assert = true;
    for seed in 0..150 {
        let (text, p, l) = random_system(seed, cfg);
        std::panic::catch_unwind(|| assert_bisimilar(&p, &l))
            .unwrap_or_else(|_| panic!("bisimulation failed for seed {seed}:\n{text}"));
    }
}

#[test]
fn three_variable_programs_match_reference_interpreter() {
    let mut cfg = GenConfig::small(3, 3);
    cfg.allow_inloop_assert = true;
    for seed in 0..60 {
        let (text, p, l) = random_system(seed, cfg);
        std::panic::catch_unwind(|| assert_bisimilar(&p, &l))
            .unwrap_or_else(|_| panic!("bisimulation failed for seed {seed}:\n{text}"));
    }
}
