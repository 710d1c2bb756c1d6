//! Explicit-state bounded model checking and the dualization of its
//! counterexamples into danger certificates.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::certificate::DangerCertificate;
use crate::system::{step_into, LoopSystem, State, Trace, TraceStatus};

/// A counterexample found by unwinding: the trace plus the nondet values
/// chosen at each step, so the run replays concretely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub trace: Trace,
    pub choices: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnwindResult {
    Counterexample(Counterexample),
    NoneWithinBound(u64),
}

#[derive(Debug, Error)]
pub enum BmcError {
    #[error("frontier exceeded the budget of {budget} stored states")]
    BudgetExceeded { budget: u64 },
}

#[derive(Debug, Error)]
#[error("counterexample trace repeats a state; enable loop erasure")]
pub struct NotSimple;

/// Breadth-first search from every initial state over all nondet choices up
/// to depth `k`, with visited-state pruning. Returns the first error exit in
/// search order: level by level, states in insertion order, nondet values in
/// site enumeration order. An error exit is a state where the guard fails
/// and the assertion fails.
pub fn unwind(l: &LoopSystem, k: u64, budget: u64) -> Result<UnwindResult, BmcError> {
    // parent chain: state index -> (parent index, choices taken)
    let mut parent: HashMap<u64, Option<(u64, Vec<i64>)>> = HashMap::new();
    let mut queue: VecDeque<(u64, u64)> = VecDeque::new(); // (state idx, depth)

    let total = l.state_count().unwrap_or(u64::MAX);
    let mut s = State(vec![]);
    for idx in 0..total {
        l.decode_state(idx, &mut s);
        if l.init_holds(&s) {
            if parent.len() as u64 >= budget {
                return Err(BmcError::BudgetExceeded { budget });
            }
            parent.entry(idx).or_insert(None);
            queue.push_back((idx, 0));
        }
    }

    let mut s2 = State(vec![]);
    while let Some((idx, depth)) = queue.pop_front() {
        l.decode_state(idx, &mut s);
        if !l.guard_holds(&s) {
            if !l.assertion_holds(&s) {
                return Ok(UnwindResult::Counterexample(reconstruct(l, &parent, idx)));
            }
            continue; // safe exit, terminal
        }
        if depth == k {
            continue;
        }
        let mut over_budget = false;
        l.for_each_nd(&s, |nd| {
            step_into(l, &s, nd, &mut s2);
            let idx2 = l.encode_state(&s2);
            if !parent.contains_key(&idx2) {
                if parent.len() as u64 >= budget {
                    over_budget = true;
                    return true;
                }
                parent.insert(idx2, Some((idx, nd.to_vec())));
                queue.push_back((idx2, depth + 1));
            }
            false
        });
        if over_budget {
            return Err(BmcError::BudgetExceeded { budget });
        }
    }
    Ok(UnwindResult::NoneWithinBound(k))
}

fn reconstruct(
    l: &LoopSystem,
    parent: &HashMap<u64, Option<(u64, Vec<i64>)>>,
    mut idx: u64,
) -> Counterexample {
    let mut states_rev = Vec::new();
    let mut choices_rev = Vec::new();
    loop {
        let mut s = State(vec![]);
        l.decode_state(idx, &mut s);
        states_rev.push(s);
        match &parent[&idx] {
            None => break,
            Some((p, nd)) => {
                choices_rev.push(nd.clone());
                idx = *p;
            }
        }
    }
    states_rev.reverse();
    choices_rev.reverse();
    Counterexample {
        trace: Trace { states: states_rev, status: TraceStatus::Completed },
        choices: choices_rev,
    }
}

/// Dualize a counterexample into a danger certificate, erasing any cycles
/// first so the countdown ranking is well defined.
pub fn cex_to_danger(l: &LoopSystem, cex: &Counterexample) -> DangerCertificate {
    let (states, choices) = loop_erase(&cex.trace.states, &cex.choices);
    DangerCertificate::from_concrete_run(l, &states, &choices)
}

/// Dualize without loop erasure; fails if the trace repeats a state.
pub fn cex_to_danger_exact(
    l: &LoopSystem,
    cex: &Counterexample,
) -> Result<DangerCertificate, NotSimple> {
    let mut seen = std::collections::HashSet::new();
    for s in &cex.trace.states {
        if !seen.insert(s) {
            return Err(NotSimple);
        }
    }
    Ok(DangerCertificate::from_concrete_run(
        l,
        &cex.trace.states,
        &cex.choices,
    ))
}

/// Remove cycles between repeated states, keeping the transitions that
/// connect the surviving states.
fn loop_erase(states: &[State], choices: &[Vec<i64>]) -> (Vec<State>, Vec<Vec<i64>>) {
    let mut out_s = vec![states[0].clone()];
    let mut out_c: Vec<Vec<i64>> = Vec::new();
    let mut pos: HashMap<State, usize> = HashMap::new();
    pos.insert(states[0].clone(), 0);
    for i in 1..states.len() {
        let s = &states[i];
        if let Some(&p) = pos.get(s) {
            for removed in out_s.drain(p + 1..) {
                pos.remove(&removed);
            }
            out_c.truncate(p);
        } else {
            pos.insert(s.clone(), out_s.len());
            out_s.push(s.clone());
            out_c.push(choices[i - 1].clone());
        }
    }
    (out_s, out_c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::{check_danger, CheckOptions, Verdict};
    use crate::desugar::desugar;
    use crate::parser::parse;

    fn countdown() -> LoopSystem {
        let p = parse(
            "int y = *; assume(y >= 100 && y <= 200); while (y > 0) { y = y - 2; } assert(y == 0);",
        )
        .unwrap();
        desugar(&p, 16).unwrap()
    }

    #[test]
    fn countdown_counterexample_from_first_odd_start() {
        let l = countdown();
        match unwind(&l, 60, 1 << 22).unwrap() {
            UnwindResult::Counterexample(cex) => {
                assert_eq!(cex.trace.first().0[0], 101);
                assert_eq!(cex.trace.last().0[0], -1);
                assert_eq!(cex.trace.len(), 52);
            }
            other => panic!("expected counterexample, got {other:?}"),
        }
    }

    #[test]
    fn countdown_needs_more_than_ten_unwindings() {
        let l = countdown();
        assert_eq!(
            unwind(&l, 10, 1 << 22).unwrap(),
            UnwindResult::NoneWithinBound(10)
        );
    }

    #[test]
    fn safe_nonterminating_loop_never_yields_a_counterexample() {
        let p = parse("int x = 0; int y = 0; while (x < 10) { y++; } assert(x < 10);").unwrap();
        let l = desugar(&p, 8).unwrap();
        for k in [0, 5, 300] {
            assert_eq!(
                unwind(&l, k, 1 << 22).unwrap(),
                UnwindResult::NoneWithinBound(k)
            );
        }
    }

    #[test]
    fn single_state_counterexample_dualizes() {
        let p = parse("int x = *; while (x < 10) { x++; } assert(x == 10);").unwrap();
        let l = desugar(&p, 8).unwrap();
        let cex = match unwind(&l, 5, 1 << 22).unwrap() {
            UnwindResult::Counterexample(c) => c,
            other => panic!("{other:?}"),
        };
        assert_eq!(cex.trace.len(), 1);
        assert_eq!(cex.trace.first().0[0], 11);
        let cert = cex_to_danger(&l, &cex);
        assert_eq!(cert.x0.0, vec![11]);
        assert_eq!(crate::expr::eval_rank(&cert.rank, &cert.x0.0, l.width), 1);
        assert_eq!(
            check_danger(&l, &cert, &CheckOptions::default()).unwrap(),
            Verdict::Ok
        );
    }

    #[test]
    fn countdown_cex_dualizes_to_valid_certificate() {
        let l = countdown();
        let cex = match unwind(&l, 60, 1 << 22).unwrap() {
            UnwindResult::Counterexample(c) => c,
            other => panic!("{other:?}"),
        };
        let cert = cex_to_danger(&l, &cex);
        assert_eq!(
            check_danger(&l, &cert, &CheckOptions::default()).unwrap(),
            Verdict::Ok
        );
        // replaying the recorded choices reproduces the trace exactly
        let replayed =
            crate::system::replay(&l, cex.trace.first(), &cex.choices).unwrap();
        assert_eq!(replayed.states, cex.trace.states);
    }

    #[test]
    fn loop_erasure_cuts_cycles() {
        let s = |v: i64| State(vec![v]);
        let states = vec![s(0), s(1), s(2), s(1), s(3)];
        let choices = vec![vec![10], vec![20], vec![30], vec![40]];
        let (es, ec) = loop_erase(&states, &choices);
        assert_eq!(es, vec![s(0), s(1), s(3)]);
        assert_eq!(ec, vec![vec![10], vec![40]]);
    }
}
