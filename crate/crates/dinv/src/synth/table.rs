//! Exact decision procedure for tiny state spaces: forward reachability over
//! explicit tables decides danger vs safety, and the witness predicates are
//! materialized as cube tables that re-validate through the certificate
//! checker.

use std::collections::VecDeque;

use crate::certificate::{
    check_danger, check_safety, cube_disjunction, extract_trace, CheckOptions, DangerCertificate,
    SafetyCertificate, SafetyMode, Verdict,
};
use crate::system::{
    checked_state_count, step_into, BudgetExceeded, LoopSystem, State,
};

use super::SolveResult;

/// Tables are exponential in the state count; refuse anything bigger.
pub const TABLE_STATE_LIMIT: u64 = 1 << 12;

struct Explored {
    /// Reachable state indices in discovery order.
    order: Vec<u64>,
    /// parent[i]: Some((parent idx, nd)) for non-initial reachable states.
    parent: Vec<Option<(u64, Vec<i64>)>>,
    /// First reachable error exit (guard false, assertion false), if any.
    error: Option<u64>,
    /// Whether some reachable safe exit (guard false, assertion true) exists.
    has_safe_exit: bool,
}

fn explore(l: &LoopSystem, seeds: impl Iterator<Item = u64>, count: u64) -> Explored {
    let mut seen = vec![false; count as usize];
    let mut parent: Vec<Option<(u64, Vec<i64>)>> = vec![None; count as usize];
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    for idx in seeds {
        if !seen[idx as usize] {
            seen[idx as usize] = true;
            order.push(idx);
            queue.push_back(idx);
        }
    }
    let mut s = State(vec![]);
    let mut s2 = State(vec![]);
    let mut error = None;
    let mut has_safe_exit = false;
    while let Some(idx) = queue.pop_front() {
        l.decode_state(idx, &mut s);
        if !l.guard_holds(&s) {
            if l.assertion_holds(&s) {
                has_safe_exit = true;
            } else if error.is_none() {
                error = Some(idx);
            }
            continue;
        }
        l.for_each_nd(&s, |nd| {
            step_into(l, &s, nd, &mut s2);
            let idx2 = l.encode_state(&s2);
            if !seen[idx2 as usize] {
                seen[idx2 as usize] = true;
                parent[idx2 as usize] = Some((idx, nd.to_vec()));
                order.push(idx2);
                queue.push_back(idx2);
            }
            false
        });
    }
    Explored { order, parent, error, has_safe_exit }
}

fn initial_indices<'a>(l: &'a LoopSystem, count: u64) -> impl Iterator<Item = u64> + 'a {
    let mut s = State(vec![]);
    (0..count).filter(move |&idx| {
        l.decode_state(idx, &mut s);
        l.init_holds(&s)
    })
}

fn path_to(l: &LoopSystem, ex: &Explored, target: u64) -> (Vec<State>, Vec<Vec<i64>>) {
    let mut states_rev = Vec::new();
    let mut choices_rev = Vec::new();
    let mut idx = target;
    loop {
        let mut s = State(vec![]);
        l.decode_state(idx, &mut s);
        states_rev.push(s);
        match &ex.parent[idx as usize] {
            None => break,
            Some((p, nd)) => {
                choices_rev.push(nd.clone());
                idx = *p;
            }
        }
    }
    states_rev.reverse();
    choices_rev.reverse();
    (states_rev, choices_rev)
}

fn states_of(l: &LoopSystem, indices: &[u64]) -> Vec<State> {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    sorted
        .iter()
        .map(|&idx| {
            let mut s = State(vec![]);
            l.decode_state(idx, &mut s);
            s
        })
        .collect()
}

/// Decide the loop exactly: unsafe iff a terminating error run exists, which
/// over a finite graph is reachability of an error exit from an initial
/// state. The danger witness is the BFS path dualized into cube tables; the
/// safety witness is the reachable set as a cube table. Either witness is
/// re-validated before it is returned.
pub fn table_search(l: &LoopSystem) -> Result<SolveResult, BudgetExceeded> {
    let count = checked_state_count(l, TABLE_STATE_LIMIT)?;
    let ex = explore(l, initial_indices(l, count), count);
    let opts = CheckOptions { state_budget: TABLE_STATE_LIMIT, jobs: 1 };
    match ex.error {
        Some(target) => {
            let (states, choices) = path_to(l, &ex, target);
            let cert = DangerCertificate::from_concrete_run(l, &states, &choices);
            let verdict = check_danger(l, &cert, &opts).expect("within table budget");
            assert_eq!(verdict, Verdict::Ok, "table danger witness must validate");
            let trace = extract_trace(l, &cert).expect("validated certificate");
            Ok(SolveResult::DangerProved { cert, trace })
        }
        None => {
            let cert = SafetyCertificate {
                s: cube_disjunction(states_of(l, &ex.order).iter()),
            };
            let verdict =
                check_safety(l, &cert, &SafetyMode::Safety, &opts).expect("within table budget");
            assert_eq!(verdict, Verdict::Ok, "table safety witness must validate");
            Ok(SolveResult::SafetyProved { cert })
        }
    }
}

/// A doomed loop head exists iff no safe exit is reachable from any initial
/// state; the witness is the reachable set (take S' = Reach(I): it covers I,
/// it is closed under the transition relation, and by assumption every exit
/// in it is an error).
pub fn doomed_head_table(l: &LoopSystem) -> Result<Option<SafetyCertificate>, BudgetExceeded> {
    let count = checked_state_count(l, TABLE_STATE_LIMIT)?;
    let ex = explore(l, initial_indices(l, count), count);
    if ex.has_safe_exit || ex.order.is_empty() {
        return Ok(None);
    }
    Ok(Some(SafetyCertificate {
        s: cube_disjunction(states_of(l, &ex.order).iter()),
    }))
}

/// A doomed initial state is an x0 satisfying I from which no safe exit is
/// reachable. Returns the first such x0 in enumeration order with its
/// reachable set as witness predicate.
pub fn doomed_state_table(
    l: &LoopSystem,
) -> Result<Option<(SafetyCertificate, State)>, BudgetExceeded> {
    let count = checked_state_count(l, TABLE_STATE_LIMIT)?;
    let mut s = State(vec![]);
    for idx in 0..count {
        l.decode_state(idx, &mut s);
        if !l.init_holds(&s) {
            continue;
        }
        let ex = explore(l, std::iter::once(idx), count);
        if !ex.has_safe_exit {
            let cert = SafetyCertificate {
                s: cube_disjunction(states_of(l, &ex.order).iter()),
            };
            return Ok(Some((cert, s.clone())));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::desugar::desugar;
    use crate::parser::parse;

    fn scaled_count_up() -> LoopSystem {
        // x = *; count up to 5; w=4
        let mut p = parse("int x = *; while (x < 10) { x++; } assert(x == 10);").unwrap();
        p.substitute_literal(10, 5);
        desugar(&p, 4).unwrap()
    }

    fn busy_safe(width: u32) -> LoopSystem {
        let mut p =
            parse("int x = 0; int y = 0; while (x < 10) { y++; } assert(x < 10);").unwrap();
        if width < 5 {
            p.substitute_literal(10, 5);
        }
        desugar(&p, width).unwrap()
    }

    #[test]
    fn unsafe_nondet_start_proves_danger() {
        let l = scaled_count_up();
        match table_search(&l).unwrap() {
            SolveResult::DangerProved { cert, trace } => {
                // error exits are x in {6, 7}; 6 comes first in enumeration order
                assert_eq!(cert.x0.0, vec![6]);
                assert_eq!(trace.len(), 1);
            }
            other => panic!("expected danger, got {other:?}"),
        }
    }

    #[test]
    fn nonterminating_safe_loop_proves_safety() {
        let l = busy_safe(4);
        match table_search(&l).unwrap() {
            SolveResult::SafetyProved { cert } => {
                // reachable set is exactly {(0, y)} for all 16 y values
                let mut s = State(vec![0, 0]);
                let mut inside = 0;
                for idx in 0..l.state_count().unwrap() {
                    l.decode_state(idx, &mut s);
                    if crate::expr::eval_bool(&cert.s, &s.0, &[], l.width) {
                        assert_eq!(s.0[0], 0);
                        inside += 1;
                    }
                }
                assert_eq!(inside, 16);
            }
            other => panic!("expected safety, got {other:?}"),
        }
    }

    #[test]
    fn unsatisfiable_init_is_safe_with_empty_table() {
        let p = parse("int x = 0; assume(false); while (x < 2) { x++; } assert(x == 0);")
            .unwrap();
        let l = desugar(&p, 4).unwrap();
        match table_search(&l).unwrap() {
            SolveResult::SafetyProved { cert } => {
                assert_eq!(cert.s, crate::expr::Expr::bool(false));
            }
            other => panic!("expected safety, got {other:?}"),
        }
    }

    #[test]
    fn budget_is_enforced() {
        let l = busy_safe(8);
        assert!(table_search(&l).is_err()); // 2^16 states > 2^12
    }

    #[test]
    fn doom_hierarchy_on_the_illustrative_pair() {
        // count-up from nondet start: no doomed head, but x0 = 6 is doomed
        let l = scaled_count_up();
        assert!(doomed_head_table(&l).unwrap().is_none());
        let (cert, x0) = doomed_state_table(&l).unwrap().expect("doomed state");
        assert_eq!(x0.0, vec![6]);
        let opts = CheckOptions::default();
        assert_eq!(
            check_safety(&l, &cert, &SafetyMode::DoomedState { x0 }, &opts).unwrap(),
            Verdict::Ok
        );

        // break-out loop: unsafe but no doomed state at all
        let mut p = parse(
            "int x = 0; while (x < 10) { if (*) break; x++; } assert(x == 10);",
        )
        .unwrap();
        p.substitute_literal(10, 5);
        let l = desugar(&p, 4).unwrap();
        assert!(doomed_state_table(&l).unwrap().is_none());
        assert!(matches!(
            table_search(&l).unwrap(),
            SolveResult::DangerProved { .. }
        ));
    }
}
