//! Proof objects and their exhaustive validation over the finite domain.
//!
//! A danger certificate (D, R, N, x0) proves some terminating run violates
//! the assertion; a safety certificate S proves none does. `check_safety`
//! also validates the weaker proof flavors (doomed loop head, doomed state,
//! partial danger) through its mode parameter.

use std::fmt;
use std::ops::Range;

use thiserror::Error;

use crate::expr::{eval_bool, eval_rank, Expr};
use crate::system::{
    checked_state_count, run, step_into, BudgetExceeded, LoopSystem, State, Trace, TraceStatus,
    DEFAULT_STATE_BUDGET,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyCertificate {
    pub s: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DangerCertificate {
    pub d: Expr,
    pub rank: Expr,
    /// Skolem expression per nondet site, indexed `site - 1`.
    pub skolem: Vec<Expr>,
    pub x0: State,
}

/// Equality cube pinning exactly the given state.
pub fn state_cube(s: &State) -> Expr {
    let mut e = Expr::bool(true);
    for (i, v) in s.0.iter().enumerate() {
        e = Expr::and(e, Expr::eq(Expr::var(i), Expr::int(*v)));
    }
    e
}

/// Disjunction of equality cubes; the explicit "lookup table" form of a
/// predicate over an enumerated state set. Empty input prints as `false`.
pub fn cube_disjunction<'a>(states: impl IntoIterator<Item = &'a State>) -> Expr {
    let mut it = states.into_iter();
    let Some(first) = it.next() else {
        return Expr::bool(false);
    };
    let mut e = state_cube(first);
    for s in it {
        e = Expr::or(e, state_cube(s));
    }
    e
}

impl DangerCertificate {
    /// Materialize a certificate from one concrete error run: D is the
    /// disjunction of per-state cubes, R counts down the remaining steps
    /// (`n - i + 1` at the i-th state, 0 off the run), and each skolem
    /// replays the recorded nondet choice for its site. The run must be
    /// simple (no repeated states).
    pub fn from_concrete_run(
        l: &LoopSystem,
        states: &[State],
        choices: &[Vec<i64>],
    ) -> DangerCertificate {
        assert_eq!(states.len(), choices.len() + 1);
        let n = choices.len() as i64;
        let d = cube_disjunction(states.iter());
        let mut rank = Expr::int(0);
        for (i, s) in states.iter().enumerate().rev() {
            rank = Expr::ite(state_cube(s), Expr::int(n - i as i64 + 1), rank);
        }
        let skolem = (0..l.sites.len())
            .map(|site| {
                let mut e = Expr::int(0);
                for (i, nd) in choices.iter().enumerate().rev() {
                    e = Expr::ite(state_cube(&states[i]), Expr::int(nd[site]), e);
                }
                e
            })
            .collect();
        DangerCertificate { d, rank, skolem, x0: states[0].clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Base,
    Inductive,
    RankPositive,
    RankDecrease,
    Exit,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Criterion::Base => "base",
            Criterion::Inductive => "inductive",
            Criterion::RankPositive => "rank-positive",
            Criterion::RankDecrease => "rank-decrease",
            Criterion::Exit => "exit",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    State(State),
    Pair(State, State),
}

impl Witness {
    pub fn pre_state(&self) -> &State {
        match self {
            Witness::State(s) => s,
            Witness::Pair(s, _) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub criterion: Criterion,
    pub witness: Witness,
}

/// Outcome of a certificate check. A violation carries the first witness in
/// state enumeration order, which keeps regression output deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    Violation(Violation),
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Ok)
    }
}

/// Which proof flavor `check_safety` validates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SafetyMode {
    /// Inductive, excludes error exits.
    Safety,
    /// Inductive, every exit is an error: the loop head is doomed.
    DoomedHead,
    /// As DoomedHead but anchored at one initial state.
    DoomedState { x0: State },
    /// Each in-loop state needs only some successor inside the predicate;
    /// termination is not guaranteed.
    PartialDanger { x0: State },
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub state_budget: u64,
    pub jobs: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { state_budget: DEFAULT_STATE_BUDGET, jobs: 1 }
    }
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("certificate is not valid for this loop: {reason}")]
    CertificateInvalid { reason: String },
}

const SCAN_CHUNK: u64 = 1 << 13;

/// Run `scan` over subranges of `0..count` and return the violation with the
/// smallest index, i.e. the same answer a sequential scan would produce.
fn scan_first<F>(count: u64, jobs: usize, scan: F) -> Option<Violation>
where
    F: Fn(Range<u64>) -> Option<Violation> + Sync,
{
    if jobs <= 1 || count <= SCAN_CHUNK {
        return scan(0..count);
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool");
    let chunks = count.div_ceil(SCAN_CHUNK);
    pool.install(|| {
        (0..chunks)
            .into_par_iter()
            .find_map_first(|c| {
                let lo = c * SCAN_CHUNK;
                let hi = (lo + SCAN_CHUNK).min(count);
                scan(lo..hi)
            })
    })
}

fn nd_combo_count(l: &LoopSystem) -> u64 {
    l.sites
        .iter()
        .map(|s| match s.kind {
            crate::system::SiteKind::Free => 1u64 << l.width,
            _ => 2,
        })
        .product()
}

/// Validate a danger certificate against every state of the system:
/// base `I(x0) && D(x0)`, then for each state with `D && G` the rank is
/// positive and the skolem-chosen successor stays in D with a strictly
/// smaller rank, and each state with `D && !G` violates the assertion.
pub fn check_danger(
    l: &LoopSystem,
    cert: &DangerCertificate,
    opts: &CheckOptions,
) -> Result<Verdict, CheckError> {
    assert_eq!(cert.skolem.len(), l.sites.len(), "skolem must cover every site");
    let count = checked_state_count(l, opts.state_budget)?;

    if !l.init_holds(&cert.x0) || !eval_bool(&cert.d, &cert.x0.0, &[], l.width) {
        return Ok(Verdict::Violation(Violation {
            criterion: Criterion::Base,
            witness: Witness::State(cert.x0.clone()),
        }));
    }

    let scan = |range: Range<u64>| -> Option<Violation> {
        let mut s = State(vec![]);
        let mut s2 = State(vec![]);
        let mut nd = vec![0i64; l.sites.len()];
        for idx in range {
            l.decode_state(idx, &mut s);
            if !eval_bool(&cert.d, &s.0, &[], l.width) {
                continue;
            }
            if l.guard_holds(&s) {
                let r = eval_rank(&cert.rank, &s.0, l.width);
                if r <= 0 {
                    return Some(Violation {
                        criterion: Criterion::RankPositive,
                        witness: Witness::State(s.clone()),
                    });
                }
                for (i, n) in cert.skolem.iter().enumerate() {
                    nd[i] = crate::expr::eval_int(n, &s.0, &[], l.width);
                }
                step_into(l, &s, &nd, &mut s2);
                if !eval_bool(&cert.d, &s2.0, &[], l.width) {
                    return Some(Violation {
                        criterion: Criterion::Inductive,
                        witness: Witness::Pair(s.clone(), s2.clone()),
                    });
                }
                if eval_rank(&cert.rank, &s2.0, l.width) >= r {
                    return Some(Violation {
                        criterion: Criterion::RankDecrease,
                        witness: Witness::Pair(s.clone(), s2.clone()),
                    });
                }
            } else if l.assertion_holds(&s) {
                return Some(Violation {
                    criterion: Criterion::Exit,
                    witness: Witness::State(s.clone()),
                });
            }
        }
        None
    };

    Ok(match scan_first(count, opts.jobs, scan) {
        Some(v) => Verdict::Violation(v),
        None => Verdict::Ok,
    })
}

/// Validate a safety-shaped predicate in the given mode over the full domain.
pub fn check_safety(
    l: &LoopSystem,
    cert: &SafetyCertificate,
    mode: &SafetyMode,
    opts: &CheckOptions,
) -> Result<Verdict, CheckError> {
    let combos = nd_combo_count(l);
    let count = checked_state_count(l, opts.state_budget / combos.max(1))
        .map_err(|e| BudgetExceeded { required: e.required.saturating_mul(combos), ..e })?;
    let width = l.width;

    // Anchored modes fix the base criterion at the supplied initial state.
    match mode {
        SafetyMode::DoomedState { x0 } | SafetyMode::PartialDanger { x0 } => {
            if !l.init_holds(x0) || !eval_bool(&cert.s, &x0.0, &[], width) {
                return Ok(Verdict::Violation(Violation {
                    criterion: Criterion::Base,
                    witness: Witness::State(x0.clone()),
                }));
            }
        }
        _ => {}
    }

    let universal_base = matches!(mode, SafetyMode::Safety | SafetyMode::DoomedHead);
    let exit_wants_assertion = matches!(mode, SafetyMode::Safety);
    let existential_step = matches!(mode, SafetyMode::PartialDanger { .. });

    let scan = |range: Range<u64>| -> Option<Violation> {
        let mut s = State(vec![]);
        let mut s2 = State(vec![]);
        for idx in range {
            l.decode_state(idx, &mut s);
            let in_s = eval_bool(&cert.s, &s.0, &[], width);
            if universal_base && !in_s && l.init_holds(&s) {
                return Some(Violation {
                    criterion: Criterion::Base,
                    witness: Witness::State(s.clone()),
                });
            }
            if !in_s {
                continue;
            }
            if l.guard_holds(&s) {
                if existential_step {
                    let mut found = false;
                    l.for_each_nd(&s, |nd| {
                        step_into(l, &s, nd, &mut s2);
                        found = eval_bool(&cert.s, &s2.0, &[], width);
                        found
                    });
                    if !found {
                        return Some(Violation {
                            criterion: Criterion::Inductive,
                            witness: Witness::State(s.clone()),
                        });
                    }
                } else {
                    let mut bad: Option<State> = None;
                    l.for_each_nd(&s, |nd| {
                        step_into(l, &s, nd, &mut s2);
                        if !eval_bool(&cert.s, &s2.0, &[], width) {
                            bad = Some(s2.clone());
                            true
                        } else {
                            false
                        }
                    });
                    if let Some(s2) = bad {
                        return Some(Violation {
                            criterion: Criterion::Inductive,
                            witness: Witness::Pair(s.clone(), s2),
                        });
                    }
                }
            } else {
                let a = l.assertion_holds(&s);
                if a != exit_wants_assertion {
                    return Some(Violation {
                        criterion: Criterion::Exit,
                        witness: Witness::State(s.clone()),
                    });
                }
            }
        }
        None
    };

    Ok(match scan_first(count, opts.jobs, scan) {
        Some(v) => Verdict::Violation(v),
        None => Verdict::Ok,
    })
}

/// Read the concrete counterexample off a valid danger certificate by running
/// the loop from `x0` under the skolem functions. The rank at `x0` bounds the
/// run length, so this terminates even without the validity precondition.
pub fn extract_trace(l: &LoopSystem, cert: &DangerCertificate) -> Result<Trace, ExtractError> {
    let r0 = eval_rank(&cert.rank, &cert.x0.0, l.width).max(0) as u64;
    let bound = r0.saturating_add(1).min(1 << 32);
    let trace = run(l, &cert.x0, &cert.skolem, bound);
    if trace.status != TraceStatus::Completed {
        return Err(ExtractError::CertificateInvalid {
            reason: format!("run did not exit the loop within {bound} steps"),
        });
    }
    if !l.init_holds(trace.first()) {
        return Err(ExtractError::CertificateInvalid {
            reason: "initial state does not satisfy I".into(),
        });
    }
    if l.assertion_holds(trace.last()) {
        return Err(ExtractError::CertificateInvalid {
            reason: "final state satisfies the assertion".into(),
        });
    }
    Ok(trace)
}
