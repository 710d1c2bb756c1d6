//! Seeded stochastic candidate search: random sampling plus single-node
//! mutation hill climbing on the number of satisfied counterexample inputs.
//! Optional alternative to the enumerative strategy; it gives up minimality
//! and completeness in exchange for occasionally jumping deep into the
//! grammar.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certificate::{DangerCertificate, SafetyCertificate};
use crate::expr::{eval_bool, eval_int, eval_rank, Expr, Sort};
use crate::mutate::mutate_expr;
use crate::system::{step_into, LoopSystem, State};

use super::engine::{finish, Candidate, CegisEngine, VerifOutcome};
use super::{CegisBudget, Grammar, Mode, SolveResult, UnknownReason};

const MAX_TRIES: u64 = 2_000_000;
const MUTATION_BIAS: f64 = 0.6;

fn sample_expr<R: Rng>(g: &Grammar, rng: &mut R, sort: Sort, fuel: usize) -> Expr {
    use crate::expr::BinOp::*;
    let leaf = fuel <= 1 || rng.gen_bool(0.35);
    match sort {
        Sort::Int => {
            if leaf {
                if rng.gen_bool(0.5) && g.n_vars > 0 {
                    Expr::var(rng.gen_range(0..g.n_vars))
                } else {
                    Expr::int(g.consts[rng.gen_range(0..g.consts.len())])
                }
            } else {
                let op = [Add, Sub, Mul][rng.gen_range(0..3)];
                let half = (fuel - 1) / 2;
                Expr::bin(
                    op,
                    sample_expr(g, rng, Sort::Int, half.max(1)),
                    sample_expr(g, rng, Sort::Int, half.max(1)),
                )
            }
        }
        Sort::Bool => {
            if leaf {
                Expr::bool(rng.gen_bool(0.5))
            } else if rng.gen_bool(0.8) {
                let op = [Eq, Ne, Lt, Le, Gt, Ge][rng.gen_range(0..6)];
                let half = (fuel - 1) / 2;
                Expr::bin(
                    op,
                    sample_expr(g, rng, Sort::Int, half.max(1)),
                    sample_expr(g, rng, Sort::Int, half.max(1)),
                )
            } else {
                let op = [And, Or][rng.gen_range(0..2)];
                let half = (fuel - 1) / 2;
                Expr::bin(
                    op,
                    sample_expr(g, rng, Sort::Bool, half.max(1)),
                    sample_expr(g, rng, Sort::Bool, half.max(1)),
                )
            }
        }
    }
}

/// How many recorded inputs the candidate satisfies (plus the base clause).
fn score(l: &LoopSystem, cand: &Candidate, inputs: &[State]) -> usize {
    let width = l.width;
    let mut score = 0;
    match cand {
        Candidate::Safety(c) => {
            for x in inputs {
                let in_s = eval_bool(&c.s, &x.0, &[], width);
                let ok = if l.init_holds(x) && !in_s {
                    false
                } else if !in_s {
                    true
                } else if l.guard_holds(x) {
                    let mut all = true;
                    let mut s2 = State(vec![]);
                    l.for_each_nd(x, |nd| {
                        step_into(l, x, nd, &mut s2);
                        if !eval_bool(&c.s, &s2.0, &[], width) {
                            all = false;
                            true
                        } else {
                            false
                        }
                    });
                    all
                } else {
                    l.assertion_holds(x)
                };
                if ok {
                    score += 1;
                }
            }
        }
        Candidate::Danger(c) => {
            let mut nd = vec![0i64; l.sites.len()];
            let mut s2 = State(vec![]);
            for x in inputs {
                let in_d = eval_bool(&c.d, &x.0, &[], width);
                let ok = if !in_d {
                    true
                } else if l.guard_holds(x) {
                    let r = eval_rank(&c.rank, &x.0, width);
                    for (j, n) in c.skolem.iter().enumerate() {
                        nd[j] = eval_int(n, &x.0, &[], width);
                    }
                    step_into(l, x, &nd, &mut s2);
                    r > 0
                        && eval_bool(&c.d, &s2.0, &[], width)
                        && eval_rank(&c.rank, &s2.0, width) < r
                } else {
                    !l.assertion_holds(x)
                };
                if ok {
                    score += 1;
                }
            }
        }
    }
    score
}

fn sample_candidate<R: Rng>(
    l: &LoopSystem,
    g: &Grammar,
    rng: &mut R,
    danger: bool,
) -> Option<Candidate> {
    let fuel = g.max_expr_size.max(1);
    if danger {
        let d = sample_expr(g, rng, Sort::Bool, fuel);
        let rank = sample_expr(g, rng, Sort::Int, fuel);
        let skolem = (0..l.sites.len())
            .map(|_| sample_expr(g, rng, Sort::Int, fuel))
            .collect();
        // anchor at the first initial state satisfying D
        let count = l.state_count()?;
        let mut s = State(vec![]);
        for idx in 0..count {
            l.decode_state(idx, &mut s);
            if l.init_holds(&s) && eval_bool(&d, &s.0, &[], l.width) {
                return Some(Candidate::Danger(DangerCertificate {
                    d,
                    rank,
                    skolem,
                    x0: s,
                }));
            }
        }
        None
    } else {
        Some(Candidate::Safety(SafetyCertificate {
            s: sample_expr(g, rng, Sort::Bool, fuel),
        }))
    }
}

fn mutate_candidate<R: Rng>(g: &Grammar, cand: &Candidate, rng: &mut R) -> Candidate {
    match cand {
        Candidate::Safety(c) => Candidate::Safety(SafetyCertificate {
            s: mutate_expr(&c.s, &g.consts, g.n_vars, rng),
        }),
        Candidate::Danger(c) => {
            Candidate::Danger(crate::mutate::mutate_danger(c, &g.consts, g.n_vars, rng))
        }
    }
}

pub fn stochastic_search(
    l: &LoopSystem,
    g: &Grammar,
    mode: Mode,
    budget: &CegisBudget,
) -> SolveResult {
    let deadline = budget.timeout.map(|t| std::time::Instant::now() + t);
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    // engines only bookkeep inputs and run verification here
    let mut danger_engine = CegisEngine::danger(l, g);
    let mut safety_engine = CegisEngine::safety(l, g);
    let mut best: Option<(usize, Candidate)> = None;

    for tries in 0..MAX_TRIES {
        if let Some(d) = deadline {
            if std::time::Instant::now() >= d {
                return SolveResult::Unknown { reason: UnknownReason::Timeout };
            }
        }
        let want_danger = match mode {
            Mode::Danger => true,
            Mode::Safety => false,
            Mode::Gs => tries % 2 == 0,
        };
        let engine = if want_danger { &mut danger_engine } else { &mut safety_engine };
        let inputs = engine.state().inputs;
        let cand = match &best {
            Some((_, b))
                if matches!(b, Candidate::Danger(_)) == want_danger
                    && rng.gen_bool(MUTATION_BIAS) =>
            {
                mutate_candidate(g, b, &mut rng)
            }
            _ => match sample_candidate(l, g, &mut rng, want_danger) {
                Some(c) => c,
                None => continue,
            },
        };
        let sc = score(l, &cand, &inputs);
        if sc == inputs.len() {
            match engine.verif_step(&cand, budget) {
                Err(_) => return SolveResult::Unknown { reason: UnknownReason::Budget },
                Ok(VerifOutcome::Ok) => return finish(l, cand),
                Ok(VerifOutcome::CounterexampleInput(x)) => {
                    engine.add_input(x);
                    best = None;
                }
            }
        } else {
            let keep = match &best {
                Some((bs, b)) => {
                    matches!(b, Candidate::Danger(_)) != want_danger || sc >= *bs
                }
                None => true,
            };
            if keep {
                best = Some((sc, cand));
            }
        }
    }
    SolveResult::Unknown { reason: UnknownReason::Budget }
}
