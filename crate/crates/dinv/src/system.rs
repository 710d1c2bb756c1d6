//! Canonical loop systems `L(I, G, T, A)`, concrete states, traces, and the
//! transition semantics over them.

use std::fmt;

use thiserror::Error;

use crate::expr::{self, eval_bool, eval_int, Expr, SiteId};

/// Default cap on exhaustively enumerated state spaces (number of states).
pub const DEFAULT_STATE_BUDGET: u64 = 1 << 24;

/// How a nondeterminism site resolves into the transition relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SiteKind {
    /// `v = *`: the site value is the assigned value, full width-w range.
    Free,
    /// `if (*) ...` guarding anything but a single assignment: the branch is
    /// taken iff the site value is nonzero. Two-valued domain {0, 1}.
    Branch,
    /// `if (*) v = e` with deterministic `e`: the branch is taken iff the
    /// site value equals `e` in the current state, so a skolem function for
    /// this site reads as "the proposed next value of `v`".
    Choice { take: Expr },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NondetSite {
    pub id: SiteId,
    pub kind: SiteKind,
}

/// A loop `assume(I); while (G) T; assert(A);` over fixed-width variables.
#[derive(Debug, Clone)]
pub struct LoopSystem {
    /// Variable names; indices are the `VarId`s used in expressions.
    pub vars: Vec<String>,
    /// Bits per variable.
    pub width: u32,
    /// Number of leading vars that come from source declarations (the rest
    /// are synthetic latches such as `brk` / `err`).
    pub n_source_vars: usize,
    pub init: Expr,
    pub guard: Expr,
    /// Simultaneous update vector, one expression per variable.
    pub updates: Vec<Expr>,
    pub assertion: Expr,
    /// Nondeterminism sites, numbered 1..=k in order of appearance.
    pub sites: Vec<NondetSite>,
}

impl LoopSystem {
    /// Total number of states, `2^(vars * width)`, or `None` on overflow.
    pub fn state_count(&self) -> Option<u64> {
        let bits = (self.vars.len() as u32).checked_mul(self.width)?;
        if bits >= 63 {
            None
        } else {
            Some(1u64 << bits)
        }
    }

    /// Decode the `idx`-th state in enumeration order into `out`.
    ///
    /// Order is lexicographic over the variable vector with the first
    /// declared variable most significant, each coordinate running through
    /// its unsigned bit patterns in ascending order.
    pub fn decode_state(&self, idx: u64, out: &mut State) {
        let n = self.vars.len();
        out.0.resize(n, 0);
        let mask = if self.width == 64 { u64::MAX } else { (1u64 << self.width) - 1 };
        for i in 0..n {
            let shift = self.width as u64 * (n - 1 - i) as u64;
            let raw = (idx >> shift) & mask;
            out.0[i] = expr::wrap(raw as i128, self.width);
        }
    }

    /// Inverse of `decode_state`.
    pub fn encode_state(&self, s: &State) -> u64 {
        let n = self.vars.len();
        debug_assert_eq!(s.0.len(), n);
        let mask = (1u64 << self.width) - 1;
        let mut idx = 0u64;
        for i in 0..n {
            idx = (idx << self.width) | ((s.0[i] as u64) & mask);
        }
        idx
    }

    pub fn init_holds(&self, s: &State) -> bool {
        eval_bool(&self.init, &s.0, &[], self.width)
    }

    pub fn guard_holds(&self, s: &State) -> bool {
        eval_bool(&self.guard, &s.0, &[], self.width)
    }

    pub fn assertion_holds(&self, s: &State) -> bool {
        eval_bool(&self.assertion, &s.0, &[], self.width)
    }

    /// The nondet values a site can take in state `s`, in enumeration order.
    /// For `Choice` sites the two values select the take / keep branches.
    pub fn site_values(&self, site: &NondetSite, s: &State) -> Vec<i64> {
        match &site.kind {
            SiteKind::Free => {
                let count = 1u64 << self.width;
                (0..count)
                    .map(|raw| expr::wrap(raw as i128, self.width))
                    .collect()
            }
            SiteKind::Branch => vec![0, 1],
            SiteKind::Choice { take } => {
                let t = eval_int(take, &s.0, &[], self.width);
                vec![t, expr::wrap(t as i128 + 1, self.width)]
            }
        }
    }

    /// Visit every nondet assignment available in `s`, in deterministic
    /// order. The callback returns `true` to stop early.
    pub fn for_each_nd<F: FnMut(&[i64]) -> bool>(&self, s: &State, mut f: F) -> bool {
        let domains: Vec<Vec<i64>> = self.sites.iter().map(|st| self.site_values(st, s)).collect();
        let mut nd: Vec<i64> = domains.iter().map(|d| d[0]).collect();
        if domains.is_empty() {
            return f(&nd);
        }
        let mut cursor = vec![0usize; domains.len()];
        loop {
            if f(&nd) {
                return true;
            }
            let mut i = domains.len();
            loop {
                if i == 0 {
                    return false;
                }
                i -= 1;
                cursor[i] += 1;
                if cursor[i] < domains[i].len() {
                    nd[i] = domains[i][cursor[i]];
                    break;
                }
                cursor[i] = 0;
                nd[i] = domains[i][0];
            }
        }
    }

    pub fn display_expr<'a>(&'a self, e: &'a Expr) -> expr::DisplayExpr<'a> {
        expr::DisplayExpr { expr: e, names: Some(&self.vars) }
    }

    pub fn display_state<'a>(&'a self, s: &'a State) -> DisplayState<'a> {
        DisplayState { system: self, state: s }
    }
}

/// Total assignment of width-w two's-complement values to the system's
/// variables, aligned with `LoopSystem::vars`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State(pub Vec<i64>);

impl State {
    pub fn new(values: Vec<i64>) -> State {
        State(values)
    }
}

pub struct DisplayState<'a> {
    system: &'a LoopSystem,
    state: &'a State,
}

impl fmt::Display for DisplayState<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (name, v)) in self.system.vars.iter().zip(&self.state.0).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name} = {v}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStatus {
    Completed,
    TruncatedAtBound,
}

/// Finite or truncated run of the loop: consecutive states are related by the
/// update vector under some nondet assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub states: Vec<State>,
    pub status: TraceStatus,
}

impl Trace {
    pub fn first(&self) -> &State {
        &self.states[0]
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trace is nonempty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StepError {
    #[error("guard is false in the given state")]
    GuardFalse,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("state space of {required} states exceeds the enumeration budget of {budget}")]
pub struct BudgetExceeded {
    pub required: u64,
    pub budget: u64,
}

/// One simultaneous step of the update vector. `G(s)` must hold.
pub fn step(l: &LoopSystem, s: &State, nd: &[i64]) -> Result<State, StepError> {
    if !l.guard_holds(s) {
        return Err(StepError::GuardFalse);
    }
    let mut out = State(vec![0; l.vars.len()]);
    step_into(l, s, nd, &mut out);
    Ok(out)
}

/// `step` without the guard check or allocation, for checker inner loops.
pub fn step_into(l: &LoopSystem, s: &State, nd: &[i64], out: &mut State) {
    out.0.resize(l.vars.len(), 0);
    for (i, u) in l.updates.iter().enumerate() {
        out.0[i] = eval_int(u, &s.0, nd, l.width);
    }
}

/// Run the loop from `x0`, resolving each nondet site with its skolem
/// expression (indexed `site - 1`), until the guard fails or `max_steps`
/// iterations have been taken.
pub fn run(l: &LoopSystem, x0: &State, skolem: &[Expr], max_steps: u64) -> Trace {
    debug_assert_eq!(skolem.len(), l.sites.len());
    let mut states = vec![x0.clone()];
    let mut cur = x0.clone();
    let mut nd = vec![0i64; l.sites.len()];
    let mut steps = 0u64;
    loop {
        if !l.guard_holds(&cur) {
            return Trace { states, status: TraceStatus::Completed };
        }
        if steps == max_steps {
            return Trace { states, status: TraceStatus::TruncatedAtBound };
        }
        for (i, n) in skolem.iter().enumerate() {
            nd[i] = eval_int(n, &cur.0, &[], l.width);
        }
        let mut next = State(vec![0; l.vars.len()]);
        step_into(l, &cur, &nd, &mut next);
        states.push(next.clone());
        cur = next;
        steps += 1;
    }
}

/// Replay a run from recorded per-step nondet values; used to validate
/// counterexamples found by search.
pub fn replay(l: &LoopSystem, x0: &State, choices: &[Vec<i64>]) -> Result<Trace, StepError> {
    let mut states = vec![x0.clone()];
    let mut cur = x0.clone();
    for nd in choices {
        let next = step(l, &cur, nd)?;
        states.push(next.clone());
        cur = next;
    }
    Ok(Trace { states, status: TraceStatus::Completed })
}

/// Stream every state exactly once in the documented enumeration order.
pub fn enumerate_states(
    l: &LoopSystem,
    budget: u64,
) -> Result<impl Iterator<Item = State> + '_, BudgetExceeded> {
    let count = checked_state_count(l, budget)?;
    let mut buf = State(vec![0; l.vars.len()]);
    Ok((0..count).map(move |idx| {
        l.decode_state(idx, &mut buf);
        buf.clone()
    }))
}

/// State count if it fits the budget, otherwise `BudgetExceeded`.
pub fn checked_state_count(l: &LoopSystem, budget: u64) -> Result<u64, BudgetExceeded> {
    match l.state_count() {
        Some(c) if c <= budget => Ok(c),
        Some(c) => Err(BudgetExceeded { required: c, budget }),
        None => Err(BudgetExceeded { required: u64::MAX, budget }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    fn counter_system(width: u32, nvars: usize) -> LoopSystem {
        LoopSystem {
            vars: (0..nvars).map(|i| format!("v{i}")).collect(),
            width,
            n_source_vars: nvars,
            init: Expr::bool(true),
            guard: Expr::bool(false),
            updates: (0..nvars).map(Expr::var).collect(),
            assertion: Expr::bool(true),
            sites: vec![],
        }
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(
            enumerate_states(&counter_system(2, 1), DEFAULT_STATE_BUDGET)
                .unwrap()
                .count(),
            4
        );
        assert_eq!(
            enumerate_states(&counter_system(3, 2), DEFAULT_STATE_BUDGET)
                .unwrap()
                .count(),
            64
        );
    }

    #[test]
    fn enumeration_budget_exceeded() {
        match enumerate_states(&counter_system(9, 3), DEFAULT_STATE_BUDGET) {
            Err(err) => assert_eq!(err.required, 1 << 27),
            Ok(_) => panic!("2^27 states must exceed the default budget"),
        }
    }

    #[test]
    fn enumeration_order_is_unsigned_ascending_lex() {
        let l = counter_system(2, 2);
        let states: Vec<Vec<i64>> = enumerate_states(&l, 1 << 10)
            .unwrap()
            .map(|s| s.0)
            .collect();
        assert_eq!(states[0], vec![0, 0]);
        assert_eq!(states[1], vec![0, 1]);
        assert_eq!(states[2], vec![0, -2]);
        assert_eq!(states[3], vec![0, -1]);
        assert_eq!(states[4], vec![1, 0]);
        assert_eq!(states.len(), 16);
    }

    #[test]
    fn encode_decode_roundtrip() {
        let l = counter_system(4, 2);
        let mut s = State(vec![]);
        for idx in 0..l.state_count().unwrap() {
            l.decode_state(idx, &mut s);
            assert_eq!(l.encode_state(&s), idx);
        }
    }

    #[test]
    fn empty_variable_vector_has_one_state() {
        let l = counter_system(8, 0);
        assert_eq!(l.state_count(), Some(1));
        assert_eq!(enumerate_states(&l, 16).unwrap().count(), 1);
    }
}
