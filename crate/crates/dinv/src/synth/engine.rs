//! The synth / verif alternation over one proof kind.
//!
//! The synthesizer streams candidate tuples in total-size order and returns
//! the first one satisfying every recorded counterexample input; the
//! verifier checks a candidate over the whole domain and feeds the first
//! violating state back. Because inputs only grow, enumeration never has to
//! back up: everything before the cursor failed some earlier (hence current)
//! input set, so the cursor position is saved across rounds.
//!
//! Danger tuples are ordered (D, N_1..N_k, R) component-wise, which lets the
//! scan prune whole subtrees: a D that breaks an exit input or admits no
//! initial state skips all skolem and ranking choices, and a skolem tuple
//! whose successors leave D skips all rankings.

use crate::certificate::{
    check_danger, check_safety, extract_trace, CheckOptions, DangerCertificate, SafetyCertificate,
    SafetyMode, Verdict,
};
use crate::expr::{eval_bool, eval_int, eval_rank, Expr, Sort};
use crate::system::{step_into, LoopSystem, State};

use super::grammar::{compositions, Banks, Grammar};
use super::{CegisBudget, SolveResult, UnknownReason};

const ROUND_WORK: u64 = 200_000;
const ISTATE_CACHE_CAP: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ProofKind {
    Danger,
    Safety,
}

#[derive(Debug, Clone)]
pub enum Candidate {
    Danger(DangerCertificate),
    Safety(SafetyCertificate),
}

#[derive(Debug)]
pub enum SynthOutcome {
    Candidate(Box<Candidate>),
    GrammarExhausted,
    /// Scan budget for this turn used up; resume later.
    ChunkLimit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifOutcome {
    Ok,
    CounterexampleInput(State),
}

#[derive(Debug)]
pub(super) enum RoundEnd {
    GrammarExhausted,
    Budget,
}

/// Snapshot of the refinement loop: the accumulated counterexample inputs,
/// iteration count and scan statistics.
#[derive(Debug, Clone)]
pub struct CegisState {
    pub inputs: Vec<State>,
    pub iterations: u64,
    pub candidates_scanned: u64,
}

struct InputInfo {
    state: State,
    init: bool,
    guard: bool,
    assertion: bool,
    /// All one-step successors (safety side only; the danger side's
    /// successors depend on the candidate skolem).
    succs: Vec<State>,
}

struct DCache {
    at: usize,
    version: u64,
    feasible: bool,
    x0: Option<State>,
    /// Indices of inputs with D && G, whose clauses constrain N and R.
    actives: Vec<usize>,
}

struct NCache {
    at: Vec<usize>,
    version: u64,
    ok: bool,
    /// Skolem-chosen successor per active input.
    succs: Vec<State>,
}

struct IStateCache {
    idxs: Vec<u64>,
    scanned_to: u64,
    complete: bool,
}

pub struct CegisEngine<'a> {
    l: &'a LoopSystem,
    kind: ProofKind,
    max_expr_size: usize,
    banks: Banks,
    inputs: Vec<InputInfo>,
    version: u64,
    iterations: u64,
    scanned: u64,
    total: usize,
    split_idx: usize,
    idx: Vec<usize>,
    /// Splits of the current total, and the sizes of the current split.
    splits: Vec<Vec<usize>>,
    sizes: Vec<usize>,
    d_cache: Option<DCache>,
    n_cache: Option<NCache>,
    istates: IStateCache,
}

impl<'a> CegisEngine<'a> {
    pub fn danger(l: &'a LoopSystem, g: &'a Grammar) -> CegisEngine<'a> {
        Self::new(l, g, ProofKind::Danger)
    }

    pub fn safety(l: &'a LoopSystem, g: &'a Grammar) -> CegisEngine<'a> {
        Self::new(l, g, ProofKind::Safety)
    }

    fn new(l: &'a LoopSystem, g: &'a Grammar, kind: ProofKind) -> CegisEngine<'a> {
        let m = match kind {
            ProofKind::Danger => 2 + l.sites.len(),
            ProofKind::Safety => 1,
        };
        let total = m;
        let splits = compositions(total, m, g.max_expr_size);
        let sizes = splits.first().cloned().unwrap_or_default();
        CegisEngine {
            l,
            kind,
            max_expr_size: g.max_expr_size,
            banks: Banks::new(g),
            inputs: Vec::new(),
            version: 0,
            iterations: 0,
            scanned: 0,
            total,
            split_idx: 0,
            idx: vec![0; m],
            splits,
            sizes,
            d_cache: None,
            n_cache: None,
            istates: IStateCache { idxs: Vec::new(), scanned_to: 0, complete: false },
        }
    }

    pub fn state(&self) -> CegisState {
        CegisState {
            inputs: self.inputs.iter().map(|i| i.state.clone()).collect(),
            iterations: self.iterations,
            candidates_scanned: self.scanned,
        }
    }

    fn components(&self) -> usize {
        self.idx.len()
    }

    fn sites(&self) -> usize {
        self.l.sites.len()
    }

    fn sort_of(&self, level: usize) -> Sort {
        if level == 0 {
            Sort::Bool
        } else {
            Sort::Int
        }
    }

    /// Record a verifier counterexample. Repeats would stall the refinement
    /// loop, so they are rejected as an internal invariant breach.
    pub fn add_input(&mut self, x: State) {
        assert!(
            self.inputs.iter().all(|i| i.state != x),
            "verifier returned a counterexample input that is already recorded"
        );
        let init = self.l.init_holds(&x);
        let guard = self.l.guard_holds(&x);
        let assertion = self.l.assertion_holds(&x);
        let succs = if self.kind == ProofKind::Safety && guard {
            let mut out = Vec::new();
            let mut s2 = State(vec![]);
            self.l.for_each_nd(&x, |nd| {
                step_into(self.l, &x, nd, &mut s2);
                if !out.contains(&s2) {
                    out.push(s2.clone());
                }
                false
            });
            out
        } else {
            Vec::new()
        };
        self.inputs.push(InputInfo { state: x, init, guard, assertion, succs });
        self.version += 1;
    }

    /// First state in enumeration order satisfying `I && D`, if any.
    fn find_x0(&mut self, d: &Expr) -> Option<State> {
        let l = self.l;
        let width = l.width;
        let mut s = State(vec![]);
        for &idx in &self.istates.idxs {
            l.decode_state(idx, &mut s);
            if eval_bool(d, &s.0, &[], width) {
                return Some(s);
            }
        }
        if self.istates.complete {
            return None;
        }
        let count = l.state_count().expect("enumeration budget enforces countable spaces");
        let mut idx = self.istates.scanned_to;
        while idx < count {
            l.decode_state(idx, &mut s);
            let is_init = l.init_holds(&s);
            let caching = self.istates.idxs.len() < ISTATE_CACHE_CAP;
            if is_init && caching {
                self.istates.idxs.push(idx);
            }
            if caching {
                self.istates.scanned_to = idx + 1;
            }
            if is_init && eval_bool(d, &s.0, &[], width) {
                return Some(s);
            }
            idx += 1;
        }
        if self.istates.scanned_to >= count {
            self.istates.complete = true;
        }
        None
    }

    /// Does the level-0 expression survive the input clauses that mention
    /// only it? For danger: no exit input may combine D with a holding
    /// assertion, and some initial state must satisfy D. For safety this is
    /// the entire input check.
    fn check_level0(&mut self) -> bool {
        let d = self.banks.at(Sort::Bool, self.sizes[0], self.idx[0]).clone();
        let d_pos = self.idx[0];
        let width = self.l.width;
        match self.kind {
            ProofKind::Danger => {
                let mut actives = Vec::new();
                let mut feasible = true;
                for (i, inp) in self.inputs.iter().enumerate() {
                    if !eval_bool(&d, &inp.state.0, &[], width) {
                        continue;
                    }
                    if inp.guard {
                        actives.push(i);
                    } else if inp.assertion {
                        feasible = false;
                        break;
                    }
                }
                let x0 = if feasible { self.find_x0(&d) } else { None };
                feasible = feasible && x0.is_some();
                self.d_cache =
                    Some(DCache { at: d_pos, version: self.version, feasible, x0, actives });
                feasible
            }
            ProofKind::Safety => {
                let mut ok = true;
                'inputs: for inp in &self.inputs {
                    let in_s = eval_bool(&d, &inp.state.0, &[], width);
                    if inp.init && !in_s {
                        ok = false;
                        break;
                    }
                    if !in_s {
                        continue;
                    }
                    if inp.guard {
                        for succ in &inp.succs {
                            if !eval_bool(&d, &succ.0, &[], width) {
                                ok = false;
                                break 'inputs;
                            }
                        }
                    } else if !inp.assertion {
                        ok = false;
                        break;
                    }
                }
                self.d_cache = Some(DCache {
                    at: d_pos,
                    version: self.version,
                    feasible: ok,
                    x0: None,
                    actives: Vec::new(),
                });
                ok
            }
        }
    }

    /// Do the skolem-chosen successors of every active input stay inside D?
    fn check_skolem(&mut self) -> bool {
        let k = self.sites();
        let width = self.l.width;
        let (d, actives) = {
            let c = self.d_cache.as_ref().expect("level 0 checked");
            (self.banks.at(Sort::Bool, self.sizes[0], c.at).clone(), c.actives.clone())
        };
        let skolem: Vec<Expr> = (0..k)
            .map(|i| self.banks.at(Sort::Int, self.sizes[1 + i], self.idx[1 + i]).clone())
            .collect();
        let mut ok = true;
        let mut succs = Vec::with_capacity(actives.len());
        let mut nd = vec![0i64; k];
        let mut s2 = State(vec![]);
        for &i in &actives {
            let s = &self.inputs[i].state;
            for (j, n) in skolem.iter().enumerate() {
                nd[j] = eval_int(n, &s.0, &[], width);
            }
            step_into(self.l, s, &nd, &mut s2);
            if !eval_bool(&d, &s2.0, &[], width) {
                ok = false;
                break;
            }
            succs.push(s2.clone());
        }
        self.n_cache =
            Some(NCache { at: self.idx[1..=k].to_vec(), version: self.version, ok, succs });
        ok
    }

    fn check_rank(&self) -> bool {
        let m = self.components();
        let r = self.banks.at(Sort::Int, self.sizes[m - 1], self.idx[m - 1]);
        let width = self.l.width;
        let actives = &self.d_cache.as_ref().expect("level 0 checked").actives;
        let succs = &self.n_cache.as_ref().expect("skolem checked").succs;
        for (pos, &i) in actives.iter().enumerate() {
            let rv = eval_rank(r, &self.inputs[i].state.0, width);
            if rv <= 0 {
                return false;
            }
            if eval_rank(r, &succs[pos].0, width) >= rv {
                return false;
            }
        }
        true
    }

    fn advance(&mut self, level: usize) {
        self.idx[level] += 1;
        for j in level + 1..self.components() {
            self.idx[j] = 0;
        }
        if level == 0 {
            self.d_cache = None;
            self.n_cache = None;
        } else if level <= self.sites() {
            self.n_cache = None;
        }
    }

    fn next_split(&mut self) {
        self.split_idx += 1;
        if self.split_idx < self.splits.len() {
            self.sizes = self.splits[self.split_idx].clone();
        }
        self.idx = vec![0; self.components()];
        self.d_cache = None;
        self.n_cache = None;
    }

    fn next_total(&mut self) {
        self.total += 1;
        self.split_idx = 0;
        self.splits = compositions(self.total, self.components(), self.max_expr_size);
        self.sizes = self.splits.first().cloned().unwrap_or_default();
        self.idx = vec![0; self.components()];
        self.d_cache = None;
        self.n_cache = None;
    }

    /// Resume the size-ordered scan until a candidate satisfies all recorded
    /// inputs, the grammar is exhausted, or `chunk` scan steps have run.
    pub fn synth_step_bounded(&mut self, chunk: u64) -> SynthOutcome {
        let m = self.components();
        let max_total = self.max_expr_size.saturating_mul(m);
        let mut work = 0u64;
        loop {
            if work >= chunk {
                return SynthOutcome::ChunkLimit;
            }
            work += 1;
            self.scanned += 1;
            if self.total > max_total || self.max_expr_size == 0 {
                return SynthOutcome::GrammarExhausted;
            }
            if self.split_idx >= self.splits.len() {
                self.next_total();
                continue;
            }
            // A split with an empty component bank yields nothing.
            if (0..m).any(|lv| {
                let size = self.splits[self.split_idx][lv];
                self.banks.bank_len(self.sort_of(lv), size) == 0
            }) {
                self.next_split();
                continue;
            }
            // Normalize overflowing cursor positions, shallowest first.
            let mut overflowed = false;
            for lv in 0..m {
                if self.idx[lv] >= self.banks.bank_len(self.sort_of(lv), self.sizes[lv]) {
                    if lv == 0 {
                        self.next_split();
                    } else {
                        self.advance(lv - 1);
                    }
                    overflowed = true;
                    break;
                }
            }
            if overflowed {
                continue;
            }

            let d_ok = match &self.d_cache {
                Some(c) if c.at == self.idx[0] && c.version == self.version => c.feasible,
                _ => self.check_level0(),
            };
            if !d_ok {
                self.advance(0);
                continue;
            }
            if self.kind == ProofKind::Safety {
                let s = self.banks.at(Sort::Bool, self.sizes[0], self.idx[0]).clone();
                self.advance(0);
                return SynthOutcome::Candidate(Box::new(Candidate::Safety(SafetyCertificate {
                    s,
                })));
            }
            let k = self.sites();
            let n_ok = if k == 0 {
                let stale = match &self.n_cache {
                    Some(c) => c.version != self.version,
                    None => true,
                };
                if stale {
                    let actives = self.d_cache.as_ref().unwrap().actives.clone();
                    let succs = actives
                        .iter()
                        .map(|&i| {
                            let mut s2 = State(vec![]);
                            step_into(self.l, &self.inputs[i].state, &[], &mut s2);
                            s2
                        })
                        .collect();
                    self.n_cache =
                        Some(NCache { at: vec![], version: self.version, ok: true, succs });
                }
                true
            } else {
                match &self.n_cache {
                    Some(c) if c.at[..] == self.idx[1..=k] && c.version == self.version => c.ok,
                    _ => self.check_skolem(),
                }
            };
            if !n_ok {
                self.advance(k);
                continue;
            }
            if !self.check_rank() {
                self.advance(m - 1);
                continue;
            }

            let d_cache = self.d_cache.as_ref().unwrap();
            let cert = DangerCertificate {
                d: self.banks.at(Sort::Bool, self.sizes[0], d_cache.at).clone(),
                rank: self.banks.at(Sort::Int, self.sizes[m - 1], self.idx[m - 1]).clone(),
                skolem: (0..k)
                    .map(|i| self.banks.at(Sort::Int, self.sizes[1 + i], self.idx[1 + i]).clone())
                    .collect(),
                x0: d_cache.x0.clone().expect("feasible D has an initial state"),
            };
            self.advance(m - 1);
            return SynthOutcome::Candidate(Box::new(Candidate::Danger(cert)));
        }
    }

    /// The unbounded synthesis step: smallest candidate consistent with all
    /// recorded inputs, or grammar exhaustion.
    pub fn synth_step(&mut self) -> SynthOutcome {
        loop {
            match self.synth_step_bounded(u64::MAX) {
                SynthOutcome::ChunkLimit => continue,
                other => return other,
            }
        }
    }

    /// Full-domain check of a candidate; a failure yields the first
    /// violating state in enumeration order as a new counterexample input.
    pub fn verif_step(
        &self,
        cand: &Candidate,
        budget: &CegisBudget,
    ) -> Result<VerifOutcome, crate::certificate::CheckError> {
        let opts = CheckOptions { state_budget: budget.state_budget, jobs: budget.jobs };
        let verdict = match cand {
            Candidate::Danger(cert) => check_danger(self.l, cert, &opts)?,
            Candidate::Safety(cert) => check_safety(self.l, cert, &SafetyMode::Safety, &opts)?,
        };
        Ok(match verdict {
            Verdict::Ok => VerifOutcome::Ok,
            Verdict::Violation(v) => {
                VerifOutcome::CounterexampleInput(v.witness.pre_state().clone())
            }
        })
    }

    /// One synth / verif alternation, scan-bounded. `Ok(Some(..))` is a
    /// validated proof, `Ok(None)` means keep going.
    pub(super) fn round(
        &mut self,
        budget: &CegisBudget,
    ) -> Result<Option<SolveResult>, RoundEnd> {
        match self.synth_step_bounded(ROUND_WORK) {
            SynthOutcome::ChunkLimit => Ok(None),
            SynthOutcome::GrammarExhausted => Err(RoundEnd::GrammarExhausted),
            SynthOutcome::Candidate(cand) => {
                self.iterations += 1;
                match self.verif_step(&cand, budget) {
                    Err(_) => Err(RoundEnd::Budget),
                    Ok(VerifOutcome::Ok) => Ok(Some(finish(self.l, *cand))),
                    Ok(VerifOutcome::CounterexampleInput(x)) => {
                        self.add_input(x);
                        Ok(None)
                    }
                }
            }
        }
    }
}

/// Package a verified candidate; the danger side also reads off the trace.
pub(super) fn finish(l: &LoopSystem, cand: Candidate) -> SolveResult {
    match cand {
        Candidate::Safety(cert) => SolveResult::SafetyProved { cert },
        Candidate::Danger(cert) => {
            let trace = extract_trace(l, &cert).expect("verified certificate yields a trace");
            SolveResult::DangerProved { cert, trace }
        }
    }
}

impl From<RoundEnd> for UnknownReason {
    fn from(e: RoundEnd) -> UnknownReason {
        match e {
            RoundEnd::GrammarExhausted => UnknownReason::GrammarExhausted,
            RoundEnd::Budget => UnknownReason::Budget,
        }
    }
}
