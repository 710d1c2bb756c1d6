//! Certificate synthesis: a CEGIS loop over enumerated expression grammars,
//! an optional stochastic strategy, and an exact table-based decision
//! procedure for tiny state spaces.

mod engine;
mod grammar;
mod stochastic;
mod table;

pub use engine::{CegisEngine, CegisState, SynthOutcome, VerifOutcome};
pub use grammar::{Grammar, DEFAULT_MAX_EXPR_SIZE};
pub use stochastic::stochastic_search;
pub use table::{doomed_head_table, doomed_state_table, table_search, TABLE_STATE_LIMIT};

use std::time::{Duration, Instant};

use crate::certificate::{DangerCertificate, SafetyCertificate};
use crate::system::{LoopSystem, Trace, DEFAULT_STATE_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownReason {
    Budget,
    GrammarExhausted,
    Timeout,
}

impl std::fmt::Display for UnknownReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            UnknownReason::Budget => "budget",
            UnknownReason::GrammarExhausted => "grammar-exhausted",
            UnknownReason::Timeout => "timeout",
        };
        write!(f, "{s}")
    }
}

/// Result of a solve attempt. Proved results have already been re-validated
/// by the certificate checker; a danger proof carries its extracted trace.
#[derive(Debug, Clone)]
pub enum SolveResult {
    DangerProved { cert: DangerCertificate, trace: Trace },
    SafetyProved { cert: SafetyCertificate },
    Unknown { reason: UnknownReason },
}

impl SolveResult {
    pub fn is_proved(&self) -> bool {
        !matches!(self, SolveResult::Unknown { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Danger,
    Safety,
    /// Search both proof kinds, return whichever validates first.
    Gs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Enumerate,
    Stochastic,
}

#[derive(Debug, Clone)]
pub struct CegisBudget {
    pub timeout: Option<Duration>,
    pub state_budget: u64,
    pub jobs: usize,
    /// Seed for the stochastic strategy; enumeration ignores it.
    pub seed: u64,
    pub strategy: Strategy,
}

impl Default for CegisBudget {
    fn default() -> Self {
        CegisBudget {
            timeout: None,
            state_budget: DEFAULT_STATE_BUDGET,
            jobs: 1,
            seed: 0,
            strategy: Strategy::Enumerate,
        }
    }
}

/// Alternate synthesis and verification until a proof validates or the
/// search space or budget runs out. In `Gs` mode a danger engine and a
/// safety engine take turns, each turn bounded by a fixed candidate-scan
/// chunk, so one search cannot starve the other.
pub fn cegis(l: &LoopSystem, g: &Grammar, mode: Mode, budget: &CegisBudget) -> SolveResult {
    if budget.strategy == Strategy::Stochastic {
        return stochastic_search(l, g, mode, budget);
    }
    let deadline = budget.timeout.map(|t| Instant::now() + t);
    let mut engines: Vec<CegisEngine> = match mode {
        Mode::Danger => vec![CegisEngine::danger(l, g)],
        Mode::Safety => vec![CegisEngine::safety(l, g)],
        Mode::Gs => vec![CegisEngine::danger(l, g), CegisEngine::safety(l, g)],
    };
    let mut exhausted = vec![false; engines.len()];
    let mut budget_hit = false;
    loop {
        let mut progressed = false;
        for (i, engine) in engines.iter_mut().enumerate() {
            if exhausted[i] {
                continue;
            }
            if let Some(d) = deadline {
                if Instant::now() >= d {
                    return SolveResult::Unknown { reason: UnknownReason::Timeout };
                }
            }
            match engine.round(budget) {
                Ok(Some(result)) => return result,
                Ok(None) => progressed = true,
                Err(engine::RoundEnd::GrammarExhausted) => exhausted[i] = true,
                Err(engine::RoundEnd::Budget) => {
                    exhausted[i] = true;
                    budget_hit = true;
                }
            }
        }
        if !progressed && exhausted.iter().all(|&e| e) {
            let reason = if budget_hit {
                UnknownReason::Budget
            } else {
                UnknownReason::GrammarExhausted
            };
            return SolveResult::Unknown { reason };
        }
    }
}
