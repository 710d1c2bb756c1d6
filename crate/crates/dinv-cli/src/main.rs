//! Command-line surface: solve, check, bmc, absint, oracle and trace.
//!
//! Exit codes: 10 danger proved, 20 safety proved, 30 unknown or
//! inconclusive, 1 usage or parse errors, 2 internal errors and exhausted
//! budgets.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dinv::absint::{analyze, classify_alarm, AlarmVerdict, AnalyzeOptions};
use dinv::bmc::{cex_to_danger, unwind, UnwindResult};
use dinv::certfile::{self, CertPayload, CertificateFile};
use dinv::certificate::{
    check_danger, check_safety, extract_trace, CheckOptions, SafetyMode, Verdict,
};
use dinv::synth::{cegis, table_search, CegisBudget, Grammar, Mode, SolveResult, Strategy};
use dinv::{desugar, parse, LoopSystem, Trace};

const EXIT_DANGER: u8 = 10;
const EXIT_SAFETY: u8 = 20;
const EXIT_UNKNOWN: u8 = 30;
const EXIT_USAGE: u8 = 1;
const EXIT_INTERNAL: u8 = 2;

#[derive(Parser)]
#[command(name = "dinv", version, about = "Loop bug finding via danger and safety invariants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Bits per variable.
    #[arg(long = "bits", default_value_t = 8)]
    bits: u32,
    /// Rewrite an integer literal program-wide, e.g. --subst 1000000=16.
    /// May be given multiple times.
    #[arg(long = "subst", value_name = "FROM=TO")]
    subst: Vec<String>,
    /// Wall-clock limit in seconds for the solver loops.
    #[arg(long = "timeout", default_value_t = 120)]
    timeout: u64,
    /// Worker threads for the exhaustive checks.
    #[arg(long = "jobs", default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a safety or danger proof (generalized mode).
    Solve {
        program: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        /// Random seed for the stochastic strategy.
        #[arg(long = "seed", default_value_t = 0)]
        seed: u64,
        /// Candidate search strategy.
        #[arg(long = "strategy", value_parser = ["enumerate", "stochastic"], default_value = "enumerate")]
        strategy: String,
        /// Cap on the size of each synthesized expression.
        #[arg(long = "max-size", default_value_t = dinv::synth::DEFAULT_MAX_EXPR_SIZE)]
        max_size: usize,
        /// Add every constant in lo..=hi to the grammar pool, e.g. -8..7.
        #[arg(long = "const-range", value_name = "LO..HI")]
        const_range: Option<String>,
        /// Restrict the search to one proof kind.
        #[arg(long = "mode", value_parser = ["gs", "danger", "safety"], default_value = "gs")]
        mode: String,
        /// Where to write the certificate (defaults to <program>.cert).
        #[arg(long = "out")]
        out: Option<PathBuf>,
        /// Output format.
        #[arg(long = "format", value_parser = ["text", "machine"], default_value = "text")]
        format: String,
    },
    /// Validate a certificate file against a program.
    Check {
        certificate: PathBuf,
        program: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Unwind the loop breadth-first up to a depth bound.
    Bmc {
        program: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        /// Unwinding depth.
        #[arg(long = "depth", default_value_t = 64)]
        depth: u64,
    },
    /// Forward interval analysis report.
    Absint {
        program: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Exact decision by explicit tables (tiny state spaces only).
    Oracle {
        program: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long = "format", value_parser = ["text", "machine"], default_value = "text")]
        format: String,
    },
    /// Replay the counterexample encoded by a danger certificate.
    Trace {
        certificate: PathBuf,
        program: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's default exit code for usage errors is 2; the contract
            // here reserves 2 for internal failures.
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_INTERNAL
            };
            ExitCode::from(code)
        }
    }
}

/// Marker for user-input problems; main maps it to exit 1 instead of 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

struct Loaded {
    text: String,
    system: LoopSystem,
    program: dinv::ast::SourceProgram,
    subst: Vec<(i64, i64)>,
}

fn parse_subst(specs: &[String]) -> Result<Vec<(i64, i64)>> {
    let mut out = Vec::new();
    for s in specs {
        let (from, to) = s
            .split_once('=')
            .ok_or_else(|| usage(format!("bad --subst \"{s}\": expected FROM=TO")))?;
        let from: i64 = from.trim().parse().map_err(|_| usage("bad --subst origin"))?;
        let to: i64 = to.trim().parse().map_err(|_| usage("bad --subst target"))?;
        out.push((from, to));
    }
    out.sort_unstable();
    Ok(out)
}

fn load(path: &Path, bits: u32, subst: &[(i64, i64)]) -> Result<Loaded> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut program = parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    for &(from, to) in subst {
        if !dinv::expr::fits_width(to, bits) {
            return Err(usage(format!(
                "substitution target {to} does not fit in {bits} bits"
            )));
        }
        program.substitute_literal(from, to);
    }
    let system =
        desugar(&program, bits).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(Loaded { text, system, program, subst: subst.to_vec() })
}

fn print_trace(l: &LoopSystem, trace: &Trace) {
    for s in &trace.states {
        println!("  {}", l.display_state(s));
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve {
            program,
            common,
            seed,
            strategy,
            max_size,
            const_range,
            mode,
            out,
            format,
        } => {
            let subst = parse_subst(&common.subst)?;
            let loaded = load(&program, common.bits, &subst)?;
            let mut grammar = Grammar::for_system(&loaded.system, &loaded.program)
                .with_max_size(max_size);
            if let Some(spec) = const_range {
                let (lo, hi) = spec
                    .split_once("..")
                    .ok_or_else(|| usage("bad --const-range: expected LO..HI"))?;
                let lo: i64 = lo.trim().parse().map_err(|_| usage("bad --const-range"))?;
                let hi: i64 = hi.trim().parse().map_err(|_| usage("bad --const-range"))?;
                grammar.add_const_range(lo, hi);
            }
            let budget = CegisBudget {
                timeout: Some(Duration::from_secs(common.timeout)),
                jobs: common.jobs,
                seed,
                strategy: if strategy == "stochastic" {
                    Strategy::Stochastic
                } else {
                    Strategy::Enumerate
                },
                ..CegisBudget::default()
            };
            let mode = match mode.as_str() {
                "danger" => Mode::Danger,
                "safety" => Mode::Safety,
                _ => Mode::Gs,
            };
            let result = cegis(&loaded.system, &grammar, mode, &budget);
            let out_path = out.unwrap_or_else(|| program.with_extension("cert"));
            report_solve(&loaded, result, Some(&out_path), &format)
        }
        Command::Check { certificate, program, common } => {
            let subst_cli = parse_subst(&common.subst)?;
            let raw = certfile::parse_raw(
                &std::fs::read_to_string(&certificate)
                    .map_err(|e| usage(format!("cannot read {}: {e}", certificate.display())))?,
            )
            .map_err(|e| usage(format!("{}: {e}", certificate.display())))?;
            // the certificate pins width and substitutions; CLI flags must
            // not silently disagree
            if !subst_cli.is_empty() && subst_cli != raw.subst {
                return Err(usage("--subst disagrees with the certificate's subst lines"));
            }
            let loaded = load(&program, raw.width, &raw.subst)?;
            if certfile::program_digest(&loaded.text) != raw.program_digest {
                return Err(usage(
                    "certificate was issued for a different program (digest mismatch)",
                ));
            }
            let cert = certfile::resolve(&raw, &loaded.system)
                .map_err(|e| usage(format!("{}: {e}", certificate.display())))?;
            let opts = CheckOptions { jobs: common.jobs, ..CheckOptions::default() };
            match &cert.payload {
                CertPayload::Danger(c) => {
                    match check_danger(&loaded.system, c, &opts)
                        .context("exhaustive check exceeded the state budget")?
                    {
                        Verdict::Ok => {
                            println!("certificate is valid: danger proved");
                            let trace = extract_trace(&loaded.system, c)
                                .map_err(|e| anyhow!("{e}"))?;
                            print_trace(&loaded.system, &trace);
                            Ok(EXIT_DANGER)
                        }
                        Verdict::Violation(v) => {
                            println!(
                                "certificate is invalid: criterion {} fails at {}",
                                v.criterion,
                                loaded.system.display_state(v.witness.pre_state()),
                            );
                            bail!("validation failed on criterion {}", v.criterion);
                        }
                    }
                }
                CertPayload::Safety(c) => {
                    match check_safety(&loaded.system, c, &SafetyMode::Safety, &opts)
                        .context("exhaustive check exceeded the state budget")?
                    {
                        Verdict::Ok => {
                            println!("certificate is valid: safety proved");
                            Ok(EXIT_SAFETY)
                        }
                        Verdict::Violation(v) => {
                            println!(
                                "certificate is invalid: criterion {} fails at {}",
                                v.criterion,
                                loaded.system.display_state(v.witness.pre_state()),
                            );
                            bail!("validation failed on criterion {}", v.criterion);
                        }
                    }
                }
            }
        }
        Command::Bmc { program, common, depth } => {
            let subst = parse_subst(&common.subst)?;
            let loaded = load(&program, common.bits, &subst)?;
            match unwind(&loaded.system, depth, dinv::system::DEFAULT_STATE_BUDGET)
                .context("unwinding exceeded the state budget")?
            {
                UnwindResult::Counterexample(cex) => {
                    println!("counterexample of {} states within depth {depth}:", cex.trace.len());
                    print_trace(&loaded.system, &cex.trace);
                    let cert = cex_to_danger(&loaded.system, &cex);
                    let file = CertificateFile {
                        program_digest: certfile::program_digest(&loaded.text),
                        width: loaded.system.width,
                        subst: loaded.subst.clone(),
                        payload: CertPayload::Danger(cert),
                    };
                    println!("danger certificate:");
                    print!("{}", certfile::print(&file, &loaded.system));
                    Ok(EXIT_DANGER)
                }
                UnwindResult::NoneWithinBound(k) => {
                    println!("no counterexample within {k} unwindings");
                    Ok(EXIT_UNKNOWN)
                }
            }
        }
        Command::Absint { program, common } => {
            let subst = parse_subst(&common.subst)?;
            let loaded = load(&program, common.bits, &subst)?;
            let ann = analyze(&loaded.system, &AnalyzeOptions::default());
            print!("{}", ann.report(&loaded.system));
            match classify_alarm(&ann, &loaded.system) {
                AlarmVerdict::Safe => {
                    println!("verdict: safe (assertion holds on every execution)");
                    Ok(EXIT_SAFETY)
                }
                AlarmVerdict::Alarm => {
                    println!("verdict: alarm (possibly spurious)");
                    Ok(EXIT_UNKNOWN)
                }
            }
        }
        Command::Oracle { program, common, format } => {
            let subst = parse_subst(&common.subst)?;
            let loaded = load(&program, common.bits, &subst)?;
            let result = table_search(&loaded.system)
                .context("state space too large for the table oracle")?;
            report_solve(&loaded, result, None, &format)
        }
        Command::Trace { certificate, program, common } => {
            let raw = certfile::parse_raw(
                &std::fs::read_to_string(&certificate)
                    .map_err(|e| usage(format!("cannot read {}: {e}", certificate.display())))?,
            )
            .map_err(|e| usage(format!("{}: {e}", certificate.display())))?;
            let _ = common;
            let loaded = load(&program, raw.width, &raw.subst)?;
            if certfile::program_digest(&loaded.text) != raw.program_digest {
                return Err(usage(
                    "certificate was issued for a different program (digest mismatch)",
                ));
            }
            let cert = certfile::resolve(&raw, &loaded.system)
                .map_err(|e| usage(format!("{}: {e}", certificate.display())))?;
            match &cert.payload {
                CertPayload::Safety(_) => {
                    Err(usage("safety certificates encode no counterexample trace"))
                }
                CertPayload::Danger(c) => {
                    let trace =
                        extract_trace(&loaded.system, c).map_err(|e| anyhow!("{e}"))?;
                    print_trace(&loaded.system, &trace);
                    Ok(EXIT_DANGER)
                }
            }
        }
    }
}

fn report_solve(
    loaded: &Loaded,
    result: SolveResult,
    out: Option<&Path>,
    format: &str,
) -> Result<u8> {
    let digest = certfile::program_digest(&loaded.text);
    let (payload, trace, code, verdict) = match result {
        SolveResult::DangerProved { cert, trace } => {
            (CertPayload::Danger(cert), Some(trace), EXIT_DANGER, "danger proved")
        }
        SolveResult::SafetyProved { cert } => {
            (CertPayload::Safety(cert), None, EXIT_SAFETY, "safety proved")
        }
        SolveResult::Unknown { reason } => {
            println!("unknown: {reason}");
            return Ok(EXIT_UNKNOWN);
        }
    };
    let file = CertificateFile {
        program_digest: digest,
        width: loaded.system.width,
        subst: loaded.subst.clone(),
        payload,
    };
    let text = certfile::print(&file, &loaded.system);
    if let Some(out_path) = out {
        std::fs::write(out_path, &text)
            .with_context(|| format!("writing {}", out_path.display()))?;
        if format != "machine" {
            println!("{verdict}; certificate written to {}", out_path.display());
        }
    } else if format != "machine" {
        println!("{verdict}");
    }
    print!("{text}");
    if format != "machine" {
        if let Some(trace) = &trace {
            println!("counterexample trace:");
            print_trace(&loaded.system, trace);
        }
    }
    Ok(code)
}
