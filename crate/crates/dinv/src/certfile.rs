//! Textual certificate files (`.cert`): canonical, line-based, and
//! byte-stable under a parse/print round trip.
//!
//! ```text
//! kind: danger
//! program: <sha256 of the source file>
//! width: 8
//! subst: 1000000 -> 16
//! D: x < y
//! R: 16 - x
//! N: n1 := ite(y < 17, y + 1, y)
//! x0: x = 0, y = 1
//! ```
//!
//! Safety certificates carry a single `S:` line instead of D/R/N/x0. The
//! `subst` lines record how benchmark constants were scaled, so a proof is
//! tied to the scaled program; `program` is the digest of the unscaled file.

use std::collections::HashMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::certificate::{DangerCertificate, SafetyCertificate};
use crate::desugar::{lower_expr, DesugarError};
use crate::expr::{fits_width, DisplayExpr, Expr, Sort};
use crate::parser::{parse_expression, ParseError};
use crate::system::{LoopSystem, State};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CertPayload {
    Danger(DangerCertificate),
    Safety(SafetyCertificate),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateFile {
    pub program_digest: String,
    pub width: u32,
    /// Literal substitutions applied to the program, ascending by original.
    pub subst: Vec<(i64, i64)>,
    pub payload: CertPayload,
}

/// Header fields read without a loop system at hand; the CLI uses these to
/// rebuild the scaled program before resolving the expressions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCertificate {
    pub kind: String,
    pub program_digest: String,
    pub width: u32,
    pub subst: Vec<(i64, i64)>,
    fields: Vec<(String, String)>,
}

#[derive(Debug, Error)]
pub enum CertParseError {
    #[error("certificate line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("certificate field {field}: {source}")]
    Expr { field: String, source: ParseError },
    #[error("certificate field {field}: {source}")]
    Lower { field: String, source: DesugarError },
    #[error("{0}")]
    Invalid(String),
}

pub fn program_digest(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let out = h.finalize();
    out.iter().fold(String::new(), |mut acc, b| {
        let _ = write!(acc, "{b:02x}");
        acc
    })
}

pub fn parse_raw(text: &str) -> Result<RawCertificate, CertParseError> {
    let mut kind = None;
    let mut digest = None;
    let mut width = None;
    let mut subst = Vec::new();
    let mut fields = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = i + 1;
        let (key, value) = line.split_once(':').ok_or_else(|| CertParseError::Malformed {
            line: lineno,
            message: "expected \"key: value\"".into(),
        })?;
        let key = key.trim();
        let value = value.trim().to_string();
        match key {
            "kind" => kind = Some(value),
            "program" => digest = Some(value),
            "width" => {
                width = Some(value.parse::<u32>().map_err(|_| CertParseError::Malformed {
                    line: lineno,
                    message: "width must be an integer".into(),
                })?)
            }
            "subst" => {
                let (from, to) =
                    value.split_once("->").ok_or_else(|| CertParseError::Malformed {
                        line: lineno,
                        message: "expected \"subst: <from> -> <to>\"".into(),
                    })?;
                let from = from.trim().parse::<i64>().map_err(|_| CertParseError::Malformed {
                    line: lineno,
                    message: "bad subst origin".into(),
                })?;
                let to = to.trim().parse::<i64>().map_err(|_| CertParseError::Malformed {
                    line: lineno,
                    message: "bad subst target".into(),
                })?;
                subst.push((from, to));
            }
            _ => fields.push((key.to_string(), value)),
        }
    }
    Ok(RawCertificate {
        kind: kind.ok_or_else(|| CertParseError::Invalid("missing kind".into()))?,
        program_digest: digest.ok_or_else(|| CertParseError::Invalid("missing program".into()))?,
        width: width.ok_or_else(|| CertParseError::Invalid("missing width".into()))?,
        subst,
        fields,
    })
}

fn parse_lowered(
    field: &str,
    text: &str,
    ids: &HashMap<String, usize>,
    sort: Sort,
) -> Result<Expr, CertParseError> {
    let src = parse_expression(text)
        .map_err(|source| CertParseError::Expr { field: field.to_string(), source })?;
    lower_expr(&src, ids, sort)
        .map_err(|source| CertParseError::Lower { field: field.to_string(), source })
}

/// Resolve a raw certificate against the (already scaled, already desugared)
/// loop system it talks about.
pub fn resolve(raw: &RawCertificate, l: &LoopSystem) -> Result<CertificateFile, CertParseError> {
    let ids: HashMap<String, usize> =
        l.vars.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    let field = |name: &str| -> Option<&str> {
        raw.fields.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    };
    let payload = match raw.kind.as_str() {
        "safety" => {
            let s = field("S").ok_or_else(|| CertParseError::Invalid("missing S".into()))?;
            CertPayload::Safety(SafetyCertificate {
                s: parse_lowered("S", s, &ids, Sort::Bool)?,
            })
        }
        "danger" => {
            let d = field("D").ok_or_else(|| CertParseError::Invalid("missing D".into()))?;
            let r = field("R").ok_or_else(|| CertParseError::Invalid("missing R".into()))?;
            let d = parse_lowered("D", d, &ids, Sort::Bool)?;
            let rank = parse_lowered("R", r, &ids, Sort::Int)?;
            let mut skolem: Vec<Option<Expr>> = vec![None; l.sites.len()];
            for (k, v) in raw.fields.iter().filter(|(k, _)| k == "N") {
                let (site, expr) = v.split_once(":=").ok_or_else(|| {
                    CertParseError::Invalid(format!("bad {k} line: expected \"n<i> := expr\""))
                })?;
                let site = site.trim();
                let idx: usize = site
                    .strip_prefix('n')
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| CertParseError::Invalid(format!("bad site name {site}")))?;
                if idx == 0 || idx > l.sites.len() {
                    return Err(CertParseError::Invalid(format!(
                        "site {site} does not exist; the program has {} sites",
                        l.sites.len()
                    )));
                }
                skolem[idx - 1] = Some(parse_lowered("N", expr.trim(), &ids, Sort::Int)?);
            }
            let skolem: Vec<Expr> = skolem
                .into_iter()
                .enumerate()
                .map(|(i, e)| {
                    e.ok_or_else(|| {
                        CertParseError::Invalid(format!("missing skolem for site n{}", i + 1))
                    })
                })
                .collect::<Result<_, _>>()?;
            let x0_line =
                field("x0").ok_or_else(|| CertParseError::Invalid("missing x0".into()))?;
            let mut values = vec![0i64; l.vars.len()];
            let mut seen = vec![false; l.vars.len()];
            for part in x0_line.split(',') {
                let (name, v) = part.split_once('=').ok_or_else(|| {
                    CertParseError::Invalid("x0 entries look like \"name = value\"".into())
                })?;
                let name = name.trim();
                let &id = ids.get(name).ok_or_else(|| {
                    CertParseError::Invalid(format!("x0 mentions unknown variable {name}"))
                })?;
                let v: i64 = v.trim().parse().map_err(|_| {
                    CertParseError::Invalid(format!("bad x0 value for {name}"))
                })?;
                if !fits_width(v, l.width) {
                    return Err(CertParseError::Invalid(format!(
                        "x0 value {v} for {name} does not fit width {}",
                        l.width
                    )));
                }
                values[id] = v;
                seen[id] = true;
            }
            if let Some(i) = seen.iter().position(|s| !s) {
                return Err(CertParseError::Invalid(format!(
                    "x0 does not assign variable {}",
                    l.vars[i]
                )));
            }
            for (i, n) in skolem.iter().enumerate() {
                if n.mentions_nondet() {
                    return Err(CertParseError::Invalid(format!(
                        "skolem for site n{} mentions a nondet symbol",
                        i + 1
                    )));
                }
            }
            CertPayload::Danger(DangerCertificate { d, rank, skolem, x0: State(values) })
        }
        other => return Err(CertParseError::Invalid(format!("unknown kind \"{other}\""))),
    };
    if raw.width != l.width {
        return Err(CertParseError::Invalid(format!(
            "certificate width {} does not match system width {}",
            raw.width, l.width
        )));
    }
    Ok(CertificateFile {
        program_digest: raw.program_digest.clone(),
        width: raw.width,
        subst: raw.subst.clone(),
        payload,
    })
}

/// Canonical printer; `print(resolve(parse(print(c)))) == print(c)`.
pub fn print(cert: &CertificateFile, l: &LoopSystem) -> String {
    let mut out = String::new();
    let kind = match &cert.payload {
        CertPayload::Danger(_) => "danger",
        CertPayload::Safety(_) => "safety",
    };
    let _ = writeln!(out, "kind: {kind}");
    let _ = writeln!(out, "program: {}", cert.program_digest);
    let _ = writeln!(out, "width: {}", cert.width);
    let mut subst = cert.subst.clone();
    subst.sort_unstable();
    for (from, to) in subst {
        let _ = writeln!(out, "subst: {from} -> {to}");
    }
    let pe = |e: &Expr| format!("{}", DisplayExpr { expr: e, names: Some(&l.vars) });
    match &cert.payload {
        CertPayload::Safety(c) => {
            let _ = writeln!(out, "S: {}", pe(&c.s));
        }
        CertPayload::Danger(c) => {
            let _ = writeln!(out, "D: {}", pe(&c.d));
            let _ = writeln!(out, "R: {}", pe(&c.rank));
            for (i, n) in c.skolem.iter().enumerate() {
                let _ = writeln!(out, "N: n{} := {}", i + 1, pe(n));
            }
            let assigns: Vec<String> = l
                .vars
                .iter()
                .zip(&c.x0.0)
                .map(|(name, v)| format!("{name} = {v}"))
                .collect();
            let _ = writeln!(out, "x0: {}", assigns.join(", "));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::desugar::desugar;
    use crate::parser::parse;

    fn demo_system() -> LoopSystem {
        let mut p = parse(
            "int x = 0; int y = 1; while (x < 1000000) { x++; if (*) y++; } assert(x == y);",
        )
        .unwrap();
        p.substitute_literal(1000000, 16);
        desugar(&p, 8).unwrap()
    }

    #[test]
    fn danger_roundtrip_is_byte_identical() {
        let l = demo_system();
        let text = "kind: danger\nprogram: abc123\nwidth: 8\nsubst: 1000000 -> 16\n\
                    D: x < y\nR: 16 - x\nN: n1 := ite(y < 17, y + 1, y)\nx0: x = 0, y = 1\n";
        let raw = parse_raw(text).unwrap();
        let cert = resolve(&raw, &l).unwrap();
        let printed = print(&cert, &l);
        assert_eq!(printed, text);
        let reparsed = resolve(&parse_raw(&printed).unwrap(), &l).unwrap();
        assert_eq!(reparsed, cert);
    }

    #[test]
    fn safety_roundtrip() {
        let p = parse("int x = 0; int y = 0; while (x < 10) { y++; } assert(x < 10);").unwrap();
        let l = desugar(&p, 8).unwrap();
        let text = "kind: safety\nprogram: d00d\nwidth: 8\nS: x < 10\n";
        let cert = resolve(&parse_raw(text).unwrap(), &l).unwrap();
        assert_eq!(print(&cert, &l), text);
    }

    #[test]
    fn missing_skolem_is_rejected() {
        let l = demo_system();
        let text = "kind: danger\nprogram: abc\nwidth: 8\nD: x < y\nR: 16 - x\nx0: x = 0, y = 1\n";
        let raw = parse_raw(text).unwrap();
        assert!(matches!(resolve(&raw, &l), Err(CertParseError::Invalid(_))));
    }

    #[test]
    fn oversized_x0_value_is_rejected() {
        let l = demo_system();
        let text = "kind: danger\nprogram: abc\nwidth: 8\nD: x < y\nR: 16 - x\n\
                    N: n1 := y + 1\nx0: x = 300, y = 1\n";
        let raw = parse_raw(text).unwrap();
        assert!(matches!(resolve(&raw, &l), Err(CertParseError::Invalid(_))));
    }
}
