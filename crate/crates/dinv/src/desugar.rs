//! Lowering from the source AST to the canonical loop system.
//!
//! The body compiles to one simultaneous update vector by symbolic execution.
//! `break` is latched into a fresh `brk` variable and in-loop asserts into a
//! fresh `err` variable; both strengthen the guard so an erred or broken run
//! exits at the next loop head, and the final assertion is rewritten to
//! `(err == 0 -> A) && err == 0`. Statements following a taken `break` or a
//! failed `assert` within the same iteration do not execute, matching the
//! source semantics.
//!
//! Nondeterminism sites:
//!   - `v = *` registers a free full-width site.
//!   - `if (*) v = e;` with deterministic `e` registers a choice site whose
//!     value proposes the next value of `v`: the branch is taken iff the
//!     site value equals `e` in the current state. Skolem functions for such
//!     sites read the way hand-written invariants do (`y + 1` means
//!     "increment y").
//!   - any other `if (*)` registers a 1-bit branch site tested against zero.

use std::collections::HashMap;

use thiserror::Error;

use crate::ast::*;
use crate::expr::{fits_width, Expr, Sort, VarId};
use crate::lexer::Span;
use crate::system::{LoopSystem, NondetSite, SiteKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DesugarError {
    #[error(
        "literal {value} at {span} does not fit in {width} signed bits; \
         rescale it with --subst or raise --bits"
    )]
    LiteralOutOfRange { value: i64, width: u32, span: Span },
    #[error("expression at {span} must be {expected}")]
    Sort { expected: &'static str, span: Span },
    #[error("unknown variable \"{name}\" at {span}")]
    UnknownVariable { name: String, span: Span },
    #[error("width must be between 1 and 24 bits, got {0}")]
    BadWidth(u32),
}

/// Lower a source expression over the given variable table, checking sorts.
pub fn lower_expr(
    e: &SrcExpr,
    ids: &HashMap<String, VarId>,
    expected: Sort,
) -> Result<Expr, DesugarError> {
    let vars: Vec<Expr> = {
        let mut v = vec![Expr::int(0); ids.len()];
        for (name, &id) in ids {
            debug_assert!(!name.is_empty());
            v[id] = Expr::var(id);
        }
        v
    };
    lower_sym(e, &vars, ids, expected)
}

/// Lower `e` substituting each variable with its current symbolic value.
fn lower_sym(
    e: &SrcExpr,
    env: &[Expr],
    ids: &HashMap<String, VarId>,
    expected: Sort,
) -> Result<Expr, DesugarError> {
    let out = match &e.kind {
        SrcExprKind::Number(n) => Expr::int(*n),
        SrcExprKind::Bool(b) => Expr::bool(*b),
        SrcExprKind::Var(name) => {
            let id = *ids.get(name.as_str()).ok_or_else(|| DesugarError::UnknownVariable {
                name: name.clone(),
                span: e.span,
            })?;
            env[id].clone()
        }
        SrcExprKind::Bin(op, a, b) => {
            let (lo, hi) = match op {
                SrcBinOp::And | SrcBinOp::Or => (Sort::Bool, Sort::Bool),
                _ => (Sort::Int, Sort::Int),
            };
            let la = lower_sym(a, env, ids, lo)?;
            let lb = lower_sym(b, env, ids, hi)?;
            let op = match op {
                SrcBinOp::Add => crate::expr::BinOp::Add,
                SrcBinOp::Sub => crate::expr::BinOp::Sub,
                SrcBinOp::Mul => crate::expr::BinOp::Mul,
                SrcBinOp::Eq => crate::expr::BinOp::Eq,
                SrcBinOp::Ne => crate::expr::BinOp::Ne,
                SrcBinOp::Lt => crate::expr::BinOp::Lt,
                SrcBinOp::Le => crate::expr::BinOp::Le,
                SrcBinOp::Gt => crate::expr::BinOp::Gt,
                SrcBinOp::Ge => crate::expr::BinOp::Ge,
                SrcBinOp::And => crate::expr::BinOp::And,
                SrcBinOp::Or => crate::expr::BinOp::Or,
            };
            Expr::bin(op, la, lb)
        }
        SrcExprKind::Neg(a) => {
            let la = lower_sym(a, env, ids, Sort::Int)?;
            Expr::sub(Expr::int(0), la)
        }
        SrcExprKind::Not(a) => Expr::not(lower_sym(a, env, ids, Sort::Bool)?),
        SrcExprKind::Ite(c, t, el) => {
            let lc = lower_sym(c, env, ids, Sort::Bool)?;
            let lt = lower_sym(t, env, ids, Sort::Int)?;
            let le = lower_sym(el, env, ids, Sort::Int)?;
            Expr::ite(lc, lt, le)
        }
    };
    if out.sort() != expected {
        return Err(DesugarError::Sort {
            expected: match expected {
                Sort::Int => "an integer expression",
                Sort::Bool => "a boolean expression",
            },
            span: e.span,
        });
    }
    Ok(out)
}

struct Compiler {
    ids: HashMap<String, VarId>,
    env: Vec<Expr>,
    alive: Expr,
    sites: Vec<NondetSite>,
    brk: Option<VarId>,
    err: Option<VarId>,
}

impl Compiler {
    fn fresh_site(&mut self, kind: SiteKind) -> Expr {
        let id = self.sites.len() as u32 + 1;
        self.sites.push(NondetSite { id, kind });
        Expr::nondet(id)
    }

    fn effective(&self, pc: &Expr) -> Expr {
        Expr::and(pc.clone(), self.alive.clone())
    }

    fn guarded_assign(&mut self, var: VarId, cond: Expr, value: Expr) {
        self.env[var] = mk_ite(cond, value, self.env[var].clone());
    }

    fn compile(&mut self, stmts: &[Stmt], pc: &Expr) -> Result<(), DesugarError> {
        for s in stmts {
            match &s.kind {
                StmtKind::Assign { name, value } => {
                    let var = self.ids[name.as_str()];
                    let rhs = match value {
                        Some(e) => lower_sym(e, &self.env, &self.ids, Sort::Int)?,
                        None => self.fresh_site(SiteKind::Free),
                    };
                    let eff = self.effective(pc);
                    self.guarded_assign(var, eff, rhs);
                }
                StmtKind::Break => {
                    let brk = self.brk.expect("break latch allocated by pre-pass");
                    let eff = self.effective(pc);
                    self.guarded_assign(brk, eff, Expr::int(1));
                    self.alive = mk_and_not(self.alive.clone(), pc.clone());
                }
                StmtKind::Assert(e) => {
                    let err = self.err.expect("error latch allocated by pre-pass");
                    let cond = lower_sym(e, &self.env, &self.ids, Sort::Bool)?;
                    let fail = Expr::and(pc.clone(), Expr::not(cond));
                    let eff = Expr::and(fail.clone(), self.alive.clone());
                    self.guarded_assign(err, eff, Expr::int(1));
                    self.alive = mk_and_not(self.alive.clone(), fail);
                }
                StmtKind::Block(inner) => self.compile(inner, pc)?,
                StmtKind::If { cond, then, els } => match cond {
                    IfCond::Expr(c) => {
                        let lc = lower_sym(c, &self.env, &self.ids, Sort::Bool)?;
                        self.compile(then, &Expr::and(pc.clone(), lc.clone()))?;
                        if let Some(els) = els {
                            self.compile(els, &Expr::and(pc.clone(), Expr::not(lc)))?;
                        }
                    }
                    IfCond::Nondet => {
                        if let Some((var, take)) = self.choice_assignment(then, els)? {
                            let n = self.fresh_site(SiteKind::Choice { take: take.clone() });
                            let taken = Expr::eq(n, take.clone());
                            let eff = Expr::and(self.effective(pc), taken);
                            self.guarded_assign(var, eff, take);
                        } else {
                            let n = self.fresh_site(SiteKind::Branch);
                            let taken = Expr::ne(n, Expr::int(0));
                            self.compile(then, &Expr::and(pc.clone(), taken.clone()))?;
                            if let Some(els) = els {
                                self.compile(els, &Expr::and(pc.clone(), Expr::not(taken)))?;
                            }
                        }
                    }
                },
            }
        }
        Ok(())
    }

    /// `if (*) v = e;` with no else and a deterministic `e` qualifies as a
    /// choice site. Returns the target var and the lowered take expression.
    fn choice_assignment(
        &mut self,
        then: &[Stmt],
        els: &Option<Vec<Stmt>>,
    ) -> Result<Option<(VarId, Expr)>, DesugarError> {
        if els.is_some() || then.len() != 1 {
            return Ok(None);
        }
        let StmtKind::Assign { name, value: Some(e) } = &then[0].kind else {
            return Ok(None);
        };
        let take = lower_sym(e, &self.env, &self.ids, Sort::Int)?;
        if take.mentions_nondet() {
            return Ok(None);
        }
        Ok(Some((self.ids[name.as_str()], take)))
    }
}

fn mk_ite(c: Expr, t: Expr, e: Expr) -> Expr {
    use crate::expr::ExprKind;
    match c.kind() {
        ExprKind::BoolConst(true) => t,
        ExprKind::BoolConst(false) => e,
        _ if t == e => t,
        _ => Expr::ite(c, t, e),
    }
}

/// `a && !b`, simplifying the constant cases.
fn mk_and_not(a: Expr, b: Expr) -> Expr {
    use crate::expr::ExprKind;
    match b.kind() {
        ExprKind::BoolConst(true) => Expr::bool(false),
        ExprKind::BoolConst(false) => a,
        _ => Expr::and(a, Expr::not(b)),
    }
}

fn uses_break(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match &s.kind {
        StmtKind::Break => true,
        StmtKind::Block(inner) => uses_break(inner),
        StmtKind::If { then, els, .. } => {
            uses_break(then) || els.as_deref().map_or(false, uses_break)
        }
        _ => false,
    })
}

fn uses_assert(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match &s.kind {
        StmtKind::Assert(_) => true,
        StmtKind::Block(inner) => uses_assert(inner),
        StmtKind::If { then, els, .. } => {
            uses_assert(then) || els.as_deref().map_or(false, uses_assert)
        }
        _ => false,
    })
}

fn fresh_name(base: &str, taken: &HashMap<String, VarId>) -> String {
    let mut name = base.to_string();
    while taken.contains_key(&name) {
        name.push('_');
    }
    name
}

fn check_literals_expr(e: &SrcExpr, width: u32) -> Result<(), DesugarError> {
    match &e.kind {
        SrcExprKind::Number(n) => {
            if fits_width(*n, width) {
                Ok(())
            } else {
                Err(DesugarError::LiteralOutOfRange { value: *n, width, span: e.span })
            }
        }
        SrcExprKind::Bool(_) | SrcExprKind::Var(_) => Ok(()),
        SrcExprKind::Bin(_, a, b) => {
            check_literals_expr(a, width)?;
            check_literals_expr(b, width)
        }
        SrcExprKind::Neg(a) | SrcExprKind::Not(a) => check_literals_expr(a, width),
        SrcExprKind::Ite(c, t, el) => {
            check_literals_expr(c, width)?;
            check_literals_expr(t, width)?;
            check_literals_expr(el, width)
        }
    }
}

fn check_literals_stmt(s: &Stmt, width: u32) -> Result<(), DesugarError> {
    match &s.kind {
        StmtKind::Assign { value, .. } => {
            value.as_ref().map_or(Ok(()), |e| check_literals_expr(e, width))
        }
        StmtKind::If { cond, then, els } => {
            if let IfCond::Expr(e) = cond {
                check_literals_expr(e, width)?;
            }
            for s in then {
                check_literals_stmt(s, width)?;
            }
            if let Some(els) = els {
                for s in els {
                    check_literals_stmt(s, width)?;
                }
            }
            Ok(())
        }
        StmtKind::Break => Ok(()),
        StmtKind::Block(stmts) => stmts.iter().try_for_each(|s| check_literals_stmt(s, width)),
        StmtKind::Assert(e) => check_literals_expr(e, width),
    }
}

/// Lower a validated program into the canonical loop form at the given width.
pub fn desugar(p: &SourceProgram, width: u32) -> Result<LoopSystem, DesugarError> {
    if !(1..=24).contains(&width) {
        return Err(DesugarError::BadWidth(width));
    }
    for d in &p.decls {
        if let Init::Expr(e) = &d.init {
            check_literals_expr(e, width)?;
        }
    }
    check_literals_expr(&p.assume, width)?;
    check_literals_expr(&p.loop_guard, width)?;
    for s in &p.body {
        check_literals_stmt(s, width)?;
    }
    check_literals_expr(&p.final_assert, width)?;

    let mut vars: Vec<String> = p.decls.iter().map(|d| d.name.clone()).collect();
    let mut ids: HashMap<String, VarId> =
        vars.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    let n_source_vars = vars.len();

    let brk = uses_break(&p.body).then(|| {
        let name = fresh_name("brk", &ids);
        let id = vars.len();
        ids.insert(name.clone(), id);
        vars.push(name);
        id
    });
    let err = uses_assert(&p.body).then(|| {
        let name = fresh_name("err", &ids);
        let id = vars.len();
        ids.insert(name.clone(), id);
        vars.push(name);
        id
    });

    // I: one equation per initialized declaration, the assume clause, and
    // zeroed latches. Initializers see the initial values of earlier vars.
    let mut init = Expr::bool(true);
    for (i, d) in p.decls.iter().enumerate() {
        if let Init::Expr(e) = &d.init {
            let rhs = lower_expr(e, &ids, Sort::Int)?;
            init = Expr::and(init, Expr::eq(Expr::var(i), rhs));
        }
    }
    init = Expr::and(init, lower_expr(&p.assume, &ids, Sort::Bool)?);
    for latch in [brk, err].into_iter().flatten() {
        init = Expr::and(init, Expr::eq(Expr::var(latch), Expr::int(0)));
    }

    let mut guard = lower_expr(&p.loop_guard, &ids, Sort::Bool)?;
    for latch in [brk, err].into_iter().flatten() {
        guard = Expr::and(guard, Expr::eq(Expr::var(latch), Expr::int(0)));
    }

    let mut compiler = Compiler {
        ids: ids.clone(),
        env: (0..vars.len()).map(Expr::var).collect(),
        alive: Expr::bool(true),
        sites: Vec::new(),
        brk,
        err,
    };
    compiler.compile(&p.body, &Expr::bool(true))?;

    let mut assertion = lower_expr(&p.final_assert, &ids, Sort::Bool)?;
    if let Some(err) = err {
        let ok = Expr::eq(Expr::var(err), Expr::int(0));
        assertion = Expr::and(Expr::implies(ok.clone(), assertion), ok);
    }

    Ok(LoopSystem {
        vars,
        width,
        n_source_vars,
        init,
        guard,
        updates: compiler.env,
        assertion,
        sites: compiler.sites,
    })
}

/// Distinct integer literals appearing in the program text, ascending; the
/// synthesizer seeds its constant pool from these.
pub fn program_literals(p: &SourceProgram) -> Vec<i64> {
    let mut out = Vec::new();
    fn expr_lits(e: &SrcExpr, out: &mut Vec<i64>) {
        match &e.kind {
            SrcExprKind::Number(n) => out.push(*n),
            SrcExprKind::Bool(_) | SrcExprKind::Var(_) => {}
            SrcExprKind::Bin(_, a, b) => {
                expr_lits(a, out);
                expr_lits(b, out);
            }
            SrcExprKind::Neg(a) | SrcExprKind::Not(a) => expr_lits(a, out),
            SrcExprKind::Ite(c, t, e2) => {
                expr_lits(c, out);
                expr_lits(t, out);
                expr_lits(e2, out);
            }
        }
    }
    fn stmt_lits(s: &Stmt, out: &mut Vec<i64>) {
        match &s.kind {
            StmtKind::Assign { value, .. } => {
                if let Some(e) = value {
                    expr_lits(e, out);
                }
            }
            StmtKind::If { cond, then, els } => {
                if let IfCond::Expr(e) = cond {
                    expr_lits(e, out);
                }
                then.iter().for_each(|s| stmt_lits(s, out));
                if let Some(els) = els {
                    els.iter().for_each(|s| stmt_lits(s, out));
                }
            }
            StmtKind::Break => {}
            StmtKind::Block(stmts) => stmts.iter().for_each(|s| stmt_lits(s, out)),
            StmtKind::Assert(e) => expr_lits(e, out),
        }
    }
    for d in &p.decls {
        if let Init::Expr(e) = &d.init {
            expr_lits(e, &mut out);
        }
    }
    expr_lits(&p.assume, &mut out);
    expr_lits(&p.loop_guard, &mut out);
    p.body.iter().for_each(|s| stmt_lits(s, &mut out));
    expr_lits(&p.final_assert, &mut out);
    out.sort_unstable();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::system::SiteKind;

    #[test]
    fn break_gets_a_latch_and_branch_site() {
        let p = parse(
            "int x = 0; while (x < 10) { if (*) break; x++; } assert(x == 10);",
        )
        .unwrap();
        let l = desugar(&p, 8).unwrap();
        assert_eq!(l.vars, vec!["x".to_string(), "brk".to_string()]);
        assert_eq!(l.sites.len(), 1);
        assert_eq!(l.sites[0].kind, SiteKind::Branch);
        assert_eq!(l.n_source_vars, 1);
        // guard is x < 10 && brk == 0
        let s_in = crate::system::State(vec![0, 0]);
        let s_brk = crate::system::State(vec![0, 1]);
        assert!(l.guard_holds(&s_in));
        assert!(!l.guard_holds(&s_brk));
        // breaking skips the increment
        let next = crate::system::step(&l, &s_in, &[1]).unwrap();
        assert_eq!(next.0, vec![0, 1]);
        let next = crate::system::step(&l, &s_in, &[0]).unwrap();
        assert_eq!(next.0, vec![1, 0]);
    }

    #[test]
    fn nondet_free_program_has_no_sites() {
        let p = parse("int x = 0; while (x < 3) { x = x + 1; } assert(x == 3);").unwrap();
        let l = desugar(&p, 8).unwrap();
        assert!(l.sites.is_empty());
    }

    #[test]
    fn guarded_increment_is_a_choice_site() {
        let p = parse(
            "int x = 0; int y = 1; while (x < 16) { x++; if (*) y++; } assert(x == y);",
        )
        .unwrap();
        let l = desugar(&p, 8).unwrap();
        assert_eq!(l.sites.len(), 1);
        match &l.sites[0].kind {
            SiteKind::Choice { take } => {
                assert_eq!(format!("{}", l.display_expr(take)), "y + 1");
            }
            other => panic!("expected choice site, got {other:?}"),
        }
        // site value y+1 takes the increment, anything else keeps y
        let s = crate::system::State(vec![0, 1]);
        assert_eq!(crate::system::step(&l, &s, &[2]).unwrap().0, vec![1, 2]);
        assert_eq!(crate::system::step(&l, &s, &[0]).unwrap().0, vec![1, 1]);
    }

    #[test]
    fn oversized_literal_rejected() {
        let p = parse("int x = 0; while (x < 1000000) { x++; }").unwrap();
        match desugar(&p, 8) {
            Err(DesugarError::LiteralOutOfRange { value, width, .. }) => {
                assert_eq!(value, 1000000);
                assert_eq!(width, 8);
            }
            other => panic!("unexpected {other:?}"),
        }
        let mut scaled = p;
        scaled.substitute_literal(1000000, 16);
        assert!(desugar(&scaled, 8).is_ok());
    }

    #[test]
    fn err_latch_rewrites_assertion() {
        let p = parse(
            "int i = 0; int n = 4; while (i < n) { assert(i < 2); i++; }",
        )
        .unwrap();
        let l = desugar(&p, 8).unwrap();
        assert_eq!(l.vars.last().unwrap(), "err");
        // run it: i=2 fails the in-loop assert, latching err and exiting
        let x0 = crate::system::State(vec![0, 4, 0]);
        let trace = crate::system::run(&l, &x0, &[], 100);
        assert_eq!(trace.status, crate::system::TraceStatus::Completed);
        let last = trace.last();
        assert_eq!(last.0[2], 1);
        assert!(!l.assertion_holds(last));
    }

    #[test]
    fn sort_errors_are_reported() {
        // an arithmetic expression where a condition is required
        let p = parse("int x = 0; while (x + 1) { x = x - 1; }").unwrap();
        assert!(matches!(desugar(&p, 8), Err(DesugarError::Sort { .. })));
    }
}
