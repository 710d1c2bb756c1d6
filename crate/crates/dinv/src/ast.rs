//! Source-level AST with spans, plus the canonical pretty-printer.

use std::fmt::Write as _;

use crate::lexer::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrcBinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl SrcBinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            SrcBinOp::Add => "+",
            SrcBinOp::Sub => "-",
            SrcBinOp::Mul => "*",
            SrcBinOp::Eq => "==",
            SrcBinOp::Ne => "!=",
            SrcBinOp::Lt => "<",
            SrcBinOp::Le => "<=",
            SrcBinOp::Gt => ">",
            SrcBinOp::Ge => ">=",
            SrcBinOp::And => "&&",
            SrcBinOp::Or => "||",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SrcExprKind {
    Number(i64),
    Bool(bool),
    Var(String),
    Bin(SrcBinOp, Box<SrcExpr>, Box<SrcExpr>),
    Neg(Box<SrcExpr>),
    Not(Box<SrcExpr>),
    Ite(Box<SrcExpr>, Box<SrcExpr>, Box<SrcExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrcExpr {
    pub kind: SrcExprKind,
    pub span: Span,
}

impl SrcExpr {
    pub fn new(kind: SrcExprKind, span: Span) -> SrcExpr {
        SrcExpr { kind, span }
    }

    /// Rewrite every occurrence of the integer literal `from` to `to`.
    pub fn substitute_literal(&mut self, from: i64, to: i64) {
        match &mut self.kind {
            SrcExprKind::Number(n) => {
                if *n == from {
                    *n = to;
                }
            }
            SrcExprKind::Bool(_) | SrcExprKind::Var(_) => {}
            SrcExprKind::Bin(_, a, b) => {
                a.substitute_literal(from, to);
                b.substitute_literal(from, to);
            }
            SrcExprKind::Neg(a) | SrcExprKind::Not(a) => a.substitute_literal(from, to),
            SrcExprKind::Ite(c, t, e) => {
                c.substitute_literal(from, to);
                t.substitute_literal(from, to);
                e.substitute_literal(from, to);
            }
        }
    }

    fn strip_spans(&mut self) {
        self.span = Span::DUMMY;
        match &mut self.kind {
            SrcExprKind::Bin(_, a, b) => {
                a.strip_spans();
                b.strip_spans();
            }
            SrcExprKind::Neg(a) | SrcExprKind::Not(a) => a.strip_spans(),
            SrcExprKind::Ite(c, t, e) => {
                c.strip_spans();
                t.strip_spans();
                e.strip_spans();
            }
            _ => {}
        }
    }
}

/// Initializer of a declaration; a missing initializer is nondeterministic,
/// matching uninitialized C locals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Init {
    Expr(SrcExpr),
    Nondet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decl {
    pub name: String,
    pub init: Init,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IfCond {
    Nondet,
    Expr(SrcExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    /// `v = e;` where a nondet right-hand side is `None`.
    Assign { name: String, value: Option<SrcExpr> },
    /// Branches are kept as statement lists; `if (c) s;` parses as a
    /// singleton list so the printer can always emit braces.
    If { cond: IfCond, then: Vec<Stmt>, els: Option<Vec<Stmt>> },
    Break,
    Block(Vec<Stmt>),
    Assert(SrcExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceProgram {
    pub decls: Vec<Decl>,
    /// Defaults to `true` when the program has no `assume`.
    pub assume: SrcExpr,
    pub loop_guard: SrcExpr,
    pub body: Vec<Stmt>,
    /// Defaults to `true` when the program has no trailing `assert`.
    pub final_assert: SrcExpr,
}

impl SourceProgram {
    /// Rewrite integer literals program-wide (the `--subst` mechanism that
    /// scales benchmark bounds down to exhaustively checkable sizes).
    pub fn substitute_literal(&mut self, from: i64, to: i64) {
        for d in &mut self.decls {
            if let Init::Expr(e) = &mut d.init {
                e.substitute_literal(from, to);
            }
        }
        self.assume.substitute_literal(from, to);
        self.loop_guard.substitute_literal(from, to);
        for s in &mut self.body {
            substitute_stmt(s, from, to);
        }
        self.final_assert.substitute_literal(from, to);
    }

    /// Zero out all spans; used to compare ASTs structurally.
    pub fn strip_spans(mut self) -> SourceProgram {
        for d in &mut self.decls {
            d.span = Span::DUMMY;
            if let Init::Expr(e) = &mut d.init {
                e.strip_spans();
            }
        }
        self.assume.strip_spans();
        self.loop_guard.strip_spans();
        for s in &mut self.body {
            strip_stmt(s);
        }
        self.final_assert.strip_spans();
        self
    }
}

fn substitute_stmt(s: &mut Stmt, from: i64, to: i64) {
    match &mut s.kind {
        StmtKind::Assign { value, .. } => {
            if let Some(e) = value {
                e.substitute_literal(from, to);
            }
        }
        StmtKind::If { cond, then, els } => {
            if let IfCond::Expr(e) = cond {
                e.substitute_literal(from, to);
            }
            for s in then {
                substitute_stmt(s, from, to);
            }
            if let Some(els) = els {
                for s in els {
                    substitute_stmt(s, from, to);
                }
            }
        }
        StmtKind::Break => {}
        StmtKind::Block(stmts) => {
            for s in stmts {
                substitute_stmt(s, from, to);
            }
        }
        StmtKind::Assert(e) => e.substitute_literal(from, to),
    }
}

fn strip_stmt(s: &mut Stmt) {
    s.span = Span::DUMMY;
    match &mut s.kind {
        StmtKind::Assign { value, .. } => {
            if let Some(e) = value {
                e.strip_spans();
            }
        }
        StmtKind::If { cond, then, els } => {
            if let IfCond::Expr(e) = cond {
                e.strip_spans();
            }
            then.iter_mut().for_each(strip_stmt);
            if let Some(els) = els {
                els.iter_mut().for_each(strip_stmt);
            }
        }
        StmtKind::Break => {}
        StmtKind::Block(stmts) => stmts.iter_mut().for_each(strip_stmt),
        StmtKind::Assert(e) => e.strip_spans(),
    }
}

fn src_prec(e: &SrcExpr) -> u8 {
    match &e.kind {
        SrcExprKind::Bin(op, ..) => match op {
            SrcBinOp::Or => 1,
            SrcBinOp::And => 2,
            SrcBinOp::Eq
            | SrcBinOp::Ne
            | SrcBinOp::Lt
            | SrcBinOp::Le
            | SrcBinOp::Gt
            | SrcBinOp::Ge => 3,
            SrcBinOp::Add | SrcBinOp::Sub => 4,
            SrcBinOp::Mul => 5,
        },
        SrcExprKind::Neg(_) | SrcExprKind::Not(_) => 6,
        _ => 7,
    }
}

pub fn pretty_expr(e: &SrcExpr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn write_expr(out: &mut String, e: &SrcExpr, min_prec: u8) {
    let p = src_prec(e);
    let parens = p < min_prec;
    if parens {
        out.push('(');
    }
    match &e.kind {
        SrcExprKind::Number(n) => {
            let _ = write!(out, "{n}");
        }
        SrcExprKind::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        SrcExprKind::Var(v) => out.push_str(v),
        SrcExprKind::Bin(op, a, b) => {
            write_expr(out, a, p);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b, p + 1);
        }
        SrcExprKind::Neg(a) => {
            out.push('-');
            write_expr(out, a, 7);
        }
        SrcExprKind::Not(a) => {
            out.push('!');
            write_expr(out, a, 7);
        }
        SrcExprKind::Ite(c, t, el) => {
            out.push_str("ite(");
            write_expr(out, c, 0);
            out.push_str(", ");
            write_expr(out, t, 0);
            out.push_str(", ");
            write_expr(out, el, 0);
            out.push(')');
        }
    }
    if parens {
        out.push(')');
    }
}

/// Canonical program layout; `parse(pretty(p))` equals `p` modulo spans.
pub fn pretty_program(p: &SourceProgram) -> String {
    let mut out = String::new();
    for d in &p.decls {
        match &d.init {
            Init::Expr(e) => {
                let _ = writeln!(out, "int {} = {};", d.name, pretty_expr(e));
            }
            Init::Nondet => {
                let _ = writeln!(out, "int {} = *;", d.name);
            }
        }
    }
    if p.assume.kind != SrcExprKind::Bool(true) {
        let _ = writeln!(out, "assume({});", pretty_expr(&p.assume));
    }
    let _ = writeln!(out, "while ({}) {{", pretty_expr(&p.loop_guard));
    for s in &p.body {
        write_stmt(&mut out, s, 1);
    }
    out.push_str("}\n");
    if p.final_assert.kind != SrcExprKind::Bool(true) {
        let _ = writeln!(out, "assert({});", pretty_expr(&p.final_assert));
    }
    out
}

fn write_stmt(out: &mut String, s: &Stmt, indent: usize) {
    let pad = "    ".repeat(indent);
    match &s.kind {
        StmtKind::Assign { name, value } => match value {
            Some(e) => {
                let _ = writeln!(out, "{pad}{name} = {};", pretty_expr(e));
            }
            None => {
                let _ = writeln!(out, "{pad}{name} = *;");
            }
        },
        StmtKind::If { cond, then, els } => {
            let c = match cond {
                IfCond::Nondet => "*".to_string(),
                IfCond::Expr(e) => pretty_expr(e),
            };
            let _ = writeln!(out, "{pad}if ({c}) {{");
            for s in then {
                write_stmt(out, s, indent + 1);
            }
            match els {
                None => {
                    let _ = writeln!(out, "{pad}}}");
                }
                Some(els) => {
                    let _ = writeln!(out, "{pad}}} else {{");
                    for s in els {
                        write_stmt(out, s, indent + 1);
                    }
                    let _ = writeln!(out, "{pad}}}");
                }
            }
        }
        StmtKind::Break => {
            let _ = writeln!(out, "{pad}break;");
        }
        StmtKind::Block(stmts) => {
            let _ = writeln!(out, "{pad}{{");
            for s in stmts {
                write_stmt(out, s, indent + 1);
            }
            let _ = writeln!(out, "{pad}}}");
        }
        StmtKind::Assert(e) => {
            let _ = writeln!(out, "{pad}assert({});", pretty_expr(e));
        }
    }
}
