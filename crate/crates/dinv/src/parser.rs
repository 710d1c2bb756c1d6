//! Recursive descent parser for the mini-C input language.
//!
//! Grammar (canonical form; `assume` and the final `assert` are optional and
//! default to `true`):
//!
//! ```text
//! program := decl* ("assume" "(" bexpr ")" ";")?
//!            "while" "(" bexpr ")" block
//!            ("assert" "(" bexpr ")" ";")?
//! decl    := "int" id ("=" (expr | "*"))? ";"
//! stmt    := id "=" (expr | "*") ";" | id "++" ";" | id "--" ";"
//!          | "if" "(" ("*" | bexpr) ")" stmt ("else" stmt)?
//!          | "break" ";" | block | "assert" "(" bexpr ")" ";"
//! ```
//!
//! `*` is only a primary expression in the three nondet positions
//! (initializer, assignment right-hand side, if condition). Expressions also
//! accept `ite(c, a, b)`, which certificate files use.

use std::collections::HashSet;

use thiserror::Error;

use crate::ast::*;
use crate::lexer::{tokenize, LexError, Span, Tok, Token};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{0}")]
    Lex(#[from] LexError),
    #[error("parse error at {span}: expected {expected}, found \"{found}\"")]
    UnexpectedToken { expected: String, found: String, span: Span },
    #[error("parse error at {span}: {message}")]
    Unsupported { message: String, span: Span },
    #[error("error at {span}: variable \"{name}\" is declared twice")]
    DuplicateDecl { name: String, span: Span },
    #[error("error at {span}: variable \"{name}\" is not declared")]
    Undeclared { name: String, span: Span },
}

pub fn parse(text: &str) -> Result<SourceProgram, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let prog = p.program()?;
    validate(&prog)?;
    Ok(prog)
}

/// Parse a standalone expression (certificate files use this entry point).
pub fn parse_expression(text: &str) -> Result<SrcExpr, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.bexpr()?;
    p.expect(Tok::Eof)?;
    Ok(e)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at(&self, tok: &Tok) -> bool {
        &self.peek().tok == tok
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.at(tok) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Token, ParseError> {
        if self.at(&tok) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        ParseError::UnexpectedToken {
            expected: expected.to_string(),
            found: self.peek().tok.to_string(),
            span: self.peek().span,
        }
    }

    fn ident(&mut self) -> Result<(String, Span), ParseError> {
        match &self.peek().tok {
            Tok::Ident(name) => {
                let name = name.clone();
                let span = self.peek().span;
                self.bump();
                Ok((name, span))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn program(&mut self) -> Result<SourceProgram, ParseError> {
        let mut decls = Vec::new();
        while self.at(&Tok::Int) {
            decls.push(self.decl()?);
        }
        let assume = if self.eat(&Tok::Assume) {
            self.expect(Tok::LParen)?;
            let e = self.bexpr()?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::Semi)?;
            e
        } else {
            SrcExpr::new(SrcExprKind::Bool(true), Span::DUMMY)
        };
        self.expect(Tok::While)?;
        self.expect(Tok::LParen)?;
        let loop_guard = self.bexpr()?;
        self.expect(Tok::RParen)?;
        self.expect(Tok::LBrace)?;
        let mut body = Vec::new();
        while !self.eat(&Tok::RBrace) {
            body.push(self.stmt()?);
        }
        let final_assert = if self.eat(&Tok::Assert) {
            self.expect(Tok::LParen)?;
            let e = self.bexpr()?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::Semi)?;
            e
        } else {
            SrcExpr::new(SrcExprKind::Bool(true), Span::DUMMY)
        };
        if self.at(&Tok::While) {
            return Err(ParseError::Unsupported {
                message: "only one top-level loop is supported".into(),
                span: self.peek().span,
            });
        }
        self.expect(Tok::Eof)?;
        Ok(SourceProgram { decls, assume, loop_guard, body, final_assert })
    }

    fn decl(&mut self) -> Result<Decl, ParseError> {
        let span = self.expect(Tok::Int)?.span;
        let (name, _) = self.ident()?;
        let init = if self.eat(&Tok::Assign) {
            if self.eat(&Tok::Star) {
                Init::Nondet
            } else {
                Init::Expr(self.expr()?)
            }
        } else {
            Init::Nondet
        };
        self.expect(Tok::Semi)?;
        Ok(Decl { name, init, span })
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let span = self.peek().span;
        match self.peek().tok.clone() {
            Tok::While => Err(ParseError::Unsupported {
                message: "nested loops are not supported".into(),
                span,
            }),
            Tok::Break => {
                self.bump();
                self.expect(Tok::Semi)?;
                Ok(Stmt { kind: StmtKind::Break, span })
            }
            Tok::Assert => {
                self.bump();
                self.expect(Tok::LParen)?;
                let e = self.bexpr()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                Ok(Stmt { kind: StmtKind::Assert(e), span })
            }
            Tok::LBrace => {
                self.bump();
                let mut stmts = Vec::new();
                while !self.eat(&Tok::RBrace) {
                    stmts.push(self.stmt()?);
                }
                Ok(Stmt { kind: StmtKind::Block(stmts), span })
            }
            Tok::If => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = if self.at(&Tok::Star) {
                    // Lone `*`; `* + 1` style conditions are not a thing.
                    self.bump();
                    IfCond::Nondet
                } else {
                    IfCond::Expr(self.bexpr()?)
                };
                self.expect(Tok::RParen)?;
                let then = self.branch()?;
                let els = if self.eat(&Tok::Else) { Some(self.branch()?) } else { None };
                Ok(Stmt { kind: StmtKind::If { cond, then, els }, span })
            }
            Tok::Ident(_) => {
                let (name, _) = self.ident()?;
                match self.peek().tok.clone() {
                    Tok::PlusPlus | Tok::MinusMinus => {
                        let op = if self.at(&Tok::PlusPlus) { SrcBinOp::Add } else { SrcBinOp::Sub };
                        self.bump();
                        self.expect(Tok::Semi)?;
                        let value = SrcExpr::new(
                            SrcExprKind::Bin(
                                op,
                                Box::new(SrcExpr::new(SrcExprKind::Var(name.clone()), span)),
                                Box::new(SrcExpr::new(SrcExprKind::Number(1), span)),
                            ),
                            span,
                        );
                        Ok(Stmt { kind: StmtKind::Assign { name, value: Some(value) }, span })
                    }
                    Tok::Assign => {
                        self.bump();
                        let value = if self.eat(&Tok::Star) { None } else { Some(self.expr()?) };
                        self.expect(Tok::Semi)?;
                        Ok(Stmt { kind: StmtKind::Assign { name, value }, span })
                    }
                    _ => Err(self.unexpected("\"=\", \"++\" or \"--\"")),
                }
            }
            _ => Err(self.unexpected("statement")),
        }
    }

    fn branch(&mut self) -> Result<Vec<Stmt>, ParseError> {
        if self.eat(&Tok::LBrace) {
            let mut stmts = Vec::new();
            while !self.eat(&Tok::RBrace) {
                stmts.push(self.stmt()?);
            }
            Ok(stmts)
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    // bexpr := bor
    fn bexpr(&mut self) -> Result<SrcExpr, ParseError> {
        let mut lhs = self.band()?;
        while self.at(&Tok::OrOr) {
            let span = self.bump().span;
            let rhs = self.band()?;
            lhs = SrcExpr::new(SrcExprKind::Bin(SrcBinOp::Or, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn band(&mut self) -> Result<SrcExpr, ParseError> {
        let mut lhs = self.comparison()?;
        while self.at(&Tok::AndAnd) {
            let span = self.bump().span;
            let rhs = self.comparison()?;
            lhs = SrcExpr::new(SrcExprKind::Bin(SrcBinOp::And, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn comparison(&mut self) -> Result<SrcExpr, ParseError> {
        let lhs = self.expr()?;
        let op = match self.peek().tok {
            Tok::EqEq => Some(SrcBinOp::Eq),
            Tok::NotEq => Some(SrcBinOp::Ne),
            Tok::Lt => Some(SrcBinOp::Lt),
            Tok::Le => Some(SrcBinOp::Le),
            Tok::Gt => Some(SrcBinOp::Gt),
            Tok::Ge => Some(SrcBinOp::Ge),
            _ => None,
        };
        match op {
            Some(op) => {
                let span = self.bump().span;
                let rhs = self.expr()?;
                Ok(SrcExpr::new(SrcExprKind::Bin(op, Box::new(lhs), Box::new(rhs)), span))
            }
            None => Ok(lhs),
        }
    }

    // expr := term (("+" | "-") term)*
    fn expr(&mut self) -> Result<SrcExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => SrcBinOp::Add,
                Tok::Minus => SrcBinOp::Sub,
                _ => break,
            };
            let span = self.bump().span;
            let rhs = self.term()?;
            lhs = SrcExpr::new(SrcExprKind::Bin(op, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<SrcExpr, ParseError> {
        let mut lhs = self.unary()?;
        while self.at(&Tok::Star) {
            let span = self.bump().span;
            let rhs = self.unary()?;
            lhs = SrcExpr::new(SrcExprKind::Bin(SrcBinOp::Mul, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<SrcExpr, ParseError> {
        let span = self.peek().span;
        if self.eat(&Tok::Minus) {
            let e = self.unary()?;
            // Fold a negated literal so width checks see the signed value.
            if let SrcExprKind::Number(n) = e.kind {
                return Ok(SrcExpr::new(SrcExprKind::Number(-n), span));
            }
            return Ok(SrcExpr::new(SrcExprKind::Neg(Box::new(e)), span));
        }
        if self.eat(&Tok::Not) {
            let e = self.unary()?;
            return Ok(SrcExpr::new(SrcExprKind::Not(Box::new(e)), span));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<SrcExpr, ParseError> {
        let span = self.peek().span;
        match self.peek().tok.clone() {
            Tok::Number(n) => {
                self.bump();
                Ok(SrcExpr::new(SrcExprKind::Number(n), span))
            }
            Tok::True => {
                self.bump();
                Ok(SrcExpr::new(SrcExprKind::Bool(true), span))
            }
            Tok::False => {
                self.bump();
                Ok(SrcExpr::new(SrcExprKind::Bool(false), span))
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(SrcExpr::new(SrcExprKind::Var(name), span))
            }
            Tok::Ite => {
                self.bump();
                self.expect(Tok::LParen)?;
                let c = self.bexpr()?;
                self.expect(Tok::Comma)?;
                let t = self.bexpr()?;
                self.expect(Tok::Comma)?;
                let e = self.bexpr()?;
                self.expect(Tok::RParen)?;
                Ok(SrcExpr::new(
                    SrcExprKind::Ite(Box::new(c), Box::new(t), Box::new(e)),
                    span,
                ))
            }
            Tok::LParen => {
                self.bump();
                let e = self.bexpr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

/// Enforce the program invariants: every variable declared exactly once,
/// every reference resolved, initializers only using earlier declarations.
fn validate(p: &SourceProgram) -> Result<(), ParseError> {
    let mut seen: HashSet<&str> = HashSet::new();
    for (i, d) in p.decls.iter().enumerate() {
        if !seen.insert(&d.name) {
            return Err(ParseError::DuplicateDecl { name: d.name.clone(), span: d.span });
        }
        if let Init::Expr(e) = &d.init {
            let earlier: HashSet<&str> =
                p.decls[..i].iter().map(|d| d.name.as_str()).collect();
            check_refs(e, &earlier)?;
        }
    }
    check_refs(&p.assume, &seen)?;
    check_refs(&p.loop_guard, &seen)?;
    for s in &p.body {
        check_stmt_refs(s, &seen)?;
    }
    check_refs(&p.final_assert, &seen)?;
    Ok(())
}

fn check_refs(e: &SrcExpr, scope: &HashSet<&str>) -> Result<(), ParseError> {
    match &e.kind {
        SrcExprKind::Var(name) => {
            if scope.contains(name.as_str()) {
                Ok(())
            } else {
                Err(ParseError::Undeclared { name: name.clone(), span: e.span })
            }
        }
        SrcExprKind::Number(_) | SrcExprKind::Bool(_) => Ok(()),
        SrcExprKind::Bin(_, a, b) => {
            check_refs(a, scope)?;
            check_refs(b, scope)
        }
        SrcExprKind::Neg(a) | SrcExprKind::Not(a) => check_refs(a, scope),
        SrcExprKind::Ite(c, t, el) => {
            check_refs(c, scope)?;
            check_refs(t, scope)?;
            check_refs(el, scope)
        }
    }
}

fn check_stmt_refs(s: &Stmt, scope: &HashSet<&str>) -> Result<(), ParseError> {
    match &s.kind {
        StmtKind::Assign { name, value } => {
            if !scope.contains(name.as_str()) {
                return Err(ParseError::Undeclared { name: name.clone(), span: s.span });
            }
            if let Some(e) = value {
                check_refs(e, scope)?;
            }
            Ok(())
        }
        StmtKind::If { cond, then, els } => {
            if let IfCond::Expr(e) = cond {
                check_refs(e, scope)?;
            }
            for s in then {
                check_stmt_refs(s, scope)?;
            }
            if let Some(els) = els {
                for s in els {
                    check_stmt_refs(s, scope)?;
                }
            }
            Ok(())
        }
        StmtKind::Break => Ok(()),
        StmtKind::Block(stmts) => {
            for s in stmts {
                check_stmt_refs(s, scope)?;
            }
            Ok(())
        }
        StmtKind::Assert(e) => check_refs(e, scope),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::pretty_program;

    const COUNTER_PAIR: &str = "int x = 0;
int y = 1;
while (x < 1000000) {
    x++;
    if (*) y++;
}
assert(x == y);
";

    #[test]
    fn parses_counter_pair_listing() {
        let p = parse(COUNTER_PAIR).unwrap();
        assert_eq!(p.decls.len(), 2);
        assert!(matches!(
            &p.loop_guard.kind,
            SrcExprKind::Bin(SrcBinOp::Lt, ..)
        ));
        assert_eq!(p.body.len(), 2);
        assert!(matches!(&p.body[0].kind, StmtKind::Assign { name, .. } if name == "x"));
        assert!(matches!(
            &p.body[1].kind,
            StmtKind::If { cond: IfCond::Nondet, .. }
        ));
        assert!(matches!(
            &p.final_assert.kind,
            SrcExprKind::Bin(SrcBinOp::Eq, ..)
        ));
    }

    #[test]
    fn parses_empty_body() {
        let p = parse("int x = 0; assume(true); while (x < 1) { } assert(true);").unwrap();
        assert!(p.body.is_empty());
        assert_eq!(p.assume.kind, SrcExprKind::Bool(true));
    }

    #[test]
    fn missing_paren_reports_expected_token() {
        let err = parse("while x < 1 {").unwrap_err();
        match err {
            ParseError::UnexpectedToken { expected, found, span } => {
                assert_eq!(expected, "(");
                assert_eq!(found, "x");
                assert_eq!((span.line, span.col), (1, 7));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_and_undeclared() {
        assert!(matches!(
            parse("int x = 0; int x = 1; while (x < 1) {}"),
            Err(ParseError::DuplicateDecl { .. })
        ));
        assert!(matches!(
            parse("int x = 0; while (x < y) {}"),
            Err(ParseError::Undeclared { .. })
        ));
        // Initializers may only use earlier declarations.
        assert!(matches!(
            parse("int x = y; int y = 0; while (x < 1) {}"),
            Err(ParseError::Undeclared { .. })
        ));
    }

    #[test]
    fn rejects_nested_and_multiple_loops() {
        assert!(matches!(
            parse("int x = 0; while (x < 1) { while (x < 1) {} }"),
            Err(ParseError::Unsupported { .. })
        ));
        assert!(matches!(
            parse("int x = 0; while (x < 1) {} while (x < 2) {}"),
            Err(ParseError::Unsupported { .. })
        ));
    }

    #[test]
    fn pretty_reparses_identically() {
        let p = parse(COUNTER_PAIR).unwrap();
        let printed = pretty_program(&p);
        let p2 = parse(&printed).unwrap();
        assert_eq!(p.strip_spans(), p2.strip_spans());
    }

    #[test]
    fn negative_literals_fold() {
        let e = parse_expression("x <= -5").unwrap();
        match e.kind {
            SrcExprKind::Bin(SrcBinOp::Le, _, rhs) => {
                assert_eq!(rhs.kind, SrcExprKind::Number(-5));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
