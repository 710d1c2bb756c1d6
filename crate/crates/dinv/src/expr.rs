//! Expression trees shared by programs, predicates, ranking functions and
//! skolem functions, plus their evaluation semantics.
//!
//! All integer arithmetic is fixed-width two's complement with wrap-around;
//! comparisons are signed. Ranking functions are evaluated at double width so
//! that expressions like `bound - x` stay monotone near the edges of the
//! program's value range.

use std::fmt;
use std::sync::Arc;

/// Variable index into `LoopSystem::vars`.
pub type VarId = usize;

/// Nondeterminism site id, 1-based to match the `n1, n2, ...` naming.
pub type SiteId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sort {
    Int,
    Bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
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

impl BinOp {
    pub fn sort(self) -> Sort {
        match self {
            BinOp::Add | BinOp::Sub | BinOp::Mul => Sort::Int,
            _ => Sort::Bool,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

#[derive(Debug, PartialEq, Eq, Hash)]
pub enum ExprKind {
    Const(i64),
    BoolConst(bool),
    Var(VarId),
    Nondet(SiteId),
    Bin(BinOp, Expr, Expr),
    Not(Expr),
    /// Conditional over int operands: `ite(c, t, e)`.
    Ite(Expr, Expr, Expr),
}

/// Reference-counted expression tree. Cloning is cheap, which the enumerative
/// synthesizer relies on when it combines bank entries into candidates.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Expr(Arc<ExprKind>);

impl Expr {
    pub fn kind(&self) -> &ExprKind {
        &self.0
    }

    pub fn int(v: i64) -> Expr {
        Expr(Arc::new(ExprKind::Const(v)))
    }

    pub fn bool(v: bool) -> Expr {
        Expr(Arc::new(ExprKind::BoolConst(v)))
    }

    pub fn var(id: VarId) -> Expr {
        Expr(Arc::new(ExprKind::Var(id)))
    }

    pub fn nondet(site: SiteId) -> Expr {
        Expr(Arc::new(ExprKind::Nondet(site)))
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul => {
                debug_assert_eq!(a.sort(), Sort::Int);
                debug_assert_eq!(b.sort(), Sort::Int);
            }
            BinOp::And | BinOp::Or => {
                debug_assert_eq!(a.sort(), Sort::Bool);
                debug_assert_eq!(b.sort(), Sort::Bool);
            }
            _ => {
                debug_assert_eq!(a.sort(), Sort::Int);
                debug_assert_eq!(b.sort(), Sort::Int);
            }
        }
        Expr(Arc::new(ExprKind::Bin(op, a, b)))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Mul, a, b)
    }

    pub fn eq(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Eq, a, b)
    }

    pub fn ne(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Ne, a, b)
    }

    pub fn lt(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Lt, a, b)
    }

    pub fn le(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Le, a, b)
    }

    pub fn gt(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Gt, a, b)
    }

    pub fn ge(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Ge, a, b)
    }

    pub fn not(a: Expr) -> Expr {
        debug_assert_eq!(a.sort(), Sort::Bool);
        Expr(Arc::new(ExprKind::Not(a)))
    }

    pub fn ite(c: Expr, t: Expr, e: Expr) -> Expr {
        debug_assert_eq!(c.sort(), Sort::Bool);
        debug_assert_eq!(t.sort(), Sort::Int);
        debug_assert_eq!(e.sort(), Sort::Int);
        Expr(Arc::new(ExprKind::Ite(c, t, e)))
    }

    /// `a && b` with constant-true absorption, used by the desugarer to keep
    /// generated guards readable.
    pub fn and(a: Expr, b: Expr) -> Expr {
        match (a.kind(), b.kind()) {
            (ExprKind::BoolConst(true), _) => b,
            (_, ExprKind::BoolConst(true)) => a,
            _ => Expr::bin(BinOp::And, a, b),
        }
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        match (a.kind(), b.kind()) {
            (ExprKind::BoolConst(false), _) => b,
            (_, ExprKind::BoolConst(false)) => a,
            _ => Expr::bin(BinOp::Or, a, b),
        }
    }

    /// `a -> b` encoded as `!a || b`.
    pub fn implies(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Or, Expr::not(a), b)
    }

    pub fn sort(&self) -> Sort {
        match self.kind() {
            ExprKind::Const(_) | ExprKind::Var(_) | ExprKind::Nondet(_) | ExprKind::Ite(..) => {
                Sort::Int
            }
            ExprKind::BoolConst(_) | ExprKind::Not(_) => Sort::Bool,
            ExprKind::Bin(op, ..) => op.sort(),
        }
    }

    /// Node count, the size measure used for candidate ordering.
    pub fn size(&self) -> usize {
        match self.kind() {
            ExprKind::Const(_)
            | ExprKind::BoolConst(_)
            | ExprKind::Var(_)
            | ExprKind::Nondet(_) => 1,
            ExprKind::Bin(_, a, b) => 1 + a.size() + b.size(),
            ExprKind::Not(a) => 1 + a.size(),
            ExprKind::Ite(c, t, e) => 1 + c.size() + t.size() + e.size(),
        }
    }

    pub fn mentions_nondet(&self) -> bool {
        match self.kind() {
            ExprKind::Nondet(_) => true,
            ExprKind::Const(_) | ExprKind::BoolConst(_) | ExprKind::Var(_) => false,
            ExprKind::Bin(_, a, b) => a.mentions_nondet() || b.mentions_nondet(),
            ExprKind::Not(a) => a.mentions_nondet(),
            ExprKind::Ite(c, t, e) => {
                c.mentions_nondet() || t.mentions_nondet() || e.mentions_nondet()
            }
        }
    }

    pub fn max_var(&self) -> Option<VarId> {
        match self.kind() {
            ExprKind::Var(v) => Some(*v),
            ExprKind::Const(_) | ExprKind::BoolConst(_) | ExprKind::Nondet(_) => None,
            ExprKind::Bin(_, a, b) => a.max_var().max(b.max_var()),
            ExprKind::Not(a) => a.max_var(),
            ExprKind::Ite(c, t, e) => c.max_var().max(t.max_var()).max(e.max_var()),
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", DisplayExpr { expr: self, names: None })
    }
}

/// Wrap `v` to a signed `width`-bit two's-complement value.
pub fn wrap(v: i128, width: u32) -> i64 {
    debug_assert!((1..=62).contains(&width));
    let m = 1i128 << width;
    let r = v.rem_euclid(m);
    (if r >= m >> 1 { r - m } else { r }) as i64
}

/// Signed value range of a width, inclusive.
pub fn value_range(width: u32) -> (i64, i64) {
    (-(1i64 << (width - 1)), (1i64 << (width - 1)) - 1)
}

pub fn fits_width(v: i64, width: u32) -> bool {
    let (lo, hi) = value_range(width);
    (lo..=hi).contains(&v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

impl Value {
    pub fn as_int(self) -> i64 {
        match self {
            Value::Int(v) => v,
            Value::Bool(_) => panic!("expected int value"),
        }
    }

    pub fn as_bool(self) -> bool {
        match self {
            Value::Bool(v) => v,
            Value::Int(_) => panic!("expected bool value"),
        }
    }
}

/// Evaluate `e` over the dense variable vector `vars` and nondet site values
/// `nd` (indexed `site - 1`), wrapping integer results at `width` bits.
///
/// Evaluation is total. An out-of-range variable or site index is an internal
/// invariant breach and panics.
pub fn eval(e: &Expr, vars: &[i64], nd: &[i64], width: u32) -> Value {
    match e.kind() {
        ExprKind::Const(c) => Value::Int(wrap(*c as i128, width)),
        ExprKind::BoolConst(b) => Value::Bool(*b),
        ExprKind::Var(v) => Value::Int(
            *vars
                .get(*v)
                .unwrap_or_else(|| panic!("unbound variable v{v}")),
        ),
        ExprKind::Nondet(s) => Value::Int(
            *nd.get((*s - 1) as usize)
                .unwrap_or_else(|| panic!("unbound nondet site n{s}")),
        ),
        ExprKind::Bin(op, a, b) => match op {
            BinOp::And => Value::Bool(
                eval(a, vars, nd, width).as_bool() && eval(b, vars, nd, width).as_bool(),
            ),
            BinOp::Or => Value::Bool(
                eval(a, vars, nd, width).as_bool() || eval(b, vars, nd, width).as_bool(),
            ),
            _ => {
                let x = eval(a, vars, nd, width).as_int();
                let y = eval(b, vars, nd, width).as_int();
                match op {
                    BinOp::Add => Value::Int(wrap(x as i128 + y as i128, width)),
                    BinOp::Sub => Value::Int(wrap(x as i128 - y as i128, width)),
                    BinOp::Mul => Value::Int(wrap(x as i128 * y as i128, width)),
                    BinOp::Eq => Value::Bool(x == y),
                    BinOp::Ne => Value::Bool(x != y),
                    BinOp::Lt => Value::Bool(x < y),
                    BinOp::Le => Value::Bool(x <= y),
                    BinOp::Gt => Value::Bool(x > y),
                    BinOp::Ge => Value::Bool(x >= y),
                    BinOp::And | BinOp::Or => unreachable!(),
                }
            }
        },
        ExprKind::Not(a) => Value::Bool(!eval(a, vars, nd, width).as_bool()),
        ExprKind::Ite(c, t, f) => {
            if eval(c, vars, nd, width).as_bool() {
                eval(t, vars, nd, width)
            } else {
                eval(f, vars, nd, width)
            }
        }
    }
}

pub fn eval_bool(e: &Expr, vars: &[i64], nd: &[i64], width: u32) -> bool {
    eval(e, vars, nd, width).as_bool()
}

pub fn eval_int(e: &Expr, vars: &[i64], nd: &[i64], width: u32) -> i64 {
    eval(e, vars, nd, width).as_int()
}

/// Ranking evaluation: same semantics but widened to `2 * width` bits (with
/// a 16-bit floor), so rankings like `bound - x` do not wrap over the
/// program's value range and explicit countdown rankings stay representable
/// for any path through a state space small enough to enumerate.
pub fn eval_rank(e: &Expr, vars: &[i64], width: u32) -> i64 {
    eval(e, vars, &[], rank_width(width)).as_int()
}

pub fn rank_width(width: u32) -> u32 {
    (2 * width).max(16)
}

fn prec(e: &Expr) -> u8 {
    match e.kind() {
        ExprKind::Bin(op, ..) => match op {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul => 5,
        },
        ExprKind::Not(_) => 6,
        _ => 7,
    }
}

pub struct DisplayExpr<'a> {
    pub expr: &'a Expr,
    pub names: Option<&'a [String]>,
}

impl<'a> DisplayExpr<'a> {
    fn write(&self, e: &Expr, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let p = prec(e);
        let parens = p < min_prec;
        if parens {
            write!(f, "(")?;
        }
        match e.kind() {
            ExprKind::Const(c) => write!(f, "{c}")?,
            ExprKind::BoolConst(b) => write!(f, "{b}")?,
            ExprKind::Var(v) => match self.names {
                Some(names) => write!(f, "{}", names[*v])?,
                None => write!(f, "v{v}")?,
            },
            ExprKind::Nondet(s) => write!(f, "n{s}")?,
            ExprKind::Bin(op, a, b) => {
                self.write(a, f, p)?;
                write!(f, " {} ", op.symbol())?;
                // Left-associative printing: the right operand needs strictly
                // higher precedence to omit parentheses.
                self.write(b, f, p + 1)?;
            }
            ExprKind::Not(a) => {
                write!(f, "!")?;
                self.write(a, f, p)?;
            }
            ExprKind::Ite(c, t, el) => {
                write!(f, "ite(")?;
                self.write(c, f, 0)?;
                write!(f, ", ")?;
                self.write(t, f, 0)?;
                write!(f, ", ")?;
                self.write(el, f, 0)?;
                write!(f, ")")?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for DisplayExpr<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_two_complement() {
        assert_eq!(wrap(255 + 1, 8), 0);
        assert_eq!(wrap(128, 8), -128);
        assert_eq!(wrap(-129, 8), 127);
        assert_eq!(wrap(5, 8), 5);
        assert_eq!(wrap(1, 1), -1);
    }

    #[test]
    fn eval_comparison() {
        // x < y at (x=0, y=1)
        let e = Expr::lt(Expr::var(0), Expr::var(1));
        assert_eq!(eval(&e, &[0, 1], &[], 8), Value::Bool(true));
    }

    #[test]
    fn eval_const() {
        assert_eq!(eval(&Expr::int(5), &[], &[], 8), Value::Int(5));
    }

    #[test]
    fn eval_wraps_at_width() {
        // width 8: 255 + 1 == 0 (255 normalizes to -1)
        let e = Expr::add(Expr::int(255), Expr::int(1));
        assert_eq!(eval(&e, &[], &[], 8), Value::Int(0));
    }

    #[test]
    fn rank_eval_is_widened() {
        // 16 - x at x = -128 stays 144 under width-16 ranking arithmetic
        let e = Expr::sub(Expr::int(16), Expr::var(0));
        assert_eq!(eval_rank(&e, &[-128], 8), 144);
    }

    #[test]
    fn display_minimal_parens() {
        let e = Expr::eq(Expr::var(1), Expr::add(Expr::var(0), Expr::int(1)));
        let names = vec!["x".to_string(), "y".to_string()];
        let s = format!(
            "{}",
            DisplayExpr { expr: &e, names: Some(&names) }
        );
        assert_eq!(s, "y == x + 1");

        let e2 = Expr::mul(Expr::add(Expr::var(0), Expr::int(1)), Expr::int(4));
        let s2 = format!(
            "{}",
            DisplayExpr { expr: &e2, names: Some(&names) }
        );
        assert_eq!(s2, "(x + 1) * 4");
    }
}
