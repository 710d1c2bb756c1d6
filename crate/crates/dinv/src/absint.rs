//! Forward interval analysis over the canonical loop shape, plus alarm
//! classification at the loop exit.
//!
//! Five program points are annotated: entry (after initialization and
//! assume), loop head, body entry (head filtered by the guard), body exit
//! (one transfer through the update vector), and loop exit (head filtered by
//! the negated guard). Interval endpoints are computed in wide arithmetic;
//! an operation whose result leaves the width-w value range goes to top, so
//! the boxes stay sound for wrap-around executions without modelling wrap.

use std::fmt;

use crate::expr::{value_range, Expr, ExprKind};
use crate::system::{LoopSystem, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub lo: i64,
    pub hi: i64,
}

impl Interval {
    fn hull(a: Interval, b: Interval) -> Interval {
        Interval { lo: a.lo.min(b.lo), hi: a.hi.max(b.hi) }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// One interval per variable, or an unreachable point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntervalBox {
    Bottom,
    Box(Vec<Interval>),
}

impl IntervalBox {
    pub fn is_bottom(&self) -> bool {
        matches!(self, IntervalBox::Bottom)
    }

    fn top(l: &LoopSystem) -> IntervalBox {
        let (lo, hi) = value_range(l.width);
        IntervalBox::Box(vec![Interval { lo, hi }; l.vars.len()])
    }

    fn join(a: &IntervalBox, b: &IntervalBox) -> IntervalBox {
        match (a, b) {
            (IntervalBox::Bottom, x) | (x, IntervalBox::Bottom) => x.clone(),
            (IntervalBox::Box(xs), IntervalBox::Box(ys)) => IntervalBox::Box(
                xs.iter().zip(ys).map(|(&x, &y)| Interval::hull(x, y)).collect(),
            ),
        }
    }

    pub fn contains(&self, s: &State) -> bool {
        match self {
            IntervalBox::Bottom => false,
            IntervalBox::Box(iv) => {
                iv.iter().zip(&s.0).all(|(i, &v)| i.lo <= v && v <= i.hi)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Entry,
    LoopHead,
    BodyEntry,
    BodyExit,
    LoopExit,
}

pub const LOCATIONS: [Location; 5] = [
    Location::Entry,
    Location::LoopHead,
    Location::BodyEntry,
    Location::BodyExit,
    Location::LoopExit,
];

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Location::Entry => "entry",
            Location::LoopHead => "loop-head",
            Location::BodyEntry => "body-entry",
            Location::BodyExit => "body-exit",
            Location::LoopExit => "loop-exit",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfgAnnotation {
    pub entry: IntervalBox,
    pub loop_head: IntervalBox,
    pub body_entry: IntervalBox,
    pub body_exit: IntervalBox,
    pub loop_exit: IntervalBox,
    /// False when the iteration cap forced widening to convergence.
    pub converged: bool,
}

impl CfgAnnotation {
    pub fn at(&self, loc: Location) -> &IntervalBox {
        match loc {
            Location::Entry => &self.entry,
            Location::LoopHead => &self.loop_head,
            Location::BodyEntry => &self.body_entry,
            Location::BodyExit => &self.body_exit,
            Location::LoopExit => &self.loop_exit,
        }
    }

    pub fn report(&self, l: &LoopSystem) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for loc in LOCATIONS {
            let _ = write!(out, "{loc}:");
            match self.at(loc) {
                IntervalBox::Bottom => {
                    let _ = writeln!(out, " bottom");
                }
                IntervalBox::Box(iv) => {
                    for (name, i) in l.vars.iter().zip(iv) {
                        let _ = write!(out, " {name} in {i}");
                    }
                    let _ = writeln!(out);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AnalyzeOptions {
    pub max_iterations: u64,
    /// Start widening unstable bounds after this many Kleene iterations;
    /// `None` iterates purely.
    pub widen_after: Option<u64>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions { max_iterations: 100_000, widen_after: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AbsBool {
    True,
    False,
    Maybe,
}

fn norm(lo: i128, hi: i128, width: u32) -> Interval {
    let (wlo, whi) = value_range(width);
    if lo >= wlo as i128 && hi <= whi as i128 {
        Interval { lo: lo as i64, hi: hi as i64 }
    } else {
        Interval { lo: wlo, hi: whi }
    }
}

fn abs_int(e: &Expr, iv: &[Interval], width: u32) -> Interval {
    match e.kind() {
        ExprKind::Const(c) => norm(*c as i128, *c as i128, width),
        ExprKind::Var(v) => iv[*v],
        ExprKind::Nondet(_) => {
            let (lo, hi) = value_range(width);
            Interval { lo, hi }
        }
        ExprKind::Bin(op, a, b) => {
            use crate::expr::BinOp::*;
            let x = abs_int(a, iv, width);
            let y = abs_int(b, iv, width);
            match op {
                Add => norm(x.lo as i128 + y.lo as i128, x.hi as i128 + y.hi as i128, width),
                Sub => norm(x.lo as i128 - y.hi as i128, x.hi as i128 - y.lo as i128, width),
                Mul => {
                    let p = [
                        x.lo as i128 * y.lo as i128,
                        x.lo as i128 * y.hi as i128,
                        x.hi as i128 * y.lo as i128,
                        x.hi as i128 * y.hi as i128,
                    ];
                    norm(
                        *p.iter().min().expect("nonempty"),
                        *p.iter().max().expect("nonempty"),
                        width,
                    )
                }
                _ => unreachable!("int eval of a boolean operator"),
            }
        }
        ExprKind::Ite(c, t, el) => match abs_bool(c, iv, width) {
            AbsBool::True => abs_int(t, iv, width),
            AbsBool::False => abs_int(el, iv, width),
            AbsBool::Maybe => Interval::hull(abs_int(t, iv, width), abs_int(el, iv, width)),
        },
        ExprKind::BoolConst(_) | ExprKind::Not(_) => {
            unreachable!("int eval of a boolean expression")
        }
    }
}

fn abs_bool(e: &Expr, iv: &[Interval], width: u32) -> AbsBool {
    use crate::expr::BinOp::*;
    match e.kind() {
        ExprKind::BoolConst(true) => AbsBool::True,
        ExprKind::BoolConst(false) => AbsBool::False,
        ExprKind::Not(a) => match abs_bool(a, iv, width) {
            AbsBool::True => AbsBool::False,
            AbsBool::False => AbsBool::True,
            AbsBool::Maybe => AbsBool::Maybe,
        },
        ExprKind::Bin(op, a, b) => match op {
            And => match (abs_bool(a, iv, width), abs_bool(b, iv, width)) {
                (AbsBool::False, _) | (_, AbsBool::False) => AbsBool::False,
                (AbsBool::True, AbsBool::True) => AbsBool::True,
                _ => AbsBool::Maybe,
            },
            Or => match (abs_bool(a, iv, width), abs_bool(b, iv, width)) {
                (AbsBool::True, _) | (_, AbsBool::True) => AbsBool::True,
                (AbsBool::False, AbsBool::False) => AbsBool::False,
                _ => AbsBool::Maybe,
            },
            Eq | Ne | Lt | Le | Gt | Ge => {
                let x = abs_int(a, iv, width);
                let y = abs_int(b, iv, width);
                let (t, f) = match op {
                    Lt => (x.hi < y.lo, x.lo >= y.hi),
                    Le => (x.hi <= y.lo, x.lo > y.hi),
                    Gt => (x.lo > y.hi, x.hi <= y.lo),
                    Ge => (x.lo >= y.hi, x.hi < y.lo),
                    Eq => (x.lo == x.hi && y.lo == y.hi && x.lo == y.lo, x.hi < y.lo || y.hi < x.lo),
                    Ne => (x.hi < y.lo || y.hi < x.lo, x.lo == x.hi && y.lo == y.hi && x.lo == y.lo),
                    _ => unreachable!(),
                };
                if t {
                    AbsBool::True
                } else if f {
                    AbsBool::False
                } else {
                    AbsBool::Maybe
                }
            }
            Add | Sub | Mul => unreachable!("bool eval of an arithmetic operator"),
        },
        _ => unreachable!("bool eval of an integer expression"),
    }
}

fn negate_cmp(op: crate::expr::BinOp) -> crate::expr::BinOp {
    use crate::expr::BinOp::*;
    match op {
        Eq => Ne,
        Ne => Eq,
        Lt => Ge,
        Le => Gt,
        Gt => Le,
        Ge => Lt,
        other => other,
    }
}

/// Keep only the part of `bx` that can satisfy `e` (when `pos`) or its
/// negation. Sound: states are only dropped when the condition is
/// definitely violated.
fn filter(bx: &IntervalBox, e: &Expr, pos: bool, width: u32) -> IntervalBox {
    use crate::expr::BinOp::*;
    let IntervalBox::Box(iv) = bx else {
        return IntervalBox::Bottom;
    };
    match e.kind() {
        ExprKind::BoolConst(b) => {
            if *b == pos {
                bx.clone()
            } else {
                IntervalBox::Bottom
            }
        }
        ExprKind::Not(a) => filter(bx, a, !pos, width),
        ExprKind::Bin(And, a, b) if pos => {
            filter(&filter(bx, a, true, width), b, true, width)
        }
        ExprKind::Bin(And, a, b) => IntervalBox::join(
            &filter(bx, a, false, width),
            &filter(bx, b, false, width),
        ),
        ExprKind::Bin(Or, a, b) if pos => IntervalBox::join(
            &filter(bx, a, true, width),
            &filter(bx, b, true, width),
        ),
        ExprKind::Bin(Or, a, b) => filter(&filter(bx, a, false, width), b, false, width),
        ExprKind::Bin(op, a, b) if op.is_comparison() => {
            let op = if pos { *op } else { negate_cmp(*op) };
            match abs_cmp_holds(op, a, b, iv, width) {
                AbsBool::False => return IntervalBox::Bottom,
                AbsBool::True => return bx.clone(),
                AbsBool::Maybe => {}
            }
            let mut iv = iv.clone();
            refine(&mut iv, op, a, b, width);
            refine(&mut iv, flip(op), b, a, width);
            if iv.iter().any(|i| i.lo > i.hi) {
                IntervalBox::Bottom
            } else {
                IntervalBox::Box(iv)
            }
        }
        _ => bx.clone(),
    }
}

fn abs_cmp_holds(
    op: crate::expr::BinOp,
    a: &Expr,
    b: &Expr,
    iv: &[Interval],
    width: u32,
) -> AbsBool {
    let cmp = Expr::bin(op, a.clone(), b.clone());
    abs_bool(&cmp, iv, width)
}

fn flip(op: crate::expr::BinOp) -> crate::expr::BinOp {
    use crate::expr::BinOp::*;
    match op {
        Lt => Gt,
        Le => Ge,
        Gt => Lt,
        Ge => Le,
        other => other,
    }
}

/// If `a` is a variable, narrow its interval against `op b`.
fn refine(iv: &mut [Interval], op: crate::expr::BinOp, a: &Expr, b: &Expr, width: u32) {
    use crate::expr::BinOp::*;
    let ExprKind::Var(v) = a.kind() else {
        return;
    };
    let rb = abs_int(b, iv, width);
    let cur = &mut iv[*v];
    match op {
        Lt => cur.hi = cur.hi.min(rb.hi.saturating_sub(1)),
        Le => cur.hi = cur.hi.min(rb.hi),
        Gt => cur.lo = cur.lo.max(rb.lo.saturating_add(1)),
        Ge => cur.lo = cur.lo.max(rb.lo),
        Eq => {
            cur.lo = cur.lo.max(rb.lo);
            cur.hi = cur.hi.min(rb.hi);
        }
        Ne => {
            if rb.lo == rb.hi {
                if cur.lo == rb.lo {
                    cur.lo = cur.lo.saturating_add(1);
                }
                if cur.hi == rb.lo {
                    cur.hi = cur.hi.saturating_sub(1);
                }
            }
        }
        _ => {}
    }
}

fn transfer(l: &LoopSystem, bx: &IntervalBox) -> IntervalBox {
    let IntervalBox::Box(iv) = bx else {
        return IntervalBox::Bottom;
    };
    IntervalBox::Box(l.updates.iter().map(|u| abs_int(u, iv, l.width)).collect())
}

fn widen(l: &LoopSystem, old: &IntervalBox, new: &IntervalBox) -> IntervalBox {
    let (lo_w, hi_w) = value_range(l.width);
    match (old, new) {
        (IntervalBox::Bottom, x) | (x, IntervalBox::Bottom) => x.clone(),
        (IntervalBox::Box(xs), IntervalBox::Box(ys)) => IntervalBox::Box(
            xs.iter()
                .zip(ys)
                .map(|(x, y)| Interval {
                    lo: if y.lo < x.lo { lo_w } else { x.lo },
                    hi: if y.hi > x.hi { hi_w } else { x.hi },
                })
                .collect(),
        ),
    }
}

/// Kleene iteration to a post-fixpoint of the loop-head box.
pub fn analyze(l: &LoopSystem, opts: &AnalyzeOptions) -> CfgAnnotation {
    let entry = filter(&IntervalBox::top(l), &l.init, true, l.width);
    let mut head = IntervalBox::Bottom;
    let mut body_exit = IntervalBox::Bottom;
    let converged;
    let mut iters = 0u64;
    loop {
        let joined = IntervalBox::join(&entry, &body_exit);
        let widening =
            opts.widen_after.map_or(false, |w| iters >= w) || iters >= opts.max_iterations;
        let next_head = if widening { widen(l, &head, &joined) } else { joined };
        if next_head == head && iters > 0 {
            converged = iters <= opts.max_iterations;
            break;
        }
        head = next_head;
        body_exit = transfer(l, &filter(&head, &l.guard, true, l.width));
        iters += 1;
        if iters > opts.max_iterations.saturating_add(4 * l.vars.len() as u64 + 4) {
            // widening monotonically pins each bound to the full range, so
            // this is unreachable; keep a hard stop anyway
            head = IntervalBox::top(l);
            converged = false;
            break;
        }
    }
    let body_entry = filter(&head, &l.guard, true, l.width);
    let body_exit = transfer(l, &body_entry);
    let loop_exit = filter(&head, &l.guard, false, l.width);
    CfgAnnotation { entry, loop_head: head, body_entry, body_exit, loop_exit, converged }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlarmVerdict {
    /// Sound: the assertion holds on every concrete execution.
    Safe,
    /// Inconclusive: the abstraction admits an assertion violation.
    Alarm,
}

/// Alarm iff the loop-exit box intersected with the negated assertion is
/// nonempty.
pub fn classify_alarm(ann: &CfgAnnotation, l: &LoopSystem) -> AlarmVerdict {
    if filter(&ann.loop_exit, &l.assertion, false, l.width).is_bottom() {
        AlarmVerdict::Safe
    } else {
        AlarmVerdict::Alarm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::desugar::desugar;
    use crate::parser::parse;

    fn countdown() -> LoopSystem {
        let p = parse(
            "int y = *; assume(y >= 100 && y <= 200); while (y > 0) { y = y - 2; } assert(y == 0);",
        )
        .unwrap();
        desugar(&p, 16).unwrap()
    }

    fn boxed(ann: &CfgAnnotation, loc: Location) -> Vec<(i64, i64)> {
        match ann.at(loc) {
            IntervalBox::Box(iv) => iv.iter().map(|i| (i.lo, i.hi)).collect(),
            IntervalBox::Bottom => panic!("expected a box at {loc}"),
        }
    }

    #[test]
    fn countdown_boxes_are_exact() {
        let l = countdown();
        let ann = analyze(&l, &AnalyzeOptions::default());
        assert!(ann.converged);
        assert_eq!(boxed(&ann, Location::Entry), vec![(100, 200)]);
        assert_eq!(boxed(&ann, Location::LoopHead), vec![(-1, 200)]);
        assert_eq!(boxed(&ann, Location::BodyEntry), vec![(1, 200)]);
        assert_eq!(boxed(&ann, Location::BodyExit), vec![(-1, 198)]);
        assert_eq!(boxed(&ann, Location::LoopExit), vec![(-1, 0)]);
        assert_eq!(classify_alarm(&ann, &l), AlarmVerdict::Alarm);
    }

    #[test]
    fn unreachable_program_is_bottom_everywhere() {
        let p = parse("int x = 0; assume(false); while (x < 2) { x++; } assert(x == 0);")
            .unwrap();
        let l = desugar(&p, 8).unwrap();
        let ann = analyze(&l, &AnalyzeOptions::default());
        for loc in LOCATIONS {
            assert!(ann.at(loc).is_bottom(), "{loc} should be bottom");
        }
        assert_eq!(classify_alarm(&ann, &l), AlarmVerdict::Safe);
    }

    #[test]
    fn zero_iteration_loop_exit_is_filtered_entry() {
        let p = parse("int x = 5; while (x < 2) { x++; } assert(x == 5);").unwrap();
        let l = desugar(&p, 8).unwrap();
        let ann = analyze(&l, &AnalyzeOptions::default());
        assert_eq!(boxed(&ann, Location::Entry), vec![(5, 5)]);
        assert_eq!(boxed(&ann, Location::LoopExit), vec![(5, 5)]);
        assert!(ann.at(Location::BodyEntry).is_bottom());
        assert_eq!(classify_alarm(&ann, &l), AlarmVerdict::Safe);
    }

    #[test]
    fn busy_safe_loop_classifies_safe() {
        let p = parse("int x = 0; int y = 0; while (x < 10) { y++; } assert(x < 10);").unwrap();
        let l = desugar(&p, 8).unwrap();
        let ann = analyze(&l, &AnalyzeOptions::default());
        assert!(ann.at(Location::LoopExit).is_bottom());
        assert_eq!(classify_alarm(&ann, &l), AlarmVerdict::Safe);
    }

    #[test]
    fn trivial_assertion_is_safe_even_when_exits_exist() {
        let p = parse("int x = *; while (x < 4) { x++; }").unwrap();
        let l = desugar(&p, 8).unwrap();
        let ann = analyze(&l, &AnalyzeOptions::default());
        assert_eq!(classify_alarm(&ann, &l), AlarmVerdict::Safe);
    }
}
