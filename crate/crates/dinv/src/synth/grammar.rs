//! Size-ordered expression enumeration for the synthesizer.
//!
//! Banks hold every producible expression of a given sort and size, built
//! lazily and in a fixed order: within one size, operators in index order
//! (Add, Sub, Mul | Eq, Ne, Lt, Le, Gt, Ge, And, Or, Not), then left-to-right
//! size splits, then operand bank indices. Size-1 atoms are the constant
//! pool in pool order followed by the variables in declaration order, and
//! `true`, `false` for the boolean sort. Candidate tuples are compared by
//! total size first, so "minimal satisfying candidate" is well defined and
//! testable.

use crate::desugar::program_literals;
use crate::expr::{fits_width, BinOp, Expr, Sort};
use crate::system::LoopSystem;

pub const DEFAULT_MAX_EXPR_SIZE: usize = 6;

#[derive(Debug, Clone)]
pub struct Grammar {
    /// Cap on the size of each synthesized expression.
    pub max_expr_size: usize,
    /// Constant pool in enumeration order: 0, 1, -1, program literals,
    /// then any explicitly requested constant range.
    pub consts: Vec<i64>,
    pub n_vars: usize,
    /// Conditional expressions inflate the banks; off by default.
    pub include_ite: bool,
}

impl Grammar {
    pub fn for_system(l: &LoopSystem, p: &crate::ast::SourceProgram) -> Grammar {
        let mut consts = vec![0, 1, -1];
        for lit in program_literals(p) {
            if fits_width(lit, l.width) && !consts.contains(&lit) {
                consts.push(lit);
            }
        }
        Grammar {
            max_expr_size: DEFAULT_MAX_EXPR_SIZE,
            consts,
            n_vars: l.vars.len(),
            include_ite: false,
        }
    }

    /// The --const-range escape hatch for programs whose proofs need
    /// constants that appear nowhere in the text.
    pub fn add_const_range(&mut self, lo: i64, hi: i64) {
        for v in lo..=hi {
            if !self.consts.contains(&v) {
                self.consts.push(v);
            }
        }
    }

    pub fn with_max_size(mut self, max: usize) -> Grammar {
        self.max_expr_size = max;
        self
    }
}

pub(crate) struct Banks {
    int: Vec<Vec<Expr>>,
    boolean: Vec<Vec<Expr>>,
    include_ite: bool,
}

const INT_OPS: [BinOp; 3] = [BinOp::Add, BinOp::Sub, BinOp::Mul];
const CMP_OPS: [BinOp; 6] = [BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge];
const BOOL_OPS: [BinOp; 2] = [BinOp::And, BinOp::Or];

impl Banks {
    pub fn new(g: &Grammar) -> Banks {
        let mut int1: Vec<Expr> = g.consts.iter().map(|&c| Expr::int(c)).collect();
        int1.extend((0..g.n_vars).map(Expr::var));
        let bool1 = vec![Expr::bool(true), Expr::bool(false)];
        Banks {
            int: vec![vec![], int1],
            boolean: vec![vec![], bool1],
            include_ite: g.include_ite,
        }
    }

    fn ensure(&mut self, size: usize) {
        while self.int.len() <= size {
            let k = self.int.len();
            let mut ints = Vec::new();
            for op in INT_OPS {
                for ls in 1..k - 1 {
                    let rs = k - 1 - ls;
                    for a in &self.int[ls] {
                        for b in &self.int[rs] {
                            ints.push(Expr::bin(op, a.clone(), b.clone()));
                        }
                    }
                }
            }
            if self.include_ite {
                for cs in 1..k.saturating_sub(2) {
                    for ts in 1..k - 1 - cs {
                        let es = k - 1 - cs - ts;
                        if es == 0 {
                            continue;
                        }
                        for c in &self.boolean[cs] {
                            for t in &self.int[ts] {
                                for e in &self.int[es] {
                                    ints.push(Expr::ite(c.clone(), t.clone(), e.clone()));
                                }
                            }
                        }
                    }
                }
            }
            let mut bools = Vec::new();
            for op in CMP_OPS {
                for ls in 1..k - 1 {
                    let rs = k - 1 - ls;
                    for a in &self.int[ls] {
                        for b in &self.int[rs] {
                            bools.push(Expr::bin(op, a.clone(), b.clone()));
                        }
                    }
                }
            }
            for op in BOOL_OPS {
                for ls in 1..k - 1 {
                    let rs = k - 1 - ls;
                    for a in &self.boolean[ls] {
                        for b in &self.boolean[rs] {
                            bools.push(Expr::bin(op, a.clone(), b.clone()));
                        }
                    }
                }
            }
            for a in &self.boolean[k - 1] {
                bools.push(Expr::not(a.clone()));
            }
            self.int.push(ints);
            self.boolean.push(bools);
        }
    }

    pub fn bank_len(&mut self, sort: Sort, size: usize) -> usize {
        self.ensure(size);
        match sort {
            Sort::Int => self.int[size].len(),
            Sort::Bool => self.boolean[size].len(),
        }
    }

    pub fn at(&self, sort: Sort, size: usize, idx: usize) -> &Expr {
        match sort {
            Sort::Int => &self.int[size][idx],
            Sort::Bool => &self.boolean[size][idx],
        }
    }
}

/// All ways to write `total` as an ordered sum of `parts` sizes, each within
/// `1..=cap`, in lexicographic order.
pub(crate) fn compositions(total: usize, parts: usize, cap: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(parts);
    fn rec(total: usize, parts: usize, cap: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            if total == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let lo = 1;
        let hi = cap.min(total.saturating_sub(parts - 1));
        for s in lo..=hi {
            cur.push(s);
            rec(total - s, parts - 1, cap, cur, out);
            cur.pop();
        }
    }
    rec(total, parts, cap, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_grammar() -> Grammar {
        Grammar { max_expr_size: 5, consts: vec![0, 1], n_vars: 2, include_ite: false }
    }

    #[test]
    fn atoms_come_in_pool_then_var_order() {
        let g = tiny_grammar();
        let mut b = Banks::new(&g);
        let n = b.bank_len(Sort::Int, 1);
        let atoms: Vec<String> = (0..n).map(|i| format!("{:?}", b.at(Sort::Int, 1, i))).collect();
        assert_eq!(atoms, vec!["0", "1", "v0", "v1"]);
        assert_eq!(b.bank_len(Sort::Bool, 1), 2);
    }

    #[test]
    fn size_three_counts() {
        let g = tiny_grammar();
        let mut b = Banks::new(&g);
        // 3 int ops * 4 * 4 atoms
        assert_eq!(b.bank_len(Sort::Int, 3), 48);
        // 6 comparisons * 16 + 2 bool ops * 4 + not over bool2
        let bool2 = 2; // not(true), not(false)
        assert_eq!(b.bank_len(Sort::Bool, 3), 96 + 2 * 4 + bool2);
    }

    #[test]
    fn even_int_sizes_are_empty_without_ite() {
        let g = tiny_grammar();
        let mut b = Banks::new(&g);
        assert_eq!(b.bank_len(Sort::Int, 2), 0);
        assert_eq!(b.bank_len(Sort::Int, 4), 0);
    }

    #[test]
    fn compositions_are_lexicographic() {
        assert_eq!(
            compositions(5, 3, 3),
            vec![vec![1, 1, 3], vec![1, 2, 2], vec![1, 3, 1], vec![2, 1, 2], vec![2, 2, 1], vec![3, 1, 1]]
        );
        assert!(compositions(3, 3, 0).is_empty());
    }
}
