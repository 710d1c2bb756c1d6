//! Seeded single-node mutations of expressions and certificates, used by the
//! negative tests (a mutated proof must fail validation) and by the
//! stochastic search strategy.
//!
//! Mutations are kind-preserving and deliberately "far": comparison
//! operators flip to their reversal, arithmetic operators cycle, constants
//! step through the pool, variables rotate, a negation drops to its operand,
//! a conditional swaps its arms. Nearest-neighbour tweaks (like `<` to `<=`)
//! are avoided because they too often land on an equally valid certificate.

use rand::Rng;

use crate::certificate::DangerCertificate;
use crate::expr::{BinOp, Expr, ExprKind};

fn node_count(e: &Expr) -> usize {
    match e.kind() {
        ExprKind::Const(_) | ExprKind::BoolConst(_) | ExprKind::Var(_) | ExprKind::Nondet(_) => 1,
        ExprKind::Bin(_, a, b) => 1 + node_count(a) + node_count(b),
        ExprKind::Not(a) => 1 + node_count(a),
        ExprKind::Ite(c, t, el) => 1 + node_count(c) + node_count(t) + node_count(el),
    }
}

fn mutate_node(e: &Expr, pool: &[i64], n_vars: usize) -> Expr {
    match e.kind() {
        ExprKind::Const(c) => {
            let pos = pool.iter().position(|v| v == c);
            let next = match pos {
                Some(p) => pool[(p + 1) % pool.len()],
                None => pool[0],
            };
            Expr::int(next)
        }
        ExprKind::BoolConst(b) => Expr::bool(!b),
        ExprKind::Var(v) => {
            if n_vars >= 2 {
                Expr::var((v + 1) % n_vars)
            } else {
                Expr::int(pool[0])
            }
        }
        ExprKind::Nondet(s) => Expr::nondet(*s),
        ExprKind::Bin(op, a, b) => {
            let new = match op {
                BinOp::Add => BinOp::Sub,
                BinOp::Sub => BinOp::Mul,
                BinOp::Mul => BinOp::Add,
                BinOp::Eq => BinOp::Ne,
                BinOp::Ne => BinOp::Eq,
                BinOp::Lt => BinOp::Gt,
                BinOp::Gt => BinOp::Lt,
                BinOp::Le => BinOp::Ge,
                BinOp::Ge => BinOp::Le,
                BinOp::And => BinOp::Or,
                BinOp::Or => BinOp::And,
            };
            Expr::bin(new, a.clone(), b.clone())
        }
        ExprKind::Not(a) => a.clone(),
        ExprKind::Ite(c, t, el) => Expr::ite(c.clone(), el.clone(), t.clone()),
    }
}

fn mutate_at(e: &Expr, target: usize, counter: &mut usize, pool: &[i64], n_vars: usize) -> Expr {
    let here = *counter;
    *counter += 1;
    if here == target {
        return mutate_node(e, pool, n_vars);
    }
    match e.kind() {
        ExprKind::Bin(op, a, b) => Expr::bin(
            *op,
            mutate_at(a, target, counter, pool, n_vars),
            mutate_at(b, target, counter, pool, n_vars),
        ),
        ExprKind::Not(a) => Expr::not(mutate_at(a, target, counter, pool, n_vars)),
        ExprKind::Ite(c, t, el) => Expr::ite(
            mutate_at(c, target, counter, pool, n_vars),
            mutate_at(t, target, counter, pool, n_vars),
            mutate_at(el, target, counter, pool, n_vars),
        ),
        _ => e.clone(),
    }
}

/// Replace one uniformly chosen node of `e`.
pub fn mutate_expr<R: Rng>(e: &Expr, pool: &[i64], n_vars: usize, rng: &mut R) -> Expr {
    let target = rng.gen_range(0..node_count(e));
    let mut counter = 0;
    mutate_at(e, target, &mut counter, pool, n_vars)
}

/// Mutate a single node somewhere in (D, R, N), leaving x0 alone. The
/// mutated expression is chosen proportionally to its node count.
pub fn mutate_danger<R: Rng>(
    cert: &DangerCertificate,
    pool: &[i64],
    n_vars: usize,
    rng: &mut R,
) -> DangerCertificate {
    let d_n = node_count(&cert.d);
    let r_n = node_count(&cert.rank);
    let n_ns: Vec<usize> = cert.skolem.iter().map(node_count).collect();
    let total = d_n + r_n + n_ns.iter().sum::<usize>();
    let mut target = rng.gen_range(0..total);
    let mut out = cert.clone();
    if target < d_n {
        let mut counter = 0;
        out.d = mutate_at(&cert.d, target, &mut counter, pool, n_vars);
        return out;
    }
    target -= d_n;
    if target < r_n {
        let mut counter = 0;
        out.rank = mutate_at(&cert.rank, target, &mut counter, pool, n_vars);
        return out;
    }
    target -= r_n;
    for (i, &n) in n_ns.iter().enumerate() {
        if target < n {
            let mut counter = 0;
            out.skolem[i] = mutate_at(&cert.skolem[i], target, &mut counter, pool, n_vars);
            return out;
        }
        target -= n;
    }
    unreachable!("target index within total node count")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mutation_changes_exactly_one_node() {
        let e = Expr::eq(Expr::var(1), Expr::add(Expr::var(0), Expr::int(1)));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let m = mutate_expr(&e, &[0, 1, -1, 16], 2, &mut rng);
            assert_ne!(m, e);
            // size can only change via Not-dropping, which e lacks
            assert_eq!(
                super::node_count(&m),
                super::node_count(&e)
            );
        }
    }

    #[test]
    fn mutation_is_deterministic_for_a_seed() {
        let e = Expr::lt(Expr::var(0), Expr::var(1));
        let a = mutate_expr(&e, &[0, 1], 2, &mut ChaCha8Rng::seed_from_u64(3));
        let b = mutate_expr(&e, &[0, 1], 2, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }
}
