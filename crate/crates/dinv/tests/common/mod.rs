//! Shared test support: corpus access and an independent reference
//! interpreter for the surface language, used as the oracle for the
//! desugaring-equivalence tests. It walks the AST directly with its own
//! arithmetic, so it shares no code path with the lowered semantics.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use dinv::ast::{IfCond, Init, SourceProgram, SrcBinOp, SrcExpr, SrcExprKind, Stmt, StmtKind};
use dinv::desugar::desugar;
use dinv::parser::parse;
use dinv::system::{LoopSystem, State};

pub fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

pub fn corpus_text(name: &str) -> String {
    std::fs::read_to_string(corpus(name)).expect("corpus file")
}

pub fn load_corpus(name: &str, width: u32, subst: &[(i64, i64)]) -> (SourceProgram, LoopSystem) {
    let mut p = parse(&corpus_text(name)).expect("corpus parses");
    for &(from, to) in subst {
        p.substitute_literal(from, to);
    }
    let l = desugar(&p, width).expect("corpus desugars");
    (p, l)
}

pub type Env = Vec<i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mode {
    /// Back at the loop head.
    Running,
    /// Left the loop via break; the final assertion still applies.
    Broke,
    /// An in-loop assertion failed; the run counts as an assertion failure.
    Failed,
}

/// Reference interpreter over the source AST.
pub struct SourceInterp<'a> {
    p: &'a SourceProgram,
    pub width: u32,
    names: Vec<String>,
}

fn wrap(v: i128, width: u32) -> i64 {
    let m = 1i128 << width;
    let r = v.rem_euclid(m);
    (if r >= m >> 1 { r - m } else { r }) as i64
}

impl<'a> SourceInterp<'a> {
    pub fn new(p: &'a SourceProgram, width: u32) -> SourceInterp<'a> {
        SourceInterp {
            p,
            width,
            names: p.decls.iter().map(|d| d.name.clone()).collect(),
        }
    }

    fn slot(&self, name: &str) -> usize {
        self.names.iter().position(|n| n == name).expect("declared variable")
    }

    fn int(&self, e: &SrcExpr, env: &Env) -> i64 {
        match &e.kind {
            SrcExprKind::Number(n) => wrap(*n as i128, self.width),
            SrcExprKind::Var(v) => env[self.slot(v)],
            SrcExprKind::Neg(a) => wrap(-(self.int(a, env) as i128), self.width),
            SrcExprKind::Bin(op, a, b) => {
                let x = self.int(a, env) as i128;
                let y = self.int(b, env) as i128;
                match op {
                    SrcBinOp::Add => wrap(x + y, self.width),
                    SrcBinOp::Sub => wrap(x - y, self.width),
                    SrcBinOp::Mul => wrap(x * y, self.width),
                    other => panic!("boolean operator {other:?} in integer position"),
                }
            }
            SrcExprKind::Ite(c, t, el) => {
                if self.boolean(c, env) {
                    self.int(t, env)
                } else {
                    self.int(el, env)
                }
            }
            other => panic!("boolean expression {other:?} in integer position"),
        }
    }

    fn boolean(&self, e: &SrcExpr, env: &Env) -> bool {
        match &e.kind {
            SrcExprKind::Bool(b) => *b,
            SrcExprKind::Not(a) => !self.boolean(a, env),
            SrcExprKind::Bin(op, a, b) => match op {
                SrcBinOp::And => self.boolean(a, env) && self.boolean(b, env),
                SrcBinOp::Or => self.boolean(a, env) || self.boolean(b, env),
                cmp => {
                    let x = self.int(a, env);
                    let y = self.int(b, env);
                    match cmp {
                        SrcBinOp::Eq => x == y,
                        SrcBinOp::Ne => x != y,
                        SrcBinOp::Lt => x < y,
                        SrcBinOp::Le => x <= y,
                        SrcBinOp::Gt => x > y,
                        SrcBinOp::Ge => x >= y,
                        _ => unreachable!(),
                    }
                }
            },
            other => panic!("integer expression {other:?} in boolean position"),
        }
    }

    fn all_values(&self) -> Vec<i64> {
        let count = 1u64 << self.width;
        (0..count).map(|raw| wrap(raw as i128, self.width)).collect()
    }

    /// Every initial environment admitted by the declarations and assume.
    pub fn initial_envs(&self) -> BTreeSet<Env> {
        let mut envs: Vec<Env> = vec![vec![]];
        for d in &self.p.decls {
            match &d.init {
                Init::Expr(e) => {
                    for env in &mut envs {
                        let v = self.int(e, env);
                        env.push(v);
                    }
                }
                Init::Nondet => {
                    let mut next = Vec::new();
                    for env in &envs {
                        for v in self.all_values() {
                            let mut e2 = env.clone();
                            e2.push(v);
                            next.push(e2);
                        }
                    }
                    envs = next;
                }
            }
        }
        envs.into_iter().filter(|env| self.boolean(&self.p.assume, env)).collect()
    }

    pub fn guard(&self, env: &Env) -> bool {
        self.boolean(&self.p.loop_guard, env)
    }

    pub fn final_assert(&self, env: &Env) -> bool {
        self.boolean(&self.p.final_assert, env)
    }

    /// All outcomes of one body execution from the loop head.
    pub fn body_successors(&self, env: &Env) -> BTreeSet<(Env, Mode)> {
        let mut configs = vec![(env.clone(), Mode::Running)];
        for s in &self.p.body {
            configs = self.exec(s, configs);
        }
        configs.into_iter().collect()
    }

    fn exec(&self, s: &Stmt, configs: Vec<(Env, Mode)>) -> Vec<(Env, Mode)> {
        let mut out = Vec::new();
        for (env, mode) in configs {
            if mode != Mode::Running {
                out.push((env, mode));
                continue;
            }
            match &s.kind {
                StmtKind::Assign { name, value } => {
                    let slot = self.slot(name);
                    match value {
                        Some(e) => {
                            let mut env = env;
                            env[slot] = self.int(e, &env);
                            out.push((env, Mode::Running));
                        }
                        None => {
                            for v in self.all_values() {
                                let mut e2 = env.clone();
                                e2[slot] = v;
                                out.push((e2, Mode::Running));
                            }
                        }
                    }
                }
                StmtKind::Break => out.push((env, Mode::Broke)),
                StmtKind::Assert(e) => {
                    if self.boolean(e, &env) {
                        out.push((env, Mode::Running));
                    } else {
                        out.push((env, Mode::Failed));
                    }
                }
                StmtKind::Block(stmts) => {
                    let mut inner = vec![(env, Mode::Running)];
                    for s in stmts {
                        inner = self.exec(s, inner);
                    }
                    out.extend(inner);
                }
                StmtKind::If { cond, then, els } => {
                    let run_branch = |branch: &[Stmt], env: Env| {
                        let mut inner = vec![(env, Mode::Running)];
                        for s in branch {
                            inner = self.exec(s, inner);
                        }
                        inner
                    };
                    match cond {
                        IfCond::Nondet => {
                            out.extend(run_branch(then, env.clone()));
                            match els {
                                Some(els) => out.extend(run_branch(els, env)),
                                None => out.push((env, Mode::Running)),
                            }
                        }
                        IfCond::Expr(c) => {
                            if self.boolean(c, &env) {
                                out.extend(run_branch(then, env));
                            } else {
                                match els {
                                    Some(els) => out.extend(run_branch(els, env)),
                                    None => out.push((env, Mode::Running)),
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Map a desugared full state to (source env, mode) using the latch values.
pub fn project(l: &LoopSystem, s: &State) -> (Env, Mode) {
    let env: Env = s.0[..l.n_source_vars].to_vec();
    let mut mode = Mode::Running;
    for (i, name) in l.vars.iter().enumerate().skip(l.n_source_vars) {
        if s.0[i] != 0 {
            mode = if name.starts_with("err") { Mode::Failed } else { Mode::Broke };
        }
    }
    (env, mode)
}

/// Check that the desugared system and the reference interpreter agree on
/// initial states, on per-head-state successor sets, and on exit verdicts,
/// over every configuration reachable from the initial set. This implies
/// their terminating trace sets coincide after projection.
pub fn assert_bisimilar(p: &SourceProgram, l: &LoopSystem) {
    let interp = SourceInterp::new(p, l.width);
    // initial sets agree
    let src_init = interp.initial_envs();
    let mut sys_init = BTreeSet::new();
    let count = l.state_count().expect("test-sized systems");
    let mut s = State(vec![]);
    for idx in 0..count {
        l.decode_state(idx, &mut s);
        if l.init_holds(&s) {
            let (env, mode) = project(l, &s);
            assert_eq!(mode, Mode::Running, "initial latch must be clear");
            sys_init.insert(env);
        }
    }
    assert_eq!(src_init, sys_init, "initial state sets differ");

    // walk the reachable source configurations
    let mut work: Vec<Env> = src_init.into_iter().collect();
    let mut seen: BTreeSet<Env> = work.iter().cloned().collect();
    while let Some(env) = work.pop() {
        let state = embed(l, &env, Mode::Running);
        if !interp.guard(&env) {
            assert!(!l.guard_holds(&state), "guard disagreement at {env:?}");
            assert_eq!(
                interp.final_assert(&env),
                l.assertion_holds(&state),
                "exit verdict disagreement at {env:?}"
            );
            continue;
        }
        assert!(l.guard_holds(&state), "guard disagreement at {env:?}");
        let src_succ = interp.body_successors(&env);
        let mut sys_succ = BTreeSet::new();
        let mut s2 = State(vec![]);
        l.for_each_nd(&state, |nd| {
            dinv::system::step_into(l, &state, nd, &mut s2);
            sys_succ.insert(project(l, &s2));
            false
        });
        assert_eq!(src_succ, sys_succ, "successor sets differ at {env:?}");

        for (env2, mode) in src_succ {
            match mode {
                Mode::Running => {
                    if seen.insert(env2.clone()) {
                        work.push(env2);
                    }
                }
                Mode::Broke => {
                    // the latched state must exit and agree with the source
                    let latched = embed(l, &env2, Mode::Broke);
                    assert!(!l.guard_holds(&latched));
                    assert_eq!(
                        interp.final_assert(&env2),
                        l.assertion_holds(&latched),
                        "break-exit verdict disagreement at {env2:?}"
                    );
                }
                Mode::Failed => {
                    let latched = embed(l, &env2, Mode::Failed);
                    assert!(!l.guard_holds(&latched));
                    assert!(
                        !l.assertion_holds(&latched),
                        "failed-assert exit must violate the assertion at {env2:?}"
                    );
                }
            }
        }
    }
}

fn embed(l: &LoopSystem, env: &Env, mode: Mode) -> State {
    let mut vals = env.clone();
    for name in l.vars.iter().skip(l.n_source_vars) {
        let set = match mode {
            Mode::Running => false,
            Mode::Broke => !name.starts_with("err"),
            Mode::Failed => name.starts_with("err"),
        };
        vals.push(if set { 1 } else { 0 });
    }
    State(vals)
}
