//! Per-process execution of transaction bodies.
//!
//! Transaction bodies are flattened into jump code once per program. A
//! [`Thread`] runs one process: it executes local instructions eagerly and
//! stops at every shared access so the caller can decide where a read takes
//! its value from. Both the explorer and the oracles drive programs through
//! this module, so they agree on program semantics by construction.

use std::collections::BTreeMap;

use crate::prog::{eval_expr, Expr, Instruction, Program, RegisterValuation, VarId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Read { reg: String, var: VarId },
    Write { var: VarId, expr: Expr },
    Assign { reg: String, expr: Expr },
    Assert { expr: Expr, site: usize },
    Assume(Expr),
    /// Jump to `target` when `cond` evaluates to 0.
    BranchIfZero { cond: Expr, target: usize },
    Jump(usize),
}

/// Static location of an `assert`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertSite {
    pub process: usize,
    pub transaction: usize,
    /// Position among the asserts of that transaction.
    pub ordinal: usize,
    pub label: String,
}

/// A loop-free program compiled to jump code.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub program: Program,
    /// `code[p][t]` is the body of transaction `t` of process `p`.
    pub code: Vec<Vec<Vec<Op>>>,
    pub sites: Vec<AssertSite>,
}

impl Compiled {
    /// Panics if the program still contains loops.
    pub fn new(program: &Program) -> Compiled {
        assert!(!program.has_loops(), "program must be unrolled before compilation");
        let mut sites = Vec::new();
        let code = program
            .processes
            .iter()
            .enumerate()
            .map(|(p, proc)| {
                proc.transactions
                    .iter()
                    .enumerate()
                    .map(|(t, txn)| {
                        let mut ops = Vec::new();
                        let mut ordinal = 0;
                        flatten(&txn.body, &mut ops, &mut || {
                            let site = sites.len();
                            sites.push(AssertSite {
                                process: p,
                                transaction: t,
                                ordinal,
                                label: format!("p{p}.t{t}.assert{ordinal}"),
                            });
                            ordinal += 1;
                            site
                        });
                        ops
                    })
                    .collect()
            })
            .collect();
        Compiled { program: program.clone(), code, sites }
    }

    pub fn num_processes(&self) -> usize {
        self.code.len()
    }

    pub fn num_vars(&self) -> usize {
        self.program.shared_vars.len()
    }

    pub fn transactions_of(&self, process: usize) -> usize {
        self.code[process].len()
    }

    pub fn fresh_threads(&self) -> Vec<Thread> {
        (0..self.num_processes()).map(|_| Thread::default()).collect()
    }
}

fn flatten(body: &[Instruction], ops: &mut Vec<Op>, site: &mut dyn FnMut() -> usize) {
    for ins in body {
        match ins {
            Instruction::SharedWrite { var, expr } => ops.push(Op::Write { var: *var, expr: expr.clone() }),
            Instruction::SharedRead { reg, var } => ops.push(Op::Read { reg: reg.clone(), var: *var }),
            Instruction::RegisterAssign { reg, expr } => ops.push(Op::Assign { reg: reg.clone(), expr: expr.clone() }),
            Instruction::Assert(e) => {
                let s = site();
                ops.push(Op::Assert { expr: e.clone(), site: s })
            }
            Instruction::Assume(e) => ops.push(Op::Assume(e.clone())),
            Instruction::If { cond, then_branch, else_branch } => {
                let branch = ops.len();
                ops.push(Op::Jump(usize::MAX));
                flatten(then_branch, ops, site);
                if else_branch.is_empty() {
                    ops[branch] = Op::BranchIfZero { cond: cond.clone(), target: ops.len() };
                } else {
                    let skip = ops.len();
                    ops.push(Op::Jump(usize::MAX));
                    ops[branch] = Op::BranchIfZero { cond: cond.clone(), target: ops.len() };
                    flatten(else_branch, ops, site);
                    ops[skip] = Op::Jump(ops.len());
                }
            }
            Instruction::Loop { .. } => unreachable!("loops are removed by unroll"),
        }
    }
}

/// The next shared access of a running transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    /// A read of `var` is pending; answer it with [`Thread::complete_read`].
    Read { var: VarId },
    /// A write was performed and appended to the transaction log.
    Write { var: VarId, value: i64 },
    /// The body has finished.
    End,
}

/// Side effects of local instructions observed while advancing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    pub failed_asserts: Vec<usize>,
    pub assume_failed: bool,
}

/// Runtime state of one process.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Thread {
    /// Index of the next transaction to begin (or the running one).
    pub next: usize,
    pub regs: RegisterValuation,
    /// Program counter and write log of the running transaction.
    pub running: Option<(usize, Vec<(VarId, i64)>)>,
}

impl Thread {
    pub fn is_running(&self) -> bool {
        self.running.is_some()
    }

    pub fn begin(&mut self) {
        assert!(self.running.is_none(), "transaction already running");
        self.running = Some((0, Vec::new()));
    }

    /// Executes local instructions up to the next shared access or the end.
    pub fn advance(&mut self, code: &[Op], out: &mut Outcome) -> Step {
        let (pc, log) = self.running.as_mut().expect("no running transaction");
        loop {
            let Some(op) = code.get(*pc) else { return Step::End };
            match op {
                Op::Read { var, .. } => return Step::Read { var: *var },
                Op::Write { var, expr } => {
                    let value = eval_expr(expr, &self.regs);
                    log.push((*var, value));
                    *pc += 1;
                    return Step::Write { var: *var, value };
                }
                Op::Assign { reg, expr } => {
                    let v = eval_expr(expr, &self.regs);
                    self.regs.set(reg, v);
                    *pc += 1;
                }
                Op::Assert { expr, site } => {
                    if eval_expr(expr, &self.regs) == 0 {
                        out.failed_asserts.push(*site);
                    }
                    *pc += 1;
                }
                Op::Assume(expr) => {
                    if eval_expr(expr, &self.regs) == 0 {
                        out.assume_failed = true;
                    }
                    *pc += 1;
                }
                Op::BranchIfZero { cond, target } => {
                    *pc = if eval_expr(cond, &self.regs) == 0 { *target } else { *pc + 1 };
                }
                Op::Jump(target) => *pc = *target,
            }
        }
    }

    /// Value of the latest own write to `var` in the running transaction.
    pub fn local_value(&self, var: VarId) -> Option<i64> {
        let (_, log) = self.running.as_ref()?;
        log.iter().rev().find(|(v, _)| *v == var).map(|(_, val)| *val)
    }

    /// Stores `value` into the register of the pending read.
    pub fn complete_read(&mut self, code: &[Op], value: i64) {
        let (pc, _) = self.running.as_mut().expect("no running transaction");
        let Some(Op::Read { reg, .. }) = code.get(*pc) else { panic!("no pending read") };
        self.regs.set(reg, value);
        *pc += 1;
    }

    /// Closes the running transaction, returning its last write per variable.
    pub fn end(&mut self) -> BTreeMap<VarId, i64> {
        let (_, log) = self.running.take().expect("no running transaction");
        self.next += 1;
        log.into_iter().collect()
    }
}
