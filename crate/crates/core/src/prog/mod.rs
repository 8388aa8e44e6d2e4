//! Transactional program model and the `.tpl` front end.
//!
//! A [`Program`] is a list of processes, each an ordered list of
//! transactions. Transaction bodies are built from shared reads and writes,
//! register assignments, assertions, assumptions and conditionals. Bounded
//! `for` loops exist only between parsing and [`unroll`]; every program handed
//! to the explorer is loop-free.

mod eval;
mod parse;
mod unroll;

use std::collections::BTreeMap;
use std::fmt;

pub use eval::{eval_expr, RegisterValuation};
pub use parse::{parse_program, parse_program_with_bound, parse_raw};
pub use unroll::{unroll, DEFAULT_UNROLL};

/// Index of a shared variable in [`Program::shared_vars`].
pub type VarId = usize;

/// Errors produced while reading or normalising a program.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: undeclared variable `{name}`")]
    UndeclaredVariable { line: usize, col: usize, name: String },
    #[error("{line}:{col}: duplicate variable `{name}`")]
    DuplicateVariable { line: usize, col: usize, name: String },
    #[error("{line}:{col}: shared variable `{name}` used inside an expression")]
    SharedInExpression { line: usize, col: usize, name: String },
    #[error("process `{name}` has no transactions")]
    EmptyProcess { name: String },
    #[error("program declares no processes")]
    NoProcesses,
    #[error("loop over `{index}` has a non-constant bound")]
    NonConstantBound { index: String },
    #[error("loop index `{index}` is assigned inside its body")]
    LoopIndexAssigned { index: String },
    #[error("unroll bound must be positive")]
    ZeroBound,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub shared_vars: Vec<String>,
    pub processes: Vec<Process>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Process {
    pub name: String,
    pub transactions: Vec<Transaction>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    /// Optional label (`transaction t1 { .. }`), used only for display.
    pub name: Option<String>,
    pub body: Vec<Instruction>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instruction {
    SharedWrite { var: VarId, expr: Expr },
    SharedRead { reg: String, var: VarId },
    RegisterAssign { reg: String, expr: Expr },
    Assert(Expr),
    Assume(Expr),
    If { cond: Expr, then_branch: Vec<Instruction>, else_branch: Vec<Instruction> },
    /// `for index in start..end { body }`; removed by [`unroll`].
    Loop { index: String, start: Expr, end: Expr, body: Vec<Instruction> },
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
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(i64),
    Reg(String),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn reg(name: &str) -> Expr {
        Expr::Reg(name.to_string())
    }
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

impl Program {
    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.shared_vars.iter().position(|v| v == name)
    }

    pub fn var_name(&self, var: VarId) -> &str {
        &self.shared_vars[var]
    }

    pub fn num_transactions(&self) -> usize {
        self.processes.iter().map(|p| p.transactions.len()).sum()
    }

    /// True if some instruction anywhere is a [`Instruction::Loop`].
    pub fn has_loops(&self) -> bool {
        fn any(body: &[Instruction]) -> bool {
            body.iter().any(|i| match i {
                Instruction::Loop { .. } => true,
                Instruction::If { then_branch, else_branch, .. } => any(then_branch) || any(else_branch),
                _ => false,
            })
        }
        self.processes.iter().flat_map(|p| &p.transactions).any(|t| any(&t.body))
    }

    /// Display label `p<i>.t<j>` used in DOT output and reports.
    pub fn transaction_label(process: usize, position: usize) -> String {
        format!("p{process}.t{position}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Reg(r) => write!(f, "{r}"),
            Expr::Bin(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Not(e) => match **e {
                Expr::Const(c) if c < 0 => write!(f, "!({e})"),
                _ => write!(f, "!{e}"),
            },
        }
    }
}

struct Body<'a> {
    prog: &'a Program,
    body: &'a [Instruction],
    depth: usize,
}

impl fmt::Display for Body<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pad = "    ".repeat(self.depth);
        let nested = |body| Body { prog: self.prog, body, depth: self.depth + 1 };
        for ins in self.body {
            match ins {
                Instruction::SharedWrite { var, expr } => {
                    writeln!(f, "{pad}{} := {expr};", self.prog.var_name(*var))?
                }
                Instruction::SharedRead { reg, var } => {
                    writeln!(f, "{pad}{reg} := {};", self.prog.var_name(*var))?
                }
                Instruction::RegisterAssign { reg, expr } => writeln!(f, "{pad}{reg} := {expr};")?,
                Instruction::Assert(e) => writeln!(f, "{pad}assert({e});")?,
                Instruction::Assume(e) => writeln!(f, "{pad}assume({e});")?,
                Instruction::If { cond, then_branch, else_branch } => {
                    writeln!(f, "{pad}if ({cond}) {{")?;
                    write!(f, "{}", nested(then_branch))?;
                    if else_branch.is_empty() {
                        writeln!(f, "{pad}}}")?;
                    } else {
                        writeln!(f, "{pad}}} else {{")?;
                        write!(f, "{}", nested(else_branch))?;
                        writeln!(f, "{pad}}}")?;
                    }
                }
                Instruction::Loop { index, start, end, body } => {
                    writeln!(f, "{pad}for {index} in {start}..{end} {{")?;
                    write!(f, "{}", nested(body))?;
                    writeln!(f, "{pad}}}")?;
                }
            }
        }
        Ok(())
    }
}

/// Pretty-prints in the concrete syntax accepted by [`parse_raw`].
impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.shared_vars {
            writeln!(f, "var {v};")?;
        }
        for p in &self.processes {
            writeln!(f)?;
            writeln!(f, "process {} {{", p.name)?;
            for t in &p.transactions {
                match &t.name {
                    Some(n) => writeln!(f, "    transaction {n} {{")?,
                    None => writeln!(f, "    transaction {{")?,
                }
                write!(f, "{}", Body { prog: self, body: &t.body, depth: 2 })?;
                writeln!(f, "    }}")?;
            }
            writeln!(f, "}}")?;
        }
        Ok(())
    }
}

/// Registers mentioned anywhere in a process, in first-occurrence order.
pub fn registers_of(process: &Process) -> Vec<String> {
    fn expr(e: &Expr, out: &mut BTreeMap<String, usize>) {
        match e {
            Expr::Const(_) => {}
            Expr::Reg(r) => {
                let n = out.len();
                out.entry(r.clone()).or_insert(n);
            }
            Expr::Bin(_, l, r) => {
                expr(l, out);
                expr(r, out);
            }
            Expr::Not(e) => expr(e, out),
        }
    }
    fn body(b: &[Instruction], out: &mut BTreeMap<String, usize>) {
        for i in b {
            match i {
                Instruction::SharedWrite { expr: e, .. } | Instruction::Assert(e) | Instruction::Assume(e) => {
                    expr(e, out)
                }
                Instruction::SharedRead { reg, .. } => {
                    let n = out.len();
                    out.entry(reg.clone()).or_insert(n);
                }
                Instruction::RegisterAssign { reg, expr: e } => {
                    let n = out.len();
                    out.entry(reg.clone()).or_insert(n);
                    expr(e, out);
                }
                Instruction::If { cond, then_branch, else_branch } => {
                    expr(cond, out);
                    body(then_branch, out);
                    body(else_branch, out);
                }
                Instruction::Loop { body: b, .. } => body(b, out),
            }
        }
    }
    let mut seen = BTreeMap::new();
    for t in &process.transactions {
        body(&t.body, &mut seen);
    }
    let mut regs: Vec<(usize, String)> = seen.into_iter().map(|(k, v)| (v, k)).collect();
    regs.sort();
    regs.into_iter().map(|(_, r)| r).collect()
}
