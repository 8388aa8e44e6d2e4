use super::{eval_expr, Expr, Instruction, Process, ProgError, Program, RegisterValuation, Transaction};

/// Iteration bound applied when none is given.
pub const DEFAULT_UNROLL: usize = 4;

/// Expands every `for` loop, keeping `min(range length, bound)` iterations.
///
/// The loop index is substituted by its constant value in the body; bounds
/// may refer to indices of enclosing loops but not to registers.
pub fn unroll(p: &Program, bound: usize) -> Result<Program, ProgError> {
    if bound == 0 {
        return Err(ProgError::ZeroBound);
    }
    let processes = p
        .processes
        .iter()
        .map(|proc| {
            let transactions = proc
                .transactions
                .iter()
                .map(|t| {
                    Ok(Transaction { name: t.name.clone(), body: expand(&t.body, bound, &mut Vec::new())? })
                })
                .collect::<Result<_, ProgError>>()?;
            Ok(Process { name: proc.name.clone(), transactions })
        })
        .collect::<Result<_, ProgError>>()?;
    Ok(Program { shared_vars: p.shared_vars.clone(), processes })
}

fn expand(body: &[Instruction], bound: usize, env: &mut Vec<(String, i64)>) -> Result<Vec<Instruction>, ProgError> {
    let mut out = Vec::new();
    for ins in body {
        match ins {
            Instruction::SharedWrite { var, expr } => {
                out.push(Instruction::SharedWrite { var: *var, expr: subst(expr, env) })
            }
            Instruction::SharedRead { reg, var } => {
                check_not_index(reg, env)?;
                out.push(Instruction::SharedRead { reg: reg.clone(), var: *var })
            }
            Instruction::RegisterAssign { reg, expr } => {
                check_not_index(reg, env)?;
                out.push(Instruction::RegisterAssign { reg: reg.clone(), expr: subst(expr, env) })
            }
            Instruction::Assert(e) => out.push(Instruction::Assert(subst(e, env))),
            Instruction::Assume(e) => out.push(Instruction::Assume(subst(e, env))),
            Instruction::If { cond, then_branch, else_branch } => out.push(Instruction::If {
                cond: subst(cond, env),
                then_branch: expand(then_branch, bound, env)?,
                else_branch: expand(else_branch, bound, env)?,
            }),
            Instruction::Loop { index, start, end, body } => {
                let lo = constant(index, &subst(start, env))?;
                let hi = constant(index, &subst(end, env))?;
                let len = if hi > lo { (hi - lo) as u64 } else { 0 };
                let iterations = len.min(bound as u64) as i64;
                for k in 0..iterations {
                    env.push((index.clone(), lo + k));
                    let expanded = expand(body, bound, env);
                    env.pop();
                    out.extend(expanded?);
                }
            }
        }
    }
    Ok(out)
}

fn check_not_index(reg: &str, env: &[(String, i64)]) -> Result<(), ProgError> {
    if env.iter().any(|(i, _)| i == reg) {
        return Err(ProgError::LoopIndexAssigned { index: reg.to_string() });
    }
    Ok(())
}

fn constant(index: &str, e: &Expr) -> Result<i64, ProgError> {
    fn closed(e: &Expr) -> bool {
        match e {
            Expr::Const(_) => true,
            Expr::Reg(_) => false,
            Expr::Bin(_, l, r) => closed(l) && closed(r),
            Expr::Not(e) => closed(e),
        }
    }
    if !closed(e) {
        return Err(ProgError::NonConstantBound { index: index.to_string() });
    }
    Ok(eval_expr(e, &RegisterValuation::new()))
}

fn subst(e: &Expr, env: &[(String, i64)]) -> Expr {
    match e {
        Expr::Const(_) => e.clone(),
        Expr::Reg(r) => match env.iter().rev().find(|(i, _)| i == r) {
            Some((_, v)) => Expr::Const(*v),
            None => e.clone(),
        },
        Expr::Bin(op, l, r) => Expr::bin(*op, subst(l, env), subst(r, env)),
        Expr::Not(inner) => Expr::not(subst(inner, env)),
    }
}
