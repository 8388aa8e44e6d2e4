use std::collections::BTreeMap;

use super::{BinOp, Expr};

/// Register name to value; registers never assigned read as 0.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct RegisterValuation {
    regs: BTreeMap<String, i64>,
}

impl RegisterValuation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, reg: &str) -> i64 {
        self.regs.get(reg).copied().unwrap_or(0)
    }

    pub fn set(&mut self, reg: &str, value: i64) {
        match self.regs.get_mut(reg) {
            Some(v) => *v = value,
            None => {
                self.regs.insert(reg.to_string(), value);
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, i64)> {
        self.regs.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl FromIterator<(String, i64)> for RegisterValuation {
    fn from_iter<I: IntoIterator<Item = (String, i64)>>(iter: I) -> Self {
        RegisterValuation { regs: iter.into_iter().collect() }
    }
}

/// Evaluates `e` with wrapping 64-bit arithmetic; comparisons and logical
/// operators yield 0 or 1 and treat any nonzero operand as true.
pub fn eval_expr(e: &Expr, regs: &RegisterValuation) -> i64 {
    match e {
        Expr::Const(c) => *c,
        Expr::Reg(r) => regs.get(r),
        Expr::Not(e) => (eval_expr(e, regs) == 0) as i64,
        Expr::Bin(op, l, r) => {
            let a = eval_expr(l, regs);
            let b = eval_expr(r, regs);
            match op {
                BinOp::Add => a.wrapping_add(b),
                BinOp::Sub => a.wrapping_sub(b),
                BinOp::Mul => a.wrapping_mul(b),
                BinOp::Eq => (a == b) as i64,
                BinOp::Ne => (a != b) as i64,
                BinOp::Lt => (a < b) as i64,
                BinOp::Le => (a <= b) as i64,
                BinOp::And => (a != 0 && b != 0) as i64,
                BinOp::Or => (a != 0 || b != 0) as i64,
            }
        }
    }
}
