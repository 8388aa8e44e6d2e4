//! Fulfilled semantics for causal convergence (CCv).
//!
//! Under CCv every variable has a total coherence order. The explorer only
//! materialises co edges that are *forced*: if `t1 rf^x t2` and another writer
//! `t3` of `x` happens before `t2` through po and rf, then `t3 co^x t1`.
//! Because co never contributes to po ∪ rf, one round of forcing reaches the
//! fixed point, and a trace is consistent iff the forced edges leave
//! po ∪ rf ∪ co acyclic.

use crate::trace::{Trace, TraceError, TransactionId, Tid};
use crate::prog::VarId;

/// The pending external read of `var` by `reader`.
#[derive(Debug, Clone, Copy)]
pub struct ReadContext<'a> {
    pub trace: &'a Trace,
    pub reader: TransactionId,
    pub var: VarId,
}

impl<'a> ReadContext<'a> {
    pub fn new(trace: &'a Trace, reader: TransactionId, var: VarId) -> Self {
        ReadContext { trace, reader, var }
    }

    pub(crate) fn validate(&self) -> Result<(), ReadError> {
        if self.reader.is_init() || !self.trace.contains(self.reader) {
            return Err(ReadError::UnknownReader(self.reader));
        }
        if self.var >= self.trace.num_vars() {
            return Err(ReadError::UnknownVariable(self.var));
        }
        if self.trace.writes_var(self.reader, self.var) || self.trace.source(self.reader, self.var).is_some() {
            return Err(ReadError::NotExternal(self.reader, self.var));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReadError {
    #[error("unknown reader {0}")]
    UnknownReader(TransactionId),
    #[error("unknown variable {0}")]
    UnknownVariable(VarId),
    #[error("{0} does not read variable {1} externally")]
    NotExternal(TransactionId, VarId),
    #[error("{src} is not readable by {reader}")]
    NotReadable { src: TransactionId, reader: TransactionId },
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Every co edge forced by the current po and rf edges, excluding the
/// implicit edges out of initializers. An edge into an initializer marks an
/// inconsistent trace.
pub fn forced_co(tr: &Trace) -> Vec<(Tid, Tid, VarId)> {
    let mut out = Vec::new();
    for &(t1, t2, x) in tr.rf() {
        for t3 in tr.writers(x) {
            if t3 != t1 && !t3.is_init() && tr.reach_porf(t3, t2) {
                out.push((t3, t1, x));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Every writer of `x` that reaches a reader of `x` through po ∪ rf is
/// co-before (transitively) that reader's source.
pub fn is_fulfilled_ccv(tr: &Trace) -> bool {
    tr.rf().iter().all(|&(t1, t2, x)| {
        tr.writers(x)
            .into_iter()
            .filter(|&t| t != t1 && tr.reach_porf(t, t2))
            .all(|t| tr.co_before(t, t1, x))
    })
}

/// True iff the least fulfilled extension of `tr` exists and is partially
/// good, i.e. `tr` extends to a CCv-consistent total trace.
pub fn is_ccv_consistent(tr: &Trace) -> bool {
    if !tr.is_acyclic() {
        return false;
    }
    let mut closed = tr.clone();
    for (a, b, x) in forced_co(tr) {
        if b.is_init() {
            return false;
        }
        closed.add_co(a, b, x).expect("forced edges connect writers");
    }
    closed.is_acyclic()
}

/// Writers of `var` the reader may read from without breaking consistency.
///
/// A candidate `t'` is excluded when one of these patterns holds:
/// 1. a writer `t3` of x with `t' hb+ t3 porf+ t` hides `t'`;
/// 2. the reader already reads some `y` from `t4 ≠ t'` where both `t'` and
///    `t4` write both `x` and `y`;
/// 3. the reader reads `y` from `t4`, and some writer `t3` of `y` with
///    `t4 hb+ t3 porf* t'` would become co-before `t4`;
/// 4. `t'` writes `y`, the reader reads `y` from `t4`, and `t4 hb+ t3 porf+ t`
///    for a writer `t3` of x (so `t3 co t' co t4` closes a cycle);
/// 5. (chained) the co edges forced into `t'` and into several of the
///    reader's other sources close a cycle together, e.g.
///    `t4 hb+ t3' co^z t4' hb+ t3 co^y t4` where `t3, t3'` both precede `t'`.
///
/// Every co edge forced by the new rf edge ends at `t'` or at one of the
/// reader's existing sources ("ports"), so the last check is a cycle search
/// in the graph over ports; it subsumes the first four, which are kept as
/// the cheap common cases.
pub fn readable_set(ctx: ReadContext<'_>) -> Result<Vec<Tid>, ReadError> {
    ctx.validate()?;
    Ok(readable_unchecked(ctx))
}

pub(crate) fn readable_unchecked(ctx: ReadContext<'_>) -> Vec<Tid> {
    let ReadContext { trace: tr, reader: t, var: x } = ctx;
    let writers_x = tr.writers(x);
    let hidden_by: Vec<Tid> = writers_x.iter().copied().filter(|&w| tr.reach_porf(w, t)).collect();
    let other_reads: Vec<(VarId, Tid)> = tr.reads_of(t).filter(|&(y, _)| y != x).collect();
    let writers_y: Vec<Vec<Tid>> = (0..tr.num_vars()).map(|y| tr.writers(y)).collect();

    let cond1 = |tp: Tid| hidden_by.iter().any(|&t3| t3 != tp && tr.reach_hb(tp, t3));
    let cond2 = |tp: Tid| {
        other_reads.iter().any(|&(y, t4)| t4 != tp && tr.writes_var(tp, y) && tr.writes_var(t4, x))
    };
    let cond3 = |tp: Tid| {
        other_reads.iter().any(|&(y, t4)| {
            writers_y[y]
                .iter()
                .any(|&t3| t3 != t4 && tr.reach_hb(t4, t3) && (t3 == tp || tr.reach_porf(t3, tp)))
        })
    };
    let cond4 = |tp: Tid| {
        other_reads.iter().any(|&(y, t4)| {
            t4 != tp && tr.writes_var(tp, y) && hidden_by.iter().any(|&t3| t3 != tp && tr.reach_hb(t4, t3))
        })
    };
    let cond5 = |tp: Tid| other_reads.len() >= 2 && port_cycle(tr, tp, &hidden_by, &other_reads, &writers_y);
    writers_x
        .into_iter()
        .filter(|&tp| tp != t && !cond1(tp) && !cond2(tp) && !cond3(tp) && !cond4(tp) && !cond5(tp))
        .collect()
}

/// Cycle search over the ports `t'` and the reader's other sources. Port `u`
/// leads to port `v` when `u hb* s` for some `s` that the new rf edge forces
/// co-before `v`.
fn port_cycle(tr: &Trace, tp: Tid, hidden_by: &[Tid], other_reads: &[(VarId, Tid)], writers_y: &[Vec<Tid>]) -> bool {
    let mut ports = vec![tp];
    let mut into: Vec<Vec<Tid>> = vec![hidden_by.iter().copied().filter(|&s| s != tp).collect()];
    for &(y, t4) in other_reads {
        ports.push(t4);
        into.push(
            writers_y[y]
                .iter()
                .copied()
                .filter(|&s| s != t4 && (s == tp || tr.reach_porf(s, tp)))
                .collect(),
        );
    }
    let n = ports.len();
    let edge = |u: usize, v: usize| into[v].iter().any(|&s| s == ports[u] || tr.reach_hb(ports[u], s));
    // Closure over at most a handful of ports.
    let mut reach = vec![vec![false; n]; n];
    for (u, row) in reach.iter_mut().enumerate() {
        for (v, cell) in row.iter_mut().enumerate() {
            *cell = edge(u, v);
        }
    }
    for k in 0..n {
        for u in 0..n {
            if reach[u][k] {
                for v in 0..n {
                    if reach[k][v] {
                        reach[u][v] = true;
                    }
                }
            }
        }
    }
    (0..n).any(|u| reach[u][u])
}

/// Readable writers that already reach the reader through po ∪ rf.
pub fn visible_set(ctx: ReadContext<'_>) -> Result<Vec<Tid>, ReadError> {
    Ok(readable_set(ctx)?.into_iter().filter(|&w| ctx.trace.reach_porf(w, ctx.reader)).collect())
}

/// Adds `source rf^var reader` and every co edge the new edge forces.
pub fn apply_read(ctx: ReadContext<'_>, source: Tid) -> Result<Trace, ReadError> {
    if !readable_set(ctx)?.contains(&source) {
        return Err(ReadError::NotReadable { src: source, reader: ctx.reader });
    }
    Ok(apply_read_unchecked(ctx, source))
}

pub(crate) fn apply_read_unchecked(ctx: ReadContext<'_>, source: Tid) -> Trace {
    let mut tr = ctx.trace.clone();
    tr.add_rf(source, ctx.reader, ctx.var).expect("reader validated");
    saturate(&mut tr);
    tr
}

/// Adds all forced co edges in place.
pub(crate) fn saturate(tr: &mut Trace) {
    for (a, b, x) in forced_co(tr) {
        tr.add_co(a, b, x).expect("forced co edge into an initializer");
    }
}
