//! Fulfilled semantics for weak causal consistency (CC).
//!
//! CC traces carry no coherence order: two writers of the same variable may
//! stay unordered forever. A read may take any writer that is not hidden by a
//! causally later writer of the same variable.

use crate::ccv::{ReadContext, ReadError};
use crate::prog::VarId;
use crate::trace::{Tid, Trace};

/// Axiom (i): if `t1 rf^x t2` and a writer `t3` of x reaches `t2` through
/// po ∪ rf, then `t3` is concurrent with `t1` or reaches it.
fn axiom_holds(tr: &Trace, t1: Tid, t2: Tid, x: VarId) -> bool {
    tr.writers(x)
        .into_iter()
        .filter(|&t3| t3 != t1 && tr.reach_porf(t3, t2))
        .all(|t3| tr.concurrent(t3, t1) || tr.reach_porf(t3, t1))
}

/// Partially-good check for CC: axiom (i) and acyclic po ∪ rf.
pub fn is_partially_good_cc(tr: &Trace) -> bool {
    tr.is_porf_acyclic() && tr.rf().iter().all(|&(t1, t2, x)| axiom_holds(tr, t1, t2, x))
}

/// For all writers `t, t'` of x with `t [po ∪ rf]+ t''` and `t' rf^x t''`:
/// `t` and `t'` are concurrent or `t [po ∪ rf]* t'`.
pub fn is_fulfilled_cc(tr: &Trace) -> bool {
    tr.rf().iter().all(|&(t1, t2, x)| axiom_holds(tr, t1, t2, x))
}

/// Writers of `var` readable under CC. A candidate `t'` is excluded when
/// 1. a writer `t3` of x satisfies `t' porf+ t3 porf+ t`, or
/// 2. the reader reads `y` from `t4` and a writer `t3 ≠ t4` of `y` satisfies
///    `t4 porf+ t3 porf* t'`.
pub fn readable_set_cc(ctx: ReadContext<'_>) -> Result<Vec<Tid>, ReadError> {
    ctx.validate()?;
    Ok(readable_cc_unchecked(ctx))
}

pub(crate) fn readable_cc_unchecked(ctx: ReadContext<'_>) -> Vec<Tid> {
    let ReadContext { trace: tr, reader: t, var: x } = ctx;
    let writers_x = tr.writers(x);
    let hidden_by: Vec<Tid> = writers_x.iter().copied().filter(|&w| tr.reach_porf(w, t)).collect();
    let other_reads: Vec<(VarId, Tid)> = tr.reads_of(t).filter(|&(y, _)| y != x).collect();
    let cond1 = |tp: Tid| hidden_by.iter().any(|&t3| t3 != tp && tr.reach_porf(tp, t3));
    let cond2 = |tp: Tid| {
        other_reads.iter().any(|&(y, t4)| {
            tr.writers(y)
                .into_iter()
                .any(|t3| t3 != t4 && tr.reach_porf(t4, t3) && (t3 == tp || tr.reach_porf(t3, tp)))
        })
    };
    writers_x.into_iter().filter(|&tp| tp != t && !cond1(tp) && !cond2(tp)).collect()
}

/// Adds the rf edge; CC keeps no coherence bookkeeping.
pub fn apply_read_cc(ctx: ReadContext<'_>, source: Tid) -> Result<Trace, ReadError> {
    if !readable_set_cc(ctx)?.contains(&source) {
        return Err(ReadError::NotReadable { src: source, reader: ctx.reader });
    }
    Ok(apply_read_cc_unchecked(ctx, source))
}

pub(crate) fn apply_read_cc_unchecked(ctx: ReadContext<'_>, source: Tid) -> Trace {
    let mut tr = ctx.trace.clone();
    tr.add_rf(source, ctx.reader, ctx.var).expect("reader validated");
    tr
}
