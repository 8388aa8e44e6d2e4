//! Readable sets by tentative insertion: add the rf edge, close co, test
//! consistency. Exponentially simpler than the pattern checks and used to
//! validate them.

use crate::cc::is_partially_good_cc;
use crate::ccv::{is_ccv_consistent, ReadContext};
use crate::trace::Tid;

pub fn readable_by_insertion_ccv(ctx: ReadContext<'_>) -> Vec<Tid> {
    ctx.trace
        .writers(ctx.var)
        .into_iter()
        .filter(|&w| w != ctx.reader)
        .filter(|&w| {
            let mut tr = ctx.trace.clone();
            tr.add_rf(w, ctx.reader, ctx.var).is_ok() && is_ccv_consistent(&tr)
        })
        .collect()
}

pub fn readable_by_insertion_cc(ctx: ReadContext<'_>) -> Vec<Tid> {
    ctx.trace
        .writers(ctx.var)
        .into_iter()
        .filter(|&w| w != ctx.reader)
        .filter(|&w| {
            let mut tr = ctx.trace.clone();
            tr.add_rf(w, ctx.reader, ctx.var).is_ok() && is_partially_good_cc(&tr)
        })
        .collect()
}
