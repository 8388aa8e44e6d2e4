//! Execution summaries: an execution with each transaction collapsed into
//! one issue event, interleaved with the deliveries of transaction logs.
//!
//! [`summarize`] builds a summary for a consistent trace by issuing
//! transactions in a topological order of po ∪ rf ∪ co and delivering, just
//! before each issue, exactly the issuer's missing causal past. Under CCv
//! the ids of transactions are the positions of their issue events.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cc::is_partially_good_cc;
use crate::ccv::{forced_co, is_ccv_consistent};
use crate::model::Model;
use crate::trace::{Tid, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SummaryEvent {
    Isu { p: usize, t: Tid },
    Del { p: usize, t: Tid },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionSummary {
    pub events: Vec<SummaryEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SummaryError {
    #[error("trace is not consistent under {0}")]
    Inconsistent(Model),
}

impl std::fmt::Display for ExecutionSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, e) in self.events.iter().enumerate() {
            if i > 0 {
                f.write_str(" · ")?;
            }
            match e {
                SummaryEvent::Isu { p, t } => write!(f, "isu(p{p},{t})")?,
                SummaryEvent::Del { p, t } => write!(f, "del(p{p},{t})")?,
            }
        }
        Ok(())
    }
}

fn processes(tr: &Trace) -> usize {
    tr.transactions().filter_map(|t| t.process()).max().map_or(0, |p| p + 1)
}

/// A legal summary whose trace is `tr`.
pub fn summarize(tr: &Trace, model: Model) -> Result<ExecutionSummary, SummaryError> {
    let ok = match model {
        Model::Ccv => is_ccv_consistent(tr),
        Model::Cc => is_partially_good_cc(tr),
    };
    if !ok {
        return Err(SummaryError::Inconsistent(model));
    }
    let order = linearize(tr, model);
    let n = processes(tr);
    let mut delivered: Vec<BTreeSet<Tid>> = vec![BTreeSet::new(); n];
    let mut events = Vec::new();
    for &t in &order {
        let p = t.process().unwrap();
        for &u in &order {
            if u != t && tr.reach_porf(u, t) && delivered[p].insert(u) {
                events.push(SummaryEvent::Del { p, t: u });
            }
        }
        events.push(SummaryEvent::Isu { p, t });
        delivered[p].insert(t);
        events.push(SummaryEvent::Del { p, t });
    }
    for (p, done) in delivered.iter_mut().enumerate() {
        for &u in &order {
            if done.insert(u) {
                events.push(SummaryEvent::Del { p, t: u });
            }
        }
    }
    Ok(ExecutionSummary { events })
}

/// Topological order of po ∪ rf (∪ co and forced co under CCv), ties broken
/// by id.
fn linearize(tr: &Trace, model: Model) -> Vec<Tid> {
    let mut edges: BTreeSet<(Tid, Tid)> = tr.po().iter().copied().collect();
    edges.extend(tr.rf().iter().map(|&(a, b, _)| (a, b)));
    if model == Model::Ccv {
        edges.extend(tr.co().iter().map(|&(a, b, _)| (a, b)));
        edges.extend(forced_co(tr).into_iter().map(|(a, b, _)| (a, b)));
    }
    let nodes: Vec<Tid> = tr.transactions().collect();
    let mut indeg: BTreeMap<Tid, usize> = nodes.iter().map(|&t| (t, 0)).collect();
    for &(a, b) in &edges {
        if !a.is_init() {
            *indeg.get_mut(&b).unwrap() += 1;
        }
    }
    let mut out = Vec::with_capacity(nodes.len());
    while out.len() < nodes.len() {
        let t = *indeg.iter().find(|(_, &d)| d == 0).expect("acyclic").0;
        indeg.remove(&t);
        out.push(t);
        for &(a, b) in &edges {
            if a == t {
                *indeg.get_mut(&b).unwrap() -= 1;
            }
        }
    }
    out
}

/// True iff `s` is legal under `model` and consistent with `tr`: every
/// transaction is issued once and in program order, logs are delivered
/// after their issue, at most once per process, causally, and each external
/// read of `tr` takes its value from the write the summary makes visible
/// (CCv: the delivered writer with the largest id; CC: a causally maximal
/// delivered writer).
pub fn check_legal_summary(s: &ExecutionSummary, tr: &Trace, model: Model) -> bool {
    let mut isu: BTreeMap<Tid, usize> = BTreeMap::new();
    let mut del: BTreeMap<(usize, Tid), usize> = BTreeMap::new();
    for (i, e) in s.events.iter().enumerate() {
        match *e {
            SummaryEvent::Isu { p, t } => {
                if t.process() != Some(p) || !tr.contains(t) || isu.insert(t, i).is_some() {
                    return false;
                }
            }
            SummaryEvent::Del { p, t } => {
                if del.insert((p, t), i).is_some() {
                    return false;
                }
            }
        }
    }
    // Exactly one issue per transaction, in program order.
    if isu.len() != tr.len() {
        return false;
    }
    if tr.po().iter().any(|&(a, b)| isu[&a] > isu[&b]) {
        return false;
    }
    // (3) deliveries follow the issue.
    if del.iter().any(|(&(_, t), &i)| isu.get(&t).is_none_or(|&j| j > i)) {
        return false;
    }
    // Own transactions are delivered before the process issues again.
    for &t in isu.keys() {
        let p = t.process().unwrap();
        if let Some(&j) = isu.get(&Tid::txn(p, t.position().unwrap() + 1)) {
            if del.get(&(p, t)).is_none_or(|&i| i > j) {
                return false;
            }
        }
    }
    // Causal past of each transaction: logs delivered to its issuer before
    // the issue.
    let past = |t: Tid| -> BTreeSet<Tid> {
        let p = t.process().unwrap();
        del.iter().filter(|(&(q, _), &i)| q == p && i < isu[&t]).map(|(&(_, u), _)| u).collect()
    };
    let pasts: BTreeMap<Tid, BTreeSet<Tid>> = isu.keys().map(|&t| (t, past(t))).collect();
    // (2) causal delivery.
    for (&t2, before) in &pasts {
        for &t1 in before {
            for (&(q, u), &i) in &del {
                if u == t2 && del.get(&(q, t1)).is_none_or(|&j| j > i) {
                    return false;
                }
            }
        }
    }
    // (1) reads see the right write.
    for t in tr.transactions() {
        for (x, src) in tr.reads_of(t) {
            let visible: Vec<Tid> = pasts[&t].iter().copied().filter(|&w| tr.writes_var(w, x)).collect();
            let ok = match model {
                Model::Ccv => match visible.iter().max_by_key(|w| isu[w]) {
                    None => src == Tid::Init(x),
                    Some(&w) => w == src,
                },
                Model::Cc => {
                    if visible.is_empty() {
                        src == Tid::Init(x)
                    } else {
                        visible.contains(&src)
                            && !visible.iter().any(|&w| w != src && pasts[&w].contains(&src))
                    }
                }
            };
            if !ok {
                return false;
            }
        }
    }
    // Coherence edges of the trace agree with issue order (ids).
    if model == Model::Ccv && tr.co().iter().any(|&(a, b, _)| !a.is_init() && isu[&a] > isu[&b]) {
        return false;
    }
    true
}
