//! Brute-force axiomatic enumeration.
//!
//! Transactions are executed whole, in every order compatible with po. Each
//! external read takes its value from every writer already executed
//! (initializers included), so every rf assignment whose edges point
//! backwards in some linearization is produced. Since rf ⊆ hb, every
//! consistent total trace has such a linearization. Complete traces are then
//! filtered with the model's axioms; nothing here consults readable sets.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{check_guard, Enumeration, Guard, OracleError};
use crate::cc::is_partially_good_cc;
use crate::ccv::is_ccv_consistent;
use crate::machine::{Compiled, Outcome, Step, Thread};
use crate::model::Model;
use crate::prog::{Program, VarId};
use crate::trace::{Tid, Trace, WeakTrace};

/// The set of consistent weak traces of complete executions.
pub fn enumerate_weak_traces(p: &Program, model: Model) -> Result<BTreeSet<WeakTrace>, OracleError> {
    Ok(enumerate_outcomes(p, model, Guard::AXIOMATIC)?.weak_set())
}

/// Like [`enumerate_weak_traces`], also reporting failed assertions.
pub fn enumerate_outcomes(p: &Program, model: Model, guard: Guard) -> Result<Enumeration, OracleError> {
    check_guard(p, guard)?;
    let prog = Compiled::new(p);
    let mut search = Search { prog: &prog, model, visited: HashSet::new(), result: Enumeration::default() };
    search.run(Node { threads: prog.fresh_threads(), trace: Trace::new(prog.num_vars()), failed: BTreeSet::new() });
    Ok(search.result)
}

#[derive(Clone)]
struct Node {
    threads: Vec<Thread>,
    trace: Trace,
    failed: BTreeSet<usize>,
}

struct Search<'a> {
    prog: &'a Compiled,
    model: Model,
    /// Partial weak traces already expanded. Program state is a function of
    /// the weak trace, so revisiting one cannot produce anything new.
    visited: HashSet<WeakTrace>,
    result: Enumeration,
}

impl Search<'_> {
    fn consistent(&self, tr: &Trace) -> bool {
        match self.model {
            Model::Ccv => is_ccv_consistent(tr),
            Model::Cc => is_partially_good_cc(tr),
        }
    }

    fn run(&mut self, node: Node) {
        if !self.visited.insert(node.trace.weaken()) {
            return;
        }
        let mut done = true;
        for p in 0..self.prog.num_processes() {
            if node.threads[p].next < self.prog.transactions_of(p) {
                done = false;
                let mut next = node.clone();
                let t = Tid::txn(p, next.threads[p].next);
                next.trace.add_transaction(t).expect("po order");
                next.threads[p].begin();
                self.transaction(next, t, BTreeMap::new());
            }
        }
        if done {
            let labels = node.failed.iter().map(|&s| self.prog.sites[s].label.clone()).collect();
            self.result.outcomes.insert(node.trace.weaken(), labels);
        }
    }

    /// Runs transaction `t` to its end, branching over read sources.
    fn transaction(&mut self, mut node: Node, t: Tid, pinned: BTreeMap<VarId, Tid>) {
        let (p, i) = (t.process().unwrap(), t.position().unwrap());
        let code = &self.prog.code[p][i];
        loop {
            let mut out = Outcome::default();
            let step = node.threads[p].advance(code, &mut out);
            node.failed.extend(out.failed_asserts);
            if out.assume_failed {
                return;
            }
            match step {
                Step::Write { var, value } => node.trace.record_write(t, var, value).expect("open"),
                Step::End => {
                    node.threads[p].end();
                    // Inconsistency is preserved by extensions, so prune early.
                    if self.consistent(&node.trace) {
                        self.run(node);
                    }
                    return;
                }
                Step::Read { var } => {
                    if let Some(v) = node.threads[p].local_value(var) {
                        node.threads[p].complete_read(code, v);
                    } else if let Some(&src) = pinned.get(&var) {
                        let v = node.trace.written_value(src, var).unwrap();
                        node.threads[p].complete_read(code, v);
                    } else {
                        for src in node.trace.writers(var).into_iter().filter(|&w| w != t) {
                            let mut next = node.clone();
                            next.trace.add_rf(src, t, var).expect("fresh external read");
                            let v = next.trace.written_value(src, var).unwrap();
                            next.threads[p].complete_read(code, v);
                            let mut pins = pinned.clone();
                            pins.insert(var, src);
                            self.transaction(next, t, pins);
                        }
                        return;
                    }
                }
            }
        }
    }
}
