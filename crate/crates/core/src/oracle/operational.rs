//! Operational semantics: processes with local stores exchanging
//! transaction logs under causal delivery and transaction isolation.
//!
//! An issue step runs a whole transaction (isolation forbids deliveries in
//! the middle, and other processes cannot observe it before it ends). The
//! issuing process receives its own log immediately. A log is delivered to
//! another process only once everything delivered to the issuer before the
//! issue has been delivered there.
//!
//! Under CCv each transaction has an id; the ids form a global order and a
//! delivery only overwrites `x` when the incoming id beats the timestamp of
//! `x`. Ids are represented by positions in [`Configuration::order`], and an
//! issue step chooses where to insert the new transaction (after every id
//! the process has seen and after its own earlier transactions).
//!
//! Under CC the store keeps, per variable, the writes that are maximal in
//! causal order; a transaction starts by fixing a snapshot, one entry per
//! variable it reads.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{check_guard, Enumeration, Guard, OracleError};
use crate::machine::{Compiled, Op, Outcome, Step, Thread};
use crate::model::Model;
use crate::prog::{Program, VarId};
use crate::trace::{Tid, Trace, WeakTrace};

/// A CCv process: registers and the running log live in `thread`; `ts[x]`
/// is the transaction whose id is the timestamp of `x` (its value is
/// `store[x]`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CcvLocalState {
    pub thread: Thread,
    pub store: Vec<i64>,
    pub ts: Vec<Tid>,
}

/// A CC store entry: a value and the transaction that wrote it. The
/// transaction's vector clock is its causal past, kept in the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CcEntry {
    pub value: i64,
    pub writer: Tid,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CcLocalState {
    pub thread: Thread,
    /// Pairwise causally incomparable entries per variable.
    pub store: Vec<BTreeSet<CcEntry>>,
    /// Snapshot of the running transaction.
    pub snapshot: BTreeMap<VarId, CcEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LocalState {
    Ccv(CcvLocalState),
    Cc(CcLocalState),
}

impl LocalState {
    fn thread(&self) -> &Thread {
        match self {
            LocalState::Ccv(s) => &s.thread,
            LocalState::Cc(s) => &s.thread,
        }
    }
}

/// A published transaction log.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Message {
    pub issuer: usize,
    /// Last write per variable.
    pub log: BTreeMap<VarId, i64>,
    /// Transactions delivered to the issuer when it issued (its causal past).
    pub past: BTreeSet<Tid>,
    /// Processes that have received the log.
    pub delivered: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Label {
    /// Run process `p`'s next transaction. Under CCv `slot` is the insertion
    /// index of its id in the global order; under CC `snapshot` picks the
    /// store entry (by writer) for each variable the transaction reads.
    Issue { p: usize, slot: usize, snapshot: BTreeMap<VarId, Tid> },
    Deliver { p: usize, t: Tid },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("process {0} has no transaction left")]
    Finished(usize),
    #[error("{0} was already delivered to process {1}")]
    Redelivery(Tid, usize),
    #[error("delivering {0} to process {1} violates causal delivery")]
    Causality(Tid, usize),
    #[error("{0} has not been issued")]
    NotIssued(Tid),
    #[error("id slot {slot} is below the process timestamps (minimum {min})")]
    IdTooSmall { slot: usize, min: usize },
    #[error("snapshot for variable {0} is missing or not in the store")]
    BadSnapshot(VarId),
    #[error("configuration belongs to the other model")]
    WrongModel,
}

#[derive(Debug, Clone)]
pub struct Configuration {
    pub model: Model,
    pub ls: Vec<LocalState>,
    pub msgs: BTreeMap<Tid, Message>,
    /// CCv: issued transactions by increasing id.
    pub order: Vec<Tid>,
    /// The trace of the execution so far (transactions, po, rf).
    pub trace: Trace,
    pub failed: BTreeSet<usize>,
    /// A failed `assume` discarded this execution.
    pub blocked: bool,
}

impl Configuration {
    pub fn initial(prog: &Compiled, model: Model) -> Configuration {
        let n = prog.num_vars();
        let ls = (0..prog.num_processes())
            .map(|_| match model {
                Model::Ccv => LocalState::Ccv(CcvLocalState {
                    thread: Thread::default(),
                    store: vec![0; n],
                    ts: (0..n).map(Tid::Init).collect(),
                }),
                Model::Cc => LocalState::Cc(CcLocalState {
                    thread: Thread::default(),
                    store: (0..n).map(|x| BTreeSet::from([CcEntry { value: 0, writer: Tid::Init(x) }])).collect(),
                    snapshot: BTreeMap::new(),
                }),
            })
            .collect();
        Configuration {
            model,
            ls,
            msgs: BTreeMap::new(),
            order: Vec::new(),
            trace: Trace::new(n),
            failed: BTreeSet::new(),
            blocked: false,
        }
    }

    pub fn is_complete(&self, prog: &Compiled) -> bool {
        (0..prog.num_processes()).all(|p| self.ls[p].thread().next >= prog.transactions_of(p))
    }

    fn delivered_to(&self, p: usize) -> BTreeSet<Tid> {
        self.msgs.iter().filter(|(_, m)| m.delivered.contains(&p)).map(|(&t, _)| t).collect()
    }

    /// Position of an id; initializers precede every transaction.
    fn rank(&self, t: Tid) -> usize {
        match t {
            Tid::Init(_) => 0,
            _ => 1 + self.order.iter().position(|&u| u == t).expect("issued transaction"),
        }
    }

    /// `a` is in the causal past of `b`.
    fn causally_before(&self, a: Tid, b: Tid) -> bool {
        a.is_init() && !b.is_init() || self.msgs.get(&b).is_some_and(|m| m.past.contains(&a))
    }

    /// Smallest CCv insertion slot for `p`'s next transaction.
    fn min_slot(&self, p: usize) -> usize {
        let LocalState::Ccv(s) = &self.ls[p] else { return 0 };
        let own = (0..s.thread.next).map(|i| self.rank(Tid::txn(p, i)));
        s.ts.iter().map(|&t| self.rank(t)).chain(own).max().unwrap_or(0)
    }

    /// Every enabled label.
    pub fn enabled(&self, prog: &Compiled) -> Vec<Label> {
        let mut out = Vec::new();
        for p in 0..prog.num_processes() {
            let next = self.ls[p].thread().next;
            if next >= prog.transactions_of(p) {
                continue;
            }
            match &self.ls[p] {
                LocalState::Ccv(_) => {
                    for slot in self.min_slot(p)..=self.order.len() {
                        out.push(Label::Issue { p, slot, snapshot: BTreeMap::new() });
                    }
                }
                LocalState::Cc(s) => {
                    let mut snaps = vec![BTreeMap::new()];
                    for x in read_vars(&prog.code[p][next]) {
                        snaps = snaps
                            .into_iter()
                            .flat_map(|m: BTreeMap<VarId, Tid>| {
                                s.store[x].iter().map(move |e| {
                                    let mut m = m.clone();
                                    m.insert(x, e.writer);
                                    m
                                })
                            })
                            .collect();
                    }
                    out.extend(snaps.into_iter().map(|snapshot| Label::Issue { p, slot: 0, snapshot }));
                }
            }
        }
        for (&t, m) in &self.msgs {
            for p in 0..prog.num_processes() {
                if !m.delivered.contains(&p) && m.past.iter().all(|u| self.msgs[u].delivered.contains(&p)) {
                    out.push(Label::Deliver { p, t });
                }
            }
        }
        out
    }
}

fn read_vars(code: &[Op]) -> BTreeSet<VarId> {
    code.iter()
        .filter_map(|op| match op {
            Op::Read { var, .. } => Some(*var),
            _ => None,
        })
        .collect()
}

/// One CCv transition.
pub fn step_ccv(prog: &Compiled, cfg: &Configuration, label: &Label) -> Result<Configuration, StepError> {
    if cfg.model != Model::Ccv {
        return Err(StepError::WrongModel);
    }
    step(prog, cfg, label)
}

/// One CC transition.
pub fn step_cc(prog: &Compiled, cfg: &Configuration, label: &Label) -> Result<Configuration, StepError> {
    if cfg.model != Model::Cc {
        return Err(StepError::WrongModel);
    }
    step(prog, cfg, label)
}

fn step(prog: &Compiled, cfg: &Configuration, label: &Label) -> Result<Configuration, StepError> {
    let mut next = cfg.clone();
    match *label {
        Label::Deliver { p, t } => {
            let m = cfg.msgs.get(&t).ok_or(StepError::NotIssued(t))?;
            if m.delivered.contains(&p) {
                return Err(StepError::Redelivery(t, p));
            }
            if !m.past.iter().all(|u| cfg.msgs[u].delivered.contains(&p)) {
                return Err(StepError::Causality(t, p));
            }
            next.deliver(p, t);
        }
        Label::Issue { p, slot, ref snapshot } => {
            let i = cfg.ls[p].thread().next;
            if i >= prog.transactions_of(p) {
                return Err(StepError::Finished(p));
            }
            let t = Tid::txn(p, i);
            let code = &prog.code[p][i];
            match &mut next.ls[p] {
                LocalState::Ccv(_) => {
                    let min = cfg.min_slot(p);
                    if slot < min || slot > cfg.order.len() {
                        return Err(StepError::IdTooSmall { slot, min });
                    }
                    next.order.insert(slot, t);
                }
                LocalState::Cc(s) => {
                    s.snapshot.clear();
                    for x in read_vars(code) {
                        let w = *snapshot.get(&x).ok_or(StepError::BadSnapshot(x))?;
                        let e = s.store[x].iter().find(|e| e.writer == w).ok_or(StepError::BadSnapshot(x))?;
                        s.snapshot.insert(x, *e);
                    }
                }
            }
            next.issue(t, code);
        }
    }
    Ok(next)
}

impl Configuration {
    fn thread_mut(&mut self, p: usize) -> &mut Thread {
        match &mut self.ls[p] {
            LocalState::Ccv(s) => &mut s.thread,
            LocalState::Cc(s) => &mut s.thread,
        }
    }

    /// Value and writer an external read of `x` by `p` observes.
    fn lookup(&self, p: usize, x: VarId) -> (i64, Tid) {
        match &self.ls[p] {
            LocalState::Ccv(s) => (s.store[x], s.ts[x]),
            LocalState::Cc(s) => {
                let e = s.snapshot[&x];
                (e.value, e.writer)
            }
        }
    }

    fn issue(&mut self, t: Tid, code: &[Op]) {
        let p = t.process().unwrap();
        self.trace.add_transaction(t).expect("po order");
        self.thread_mut(p).begin();
        loop {
            let mut out = Outcome::default();
            let step = self.thread_mut(p).advance(code, &mut out);
            self.failed.extend(out.failed_asserts);
            self.blocked |= out.assume_failed;
            match step {
                Step::Write { var, value } => self.trace.record_write(t, var, value).expect("open"),
                Step::Read { var } => {
                    let v = match self.ls[p].thread().local_value(var) {
                        Some(v) => v,
                        None => {
                            let (v, src) = self.lookup(p, var);
                            if self.trace.source(t, var).is_none() {
                                self.trace.add_rf(src, t, var).expect("external read");
                            }
                            v
                        }
                    };
                    self.thread_mut(p).complete_read(code, v);
                }
                Step::End => break,
            }
        }
        let log = self.thread_mut(p).end();
        let mut past = self.delivered_to(p);
        past.remove(&t);
        self.msgs.insert(t, Message { issuer: p, log, past, delivered: BTreeSet::new() });
        self.deliver(p, t);
    }

    fn deliver(&mut self, p: usize, t: Tid) {
        let log = self.msgs[&t].log.clone();
        let (rank_t, ranks): (usize, Vec<usize>) = match &self.ls[p] {
            LocalState::Ccv(s) => (self.rank(t), s.ts.iter().map(|&u| self.rank(u)).collect()),
            LocalState::Cc(_) => (0, Vec::new()),
        };
        let dominated: Vec<Vec<bool>> = match &self.ls[p] {
            LocalState::Cc(s) => s
                .store
                .iter()
                .map(|entries| entries.iter().map(|e| self.causally_before(e.writer, t)).collect())
                .collect(),
            LocalState::Ccv(_) => Vec::new(),
        };
        match &mut self.ls[p] {
            LocalState::Ccv(s) => {
                for (&x, &v) in &log {
                    if ranks[x] < rank_t {
                        s.store[x] = v;
                        s.ts[x] = t;
                    }
                }
            }
            LocalState::Cc(s) => {
                for (&x, &v) in &log {
                    let keep: BTreeSet<CcEntry> = s.store[x]
                        .iter()
                        .zip(&dominated[x])
                        .filter(|(_, &d)| !d)
                        .map(|(e, _)| *e)
                        .collect();
                    s.store[x] = keep;
                    s.store[x].insert(CcEntry { value: v, writer: t });
                }
            }
        }
        self.msgs.get_mut(&t).unwrap().delivered.insert(p);
    }

    fn key(&self) -> impl std::hash::Hash + Eq {
        let delivered: Vec<(Tid, BTreeSet<usize>)> =
            self.msgs.iter().map(|(&t, m)| (t, m.delivered.clone())).collect();
        (self.ls.clone(), delivered, self.order.clone(), self.trace.weaken(), self.failed.clone())
    }
}

/// Weak traces of all complete executions of the operational semantics.
pub fn enumerate_operational(p: &Program, model: Model, guard: Guard) -> Result<BTreeSet<WeakTrace>, OracleError> {
    Ok(enumerate_operational_outcomes(p, model, guard)?.weak_set())
}

pub fn enumerate_operational_outcomes(p: &Program, model: Model, guard: Guard) -> Result<Enumeration, OracleError> {
    check_guard(p, guard)?;
    let prog = Compiled::new(p);
    let mut seen = HashSet::new();
    let mut result = Enumeration::default();
    // Deliveries to a process are only observable at its next issue, and
    // they commute with every step of other processes. The search therefore
    // delivers to `p` only in a batch directly before an issue of `p`
    // (`focus`), which preserves every reachable trace.
    let mut stack: Vec<(Configuration, Option<usize>)> = vec![(Configuration::initial(&prog, model), None)];
    while let Some((cfg, focus)) = stack.pop() {
        if cfg.blocked || !seen.insert((cfg.key(), focus)) {
            continue;
        }
        if cfg.is_complete(&prog) {
            let labels = cfg.failed.iter().map(|&s| prog.sites[s].label.clone()).collect();
            result.outcomes.insert(cfg.trace.weaken(), labels);
            continue;
        }
        for label in cfg.enabled(&prog) {
            let next_focus = match label {
                Label::Issue { p, .. } if focus.is_none_or(|f| f == p) => None,
                Label::Deliver { p, .. }
                    if focus.is_none_or(|f| f == p) && cfg.ls[p].thread().next < prog.transactions_of(p) =>
                {
                    Some(p)
                }
                _ => continue,
            };
            stack.push((step(&prog, &cfg, &label).expect("enabled labels step"), next_focus));
        }
    }
    Ok(result)
}
