//! Optimal dynamic partial order reduction over weak traces.
//!
//! The explorer executes transactions one at a time (lowest-index process
//! first) and branches at every external read over the model's readable
//! set. Reads that could also have taken their value from a transaction that
//! only runs *later* are revisited through schedules: when a writer `t2`
//! ends, every earlier swappable read of a variable `t2` writes gets a
//! schedule that replays `t2`'s causal past, then `t2`, then the reader up to
//! the read, which now takes `t2` as its source. Schedules are deduplicated
//! so each weak trace is produced exactly once.

mod schedule;

use std::collections::{BTreeSet, HashSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ccv::ReadContext;
use crate::machine::{Compiled, Outcome, Step, Thread};
use crate::model::Model;
use crate::prog::{Program, VarId};
use crate::trace::{Tid, Trace, WeakTrace};

pub use schedule::{schedule_dedup, Schedule};

/// One observable step of an execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Event {
    Begin { t: Tid },
    End { t: Tid },
    Write { t: Tid, var: VarId },
    /// `t` reads `var` from `source` (`source == t` for a read of its own write).
    Read { t: Tid, var: VarId, source: Tid },
}

impl Event {
    pub fn transaction(self) -> Tid {
        match self {
            Event::Begin { t } | Event::End { t } | Event::Write { t, .. } | Event::Read { t, .. } => t,
        }
    }
}

pub type ObservationSequence = Vec<Event>;

/// Exploration limits and switches.
#[derive(Debug, Clone, Default)]
pub struct ExploreConfig {
    pub max_traces: Option<usize>,
    pub max_nodes: Option<u64>,
    /// Stop after the first assertion violation.
    pub stop_at_first: bool,
    /// Re-check every registered trace with the model's predicates, and
    /// every readable set against the tentative-insertion oracle.
    pub check_traces: bool,
    /// Keep a log of every schedule candidate in [`ExplorationReport::schedule_log`].
    pub record_schedules: bool,
}

/// What happened to a schedule candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleFate {
    Added,
    /// Equivalent to a schedule already attached to the read.
    Duplicate,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    /// The read the schedule revisits, with the source it had when the
    /// candidate was built.
    pub read: Event,
    pub schedule: Schedule,
    pub fate: ScheduleFate,
}

/// A failed assertion and the execution that exhibits it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub assert_site: String,
    pub observation_sequence: ObservationSequence,
    pub trace: Trace,
}

#[derive(Debug, Clone, Default)]
pub struct ExplorationReport {
    /// Distinct weak traces in discovery order.
    pub weak_traces: Vec<WeakTrace>,
    /// The full (fulfilled) trace behind each weak trace.
    pub traces: Vec<Trace>,
    pub trace_count: usize,
    pub duplicates: usize,
    /// First witness per assert site, in discovery order.
    pub violations: Vec<Violation>,
    /// Executions dropped by a failing `assume`.
    pub discarded: usize,
    pub nodes: u64,
    pub millis: u128,
    pub budget_exceeded: bool,
    /// Candidate schedules rejected because their pivot read would be
    /// inconsistent once replayed.
    pub infeasible_schedules: usize,
    /// Contract violations found while exploring (empty in a correct run).
    pub diagnostics: Vec<String>,
    /// Schedule candidates in creation order, if requested.
    pub schedule_log: Vec<ScheduleRecord>,
}

impl ExplorationReport {
    pub fn weak_set(&self) -> BTreeSet<WeakTrace> {
        self.weak_traces.iter().cloned().collect()
    }

    pub fn is_safe(&self) -> bool {
        self.violations.is_empty()
    }
}

/// The transaction currently running and its read bookkeeping.
#[derive(Debug, Clone)]
struct Open {
    t: Tid,
    /// Pinned source per variable until an own write intervenes.
    currentreads: std::collections::BTreeMap<VarId, Tid>,
}

/// Everything needed to resume execution from a point of `π`.
#[derive(Debug, Clone)]
struct State {
    threads: Vec<Thread>,
    trace: Trace,
    open: Option<Open>,
    discarded: bool,
    failed: Vec<usize>,
}

impl State {
    fn initial(prog: &Compiled) -> State {
        State {
            threads: prog.fresh_threads(),
            trace: Trace::new(prog.num_vars()),
            open: None,
            discarded: false,
            failed: Vec::new(),
        }
    }

    fn absorb(&mut self, out: Outcome) {
        self.discarded |= out.assume_failed;
        self.failed.extend(out.failed_asserts);
    }
}

/// An entry of the observation sequence with its bookkeeping.
#[derive(Debug, Clone)]
struct Entry {
    event: Event,
    swappable: bool,
    localread: bool,
    schedules: Vec<Schedule>,
    /// State just before a `Begin`, used to replay schedules.
    snapshot: Option<Box<State>>,
}

impl Entry {
    fn plain(event: Event) -> Entry {
        Entry { event, swappable: false, localread: false, schedules: Vec::new(), snapshot: None }
    }
}

/// Why a schedule could not be replayed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Divergence(pub String);

pub(crate) struct Explorer<'a> {
    prog: &'a Compiled,
    model: Model,
    cfg: ExploreConfig,
    pi: Vec<Entry>,
    seen: HashSet<WeakTrace>,
    report: ExplorationReport,
    witnessed: BTreeSet<usize>,
    stop: bool,
}

/// Explores every weak trace of `p` under `model` with default limits.
pub fn explore(p: &Program, model: Model) -> ExplorationReport {
    explore_with(p, model, &ExploreConfig::default())
}

pub fn explore_with(p: &Program, model: Model, cfg: &ExploreConfig) -> ExplorationReport {
    let prog = Compiled::new(p);
    explore_compiled(&prog, model, cfg)
}

pub fn explore_compiled(prog: &Compiled, model: Model, cfg: &ExploreConfig) -> ExplorationReport {
    let start = Instant::now();
    let mut ex = Explorer {
        prog,
        model,
        cfg: cfg.clone(),
        pi: Vec::new(),
        seen: HashSet::new(),
        report: ExplorationReport::default(),
        witnessed: BTreeSet::new(),
        stop: false,
    };
    ex.explore(State::initial(prog));
    let mut report = ex.report;
    report.millis = start.elapsed().as_millis();
    report
}

impl Explorer<'_> {
    fn code(&self, t: Tid) -> &[crate::machine::Op] {
        let (Some(p), Some(i)) = (t.process(), t.position()) else { unreachable!("initializers have no code") };
        &self.prog.code[p][i]
    }

    fn next_transaction(&self, st: &State) -> Option<Tid> {
        (0..self.prog.num_processes())
            .find(|&p| st.threads[p].next < self.prog.transactions_of(p))
            .map(|p| Tid::txn(p, st.threads[p].next))
    }

    fn over_budget(&mut self) -> bool {
        let nodes_over = self.cfg.max_nodes.is_some_and(|m| self.report.nodes > m);
        let traces_over = self.cfg.max_traces.is_some_and(|m| self.report.trace_count >= m);
        if nodes_over || traces_over {
            self.report.budget_exceeded = true;
            self.stop = true;
        }
        self.stop
    }

    /// Extends `π` by one event and recurses.
    fn explore(&mut self, mut st: State) {
        if self.stop || self.over_budget() {
            return;
        }
        self.report.nodes += 1;
        let Some(open) = st.open.clone() else {
            match self.next_transaction(&st) {
                None => self.register(st),
                Some(t) => {
                    let snapshot = Box::new(st.clone());
                    begin(&mut st, t);
                    self.pi.push(Entry { snapshot: Some(snapshot), ..Entry::plain(Event::Begin { t }) });
                    self.explore(st);
                    self.pi.pop();
                }
            }
            return;
        };
        let t = open.t;
        let p = t.process().expect("real transaction");
        let mut out = Outcome::default();
        let step = st.threads[p].advance(self.code(t), &mut out);
        st.absorb(out);
        match step {
            Step::Write { var, value } => {
                st.trace.record_write(t, var, value).expect("open transaction");
                if let Some(o) = st.open.as_mut() {
                    o.currentreads.remove(&var);
                }
                self.pi.push(Entry::plain(Event::Write { t, var }));
                self.explore(st);
                self.pi.pop();
            }
            Step::End => {
                st.threads[p].end();
                st.open = None;
                let at_end = st.trace.clone();
                self.pi.push(Entry::plain(Event::End { t }));
                self.explore(st);
                if !self.stop {
                    self.create_schedules(&at_end);
                }
                self.pi.pop();
            }
            Step::Read { var } => {
                if let Some(v) = st.threads[p].local_value(var) {
                    st.threads[p].complete_read(self.code(t), v);
                    let e = Entry { localread: true, ..Entry::plain(Event::Read { t, var, source: t }) };
                    self.pi.push(e);
                    self.explore(st);
                    self.pi.pop();
                } else if let Some(&src) = open.currentreads.get(&var) {
                    let v = st.trace.written_value(src, var).expect("pinned source writes var");
                    st.threads[p].complete_read(self.code(t), v);
                    self.pi.push(Entry::plain(Event::Read { t, var, source: src }));
                    self.explore(st);
                    self.pi.pop();
                } else {
                    self.fresh_read(st, t, var);
                }
            }
        }
    }

    /// A first external read of `var`: branch over the readable set, then run
    /// the schedules collected for it.
    fn fresh_read(&mut self, st: State, t: Tid, var: VarId) {
        let ctx = ReadContext::new(&st.trace, t, var);
        let sources = self.model.readable(ctx);
        if self.cfg.check_traces {
            let expected = match self.model {
                Model::Ccv => crate::oracle::readable_by_insertion_ccv(ctx),
                Model::Cc => crate::oracle::readable_by_insertion_cc(ctx),
            };
            if expected != sources {
                self.report.diagnostics.push(format!("readable set of {t} for {var} is {sources:?}, expected {expected:?}"));
            }
        }
        if sources.is_empty() {
            self.report.diagnostics.push(format!("empty readable set for {t} reading {var}"));
        }
        let idx = self.pi.len();
        self.pi.push(Entry { swappable: true, ..Entry::plain(Event::Read { t, var, source: t }) });
        for src in sources {
            if self.stop {
                break;
            }
            let mut next = st.clone();
            take_read(self.model, &mut next, self.code(t), t, var, src);
            self.pi[idx].event = Event::Read { t, var, source: src };
            self.explore(next);
        }
        let mut i = 0;
        while i < self.pi[idx].schedules.len() && !self.stop {
            let beta = self.pi[idx].schedules[i].clone();
            self.run_schedule(idx, &beta);
            i += 1;
        }
        self.pi.pop();
    }

    /// Registers a terminal execution.
    fn register(&mut self, st: State) {
        if st.discarded {
            self.report.discarded += 1;
            return;
        }
        self.report.trace_count += 1;
        let weak = st.trace.weaken();
        if !self.seen.insert(weak.clone()) {
            self.report.duplicates += 1;
            return;
        }
        if self.cfg.check_traces && !self.model.is_fulfilled_and_good(&st.trace) {
            self.report.diagnostics.push(format!("explored trace violates {} predicates: {weak:?}", self.model));
        }
        for &site in &st.failed {
            if self.witnessed.insert(site) {
                self.report.violations.push(Violation {
                    assert_site: self.prog.sites[site].label.clone(),
                    observation_sequence: self.pi.iter().map(|e| e.event).collect(),
                    trace: st.trace.clone(),
                });
            }
        }
        self.report.weak_traces.push(weak);
        self.report.traces.push(st.trace);
        if self.cfg.stop_at_first && !self.report.violations.is_empty() {
            self.stop = true;
        }
    }
}

fn begin(st: &mut State, t: Tid) {
    let p = t.process().expect("real transaction");
    st.trace.add_transaction(t).expect("transactions begin in program order");
    st.threads[p].begin();
    st.open = Some(Open { t, currentreads: Default::default() });
}

fn take_read(model: Model, st: &mut State, code: &[crate::machine::Op], t: Tid, var: VarId, src: Tid) {
    let p = t.process().expect("real transaction");
    st.trace = model.apply_read(ReadContext::new(&st.trace, t, var), src);
    let v = st.trace.written_value(src, var).expect("source writes var");
    st.threads[p].complete_read(code, v);
    st.open.as_mut().expect("open transaction").currentreads.insert(var, src);
}
