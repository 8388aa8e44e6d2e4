use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{begin, take_read, Divergence, Entry, Event, Explorer, ScheduleFate, ScheduleRecord, State};
use crate::ccv::ReadContext;
use crate::machine::{Outcome, Step};
use crate::prog::VarId;
use crate::trace::{Tid, Trace};

/// Events that move a reader behind a later writer; the last event is the
/// pivot read, whose source is that writer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub events: Vec<Event>,
}

impl Schedule {
    pub fn pivot(&self) -> Event {
        *self.events.last().expect("schedules are nonempty")
    }

    /// The transactions of the schedule with the sources of their reads.
    /// Two schedules with the same key replay to the same weak trace prefix.
    pub fn key(&self) -> BTreeMap<Tid, Vec<(VarId, Tid)>> {
        let mut key: BTreeMap<Tid, Vec<(VarId, Tid)>> = BTreeMap::new();
        for e in &self.events {
            match *e {
                Event::Begin { t } => {
                    key.entry(t).or_default();
                }
                Event::Read { t, var, source } => key.entry(t).or_default().push((var, source)),
                _ => {}
            }
        }
        key
    }
}

/// True iff `candidate` is novel with respect to `existing`: no schedule there
/// contains the same transactions with the same read sources.
pub fn schedule_dedup(existing: &[Schedule], candidate: &Schedule) -> bool {
    let key = candidate.key();
    existing.iter().all(|s| s.key() != key)
}

impl Explorer<'_> {
    /// Records swap schedules for the earlier reads that `t2` could serve.
    /// Called when `π` ends with `(end, t2)`; `tr` is the trace at that point.
    pub(super) fn create_schedules(&mut self, tr: &Trace) {
        let last = self.pi.len() - 1;
        let Event::End { t: t2 } = self.pi[last].event else { unreachable!("called at end events") };
        let k = self.begin_index(t2, last);
        let writes2 = &tr.meta(t2).expect("t2 in trace").writes;
        if writes2.is_empty() {
            return;
        }
        for i in (0..k).rev() {
            let entry = &self.pi[i];
            let Event::Read { t: t1, var: x, .. } = entry.event else { continue };
            if !entry.swappable || entry.localread || !writes2.contains_key(&x) {
                continue;
            }
            if tr.reach_porf(t1, t2) {
                continue;
            }
            let b1 = self.begin_index(t1, i);
            let prior = self.external_reads(b1, i);
            if self.model.co_cycle(tr, &|y| writes2.contains_key(&y), x, &prior) {
                continue;
            }
            if overwrites(tr, t2, &prior) {
                continue;
            }
            let j = self.end_index(t1, i);
            let mut events = Vec::new();
            let mut abort = false;
            let mut m = j + 1;
            while m < k {
                let Event::Begin { t: tpp } = self.pi[m].event else {
                    m += 1;
                    continue;
                };
                let end = self.end_index(tpp, m);
                if tr.reach_porf(tpp, t2) {
                    if tr.reach_porf(t1, tpp) || overwrites(tr, tpp, &prior) {
                        abort = true;
                        break;
                    }
                    events.extend(self.pi[m..=end].iter().map(|e| e.event));
                }
                m = end + 1;
            }
            if abort {
                continue;
            }
            events.extend(self.pi[k..=last].iter().map(|e| e.event));
            events.extend(self.pi[b1..i].iter().map(|e| e.event));
            events.push(Event::Read { t: t1, var: x, source: t2 });
            let beta = Schedule { events };
            let read = self.pi[i].event;
            if !schedule_dedup(&self.pi[i].schedules, &beta) {
                self.log(read, beta, ScheduleFate::Duplicate);
                continue;
            }
            let snapshot = self.pi[b1].snapshot.as_deref().expect("begin entries carry snapshots").clone();
            match replay(self, snapshot, &beta) {
                Ok(_) => {
                    self.log(read, beta.clone(), ScheduleFate::Added);
                    self.pi[i].schedules.push(beta);
                }
                // The swap would make a transaction that precedes the reader
                // hide one of its earlier sources.
                Err(_) => {
                    self.report.infeasible_schedules += 1;
                    self.log(read, beta, ScheduleFate::Infeasible);
                }
            }
        }
    }

    fn log(&mut self, read: Event, schedule: Schedule, fate: ScheduleFate) {
        if self.cfg.record_schedules {
            self.report.schedule_log.push(ScheduleRecord { read, schedule, fate });
        }
    }

    /// Replaces `π` from `t1`'s begin by `β` and explores from there.
    pub(super) fn run_schedule(&mut self, idx: usize, beta: &Schedule) {
        let t1 = self.pi[idx].event.transaction();
        let b = self.begin_index(t1, idx);
        let snapshot = self.pi[b].snapshot.as_deref().expect("begin entries carry snapshots").clone();
        let saved = self.pi.split_off(b);
        match replay(self, snapshot, beta) {
            Ok((st, entries)) => {
                self.pi.extend(entries);
                self.explore(st);
            }
            Err(Divergence(why)) => self.report.diagnostics.push(format!("schedule replay diverged: {why}")),
        }
        self.pi.truncate(b);
        self.pi.extend(saved);
    }

    fn begin_index(&self, t: Tid, upto: usize) -> usize {
        (0..=upto).rev().find(|&m| self.pi[m].event == Event::Begin { t }).expect("begin precedes events")
    }

    fn end_index(&self, t: Tid, from: usize) -> usize {
        (from..self.pi.len()).find(|&m| self.pi[m].event == Event::End { t }).expect("transactions are closed")
    }

    /// External reads of the transaction begun at `b`, strictly before `i`.
    fn external_reads(&self, b: usize, i: usize) -> Vec<(VarId, Tid)> {
        self.pi[b..i]
            .iter()
            .filter(|e| !e.localread)
            .filter_map(|e| match e.event {
                Event::Read { var, source, .. } => Some((var, source)),
                _ => None,
            })
            .collect()
    }
}

/// `t` writes some `y` that the reader read from a po ∪ rf predecessor of `t`.
fn overwrites(tr: &Trace, t: Tid, prior: &[(VarId, Tid)]) -> bool {
    prior.iter().any(|&(y, src)| tr.writes_var(t, y) && tr.reach_porf(src, t))
}

/// Executes `beta` from `st`, producing the final state and the `π`
/// entries. All reads of the schedule are non-swappable.
pub(super) fn replay(ex: &Explorer<'_>, mut st: State, beta: &Schedule) -> Result<(State, Vec<Entry>), Divergence> {
    let mut entries = Vec::with_capacity(beta.events.len());
    let fail = |msg: String| Err(Divergence(msg));
    for &ev in &beta.events {
        let t = ev.transaction();
        let p = t.process().expect("real transaction");
        if let Event::Begin { .. } = ev {
            if st.open.is_some() || st.threads[p].next != t.position().expect("real") {
                return fail(format!("{t} cannot begin"));
            }
            let snapshot = Box::new(st.clone());
            begin(&mut st, t);
            entries.push(Entry { snapshot: Some(snapshot), ..Entry::plain(ev) });
            continue;
        }
        if st.open.as_ref().map(|o| o.t) != Some(t) {
            return fail(format!("{t} is not running at {ev:?}"));
        }
        let code = ex.code(t);
        let mut out = Outcome::default();
        let step = st.threads[p].advance(code, &mut out);
        st.absorb(out);
        match (ev, step) {
            (Event::Write { var, .. }, Step::Write { var: v, value }) if var == v => {
                st.trace.record_write(t, var, value).expect("open transaction");
                entries.push(Entry::plain(ev));
            }
            (Event::End { .. }, Step::End) => {
                st.threads[p].end();
                st.open = None;
                entries.push(Entry::plain(ev));
            }
            (Event::Read { var, source, .. }, Step::Read { var: v }) if var == v => {
                if let Some(val) = st.threads[p].local_value(var) {
                    if source != t {
                        return fail(format!("{t} reads {var} locally, schedule says {source}"));
                    }
                    st.threads[p].complete_read(code, val);
                    entries.push(Entry { localread: true, ..Entry::plain(ev) });
                } else if let Some(&pinned) = st.open.as_ref().and_then(|o| o.currentreads.get(&var)) {
                    if pinned != source {
                        return fail(format!("{t} is pinned to {pinned} for {var}"));
                    }
                    let val = st.trace.written_value(pinned, var).expect("pinned source writes var");
                    st.threads[p].complete_read(code, val);
                    entries.push(Entry::plain(ev));
                } else {
                    let ctx = ReadContext::new(&st.trace, t, var);
                    if !ex.model.readable(ctx).contains(&source) {
                        return fail(format!("{source} not readable by {t} for {var}"));
                    }
                    take_read(ex.model, &mut st, code, t, var, source);
                    entries.push(Entry::plain(ev));
                }
            }
            (ev, step) => return fail(format!("expected {ev:?}, program performs {step:?}")),
        }
    }
    Ok((st, entries))
}
