mod common;

use std::collections::BTreeSet;

use common::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use txcheck::dpor::{schedule_dedup, Event, Schedule, ScheduleFate};
use txcheck::oracle::{enumerate_outcomes, Guard};
use txcheck::trace::Tid;
use txcheck::{explore, explore_with, parse_program, ExploreConfig, Model};

fn checked() -> ExploreConfig {
    ExploreConfig { check_traces: true, ..Default::default() }
}

#[test]
fn internal_read_gives_one_trace() {
    let p = parse_program("var x; process p { transaction { x := 1; r := x; assert(r == 1); } }").unwrap();
    for m in Model::ALL {
        let r = explore(&p, m);
        assert_eq!(r.weak_traces.len(), 1);
        assert!(r.is_safe());
    }
}

#[test]
fn empty_transaction_gives_one_trace() {
    let p = parse_program("process p { transaction { } }").unwrap();
    let r = explore(&p, Model::Ccv);
    assert_eq!((r.weak_traces.len(), r.duplicates), (1, 0));
}

#[test]
fn thirteen_traces_without_duplicates() {
    let p = bench("motivating/thirteen_traces");
    for m in Model::ALL {
        let r = explore_with(&p, m, &checked());
        assert_eq!(r.weak_traces.len(), 13, "{m}");
        assert_eq!(r.trace_count, 13);
        assert_eq!(r.duplicates, 0);
        assert!(r.diagnostics.is_empty(), "{:?}", r.diagnostics);
    }
}

#[test]
fn second_read_of_the_example_has_two_sources() {
    let p = bench("motivating/thirteen_traces");
    let r = explore(&p, Model::Ccv);
    let t3 = Tid::txn(1, 1);
    let sources: BTreeSet<Tid> =
        r.weak_traces.iter().flat_map(|w| w.rf.iter().filter(|e| e.1 == t3).map(|e| e.0)).collect();
    assert_eq!(sources, BTreeSet::from([Tid::txn(0, 0), Tid::txn(1, 0)]));
}

fn transactions_of(s: &Schedule) -> Vec<Tid> {
    s.events
        .iter()
        .filter_map(|e| match *e {
            Event::Begin { t } => Some(t),
            _ => None,
        })
        .collect()
}

/// In the example (p1: t1; p2: t2 t3; p3: t5 t4), the first writer of x to
/// finish after t1 is t4. Its two runs produce the schedules that move t1's
/// read of x behind t4: first with t5 retained, then with t2, t3, t5
/// retained. The later equivalent candidates are rejected.
#[test]
fn schedules_of_the_worked_example() {
    let (t1, t2, t3, t5, t4) = (Tid::txn(0, 0), Tid::txn(1, 0), Tid::txn(1, 1), Tid::txn(2, 0), Tid::txn(2, 1));
    let p = bench("motivating/thirteen_traces");
    let r = explore_with(&p, Model::Ccv, &ExploreConfig { record_schedules: true, ..Default::default() });
    let for_x: Vec<_> = r.schedule_log.iter().filter(|rec| matches!(rec.read, Event::Read { var: 0, .. })).collect();
    assert_eq!(for_x.len(), 3);
    assert_eq!(for_x[0].fate, ScheduleFate::Added);
    assert_eq!(transactions_of(&for_x[0].schedule), vec![t5, t4, t1]);
    assert_eq!(for_x[0].schedule.pivot(), Event::Read { t: t1, var: 0, source: t4 });
    assert_eq!(for_x[1].fate, ScheduleFate::Added);
    assert_eq!(transactions_of(&for_x[1].schedule), vec![t2, t3, t5, t4, t1]);
    assert_eq!(for_x[2].fate, ScheduleFate::Duplicate);

    // The schedule for t1's read of y: t2, then t1 up to the read, with the
    // read of x still from the initializer.
    let for_y = r.schedule_log.iter().find(|rec| matches!(rec.read, Event::Read { var: 1, .. })).unwrap();
    assert_eq!(transactions_of(&for_y.schedule), vec![t2, t1]);
    assert!(for_y.schedule.events.contains(&Event::Read { t: t1, var: 0, source: Tid::Init(0) }));
    assert_eq!(for_y.schedule.pivot(), Event::Read { t: t1, var: 1, source: t2 });
}

#[test]
fn writers_without_earlier_reads_create_no_schedules() {
    let p = parse_program("var x; process a { transaction { x := 1; } } process b { transaction { x := 2; } }").unwrap();
    let r = explore_with(&p, Model::Ccv, &ExploreConfig { record_schedules: true, ..Default::default() });
    assert!(r.schedule_log.is_empty());
    assert_eq!(r.weak_traces.len(), 1);
}

#[test]
fn dedup_rejects_a_second_insert() {
    let t = Tid::txn(0, 0);
    let s = Schedule { events: vec![Event::Begin { t }, Event::Read { t, var: 0, source: Tid::txn(1, 0) }] };
    let mut existing = Vec::new();
    assert!(schedule_dedup(&existing, &s));
    existing.push(s.clone());
    assert!(!schedule_dedup(&existing, &s));
}

/// Structural comparison: same transactions, same read sources.
fn same_reads(a: &Schedule, b: &Schedule) -> bool {
    let reads = |s: &Schedule| -> (BTreeSet<Tid>, BTreeSet<(Tid, usize, Tid)>) {
        let mut ts = BTreeSet::new();
        let mut rs = BTreeSet::new();
        for e in &s.events {
            match *e {
                Event::Begin { t } => {
                    ts.insert(t);
                }
                Event::Read { t, var, source } => {
                    rs.insert((t, var, source));
                }
                _ => {}
            }
        }
        (ts, rs)
    };
    reads(a) == reads(b)
}

#[test]
fn dedup_matches_pairwise_comparison() {
    let mut rng = StdRng::seed_from_u64(40);
    let random_schedule = |rng: &mut StdRng| {
        let mut txns = vec![Tid::txn(0, 0), Tid::txn(1, 0), Tid::txn(2, 0)];
        txns.shuffle(rng);
        let mut events = Vec::new();
        for &t in &txns[..rng.gen_range(1..=3)] {
            events.push(Event::Begin { t });
            if rng.gen_bool(0.6) {
                let source = [Tid::Init(0), Tid::txn(1, 0), Tid::txn(2, 0)][rng.gen_range(0..3)];
                events.push(Event::Read { t, var: 0, source });
            }
            events.push(Event::End { t });
        }
        Schedule { events }
    };
    for _ in 0..300 {
        let existing: Vec<Schedule> = (0..rng.gen_range(0..6)).map(|_| random_schedule(&mut rng)).collect();
        let cand = random_schedule(&mut rng);
        let novel = !existing.iter().any(|s| same_reads(s, &cand));
        assert_eq!(schedule_dedup(&existing, &cand), novel);
    }
}

#[test]
fn litmus_shapes() {
    let sb = bench("store_buffer");
    let lb = bench("load_buffer");
    for m in Model::ALL {
        assert!(!explore(&sb, m).is_safe(), "store buffer under {m}");
        assert!(explore(&lb, m).is_safe(), "load buffer under {m}");
    }
}

#[test]
fn trace_budget_stops_early() {
    let p = bench("motivating/thirteen_traces");
    let r = explore_with(&p, Model::Ccv, &ExploreConfig { max_traces: Some(4), ..Default::default() });
    assert!(r.budget_exceeded);
    assert_eq!(r.weak_traces.len(), 4);
    let r = explore_with(&p, Model::Ccv, &ExploreConfig { max_nodes: Some(10), ..Default::default() });
    assert!(r.budget_exceeded);
    assert!(r.nodes <= 11);
}

#[test]
fn stop_at_first_violation() {
    let p = bench("lost_update");
    let r = explore_with(&p, Model::Ccv, &ExploreConfig { stop_at_first: true, ..Default::default() });
    assert_eq!(r.violations.len(), 1);
    assert!(!r.budget_exceeded);
}

#[test]
fn failing_assumes_discard_executions() {
    let p = parse_program(
        "var x; process a { transaction { x := 1; } } process b { transaction { r := x; assume(r == 1); assert(r == 1); } }",
    )
    .unwrap();
    let r = explore(&p, Model::Ccv);
    assert_eq!(r.weak_traces.len(), 1);
    assert_eq!(r.discarded, 1);
    assert!(r.is_safe());
}

#[test]
fn violation_witnesses_end_in_the_failing_execution() {
    let p = bench("lost_update");
    let r = explore(&p, Model::Cc);
    let v = &r.violations[0];
    assert!(matches!(v.observation_sequence.last(), Some(Event::End { .. })));
    assert!(r.weak_traces.contains(&v.trace.weaken()));
}

#[test]
fn exploration_is_deterministic() {
    let p = bench("motivating/thirteen_traces");
    let a = explore(&p, Model::Cc);
    let b = explore(&p, Model::Cc);
    assert_eq!(a.weak_traces, b.weak_traces);
    assert_eq!(a.nodes, b.nodes);
}

/// Exploration equals the brute-force enumeration, with the same failed
/// assertions, on programs larger than the acceptance corpus.
#[test]
fn matches_enumeration_on_wider_programs() {
    let shape = Shape { processes: 4, transactions: 2, instructions: 4, vars: 3 };
    for (src, p) in corpus(41, 150, shape) {
        for m in Model::ALL {
            let d = explore_with(&p, m, &checked());
            let a = enumerate_outcomes(&p, m, Guard::AXIOMATIC).unwrap();
            assert_eq!(d.weak_set(), a.weak_set(), "{m}: {src}");
            assert_eq!(d.duplicates, 0, "{m}: {src}");
            assert!(d.diagnostics.is_empty(), "{m}: {src}: {:?}", d.diagnostics);
            let found: BTreeSet<String> = d.violations.iter().map(|v| v.assert_site.clone()).collect();
            assert_eq!(found, a.failed_sites(), "{m}: {src}");
        }
    }
}
