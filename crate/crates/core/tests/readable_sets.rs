mod common;

use common::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use txcheck::cc::{apply_read_cc, is_partially_good_cc, readable_set_cc};
use txcheck::ccv::{apply_read, is_fulfilled_ccv, readable_set, visible_set, ReadContext, ReadError};
use txcheck::oracle::{readable_by_insertion_cc, readable_by_insertion_ccv};
use txcheck::trace::{Tid, Trace};
use txcheck::Model;

fn names(ts: Vec<Tid>) -> Vec<&'static str> {
    ts.into_iter().map(fx_name).collect()
}

#[test]
fn first_read_sees_only_the_initializer() {
    let mut tr = Trace::new(1);
    tr.add_transaction(Tid::txn(0, 0)).unwrap();
    let ctx = ReadContext::new(&tr, Tid::txn(0, 0), 0);
    assert_eq!(readable_set(ctx).unwrap(), vec![Tid::Init(0)]);
    assert_eq!(readable_set_cc(ctx).unwrap(), vec![Tid::Init(0)]);
}

#[test]
fn fixture_readable_set() {
    let tr = read_fixture();
    let ctx = ReadContext::new(&tr, fx("t7"), Y);
    assert_eq!(names(readable_set(ctx).unwrap()), ["t2", "t4", "t5", "t8"]);
    assert_eq!(readable_by_insertion_ccv(ctx), readable_set(ctx).unwrap());
}

#[test]
fn fixture_exclusions() {
    let tr = read_fixture();
    let ctx = ReadContext::new(&tr, fx("t7"), Y);
    // t3 is hidden: t3 po t4 rf t7 and t4 writes y.
    assert!(tr.reach_porf(fx("t3"), fx("t4")) && tr.reach_porf(fx("t4"), fx("t7")));
    // t9 writes x and y like t2, the source of t7's read of x: reading y from
    // t9 would force t2 co^y t9 and t9 co^x t2.
    let mut with_t9 = tr.clone();
    with_t9.add_rf(fx("t9"), fx("t7"), Y).unwrap();
    assert!(!txcheck::ccv::is_ccv_consistent(&with_t9));
    assert!(!readable_set(ctx).unwrap().contains(&fx("t9")));
}

#[test]
fn fixture_visible_set() {
    let tr = read_fixture();
    let ctx = ReadContext::new(&tr, fx("t7"), Y);
    assert_eq!(names(visible_set(ctx).unwrap()), ["t2", "t4"]);
}

#[test]
fn fixture_reading_from_t8_adds_the_necessary_co_edges() {
    let tr = read_fixture();
    let ctx = ReadContext::new(&tr, fx("t7"), Y);
    let out = apply_read(ctx, fx("t8")).unwrap();
    assert!(out.rf().contains(&(fx("t8"), fx("t7"), Y)));
    for (a, b, v) in [("t2", "t8", Y), ("t4", "t8", Y), ("t8", "t6", W)] {
        assert!(out.co().contains(&(fx(a), fx(b), v)), "missing {a} co {b}");
    }
    assert!(is_fulfilled_ccv(&out) && out.is_partially_good_ccv());
    assert_eq!(apply_read(ctx, fx("t9")).unwrap_err(), ReadError::NotReadable { src: fx("t9"), reader: fx("t7") });
}

#[test]
fn reading_from_init_adds_no_co() {
    let mut tr = Trace::new(1);
    tr.add_transaction(Tid::txn(0, 0)).unwrap();
    let out = apply_read(ReadContext::new(&tr, Tid::txn(0, 0), 0), Tid::Init(0)).unwrap();
    assert_eq!(out.rf().len(), 1);
    assert!(out.co().is_empty());
    let out = apply_read_cc(ReadContext::new(&tr, Tid::txn(0, 0), 0), Tid::Init(0)).unwrap();
    assert_eq!(out.rf().len(), 1);
}

#[test]
fn invalid_contexts_are_rejected() {
    let mut tr = Trace::new(1);
    tr.add_transaction(Tid::txn(0, 0)).unwrap();
    tr.record_write(Tid::txn(0, 0), 0, 1).unwrap();
    let t = Tid::txn(0, 0);
    assert_eq!(readable_set(ReadContext::new(&tr, t, 0)), Err(ReadError::NotExternal(t, 0)));
    assert_eq!(readable_set(ReadContext::new(&tr, t, 3)), Err(ReadError::UnknownVariable(3)));
    assert_eq!(readable_set(ReadContext::new(&tr, Tid::txn(1, 0), 0)), Err(ReadError::UnknownReader(Tid::txn(1, 0))));
}

/// Initializers precede every transaction, so a reader without incoming
/// edges sees at most initializers as visible.
#[test]
fn unconnected_reader_sees_only_initializers() {
    let mut tr = Trace::new(1);
    for t in [Tid::txn(0, 0), Tid::txn(1, 0)] {
        tr.add_transaction(t).unwrap();
    }
    tr.record_write(Tid::txn(0, 0), 0, 1).unwrap();
    let ctx = ReadContext::new(&tr, Tid::txn(1, 0), 0);
    assert_eq!(readable_set(ctx).unwrap(), vec![Tid::Init(0), Tid::txn(0, 0)]);
    assert_eq!(visible_set(ctx).unwrap(), vec![Tid::Init(0)]);
}

/// The four local patterns miss a cycle that runs through two of the
/// reader's earlier sources; the chained check catches it.
#[test]
fn chained_co_cycle_excluded() {
    let (x, y, z, a, b, c, d) = (0, 1, 2, 3, 4, 5, 6);
    let t4 = Tid::txn(0, 0);
    let t4p = Tid::txn(1, 0);
    let t5 = Tid::txn(2, 0);
    let tp = Tid::txn(2, 1);
    let t5p = Tid::txn(3, 0);
    let t = Tid::txn(4, 0);
    let mut tr = Trace::new(7);
    for id in [t4, t4p, t5, t5p, tp, t] {
        tr.add_transaction(id).unwrap();
    }
    for (w, v) in [(t4, y), (t4, a), (t4p, z), (t4p, b)] {
        tr.record_write(w, v, 1).unwrap();
    }
    tr = apply_read(ReadContext::new(&tr, t5, b), t4p).unwrap();
    tr.record_write(t5, y, 2).unwrap();
    tr.record_write(t5, c, 1).unwrap();
    tr = apply_read(ReadContext::new(&tr, t5p, a), t4).unwrap();
    tr.record_write(t5p, z, 2).unwrap();
    tr.record_write(t5p, d, 1).unwrap();
    tr = apply_read(ReadContext::new(&tr, tp, d), t5p).unwrap();
    tr.record_write(tp, x, 1).unwrap();
    tr = apply_read(ReadContext::new(&tr, t, y), t4).unwrap();
    tr = apply_read(ReadContext::new(&tr, t, z), t4p).unwrap();
    let ctx = ReadContext::new(&tr, t, x);
    let rbl = readable_set(ctx).unwrap();
    assert!(!rbl.contains(&tp), "{rbl:?}");
    assert_eq!(rbl, readable_by_insertion_ccv(ctx));
    let mut forced = tr.clone();
    forced.add_rf(tp, t, x).unwrap();
    assert!(!txcheck::ccv::is_ccv_consistent(&forced));
}

#[test]
fn ccv_conditions_agree_with_tentative_insertion() {
    let stats = compare_readable(21, 20_000, Model::Ccv, |c| readable_set(c).unwrap(), readable_by_insertion_ccv);
    assert_eq!(stats.disagreements, 0, "{:?}", stats.first_mismatch);
}

#[test]
fn cc_conditions_agree_with_tentative_insertion() {
    let stats = compare_readable(22, 20_000, Model::Cc, |c| readable_set_cc(c).unwrap(), readable_by_insertion_cc);
    assert_eq!(stats.disagreements, 0, "{:?}", stats.first_mismatch);
}

#[test]
fn visible_is_readable_filtered_by_porf() {
    let stats = compare_readable(
        23,
        3_000,
        Model::Ccv,
        |c| visible_set(c).unwrap(),
        |c| {
            let porf = closure(c.trace, true, true, false);
            readable_by_insertion_ccv(c).into_iter().filter(|&w| reaches(&porf, w, c.reader)).collect()
        },
    );
    assert_eq!(stats.disagreements, 0, "{:?}", stats.first_mismatch);
}

/// Every readable source, once applied, leaves a fulfilled and partially
/// good trace (and a partially good CC trace under CC).
#[test]
fn applying_any_readable_source_preserves_consistency() {
    let mut rng = StdRng::seed_from_u64(24);
    let mut checked = 0;
    for model in Model::ALL {
        let mut n = 0;
        while n < 2_000 {
            let nv = rng.gen_range(1..=3);
            let mut tr = Trace::new(nv);
            let mut next = [0usize; 3];
            for _ in 0..rng.gen_range(2..=6) {
                let p = rng.gen_range(0..3);
                let t = Tid::txn(p, next[p]);
                next[p] += 1;
                tr.add_transaction(t).unwrap();
                let mut vars: Vec<usize> = (0..nv).collect();
                vars.shuffle(&mut rng);
                for &x in &vars[..rng.gen_range(0..=nv)] {
                    let ctx = ReadContext::new(&tr, t, x);
                    let sources = model.readable(ctx);
                    for &s in &sources {
                        let out = match model {
                            Model::Ccv => apply_read(ctx, s).unwrap(),
                            Model::Cc => apply_read_cc(ctx, s).unwrap(),
                        };
                        assert!(model.is_fulfilled_and_good(&out), "{model} {s} -> {t} on {x}: {tr:?}");
                        if model == Model::Cc {
                            assert!(is_partially_good_cc(&out));
                        }
                        n += 1;
                    }
                    tr = model.apply_read(ctx, *sources.choose(&mut rng).unwrap());
                }
                for x in 0..nv {
                    if rng.gen_bool(0.5) {
                        tr.record_write(t, x, 1).unwrap();
                    }
                }
            }
        }
        checked += n;
    }
    assert!(checked >= 4_000);
}
