//! Shared helpers for integration tests: a seeded random program generator.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use txcheck::trace::{Tid, Trace};
use txcheck::{parse_program, Program};

/// Shape limits for generated programs.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub processes: usize,
    pub transactions: usize,
    pub instructions: usize,
    pub vars: usize,
}

impl Shape {
    pub const SMALL: Shape = Shape { processes: 3, transactions: 2, instructions: 3, vars: 2 };
}

/// DSL text of a random program. Reads, writes (of constants or of earlier
/// registers), conditionals on registers and asserts are mixed.
pub fn random_source(rng: &mut StdRng, shape: Shape) -> String {
    let vars: Vec<String> = (0..rng.gen_range(1..=shape.vars)).map(|i| ["x", "y", "z"][i].to_string()).collect();
    let mut out = String::new();
    for v in &vars {
        out.push_str(&format!("var {v}; "));
    }
    let np = rng.gen_range(1..=shape.processes);
    for p in 0..np {
        out.push_str(&format!("process p{p} {{ "));
        let mut regs: Vec<String> = Vec::new();
        for _ in 0..rng.gen_range(1..=shape.transactions) {
            out.push_str("transaction { ");
            for _ in 0..rng.gen_range(0..=shape.instructions) {
                let x = &vars[rng.gen_range(0..vars.len())];
                match rng.gen_range(0..10) {
                    0..=3 => {
                        let r = format!("r{}", regs.len());
                        out.push_str(&format!("{r} := {x}; "));
                        regs.push(r);
                    }
                    4..=6 => {
                        let v = rng.gen_range(1..=3);
                        out.push_str(&format!("{x} := {v}; "));
                    }
                    7 if !regs.is_empty() => {
                        let r = &regs[rng.gen_range(0..regs.len())];
                        out.push_str(&format!("{x} := {r} + 1; "));
                    }
                    8 if !regs.is_empty() => {
                        let r = &regs[rng.gen_range(0..regs.len())];
                        let v = rng.gen_range(1..=3);
                        out.push_str(&format!("if ({r} == 0) {{ {x} := {v}; }} "));
                    }
                    9 if !regs.is_empty() => {
                        let r = &regs[rng.gen_range(0..regs.len())];
                        out.push_str(&format!("assert({r} != {}); ", rng.gen_range(0..=2)));
                    }
                    _ => out.push_str(&format!("{x} := 1; ")),
                }
            }
            out.push_str("} ");
        }
        out.push_str("} ");
    }
    out
}

/// `n` random programs from a fixed seed.
pub fn corpus(seed: u64, n: usize, shape: Shape) -> Vec<(String, Program)> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let src = random_source(&mut rng, shape);
            let p = parse_program(&src).unwrap_or_else(|e| panic!("generated program fails to parse: {e}\n{src}"));
            (src, p)
        })
        .collect()
}

pub fn bench(name: &str) -> Program {
    let path = format!("{}/../../benchmarks/{name}.tpl", env!("CARGO_MANIFEST_DIR"));
    let src = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    parse_program(&src).unwrap_or_else(|e| panic!("{path}: {e}"))
}

/// A random trace with `n` transactions over up to `processes` processes.
/// Every transaction writes a random subset of the variables; each
/// (reader, variable) pair gets an rf edge from a random writer (initializers
/// included) with probability `p_rf`, and each ordered writer pair of a
/// variable a co edge with probability `p_co`. Cycles are possible.
pub fn random_trace(rng: &mut StdRng, n: usize, processes: usize, vars: usize, p_rf: f64, p_co: f64) -> Trace {
    let mut tr = Trace::new(vars);
    let mut next = vec![0; processes];
    for _ in 0..n {
        let p = rng.gen_range(0..processes);
        let t = Tid::txn(p, next[p]);
        next[p] += 1;
        tr.add_transaction(t).unwrap();
        for x in 0..vars {
            if rng.gen_bool(0.4) {
                tr.record_write(t, x, 1).unwrap();
            }
        }
    }
    let ids: Vec<Tid> = tr.transactions().collect();
    for &t in &ids {
        for x in 0..vars {
            if tr.writes_var(t, x) || !rng.gen_bool(p_rf) {
                continue;
            }
            let ws: Vec<Tid> = tr.writers(x).into_iter().filter(|&w| w != t).collect();
            let w = ws[rng.gen_range(0..ws.len())];
            tr.add_rf(w, t, x).unwrap();
        }
    }
    for x in 0..vars {
        let ws: Vec<Tid> = tr.writers(x).into_iter().filter(|w| !w.is_init()).collect();
        for &a in &ws {
            for &b in &ws {
                if a != b && rng.gen_bool(p_co) {
                    tr.add_co(a, b, x).unwrap();
                }
            }
        }
    }
    tr
}

/// Floyd–Warshall transitive closure over the real transactions of `tr`,
/// using the given edge kinds. Initializers are handled by the callers.
pub fn closure(tr: &Trace, po: bool, rf: bool, co: bool) -> (Vec<Tid>, Vec<Vec<bool>>) {
    let ids: Vec<Tid> = tr.transactions().collect();
    let ix = |t: Tid| ids.iter().position(|&u| u == t);
    let n = ids.len();
    let mut m = vec![vec![false; n]; n];
    let mut edges: Vec<(Tid, Tid)> = Vec::new();
    if po {
        edges.extend(tr.po().iter().copied());
    }
    if rf {
        edges.extend(tr.rf().iter().map(|&(a, b, _)| (a, b)));
    }
    if co {
        edges.extend(tr.co().iter().map(|&(a, b, _)| (a, b)));
    }
    for (a, b) in edges {
        if let (Some(i), Some(j)) = (ix(a), ix(b)) {
            m[i][j] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if m[i][k] {
                for j in 0..n {
                    if m[k][j] {
                        m[i][j] = true;
                    }
                }
            }
        }
    }
    (ids, m)
}

/// Reachability in a closure from [`closure`], with initializers reaching
/// every real transaction and nothing reaching an initializer.
pub fn reaches(c: &(Vec<Tid>, Vec<Vec<bool>>), a: Tid, b: Tid) -> bool {
    if b.is_init() {
        return false;
    }
    if a.is_init() {
        return true;
    }
    let i = c.0.iter().position(|&u| u == a).unwrap();
    let j = c.0.iter().position(|&u| u == b).unwrap();
    c.1[i][j]
}

/// Transaction names of [`read_fixture`].
pub const FIXTURE_NAMES: [(&str, Tid); 9] = [
    ("t1", Tid::txn(0, 0)),
    ("t2", Tid::txn(0, 1)),
    ("t3", Tid::txn(1, 0)),
    ("t4", Tid::txn(1, 1)),
    ("t5", Tid::txn(2, 0)),
    ("t6", Tid::txn(3, 0)),
    ("t7", Tid::txn(4, 0)),
    ("t8", Tid::txn(5, 0)),
    ("t9", Tid::txn(5, 1)),
];

pub fn fx(name: &str) -> Tid {
    FIXTURE_NAMES.iter().find(|(n, _)| *n == name).unwrap_or_else(|| panic!("no transaction {name}")).1
}

pub fn fx_name(t: Tid) -> &'static str {
    FIXTURE_NAMES.iter().find(|(_, u)| *u == t).map(|(n, _)| *n).unwrap_or("init")
}

pub const X: usize = 0;
pub const Y: usize = 1;
pub const Z: usize = 2;
pub const W: usize = 3;

/// The configuration in which `t7` is about to read `y`: writers of `y` are
/// t2, t3, t4, t5, t8, t9; writers of `x` are t2, t9; `t3 po t4`; `t7` has
/// already read `x` from t2, `z` from t4 and `w` from t6. `t8` also writes
/// `w`.
pub fn read_fixture() -> Trace {
    use txcheck::ccv::{apply_read, ReadContext};
    let mut tr = Trace::new(4);
    for (_, t) in FIXTURE_NAMES {
        tr.add_transaction(t).unwrap();
    }
    let writes: [(&str, &[usize]); 8] = [
        ("t2", &[X, Y]),
        ("t3", &[Y]),
        ("t4", &[Y, Z]),
        ("t5", &[Y]),
        ("t6", &[W]),
        ("t8", &[Y, W]),
        ("t9", &[X, Y]),
        ("t1", &[]),
    ];
    for (name, vars) in writes {
        for &v in vars {
            tr.record_write(fx(name), v, 1).unwrap();
        }
    }
    let t7 = fx("t7");
    for (var, src) in [(X, "t2"), (Z, "t4"), (W, "t6")] {
        tr = apply_read(ReadContext::new(&tr, t7, var), fx(src)).unwrap();
    }
    tr
}

/// Outcome of comparing a readable-set implementation with its oracle on
/// random read contexts.
#[derive(Debug, Default)]
pub struct TripleStats {
    /// (trace, read, candidate) triples checked.
    pub triples: usize,
    pub disagreements: usize,
    pub first_mismatch: Option<String>,
}

/// Grows random traces read by read, each read taking a random source from
/// the oracle's readable set, and compares `fast` with `oracle` on every
/// pending read until `min_triples` candidate decisions have been compared.
pub fn compare_readable(
    seed: u64,
    min_triples: usize,
    model: txcheck::Model,
    fast: impl Fn(txcheck::ccv::ReadContext<'_>) -> Vec<Tid>,
    oracle: impl Fn(txcheck::ccv::ReadContext<'_>) -> Vec<Tid>,
) -> TripleStats {
    use rand::seq::SliceRandom;
    use txcheck::ccv::ReadContext;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut stats = TripleStats::default();
    while stats.triples < min_triples {
        let nv = rng.gen_range(1..=3);
        let np = rng.gen_range(2..=4);
        let mut tr = Trace::new(nv);
        let mut next = vec![0usize; np];
        for _ in 0..rng.gen_range(2..=7) {
            let p = rng.gen_range(0..np);
            let t = Tid::txn(p, next[p]);
            next[p] += 1;
            tr.add_transaction(t).unwrap();
            let mut vars: Vec<usize> = (0..nv).collect();
            vars.shuffle(&mut rng);
            for &x in &vars[..rng.gen_range(0..=nv)] {
                let ctx = ReadContext::new(&tr, t, x);
                let (got, want) = (fast(ctx), oracle(ctx));
                stats.triples += tr.writers(x).len();
                if got != want {
                    stats.disagreements += 1;
                    stats.first_mismatch.get_or_insert_with(|| format!("{t} reading {x}: {got:?} vs {want:?} in {tr:?}"));
                }
                let src = *want.choose(&mut rng).expect("some source is always readable");
                tr = model.apply_read(ReadContext::new(&tr, t, x), src);
            }
            for x in 0..nv {
                if rng.gen_bool(0.5) {
                    tr.record_write(t, x, 1).unwrap();
                }
            }
        }
    }
    stats
}
