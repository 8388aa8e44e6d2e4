//! Traces: transactions with program order, reads-from and coherence edges.
//!
//! Initializers are virtual: `init_x` writes 0 to `x`, is co-before every
//! other writer of `x`, and happens before every real transaction. They are
//! never stored as nodes, but may appear as the source of an rf edge.

mod dot;
mod reach;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::prog::VarId;

pub use dot::to_dot;
pub use reach::Reach;

/// A transaction: either the initializer of a variable or the `position`-th
/// transaction of `process`. Initializers order before real transactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum TransactionId {
    Init(VarId),
    Txn { process: usize, position: usize },
}

pub use TransactionId as Tid;

impl TransactionId {
    pub const fn txn(process: usize, position: usize) -> Self {
        TransactionId::Txn { process, position }
    }

    pub fn is_init(self) -> bool {
        matches!(self, TransactionId::Init(_))
    }

    pub fn process(self) -> Option<usize> {
        match self {
            TransactionId::Init(_) => None,
            TransactionId::Txn { process, .. } => Some(process),
        }
    }

    pub fn position(self) -> Option<usize> {
        match self {
            TransactionId::Init(_) => None,
            TransactionId::Txn { position, .. } => Some(position),
        }
    }

    /// The same-process predecessor, if any.
    pub fn po_pred(self) -> Option<Self> {
        match self {
            TransactionId::Txn { process, position } if position > 0 => Some(Self::txn(process, position - 1)),
            _ => None,
        }
    }
}

impl fmt::Display for TransactionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransactionId::Init(v) => write!(f, "init{v}"),
            TransactionId::Txn { process, position } => write!(f, "p{process}.t{position}"),
        }
    }
}

impl From<TransactionId> for String {
    fn from(t: TransactionId) -> String {
        t.to_string()
    }
}

impl FromStr for TransactionId {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, TraceError> {
        let bad = || TraceError::BadId(s.to_string());
        if let Some(v) = s.strip_prefix("init") {
            return v.parse().map(TransactionId::Init).map_err(|_| bad());
        }
        let rest = s.strip_prefix('p').ok_or_else(bad)?;
        let (p, t) = rest.split_once(".t").ok_or_else(bad)?;
        Ok(TransactionId::txn(p.parse().map_err(|_| bad())?, t.parse().map_err(|_| bad())?))
    }
}

impl TryFrom<String> for TransactionId {
    type Error = TraceError;

    fn try_from(s: String) -> Result<Self, TraceError> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("transaction {0} already present")]
    Duplicate(TransactionId),
    #[error("transaction {0} added before its program-order predecessor")]
    MissingPredecessor(TransactionId),
    #[error("unknown transaction {0}")]
    Unknown(TransactionId),
    #[error("initializers cannot be added as nodes")]
    InitNode,
    #[error("{0} does not write variable {1}")]
    NotAWriter(TransactionId, VarId),
    #[error("{reader} already reads variable {var} from {existing}")]
    SecondSource { reader: TransactionId, var: VarId, existing: TransactionId },
    #[error("initializer of variable {0} must stay co-minimal")]
    InitNotMinimal(VarId),
    #[error("malformed transaction id `{0}`")]
    BadId(String),
    #[error("malformed trace document: {0}")]
    Malformed(String),
}

/// Per-transaction bookkeeping.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TxMeta {
    /// Last value written to each variable (so far, for an open transaction).
    pub writes: BTreeMap<VarId, i64>,
    /// External read sources.
    pub reads: BTreeMap<VarId, TransactionId>,
}

#[derive(Debug, Clone)]
struct Closures {
    porf: Reach,
    hb: Reach,
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    num_vars: usize,
    txns: BTreeMap<TransactionId, TxMeta>,
    po: BTreeSet<(TransactionId, TransactionId)>,
    rf: BTreeSet<(TransactionId, TransactionId, VarId)>,
    co: BTreeSet<(TransactionId, TransactionId, VarId)>,
    cache: OnceLock<Arc<Closures>>,
}

impl PartialEq for Trace {
    fn eq(&self, other: &Self) -> bool {
        self.num_vars == other.num_vars
            && self.txns == other.txns
            && self.po == other.po
            && self.rf == other.rf
            && self.co == other.co
    }
}

impl Eq for Trace {}

impl Trace {
    pub fn new(num_vars: usize) -> Trace {
        Trace { num_vars, ..Trace::default() }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    fn invalidate(&mut self) {
        self.cache = OnceLock::new();
    }

    pub fn contains(&self, t: TransactionId) -> bool {
        match t {
            TransactionId::Init(v) => v < self.num_vars,
            _ => self.txns.contains_key(&t),
        }
    }

    fn check(&self, t: TransactionId) -> Result<(), TraceError> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(TraceError::Unknown(t))
        }
    }

    /// Adds `t` and the po edge from its process predecessor.
    pub fn add_transaction(&mut self, t: TransactionId) -> Result<(), TraceError> {
        if t.is_init() {
            return Err(TraceError::InitNode);
        }
        if self.txns.contains_key(&t) {
            return Err(TraceError::Duplicate(t));
        }
        if let Some(pred) = t.po_pred() {
            if !self.txns.contains_key(&pred) {
                return Err(TraceError::MissingPredecessor(t));
            }
            self.po.insert((pred, t));
        }
        self.txns.insert(t, TxMeta::default());
        self.invalidate();
        Ok(())
    }

    /// Records that `t` (last) wrote `value` to `var`.
    pub fn record_write(&mut self, t: TransactionId, var: VarId, value: i64) -> Result<(), TraceError> {
        let meta = self.txns.get_mut(&t).ok_or(TraceError::Unknown(t))?;
        meta.writes.insert(var, value);
        Ok(())
    }

    pub fn add_rf(&mut self, src: TransactionId, reader: TransactionId, var: VarId) -> Result<(), TraceError> {
        self.check(src)?;
        if reader.is_init() {
            return Err(TraceError::InitNode);
        }
        self.check(reader)?;
        if !self.writes_var(src, var) {
            return Err(TraceError::NotAWriter(src, var));
        }
        let meta = self.txns.get_mut(&reader).expect("checked");
        if let Some(&existing) = meta.reads.get(&var) {
            return Err(TraceError::SecondSource { reader, var, existing });
        }
        meta.reads.insert(var, src);
        self.rf.insert((src, reader, var));
        self.invalidate();
        Ok(())
    }

    /// Adds `a co^var b`. Edges out of an initializer are implicit and dropped.
    pub fn add_co(&mut self, a: TransactionId, b: TransactionId, var: VarId) -> Result<(), TraceError> {
        self.check(a)?;
        self.check(b)?;
        for t in [a, b] {
            if !self.writes_var(t, var) {
                return Err(TraceError::NotAWriter(t, var));
            }
        }
        if b.is_init() {
            return Err(TraceError::InitNotMinimal(var));
        }
        if a.is_init() {
            return Ok(());
        }
        if self.co.insert((a, b, var)) {
            self.invalidate();
        }
        Ok(())
    }

    pub fn transactions(&self) -> impl Iterator<Item = TransactionId> + '_ {
        self.txns.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.txns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txns.is_empty()
    }

    pub fn meta(&self, t: TransactionId) -> Option<&TxMeta> {
        self.txns.get(&t)
    }

    pub fn po(&self) -> &BTreeSet<(TransactionId, TransactionId)> {
        &self.po
    }

    pub fn rf(&self) -> &BTreeSet<(TransactionId, TransactionId, VarId)> {
        &self.rf
    }

    pub fn co(&self) -> &BTreeSet<(TransactionId, TransactionId, VarId)> {
        &self.co
    }

    pub fn writes_var(&self, t: TransactionId, var: VarId) -> bool {
        match t {
            TransactionId::Init(v) => v == var,
            _ => self.txns.get(&t).is_some_and(|m| m.writes.contains_key(&var)),
        }
    }

    /// Value `t` last wrote to `var` (0 for initializers).
    pub fn written_value(&self, t: TransactionId, var: VarId) -> Option<i64> {
        match t {
            TransactionId::Init(v) if v == var => Some(0),
            TransactionId::Init(_) => None,
            _ => self.txns.get(&t)?.writes.get(&var).copied(),
        }
    }

    /// Writers of `var`, initializer first, then canonical order.
    pub fn writers(&self, var: VarId) -> Vec<TransactionId> {
        std::iter::once(TransactionId::Init(var))
            .chain(self.txns.iter().filter(|(_, m)| m.writes.contains_key(&var)).map(|(t, _)| *t))
            .collect()
    }

    /// External read source of `reader` on `var`.
    pub fn source(&self, reader: TransactionId, var: VarId) -> Option<TransactionId> {
        self.txns.get(&reader)?.reads.get(&var).copied()
    }

    pub fn reads_of(&self, reader: TransactionId) -> impl Iterator<Item = (VarId, TransactionId)> + '_ {
        self.txns.get(&reader).into_iter().flat_map(|m| m.reads.iter().map(|(v, t)| (*v, *t)))
    }

    fn closures(&self) -> &Closures {
        self.cache.get_or_init(|| {
            let ids: Vec<_> = self.txns.keys().copied().collect();
            let porf_edges: Vec<_> =
                self.po.iter().copied().chain(self.rf.iter().map(|&(a, b, _)| (a, b))).collect();
            let hb_edges = porf_edges.iter().copied().chain(self.co.iter().map(|&(a, b, _)| (a, b)));
            Arc::new(Closures { porf: Reach::new(ids.clone(), porf_edges.clone()), hb: Reach::new(ids, hb_edges) })
        })
    }

    /// `a [po ∪ rf ∪ co]+ b`.
    pub fn reach_hb(&self, a: TransactionId, b: TransactionId) -> bool {
        self.closures().hb.reaches(a, b)
    }

    /// `a [po ∪ rf]+ b`.
    pub fn reach_porf(&self, a: TransactionId, b: TransactionId) -> bool {
        self.closures().porf.reaches(a, b)
    }

    /// Neither transaction reaches the other through po and rf.
    pub fn concurrent(&self, a: TransactionId, b: TransactionId) -> bool {
        a != b && !self.reach_porf(a, b) && !self.reach_porf(b, a)
    }

    pub fn is_acyclic(&self) -> bool {
        !self.closures().hb.has_cycle()
    }

    /// Acyclicity of po ∪ rf alone.
    pub fn is_porf_acyclic(&self) -> bool {
        !self.closures().porf.has_cycle()
    }

    /// Transitive closure of `co^var` with the initializer co-minimal.
    pub fn co_before(&self, a: TransactionId, b: TransactionId, var: VarId) -> bool {
        if b.is_init() || a == b {
            return false;
        }
        if a.is_init() {
            return a == TransactionId::Init(var) && self.writes_var(b, var);
        }
        let mut seen = BTreeSet::from([a]);
        let mut stack = vec![a];
        while let Some(t) = stack.pop() {
            for &(_, next, v) in self.co.range((t, TransactionId::Init(0), 0)..).take_while(|e| e.0 == t) {
                if v == var && seen.insert(next) {
                    if next == b {
                        return true;
                    }
                    stack.push(next);
                }
            }
        }
        false
    }

    /// Partially-good check for CCv: every writer of `x` that happens before
    /// (po ∪ rf) a reader of `x` is co-before the reader's source, and the
    /// trace is acyclic.
    pub fn is_partially_good_ccv(&self) -> bool {
        self.is_acyclic()
            && self.rf.iter().all(|&(t1, t2, x)| {
                self.writers(x)
                    .into_iter()
                    .filter(|&t3| t3 != t1 && self.reach_porf(t3, t2))
                    .all(|t3| self.co_before(t3, t1, x))
            })
    }

    /// Drops co and returns the canonical weak trace.
    pub fn weaken(&self) -> WeakTrace {
        WeakTrace {
            transactions: self.txns.keys().copied().collect(),
            po: self.po.iter().copied().collect(),
            rf: self.rf.iter().copied().collect(),
        }
    }

    /// Rebuilds a trace (without write metadata beyond rf sources) from a weak
    /// trace.
    pub fn from_weak(w: &WeakTrace, num_vars: usize) -> Result<Trace, TraceError> {
        let mut t = Trace::new(num_vars);
        for &id in &w.transactions {
            t.add_transaction(id)?;
        }
        for &(src, _, var) in &w.rf {
            if !src.is_init() {
                t.record_write(src, var, 0)?;
            }
        }
        for &(src, reader, var) in &w.rf {
            t.add_rf(src, reader, var)?;
        }
        Ok(t)
    }
}

/// A trace with co erased, in canonical (sorted) form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WeakTrace {
    pub transactions: Vec<TransactionId>,
    pub po: Vec<(TransactionId, TransactionId)>,
    /// `(source, reader, var)`.
    pub rf: Vec<(TransactionId, TransactionId, VarId)>,
}

/// Serialized form of a weak trace, with variable names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub vars: Vec<String>,
    pub transactions: Vec<TransactionId>,
    pub po: Vec<(TransactionId, TransactionId)>,
    pub rf: Vec<RfEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RfEdge {
    pub src: TransactionId,
    pub reader: TransactionId,
    pub var: String,
}

impl WeakTrace {
    /// Already weak: returns a copy.
    pub fn weaken(&self) -> WeakTrace {
        self.clone()
    }

    /// Sorts and deduplicates all edge lists.
    pub fn canonicalize(mut self) -> WeakTrace {
        self.transactions.sort();
        self.transactions.dedup();
        self.po.sort();
        self.po.dedup();
        self.rf.sort();
        self.rf.dedup();
        self
    }

    pub fn is_canonical(&self) -> bool {
        self.clone().canonicalize() == *self
    }

    pub fn to_document(&self, vars: &[String]) -> TraceDocument {
        TraceDocument {
            vars: vars.to_vec(),
            transactions: self.transactions.clone(),
            po: self.po.clone(),
            rf: self
                .rf
                .iter()
                .map(|&(src, reader, var)| RfEdge { src, reader, var: vars[var].clone() })
                .collect(),
        }
    }

    /// Parses a document and checks the structural trace invariants.
    pub fn from_document(doc: &TraceDocument) -> Result<WeakTrace, TraceError> {
        let var = |name: &str| {
            doc.vars.iter().position(|v| v == name).ok_or_else(|| TraceError::Malformed(format!("unknown variable `{name}`")))
        };
        let rf = doc.rf.iter().map(|e| Ok((e.src, e.reader, var(&e.var)?))).collect::<Result<Vec<_>, TraceError>>()?;
        let w = WeakTrace { transactions: doc.transactions.clone(), po: doc.po.clone(), rf }.canonicalize();
        // Structural validation: po must be exactly the process chains and rf
        // must connect known transactions with one source per (reader, var).
        let rebuilt = Trace::from_weak(&w, doc.vars.len())?;
        if rebuilt.weaken() != w {
            return Err(TraceError::Malformed("po does not match the process chains".into()));
        }
        for &(src, _, _) in &w.rf {
            if let TransactionId::Init(v) = src {
                if v >= doc.vars.len() {
                    return Err(TraceError::Unknown(src));
                }
            }
        }
        Ok(w)
    }

    pub fn to_json(&self, vars: &[String]) -> String {
        serde_json::to_string_pretty(&self.to_document(vars)).expect("trace documents always serialize")
    }

    /// Stable short hash of the canonical form, used for file names.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("weak traces always serialize");
        let hash = Sha256::digest(&bytes);
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const fn t(p: usize, i: usize) -> TransactionId {
        TransactionId::txn(p, i)
    }

    #[test]
    fn add_first_transaction() {
        let mut tr = Trace::new(1);
        tr.add_transaction(t(0, 0)).unwrap();
        assert_eq!(tr.len(), 1);
        assert!(tr.po().is_empty());
    }

    #[test]
    fn add_successor_extends_po() {
        let mut tr = Trace::new(1);
        tr.add_transaction(t(0, 0)).unwrap();
        tr.add_transaction(t(0, 1)).unwrap();
        assert_eq!(tr.po().iter().copied().collect::<Vec<_>>(), vec![(t(0, 0), t(0, 1))]);
    }

    #[test]
    fn add_twice_rejected() {
        let mut tr = Trace::new(1);
        tr.add_transaction(t(0, 0)).unwrap();
        assert_eq!(tr.add_transaction(t(0, 0)), Err(TraceError::Duplicate(t(0, 0))));
        assert_eq!(tr.add_transaction(t(1, 1)), Err(TraceError::MissingPredecessor(t(1, 1))));
    }

    #[test]
    fn ids_round_trip_through_strings() {
        for id in [TransactionId::Init(3), t(0, 0), t(12, 7)] {
            assert_eq!(id.to_string().parse::<TransactionId>().unwrap(), id);
        }
        assert!("q1.t2".parse::<TransactionId>().is_err());
    }

    #[test]
    fn reachability_basics() {
        let mut tr = Trace::new(1);
        for id in [t(0, 0), t(1, 0)] {
            tr.add_transaction(id).unwrap();
        }
        tr.record_write(t(0, 0), 0, 1).unwrap();
        tr.record_write(t(1, 0), 0, 2).unwrap();
        assert!(!tr.reach_hb(t(0, 0), t(1, 0)));
        tr.add_co(t(0, 0), t(1, 0), 0).unwrap();
        assert!(tr.reach_hb(t(0, 0), t(1, 0)));
        assert!(!tr.reach_porf(t(0, 0), t(1, 0)));
        assert!(tr.concurrent(t(0, 0), t(1, 0)));
        assert!(!tr.concurrent(t(0, 0), t(0, 0)));
        tr.add_co(t(1, 0), t(0, 0), 0).unwrap();
        assert!(!tr.is_acyclic());
        assert!(Trace::new(0).is_acyclic());
    }

    #[test]
    fn init_precedes_everything() {
        let mut tr = Trace::new(2);
        tr.add_transaction(t(0, 0)).unwrap();
        assert!(tr.reach_porf(TransactionId::Init(1), t(0, 0)));
        assert!(!tr.reach_hb(t(0, 0), TransactionId::Init(1)));
        assert!(tr.co_before(TransactionId::Init(0), t(0, 0), 0) == tr.writes_var(t(0, 0), 0));
    }

    #[test]
    fn weaken_is_idempotent_and_drops_co() {
        let mut tr = Trace::new(1);
        for id in [t(0, 0), t(1, 0)] {
            tr.add_transaction(id).unwrap();
            tr.record_write(id, 0, 1).unwrap();
        }
        let w = tr.weaken();
        tr.add_co(t(0, 0), t(1, 0), 0).unwrap();
        assert_eq!(tr.weaken(), w);
        assert_eq!(w.weaken(), w);
        assert!(w.is_canonical());
    }

    #[test]
    fn document_round_trip() {
        let mut tr = Trace::new(2);
        for id in [t(0, 0), t(1, 0), t(1, 1)] {
            tr.add_transaction(id).unwrap();
        }
        tr.record_write(t(0, 0), 1, 4).unwrap();
        tr.add_rf(t(0, 0), t(1, 1), 1).unwrap();
        tr.add_rf(TransactionId::Init(0), t(1, 0), 0).unwrap();
        let w = tr.weaken();
        let vars = vec!["x".to_string(), "y".to_string()];
        let json = w.to_json(&vars);
        let doc: TraceDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(WeakTrace::from_document(&doc).unwrap(), w);
        assert_eq!(w.digest().len(), 16);
    }

    #[test]
    fn second_source_rejected() {
        let mut tr = Trace::new(1);
        tr.add_transaction(t(0, 0)).unwrap();
        tr.add_transaction(t(1, 0)).unwrap();
        tr.record_write(t(1, 0), 0, 1).unwrap();
        tr.add_rf(TransactionId::Init(0), t(0, 0), 0).unwrap();
        assert!(matches!(tr.add_rf(t(1, 0), t(0, 0), 0), Err(TraceError::SecondSource { .. })));
    }
}
