//! Independent reference implementations.
//!
//! None of these share code with the explorer beyond program execution
//! ([`crate::machine`]) and the trace data structure: the axiomatic
//! enumerator tries every source for every read and filters with the
//! model's consistency predicate, and the operational interpreters run the
//! store/delivery semantics directly.

mod axiomatic;
mod insertion;
mod operational;
mod summary;

use std::collections::{BTreeMap, BTreeSet};

use crate::trace::WeakTrace;

pub use axiomatic::{enumerate_outcomes, enumerate_weak_traces};
pub use insertion::{readable_by_insertion_cc, readable_by_insertion_ccv};
pub use operational::{
    enumerate_operational, enumerate_operational_outcomes, step_cc, step_ccv, CcEntry, CcLocalState, CcvLocalState,
    Configuration, Label, LocalState, Message, StepError,
};
pub use summary::{check_legal_summary, summarize, ExecutionSummary, SummaryError, SummaryEvent};

/// Size limits for the exhaustive oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Guard {
    pub max_transactions: usize,
}

impl Guard {
    pub const AXIOMATIC: Guard = Guard { max_transactions: 12 };
    pub const OPERATIONAL: Guard = Guard { max_transactions: 8 };
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("program has {found} transactions, oracle guard is {limit}")]
    GuardExceeded { limit: usize, found: usize },
}

/// Weak traces of complete, non-discarded executions with the assert sites
/// (labels) that fail in each.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Enumeration {
    pub outcomes: BTreeMap<WeakTrace, BTreeSet<String>>,
}

impl Enumeration {
    pub fn weak_set(&self) -> BTreeSet<WeakTrace> {
        self.outcomes.keys().cloned().collect()
    }

    pub fn failed_sites(&self) -> BTreeSet<String> {
        self.outcomes.values().flatten().cloned().collect()
    }
}

fn check_guard(prog: &crate::prog::Program, guard: Guard) -> Result<(), OracleError> {
    let found = prog.num_transactions();
    if found > guard.max_transactions {
        return Err(OracleError::GuardExceeded { limit: guard.max_transactions, found });
    }
    Ok(())
}
