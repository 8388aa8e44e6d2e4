//! Stateless model checking of transactional programs under causal
//! consistency.
//!
//! Programs written in a small DSL ([`prog`]) are explored by an optimal
//! DPOR ([`dpor`]) that visits every weak trace (program order plus
//! reads-from) exactly once, under either causal convergence ([`ccv`]) or
//! weak causal consistency ([`cc`]). The [`oracle`] module contains
//! brute-force and operational reference implementations used to validate
//! the explorer.

pub mod cc;
pub mod cli;
pub mod ccv;
pub mod dpor;
pub mod machine;
pub mod model;
pub mod oracle;
pub mod prog;
pub mod trace;

pub use dpor::{explore, explore_with, ExplorationReport, ExploreConfig};
pub use model::Model;
pub use prog::{parse_program, Program};
pub use trace::{Trace, TransactionId, WeakTrace};
