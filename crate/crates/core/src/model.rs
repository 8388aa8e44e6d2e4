//! The two consistency models behind one interface.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ccv::{self, ReadContext};
use crate::trace::{Tid, Trace};
use crate::{cc, prog::VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Causal convergence: causal consistency plus a total order on writes.
    Ccv,
    /// Weak causal consistency: concurrent writes may stay unordered.
    Cc,
}

impl Model {
    pub const ALL: [Model; 2] = [Model::Ccv, Model::Cc];

    pub fn name(self) -> &'static str {
        match self {
            Model::Ccv => "ccv",
            Model::Cc => "cc",
        }
    }

    /// Readable set in canonical id order. The context must be valid.
    pub fn readable(self, ctx: ReadContext<'_>) -> Vec<Tid> {
        match self {
            Model::Ccv => ccv::readable_unchecked(ctx),
            Model::Cc => cc::readable_cc_unchecked(ctx),
        }
    }

    /// The read transition; `source` must be readable.
    pub fn apply_read(self, ctx: ReadContext<'_>, source: Tid) -> Trace {
        match self {
            Model::Ccv => ccv::apply_read_unchecked(ctx, source),
            Model::Cc => cc::apply_read_cc_unchecked(ctx, source),
        }
    }

    /// Post-hoc soundness predicate for explored traces.
    pub fn is_fulfilled_and_good(self, tr: &Trace) -> bool {
        match self {
            Model::Ccv => ccv::is_fulfilled_ccv(tr) && tr.is_partially_good_ccv(),
            Model::Cc => cc::is_fulfilled_cc(tr) && cc::is_partially_good_cc(tr),
        }
    }

    /// Whether `t2`, writing `w2`, may be swapped before a read of `x` by a
    /// transaction that already read `prior` (var, source) pairs. CC has no
    /// coherence order and therefore no co-cycle restriction.
    pub fn co_cycle(self, tr: &Trace, t2_writes: &dyn Fn(VarId) -> bool, x: VarId, prior: &[(VarId, Tid)]) -> bool {
        match self {
            Model::Ccv => prior.iter().any(|&(y, src)| t2_writes(y) && tr.writes_var(src, x)),
            Model::Cc => false,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown model `{0}` (expected `ccv` or `cc`)")]
pub struct UnknownModel(pub String);

impl FromStr for Model {
    type Err = UnknownModel;

    fn from_str(s: &str) -> Result<Model, UnknownModel> {
        match s.to_ascii_lowercase().as_str() {
            "ccv" => Ok(Model::Ccv),
            "cc" => Ok(Model::Cc),
            _ => Err(UnknownModel(s.to_string())),
        }
    }
}
