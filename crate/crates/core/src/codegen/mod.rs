//! C code generation with OpenMP pragmas and privatized reductions.

mod emit;
mod plan;
pub(crate) mod tree;

pub use emit::emit_c;
pub use plan::{identity_element, parallel_dim, plan_privatization, region_statements, ParallelChoice, Placement, PrivatizationPlan, PrivatizedReduction};

use crate::affine::AffineError;
use crate::ir::Operator;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodegenError {
    #[error("operator {0} has no identity element")]
    NoIdentity(Operator),
    #[error("no loop at {0}")]
    NoLoopAt(String),
    #[error("dimension {0} is sequential for some statement")]
    Sequential(usize),
    #[error("placement depth {depth} exceeds the {loops} loop(s) around the parallel loop of {statement}")]
    PlacementTooDeep { statement: String, depth: usize, loops: usize },
    #[error("cannot privatize {array}: dimension {dim} has no declared extent")]
    UnknownExtent { array: String, dim: usize },
    #[error("cannot hoist the privatization of {array}: {statement} also accesses it inside the region")]
    Hoist { array: String, statement: String },
    #[error("schedule outside the regenerable family ({0}); use a schedule produced by `polyred schedule`")]
    OutsideFamily(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Affine(#[from] AffineError),
}
