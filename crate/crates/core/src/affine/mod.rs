//! Integer sets and relations defined by affine constraints.

mod closure;
mod expr;
mod notation;
mod poly;
mod rel;
mod set;

pub use closure::{transitive_closure, Closure};
pub use expr::AffineExpr;
pub use notation::{parse_rel, parse_set, SetJson};
pub use rel::{eq_pieces, lex_le_pieces, lex_lt, lex_lt_pieces, primed, IntRel, PRIME};
pub use set::{Bindings, Constraint, ConstraintKind, EmptinessMode, Emptiness, IntSet, Space};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AffineError {
    #[error("space mismatch: {left} vs {right}")]
    SpaceMismatch { left: String, right: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown dimension `{0}`")]
    UnknownDim(String),
    #[error("no value bound for `{0}`")]
    UnboundName(String),
    #[error("set is unbounded in `{0}` after parameter substitution")]
    Unbounded(String),
    #[error("input and output tuples both use `{0}`")]
    NameClash(String),
    #[error("notation parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}
