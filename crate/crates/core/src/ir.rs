//! Static control part: statements, instruction lists, accesses, loop tree.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::affine::{AffineError, AffineExpr, Constraint, EmptinessMode, IntSet, Space};
use crate::schedule::Schedule;

pub type InstId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    Add,
    Mul,
    Sub,
    Div,
    Min,
    Max,
    And,
    Or,
    Xor,
}

impl Operator {
    pub fn is_associative(self) -> bool {
        !matches!(self, Operator::Sub | Operator::Div)
    }

    pub fn is_commutative(self) -> bool {
        !matches!(self, Operator::Sub | Operator::Div)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Operator::Add => "+",
            Operator::Mul => "*",
            Operator::Sub => "-",
            Operator::Div => "/",
            Operator::Min => "min",
            Operator::Max => "max",
            Operator::And => "&",
            Operator::Or => "|",
            Operator::Xor => "^",
        }
    }

    /// Wrapping two's-complement semantics; `None` on division by zero.
    pub fn apply(self, a: i64, b: i64) -> Option<i64> {
        Some(match self {
            Operator::Add => a.wrapping_add(b),
            Operator::Mul => a.wrapping_mul(b),
            Operator::Sub => a.wrapping_sub(b),
            Operator::Div => {
                if b == 0 {
                    return None;
                }
                a.wrapping_div(b)
            }
            Operator::Min => a.min(b),
            Operator::Max => a.max(b),
            Operator::And => a & b,
            Operator::Or => a | b,
            Operator::Xor => a ^ b,
        })
    }

    /// Two-sided identity, for operators that have both flags.
    pub fn identity(self) -> Option<i64> {
        match self {
            Operator::Add | Operator::Or | Operator::Xor => Some(0),
            Operator::Mul => Some(1),
            Operator::And => Some(-1),
            Operator::Min => Some(i64::MAX),
            Operator::Max => Some(i64::MIN),
            Operator::Sub | Operator::Div => None,
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Input of a binary operation or store.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operand {
    /// Result of an earlier instruction of the same statement.
    Inst(InstId),
    Const(i64),
    /// Affine value of iterators and parameters.
    Affine(AffineExpr),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum InstKind {
    Load { array: String, subscripts: Vec<AffineExpr> },
    BinOp { operator: Operator, lhs: Operand, rhs: Operand },
    Store { value: Operand, array: String, subscripts: Vec<AffineExpr> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub id: InstId,
    #[serde(flatten)]
    pub kind: InstKind,
}

impl Instruction {
    pub fn access(&self) -> Option<(&str, &[AffineExpr])> {
        match &self.kind {
            InstKind::Load { array, subscripts } | InstKind::Store { array, subscripts, .. } => Some((array, subscripts)),
            InstKind::BinOp { .. } => None,
        }
    }

    pub fn is_load(&self) -> bool {
        matches!(self.kind, InstKind::Load { .. })
    }

    pub fn is_store(&self) -> bool {
        matches!(self.kind, InstKind::Store { .. })
    }

    pub fn operands(&self) -> Vec<&Operand> {
        match &self.kind {
            InstKind::Load { .. } => vec![],
            InstKind::BinOp { lhs, rhs, .. } => vec![lhs, rhs],
            InstKind::Store { value, .. } => vec![value],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Statement {
    pub name: String,
    /// Source statements merged into this one (a single entry unless fused).
    pub labels: Vec<String>,
    pub iterators: Vec<String>,
    pub domain: IntSet,
    pub instructions: Vec<Instruction>,
    /// Index among all statements in textual order.
    pub position: usize,
    /// Textual position inside each enclosing block, outermost first (`depth + 1` entries).
    pub beta: Vec<i64>,
    /// Instructions whose value is used outside this statement.
    pub outside_uses: BTreeSet<InstId>,
}

impl Statement {
    pub fn depth(&self) -> usize {
        self.iterators.len()
    }

    pub fn loads(&self) -> impl Iterator<Item = &Instruction> {
        self.instructions.iter().filter(|i| i.is_load())
    }

    pub fn stores(&self) -> impl Iterator<Item = &Instruction> {
        self.instructions.iter().filter(|i| i.is_store())
    }

    pub fn accesses(&self) -> impl Iterator<Item = &Instruction> {
        self.instructions.iter().filter(|i| i.access().is_some())
    }

    pub fn is_compound(&self) -> bool {
        self.stores().count() > 1
    }

    pub fn has_outside_uses(&self, id: InstId) -> bool {
        self.outside_uses.contains(&id)
    }

    /// Instructions that consume the value of `id`.
    pub fn users(&self, id: InstId) -> Vec<InstId> {
        self.instructions
            .iter()
            .filter(|i| i.operands().iter().any(|o| **o == Operand::Inst(id)))
            .map(|i| i.id)
            .collect()
    }

    pub fn access_text(&self, id: InstId) -> String {
        match self.instructions[id].access() {
            Some((array, subs)) => access_string(array, subs),
            None => format!("%{id}"),
        }
    }
}

pub fn access_string(array: &str, subs: &[AffineExpr]) -> String {
    let mut s = array.to_string();
    for e in subs {
        s.push_str(&format!("[{e}]"));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayDecl {
    pub name: String,
    /// One entry per dimension; `None` when the extent is not declared.
    pub extents: Vec<Option<AffineExpr>>,
}

impl ArrayDecl {
    pub fn rank(&self) -> usize {
        self.extents.len()
    }
}

/// Loop nest structure. Loops run from 0 to `upper` (exclusive) with stride 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Loop { iterator: String, upper: AffineExpr, body: Vec<Node> },
    Stmt(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scop {
    pub name: String,
    pub params: Vec<String>,
    pub arrays: Vec<ArrayDecl>,
    pub statements: Vec<Statement>,
    pub tree: Vec<Node>,
    pub fused: bool,
}

/// Reachable subscript vectors of one access over its statement's domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessRange {
    pub array: String,
    pub set: IntSet,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IrError {
    #[error("statement {stmt}: instruction {inst} refers to a later or missing value")]
    BadReference { stmt: String, inst: InstId },
    #[error("statement {0} has no store")]
    NoStore(String),
    #[error("statement {stmt}: instruction {inst} is not a memory access")]
    NotAnAccess { stmt: String, inst: InstId },
    #[error("unknown array `{0}`")]
    UnknownArray(String),
    #[error(transparent)]
    Affine(#[from] AffineError),
}

impl Scop {
    pub fn array(&self, name: &str) -> Option<&ArrayDecl> {
        self.arrays.iter().find(|a| a.name == name)
    }

    pub fn statement(&self, name: &str) -> Option<(usize, &Statement)> {
        self.statements.iter().enumerate().find(|(_, s)| s.name == name)
    }

    /// Checks the structural invariants of the IR.
    pub fn check(&self) -> Result<(), IrError> {
        for s in &self.statements {
            if s.stores().next().is_none() {
                return Err(IrError::NoStore(s.name.clone()));
            }
            for inst in &s.instructions {
                for o in inst.operands() {
                    if let Operand::Inst(r) = o {
                        if *r >= inst.id || s.instructions[*r].is_store() {
                            return Err(IrError::BadReference { stmt: s.name.clone(), inst: inst.id });
                        }
                    }
                }
                if let Some((array, _)) = inst.access() {
                    if self.array(array).is_none() {
                        return Err(IrError::UnknownArray(array.to_string()));
                    }
                }
            }
        }
        Ok(())
    }

    /// 2d+1 schedule: loop counters interleaved with textual positions.
    ///
    /// The leading position is dropped when the SCoP has a single top-level
    /// node, since it would be the constant 0 for every statement.
    pub fn original_schedule(&self) -> Schedule {
        let skip_first = self.tree.len() == 1;
        let rows = self
            .statements
            .iter()
            .map(|s| {
                let mut row = Vec::new();
                for (k, b) in s.beta.iter().enumerate() {
                    if k > 0 {
                        row.push(AffineExpr::var(&s.iterators[k - 1]));
                    }
                    if k > 0 || !skip_first {
                        row.push(AffineExpr::constant(*b));
                    }
                }
                row
            })
            .collect();
        Schedule::new(rows)
    }

    pub fn access_range(&self, stmt: usize, inst: InstId) -> Result<AccessRange, IrError> {
        let s = &self.statements[stmt];
        let (array, subs) = s.instructions[inst]
            .access()
            .ok_or_else(|| IrError::NotAnAccess { stmt: s.name.clone(), inst })?;
        let set = image(&s.domain, &s.iterators, subs)?;
        Ok(AccessRange { array: array.to_string(), set })
    }
}

pub fn subscript_dims(rank: usize) -> Vec<String> {
    (0..rank).map(|k| format!("a{k}")).collect()
}

/// Image of `domain` under the subscript functions `subs`.
pub fn image(domain: &IntSet, iterators: &[String], subs: &[AffineExpr]) -> Result<IntSet, AffineError> {
    let out = subscript_dims(subs.len());
    let params = domain.space().params.clone();
    let space = Space::new(out.iter().chain(iterators).cloned(), params);
    let eqs: Vec<Constraint> = out.iter().zip(subs).map(|(a, f)| Constraint::eq(AffineExpr::var(a), f.clone())).collect();
    let lifted = domain.embed(&space)?.intersect(&IntSet::from_constraints(space, &eqs)?)?;
    let names: Vec<&str> = iterators.iter().map(String::as_str).collect();
    lifted.project_out(&names)
}

/// Rational overlap test for two ranges; different arrays never overlap.
///
/// Returns `(overlap, certain)`.
pub fn ranges_overlap(a: &AccessRange, b: &AccessRange) -> Result<(bool, bool), AffineError> {
    if a.array != b.array {
        return Ok((false, true));
    }
    let e = a.set.intersect(&b.set)?.is_empty(EmptinessMode::Rational)?;
    Ok((!e.empty, e.certain))
}

/// Whether three ranges share a location; `false` when the arrays differ.
pub fn triple_overlap(a: &AccessRange, b: &AccessRange, c: &AccessRange) -> Result<bool, AffineError> {
    if a.array != b.array || b.array != c.array {
        return Ok(false);
    }
    let e = a.set.intersect(&b.set)?.intersect(&c.set)?.is_empty(EmptinessMode::Rational)?;
    Ok(!e.empty)
}
