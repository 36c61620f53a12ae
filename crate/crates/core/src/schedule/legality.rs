//! Causality checks and carried-dimension classification.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Schedule;
use crate::affine::{eq_pieces, lex_le_pieces, primed, AffineError, AffineExpr, Bindings, Constraint, EmptinessMode, IntRel};
use crate::deps::{Basis, DepKind, Dependence, DependenceSet};
use crate::ir::Scop;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LegalityMode {
    /// Every dependence must be respected.
    Strict,
    /// Non-reduction dependences respected, reduction instances kept apart.
    Relaxed,
    /// Non-reduction and privatization dependences respected; reduction
    /// dependences dropped.
    Privatized,
}

impl FromStr for LegalityMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(LegalityMode::Strict),
            "relaxed" => Ok(LegalityMode::Relaxed),
            "privatized" => Ok(LegalityMode::Privatized),
            _ => Err(format!("unknown mode `{s}` (expected strict, relaxed or privatized)")),
        }
    }
}

impl fmt::Display for LegalityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LegalityMode::Strict => "strict",
            LegalityMode::Relaxed => "relaxed",
            LegalityMode::Privatized => "privatized",
        })
    }
}

/// Which part of the dependence set a checked dependence belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepClass {
    All,
    Nu,
    Rho,
    Tau,
}

/// Required relation between source and target timestamps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Precedes,
    Distinct,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub mode: LegalityMode,
    pub class: DepClass,
    pub source: String,
    pub target: String,
    pub kind: DepKind,
    pub condition: Condition,
    /// Source and target iteration vectors, when a concrete pair was found.
    pub witness: Option<(Vec<i64>, Vec<i64>)>,
    /// `false` when the violation set is only rationally nonempty.
    pub certain: bool,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cond = match self.condition {
            Condition::Precedes => "must precede",
            Condition::Distinct => "must not share a timestamp with",
        };
        write!(f, "{} mode: {} {} dependence {} -> {}: source {cond} target", self.mode, self.class_name(), self.kind, self.source, self.target)?;
        if let Some((a, b)) = &self.witness {
            write!(f, ", e.g. {}{:?} and {}{:?}", self.source, a, self.target, b)?;
        } else if !self.certain {
            f.write_str(" (not proven: no integer witness found)")?;
        }
        Ok(())
    }
}

impl Violation {
    fn class_name(&self) -> &'static str {
        match self.class {
            DepClass::All => "a",
            DepClass::Nu => "a non-reduction",
            DepClass::Rho => "a reduction",
            DepClass::Tau => "a privatization",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScheduleError {
    #[error("illegal schedule: {0}")]
    Violation(Box<Violation>),
    #[error("{0} mode needs dependences partitioned into reduction and non-reduction parts")]
    MissingPartition(LegalityMode),
    #[error("schedule has {found} statement(s), the scop has {expected}")]
    Shape { expected: usize, found: usize },
    #[error(transparent)]
    Affine(#[from] AffineError),
}

/// A schedule that passed [`validate`]; required by scheduled execution.
#[derive(Clone, Debug)]
pub struct Validated {
    schedule: Schedule,
    mode: LegalityMode,
    basis: Basis,
}

impl Validated {
    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn mode(&self) -> LegalityMode {
        self.mode
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }
}

/// Dependences checked under `mode`, with the condition each must satisfy.
pub fn checked(deps: &DependenceSet, mode: LegalityMode) -> Result<Vec<(DepClass, &Dependence, Condition)>, ScheduleError> {
    let mut out = Vec::new();
    match mode {
        LegalityMode::Strict => out.extend(deps.all.iter().map(|d| (DepClass::All, d, Condition::Precedes))),
        LegalityMode::Relaxed | LegalityMode::Privatized => {
            let p = deps.partition.as_ref().ok_or(ScheduleError::MissingPartition(mode))?;
            out.extend(p.nu.iter().map(|d| (DepClass::Nu, d, Condition::Precedes)));
            if mode == LegalityMode::Privatized {
                out.extend(p.tau.iter().map(|d| (DepClass::Tau, d, Condition::Precedes)));
            }
            // Reduction instances still need distinct timestamps when
            // privatized: each context runs its share in schedule order.
            out.extend(p.rho.iter().map(|d| (DepClass::Rho, d, Condition::Distinct)));
        }
    }
    Ok(out)
}

/// Source and target timestamp rows over the dependence's own names.
pub(crate) fn dep_rows(scop: &Scop, schedule: &Schedule, d: &Dependence) -> (Vec<AffineExpr>, Vec<AffineExpr>) {
    let t = &scop.statements[d.target];
    let outs = primed(&t.iterators);
    let src = schedule.rows(d.source).to_vec();
    let tgt = schedule
        .rows(d.target)
        .iter()
        .map(|e| {
            e.rename(|n| match t.iterators.iter().position(|i| i == n) {
                Some(k) => outs[k].clone(),
                None => n.to_string(),
            })
        })
        .collect();
    (src, tgt)
}

/// First point of `rel` satisfying one of the constraint pieces.
pub(crate) fn find_in(rel: &IntRel, pieces: &[Vec<Constraint>], bindings: Option<&Bindings>) -> Result<Option<(Option<(Vec<i64>, Vec<i64>)>, bool)>, AffineError> {
    for piece in pieces {
        let mut r = rel.clone();
        for c in piece {
            r = r.constrain(c)?;
        }
        let e = match bindings {
            Some(b) => r.is_empty(EmptinessMode::IntegerAt(b))?,
            None => r.is_empty(EmptinessMode::Rational)?,
        };
        if !e.empty {
            let n_in = rel.inputs().len();
            let n_out = rel.outputs().len();
            let witness = e.witness.map(|w| (w[..n_in].to_vec(), w[n_in..n_in + n_out].to_vec()));
            return Ok(Some((witness, e.certain)));
        }
    }
    Ok(None)
}

/// Pieces describing a violation of `cond` between two timestamp tuples.
pub(crate) fn violation_pieces(src: &[AffineExpr], tgt: &[AffineExpr], cond: Condition) -> Vec<Vec<Constraint>> {
    match cond {
        Condition::Precedes => lex_le_pieces(tgt, src),
        Condition::Distinct => vec![eq_pieces(src, tgt)],
    }
}

fn shape(scop: &Scop, schedule: &Schedule) -> Result<(), ScheduleError> {
    if schedule.statement_count() != scop.statements.len() {
        return Err(ScheduleError::Shape { expected: scop.statements.len(), found: schedule.statement_count() });
    }
    Ok(())
}

/// First violated dependence of `schedule` under `mode`, if any.
pub fn find_violation(scop: &Scop, schedule: &Schedule, deps: &DependenceSet, mode: LegalityMode) -> Result<Option<Violation>, ScheduleError> {
    shape(scop, schedule)?;
    let bindings = deps.bindings.as_ref();
    for (class, d, cond) in checked(deps, mode)? {
        let (src, tgt) = dep_rows(scop, schedule, d);
        if let Some((witness, certain)) = find_in(&d.relation, &violation_pieces(&src, &tgt, cond), bindings)? {
            return Ok(Some(Violation {
                mode,
                class,
                source: scop.statements[d.source].name.clone(),
                target: scop.statements[d.target].name.clone(),
                kind: d.kind,
                condition: cond,
                witness,
                certain,
            }));
        }
    }
    Ok(None)
}

/// Checks `schedule` against the dependences required by `mode`.
pub fn validate(scop: &Scop, schedule: &Schedule, deps: &DependenceSet, mode: LegalityMode) -> Result<Validated, ScheduleError> {
    match find_violation(scop, schedule, deps, mode)? {
        Some(v) => Err(ScheduleError::Violation(Box::new(v))),
        None => Ok(Validated { schedule: schedule.clone(), mode, basis: deps.basis }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimClass {
    Parallel,
    ReductionParallel,
    Sequential,
}

impl fmt::Display for DimClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DimClass::Parallel => "parallel",
            DimClass::ReductionParallel => "reduction-parallel",
            DimClass::Sequential => "sequential",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DimInfo {
    pub class: DimClass,
    /// The row depends on an iterator (as opposed to a textual position).
    pub is_loop: bool,
    pub row: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StatementDims {
    pub statement: String,
    pub dims: Vec<DimInfo>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DimClassification {
    pub mode: LegalityMode,
    pub statements: Vec<StatementDims>,
}

impl DimClassification {
    pub fn class(&self, stmt: usize, dim: usize) -> DimClass {
        self.statements[stmt].dims.get(dim).map(|d| d.class).unwrap_or(DimClass::Parallel)
    }

    /// Classes of the loop dimensions of one statement, outermost first.
    pub fn loops(&self, stmt: usize) -> Vec<DimClass> {
        self.statements[stmt].dims.iter().filter(|d| d.is_loop).map(|d| d.class).collect()
    }
}

/// Whether `d` is carried at schedule dimension `k`: equal timestamps before
/// `k`, different at `k`.
pub(crate) fn carried_at(scop: &Scop, schedule: &Schedule, d: &Dependence, k: usize, bindings: Option<&Bindings>) -> Result<bool, AffineError> {
    let (src, tgt) = dep_rows(scop, schedule, d);
    let at = |v: &[AffineExpr], m: usize| v.get(m).cloned().unwrap_or_default();
    let mut base: Vec<Constraint> = (0..k).map(|m| Constraint::eq(at(&src, m), at(&tgt, m))).collect();
    let mut lt = base.clone();
    lt.push(Constraint::lt(at(&src, k), at(&tgt, k)));
    base.push(Constraint::lt(at(&tgt, k), at(&src, k)));
    Ok(find_in(&d.relation, &[lt, base], bindings)?.is_some())
}

/// Blocking and reduction dependences used for classification under `mode`.
pub(crate) fn classification_sets(deps: &DependenceSet, mode: LegalityMode) -> Result<(Vec<&Dependence>, Vec<&Dependence>), ScheduleError> {
    match (&deps.partition, mode) {
        (_, LegalityMode::Strict) => Ok((deps.all.iter().collect(), Vec::new())),
        (None, m) => Err(ScheduleError::MissingPartition(m)),
        (Some(p), m) => {
            let mut b: Vec<&Dependence> = p.nu.iter().collect();
            if m == LegalityMode::Privatized {
                b.extend(p.tau.iter());
            }
            Ok((b, p.rho.iter().collect()))
        }
    }
}

/// Classes of every schedule dimension of `stmt` against the given
/// dependences (only those touching `stmt` matter).
pub(crate) fn classify_statement(
    scop: &Scop,
    schedule: &Schedule,
    stmt: usize,
    blocking: &[&Dependence],
    reduction: &[&Dependence],
    mut carried: impl FnMut(&Dependence, usize) -> Result<bool, AffineError>,
) -> Result<Vec<DimInfo>, AffineError> {
    let s = &scop.statements[stmt];
    let touches = |d: &&&Dependence| d.source == stmt || d.target == stmt;
    let mut dims = Vec::new();
    for (k, row) in schedule.rows(stmt).iter().enumerate() {
        let mut class = DimClass::Parallel;
        for d in blocking.iter().filter(touches) {
            if carried(d, k)? {
                class = DimClass::Sequential;
                break;
            }
        }
        if class == DimClass::Parallel {
            for d in reduction.iter().filter(touches) {
                if carried(d, k)? {
                    class = DimClass::ReductionParallel;
                    break;
                }
            }
        }
        let is_loop = s.iterators.iter().any(|i| row.uses(i));
        dims.push(DimInfo { class, is_loop, row: row.to_string() });
    }
    Ok(dims)
}

/// Classifies every dimension of every statement's schedule: sequential
/// when a non-reduction (or, in privatized mode, privatization) dependence
/// touching the statement is carried there, reduction-parallel when only
/// reduction dependences are, parallel otherwise.
pub fn classify_dims(scop: &Scop, schedule: &Schedule, deps: &DependenceSet, mode: LegalityMode) -> Result<DimClassification, ScheduleError> {
    shape(scop, schedule)?;
    let bindings = deps.bindings.as_ref();
    let (blocking, reduction) = classification_sets(deps, mode)?;
    let mut statements = Vec::new();
    for (idx, s) in scop.statements.iter().enumerate() {
        let dims = classify_statement(scop, schedule, idx, &blocking, &reduction, |d, k| carried_at(scop, schedule, d, k, bindings))?;
        statements.push(StatementDims { statement: s.name.clone(), dims });
    }
    Ok(DimClassification { mode, statements })
}
