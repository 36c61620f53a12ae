//! Choice of the parallel dimension and placement of privatization code.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::CodegenError;
use crate::affine::AffineExpr;
use crate::detect::ReductionInfo;
use crate::ir::{InstId, Operator, Scop};
use crate::schedule::{DimClass, DimClassification, Schedule};

/// Where privatization init and aggregation go, relative to the parallel loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Immediately around the parallel loop.
    Auto,
    /// Around the loop this many levels outside the parallel loop.
    Depth(usize),
}

impl FromStr for Placement {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Placement::Auto);
        }
        match s.strip_prefix("depth=").map(str::parse::<usize>) {
            Some(Ok(k)) => Ok(Placement::Depth(k)),
            _ => Err(format!("bad placement `{s}` (expected auto or depth=K)")),
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Placement::Auto => f.write_str("auto"),
            Placement::Depth(k) => write!(f, "depth={k}"),
        }
    }
}

/// Which schedule dimension runs in parallel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParallelChoice {
    /// Outermost dimension that is non-sequential for every statement
    /// looping there.
    Auto,
    Dim(usize),
    /// First dimension whose row is exactly this iterator.
    Loop(String),
    None,
}

impl FromStr for ParallelChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "auto" => ParallelChoice::Auto,
            "none" => ParallelChoice::None,
            _ => match s.strip_prefix("dim=") {
                Some(k) => ParallelChoice::Dim(k.parse().map_err(|_| format!("bad dimension in `{s}`"))?),
                None if !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_') => ParallelChoice::Loop(s.to_string()),
                None => return Err(format!("bad parallel loop `{s}` (expected auto, none, dim=K or an iterator name)")),
            },
        })
    }
}

/// One privatized reduction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrivatizedReduction {
    pub statement: usize,
    pub load: InstId,
    pub store: InstId,
    pub array: String,
    pub operator: Operator,
    pub identity: i64,
    /// Subscript positions that vary inside the privatized region.
    pub kept_dims: Vec<usize>,
    /// Private locations per context, as an expression.
    pub locations: String,
    /// How often the aggregation runs, as an expression.
    pub aggregations: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrivatizationPlan {
    pub parallel_dim: Option<usize>,
    /// Timestamp prefix length identifying one privatized region.
    pub region_dim: Option<usize>,
    pub placement: Placement,
    pub contexts: String,
    pub privatized: Vec<PrivatizedReduction>,
}

impl PrivatizationPlan {
    pub fn sequential() -> Self {
        PrivatizationPlan { parallel_dim: None, region_dim: None, placement: Placement::Auto, contexts: "NUM_CONTEXTS".into(), privatized: Vec::new() }
    }

    pub fn privatizes(&self, stmt: usize) -> bool {
        self.privatized.iter().any(|p| p.statement == stmt)
    }
}

/// Identity element of a reduction operator. `min` and `max` use the
/// extreme representable values.
pub fn identity_element(op: Operator) -> Result<i64, CodegenError> {
    op.identity().ok_or(CodegenError::NoIdentity(op))
}

fn is_loop_row(scop: &Scop, stmt: usize, row: &AffineExpr) -> bool {
    scop.statements[stmt].iterators.iter().any(|i| row.uses(i))
}

fn row_at(schedule: &Schedule, stmt: usize, k: usize) -> AffineExpr {
    schedule.rows(stmt).get(k).cloned().unwrap_or_default()
}

/// Picks the parallel dimension.
pub fn parallel_dim(scop: &Scop, schedule: &Schedule, classification: &DimClassification, choice: &ParallelChoice) -> Result<Option<usize>, CodegenError> {
    let n = scop.statements.len();
    let looping = |k: usize| -> Vec<usize> { (0..n).filter(|&s| is_loop_row(scop, s, &row_at(schedule, s, k))).collect() };
    let usable = |k: usize| {
        let l = looping(k);
        !l.is_empty() && l.iter().all(|&s| classification.class(s, k) != DimClass::Sequential)
    };
    match choice {
        ParallelChoice::None => Ok(None),
        ParallelChoice::Auto => Ok((0..schedule.dims()).find(|&k| usable(k))),
        ParallelChoice::Dim(k) => {
            if *k >= schedule.dims() || looping(*k).is_empty() {
                return Err(CodegenError::NoLoopAt(k.to_string()));
            }
            if !usable(*k) {
                return Err(CodegenError::Sequential(*k));
            }
            Ok(Some(*k))
        }
        ParallelChoice::Loop(name) => {
            let k = (0..schedule.dims())
                .find(|&k| (0..n).any(|s| row_at(schedule, s, k) == AffineExpr::var(name.as_str())))
                .ok_or_else(|| CodegenError::NoLoopAt(name.clone()))?;
            if !usable(k) {
                return Err(CodegenError::Sequential(k));
            }
            Ok(Some(k))
        }
    }
}

/// Statements sharing the enclosing structure of `stmt` before dimension `r`.
pub fn region_statements(scop: &Scop, schedule: &Schedule, stmt: usize, r: usize) -> Vec<usize> {
    (0..scop.statements.len())
        .filter(|&t| {
            (0..r).all(|m| {
                let (a, b) = (row_at(schedule, stmt, m), row_at(schedule, t, m));
                match (is_loop_row(scop, stmt, &a), is_loop_row(scop, t, &b)) {
                    (false, false) => a == b,
                    (true, true) => true,
                    _ => false,
                }
            })
        })
        .collect()
}

/// Decides which reductions are privatized and where.
pub fn plan_privatization(
    scop: &Scop,
    schedule: &Schedule,
    classification: &DimClassification,
    reductions: &[ReductionInfo],
    choice: &ParallelChoice,
    placement: Placement,
) -> Result<PrivatizationPlan, CodegenError> {
    let Some(k) = parallel_dim(scop, schedule, classification, choice)? else {
        return Ok(PrivatizationPlan { placement, ..PrivatizationPlan::sequential() });
    };
    let mut privatized = Vec::new();
    let mut region: Option<usize> = None;
    for (s, st) in scop.statements.iter().enumerate() {
        if !is_loop_row(scop, s, &row_at(schedule, s, k)) || classification.class(s, k) != DimClass::ReductionParallel {
            continue;
        }
        let outer: Vec<usize> = (0..k).filter(|&m| is_loop_row(scop, s, &row_at(schedule, s, m))).collect();
        let r = match placement {
            Placement::Auto | Placement::Depth(0) => k,
            Placement::Depth(h) if h <= outer.len() => outer[outer.len() - h],
            Placement::Depth(h) => return Err(CodegenError::PlacementTooDeep { statement: st.name.clone(), depth: h, loops: outer.len() }),
        };
        if region.is_some_and(|prev| prev != r) {
            return Err(CodegenError::Unsupported("privatized statements disagree on the placement dimension".into()));
        }
        region = Some(r);
        for red in reductions.iter().filter(|x| x.statement == s) {
            let (array, subs) = st.instructions[red.store].access().expect("reduction store is an access");
            let kept = kept_dims(scop, schedule, s, subs, r)?;
            let decl = scop.array(array).ok_or_else(|| CodegenError::Unsupported(format!("undeclared array {array}")))?;
            let mut locs = Vec::new();
            for &d in &kept {
                match &decl.extents[d] {
                    Some(e) => locs.push(factor(e)),
                    None => return Err(CodegenError::UnknownExtent { array: array.to_string(), dim: d }),
                }
            }
            if privatized.iter().any(|p: &PrivatizedReduction| p.array == array) {
                return Err(CodegenError::Unsupported(format!("two privatized reductions on {array}")));
            }
            privatized.push(PrivatizedReduction {
                statement: s,
                load: red.load,
                store: red.store,
                array: array.to_string(),
                operator: red.operator,
                identity: identity_element(red.operator)?,
                kept_dims: kept,
                locations: product(&locs),
                aggregations: product(&outer_extents(scop, schedule, s, r)),
            });
        }
    }
    // Nothing else in a region may touch a privatized array.
    if let Some(r) = region {
        for p in &privatized {
            for t in region_statements(scop, schedule, p.statement, r) {
                for inst in scop.statements[t].accesses() {
                    let (array, _) = inst.access().expect("access");
                    if array != p.array {
                        continue;
                    }
                    let ours = privatized.iter().any(|q| q.statement == t && (q.load == inst.id || q.store == inst.id));
                    if !ours {
                        return Err(CodegenError::Hoist { array: p.array.clone(), statement: scop.statements[t].name.clone() });
                    }
                }
            }
        }
    }
    Ok(PrivatizationPlan { parallel_dim: Some(k), region_dim: region, placement, contexts: "NUM_CONTEXTS".into(), privatized })
}

fn product(factors: &[String]) -> String {
    if factors.is_empty() {
        return "1".into();
    }
    factors.join(" * ")
}

fn factor(e: &AffineExpr) -> String {
    if e.terms().count() + usize::from(e.constant_term() != 0) > 1 {
        format!("({e})")
    } else {
        e.to_string()
    }
}

/// Subscript positions of `subs` that depend on a loop at dimension `r` or deeper.
fn kept_dims(scop: &Scop, schedule: &Schedule, stmt: usize, subs: &[AffineExpr], r: usize) -> Result<Vec<usize>, CodegenError> {
    let st = &scop.statements[stmt];
    let rows = schedule.rows(stmt);
    let inner: Vec<usize> = (r..rows.len()).filter(|&m| is_loop_row(scop, stmt, &rows[m])).collect();
    let outer: Vec<usize> = (0..r.min(rows.len())).filter(|&m| is_loop_row(scop, stmt, &rows[m])).collect();
    // An iterator is fixed by the outer loops when the outer rows determine
    // it; with a unimodular transform that is read off the inverse.
    let fixed = match super::tree::inverse_rows(scop, schedule, stmt) {
        Some(inv) => st
            .iterators
            .iter()
            .enumerate()
            .map(|(m, _)| inner.iter().all(|&d| inv.coeff(m, d) == 0))
            .collect::<Vec<bool>>(),
        None => st.iterators.iter().map(|i| outer.iter().any(|&d| rows[d] == AffineExpr::var(i.as_str()))).collect(),
    };
    Ok(subs
        .iter()
        .enumerate()
        .filter(|(_, e)| st.iterators.iter().enumerate().any(|(m, it)| e.uses(it) && !fixed[m]))
        .map(|(d, _)| d)
        .collect())
}

/// Extents of the loops of `stmt` before dimension `r`, over parameters.
fn outer_extents(scop: &Scop, schedule: &Schedule, stmt: usize, r: usize) -> Vec<String> {
    let rows = schedule.rows(stmt);
    let mut out = Vec::new();
    for m in 0..r.min(rows.len()) {
        if !is_loop_row(scop, stmt, &rows[m]) {
            continue;
        }
        match super::tree::row_extent(scop, stmt, &rows[m]) {
            Some(e) => out.push(factor(&e)),
            None => out.push(format!("|{}|", rows[m])),
        }
    }
    out
}
