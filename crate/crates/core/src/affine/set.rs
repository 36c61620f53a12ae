use std::collections::BTreeMap;

use super::expr::AffineExpr;
use super::poly::{complement, Conj, Search};
use super::AffineError;

/// Fixed parameter values, keyed by parameter name.
pub type Bindings = BTreeMap<String, i64>;

/// Half-width of the box searched for integer witnesses when a set is only
/// known to be rationally nonempty.
const WITNESS_WINDOW: i64 = 16;
const WITNESS_BUDGET: usize = 200_000;

/// Ordered set dimensions followed by parameters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Space {
    pub dims: Vec<String>,
    pub params: Vec<String>,
}

impl Space {
    pub fn new<D, P>(dims: D, params: P) -> Self
    where
        D: IntoIterator,
        D::Item: Into<String>,
        P: IntoIterator,
        P::Item: Into<String>,
    {
        Self {
            dims: dims.into_iter().map(Into::into).collect(),
            params: params.into_iter().map(Into::into).collect(),
        }
    }

    pub fn columns(&self) -> Vec<String> {
        self.dims.iter().chain(&self.params).cloned().collect()
    }

    pub fn ncols(&self) -> usize {
        self.dims.len() + self.params.len()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.dims
            .iter()
            .position(|d| d == name)
            .or_else(|| self.params.iter().position(|p| p == name).map(|i| self.dims.len() + i))
    }
}

/// Relation of a constraint's affine expression to zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ConstraintKind {
    /// `expr ≥ 0`
    NonNegative,
    /// `expr = 0`
    Zero,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Constraint {
    pub expr: AffineExpr,
    pub kind: ConstraintKind,
}

impl Constraint {
    /// `lhs ≥ rhs`
    pub fn ge(lhs: AffineExpr, rhs: AffineExpr) -> Self {
        Self { expr: lhs - rhs, kind: ConstraintKind::NonNegative }
    }

    /// `lhs ≤ rhs`
    pub fn le(lhs: AffineExpr, rhs: AffineExpr) -> Self {
        Self::ge(rhs, lhs)
    }

    /// `lhs < rhs`
    pub fn lt(lhs: AffineExpr, rhs: AffineExpr) -> Self {
        Self::ge(rhs - AffineExpr::constant(1), lhs)
    }

    /// `lhs = rhs`
    pub fn eq(lhs: AffineExpr, rhs: AffineExpr) -> Self {
        Self { expr: lhs - rhs, kind: ConstraintKind::Zero }
    }
}

/// How [`IntSet::is_empty`] decides.
#[derive(Clone, Debug)]
pub enum EmptinessMode<'a> {
    /// Fourier–Motzkin with gcd tightening; may report integer-empty sets as
    /// nonempty, in which case the verdict is flagged uncertain.
    Rational,
    /// Substitute the given parameters and enumerate; exact.
    IntegerAt(&'a Bindings),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Emptiness {
    pub empty: bool,
    /// `false` only for a rational "nonempty" verdict with no integer witness.
    pub certain: bool,
    /// Integer point over the set's columns (dims then params), when found.
    pub witness: Option<Vec<i64>>,
}

/// Finite union of integer polyhedra over a [`Space`].
///
/// Disjuncts are kept as separate conjunctive pieces; nothing is ever merged
/// into a hull.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntSet {
    pub(crate) space: Space,
    pub(crate) pieces: Vec<Conj>,
}

impl IntSet {
    pub fn universe(space: Space) -> Self {
        let n = space.ncols();
        Self { space, pieces: vec![Conj::universe(n)] }
    }

    pub fn empty(space: Space) -> Self {
        Self { space, pieces: Vec::new() }
    }

    /// Conjunction of named constraints; every name must be a column of `space`.
    pub fn from_constraints(space: Space, constraints: &[Constraint]) -> Result<Self, AffineError> {
        let conj = conj_from(&space, constraints)?;
        Ok(Self::from_pieces(space, vec![conj]))
    }

    pub(crate) fn from_pieces(space: Space, pieces: Vec<Conj>) -> Self {
        let pieces = pieces.into_iter().filter_map(Conj::normalized).collect();
        Self { space, pieces }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    /// Conjunctive pieces as named constraint lists.
    pub fn pieces(&self) -> Vec<Vec<Constraint>> {
        let cols = self.space.columns();
        self.pieces
            .iter()
            .map(|p| {
                p.eqs
                    .iter()
                    .map(|r| Constraint { expr: AffineExpr::from_row(r, &cols), kind: ConstraintKind::Zero })
                    .chain(p.ineqs.iter().map(|r| Constraint {
                        expr: AffineExpr::from_row(r, &cols),
                        kind: ConstraintKind::NonNegative,
                    }))
                    .collect()
            })
            .collect()
    }

    fn check_space(&self, other: &IntSet) -> Result<(), AffineError> {
        if self.space != other.space {
            return Err(AffineError::SpaceMismatch {
                left: format!("{:?}", self.space),
                right: format!("{:?}", other.space),
            });
        }
        Ok(())
    }

    /// Adds one constraint to every piece.
    pub fn constrain(&self, constraint: &Constraint) -> Result<IntSet, AffineError> {
        let extra = conj_from(&self.space, std::slice::from_ref(constraint))?;
        Ok(self.intersect_conj(&extra))
    }

    pub(crate) fn intersect_conj(&self, extra: &Conj) -> IntSet {
        let pieces = self.pieces.iter().map(|p| p.intersect(extra)).collect();
        IntSet::from_pieces(self.space.clone(), pieces)
    }

    pub fn intersect(&self, other: &IntSet) -> Result<IntSet, AffineError> {
        self.check_space(other)?;
        let mut pieces = Vec::new();
        for a in &self.pieces {
            for b in &other.pieces {
                pieces.push(a.intersect(b));
            }
        }
        Ok(IntSet::from_pieces(self.space.clone(), pieces).prune())
    }

    pub fn union(&self, other: &IntSet) -> Result<IntSet, AffineError> {
        self.check_space(other)?;
        let mut pieces = self.pieces.clone();
        for p in &other.pieces {
            if !pieces.contains(p) {
                pieces.push(p.clone());
            }
        }
        Ok(IntSet { space: self.space.clone(), pieces })
    }

    /// Drops pieces that are rationally empty.
    pub(crate) fn prune(mut self) -> IntSet {
        self.pieces.retain(|p| !p.is_rationally_empty());
        self
    }

    /// Set difference; pieces of the result are pairwise disjoint per input piece.
    pub fn subtract(&self, other: &IntSet) -> Result<IntSet, AffineError> {
        self.check_space(other)?;
        let mut current: Vec<Conj> = self.pieces.clone();
        for b in &other.pieces {
            let b_point = b.as_point();
            let negated = complement(b);
            let mut next = Vec::new();
            for a in current {
                if let (Some(pa), Some(pb)) = (a.as_point(), b_point.as_ref()) {
                    if &pa != pb {
                        next.push(a);
                    }
                    continue;
                }
                if a.intersect(b).is_rationally_empty() {
                    next.push(a);
                    continue;
                }
                for n in &negated {
                    if let Some(piece) = a.intersect(n).normalized() {
                        if !piece.is_rationally_empty() {
                            next.push(piece);
                        }
                    }
                }
            }
            current = next;
        }
        Ok(IntSet { space: self.space.clone(), pieces: current })
    }

    /// `self ⊆ other`, decided rationally (a `false` may be spurious).
    pub fn is_subset(&self, other: &IntSet) -> Result<bool, AffineError> {
        Ok(self.subtract(other)?.is_empty(EmptinessMode::Rational)?.empty)
    }

    /// Fourier–Motzkin verdict alone, without a witness search.
    pub fn is_rationally_empty(&self) -> bool {
        self.pieces.iter().all(|p| p.is_rationally_empty())
    }

    pub fn is_empty(&self, mode: EmptinessMode<'_>) -> Result<Emptiness, AffineError> {
        match mode {
            EmptinessMode::Rational => {
                let mut uncertain = false;
                for p in &self.pieces {
                    if p.is_rationally_empty() {
                        continue;
                    }
                    match p.find_point(WITNESS_WINDOW, WITNESS_BUDGET) {
                        Search::Found(w) => return Ok(Emptiness { empty: false, certain: true, witness: Some(w) }),
                        Search::NotFound => {}
                        Search::GaveUp => uncertain = true,
                    }
                }
                if uncertain {
                    Ok(Emptiness { empty: false, certain: false, witness: None })
                } else {
                    Ok(Emptiness { empty: true, certain: true, witness: None })
                }
            }
            EmptinessMode::IntegerAt(bindings) => {
                let fixed = self.fix_params(bindings)?;
                for p in &fixed.pieces {
                    let pts = p.enumerate().map_err(|c| AffineError::Unbounded(fixed.space.columns()[c].clone()))?;
                    if let Some(w) = pts.into_iter().next() {
                        return Ok(Emptiness { empty: false, certain: true, witness: Some(w) });
                    }
                }
                Ok(Emptiness { empty: true, certain: true, witness: None })
            }
        }
    }

    /// Pins parameters to values; every parameter must be bound.
    pub fn fix_params(&self, bindings: &Bindings) -> Result<IntSet, AffineError> {
        let values = param_values(&self.space, bindings)?;
        let pieces = self.pieces.iter().map(|p| pin(p, &values)).collect();
        Ok(IntSet::from_pieces(self.space.clone(), pieces))
    }

    /// All integer points (dims only), sorted lexicographically and deduplicated.
    pub fn enumerate(&self, bindings: &Bindings) -> Result<Vec<Vec<i64>>, AffineError> {
        let nd = self.space.dims.len();
        let fixed = self.fix_params(bindings)?;
        let mut out = Vec::new();
        for p in &fixed.pieces {
            let pts = p.enumerate().map_err(|c| AffineError::Unbounded(fixed.space.columns()[c].clone()))?;
            out.extend(pts.into_iter().map(|mut v| {
                v.truncate(nd);
                v
            }));
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    pub fn contains(&self, point: &[i64], bindings: &Bindings) -> Result<bool, AffineError> {
        let mut full = point.to_vec();
        for p in &self.space.params {
            full.push(*bindings.get(p).ok_or_else(|| AffineError::UnboundName(p.clone()))?);
        }
        Ok(self.pieces.iter().any(|c| c.contains(&full)))
    }

    /// Existentially projects out the named dimensions (innermost first).
    pub fn project_out(&self, names: &[&str]) -> Result<IntSet, AffineError> {
        let mut cols = Vec::new();
        for n in names {
            let idx = self.space.dims.iter().position(|d| d == n).ok_or_else(|| AffineError::UnknownDim(n.to_string()))?;
            cols.push(idx);
        }
        cols.sort_unstable();
        let keep: Vec<usize> = (0..self.space.ncols()).filter(|c| !cols.contains(c)).collect();
        let pieces = self
            .pieces
            .iter()
            .filter_map(|p| p.eliminate_all(&cols).0)
            .map(|p| p.select_cols(&keep))
            .collect();
        let dims = self.space.dims.iter().enumerate().filter(|(i, _)| !cols.contains(i)).map(|(_, d)| d.clone()).collect();
        Ok(IntSet::from_pieces(Space { dims, params: self.space.params.clone() }, pieces))
    }

    /// Re-expresses the set in a space containing all of its columns.
    pub fn embed(&self, target: &Space) -> Result<IntSet, AffineError> {
        let map = column_map(&self.space, target)?;
        let n = target.ncols();
        Ok(IntSet { space: target.clone(), pieces: self.pieces.iter().map(|p| p.embed(n, &map)).collect() })
    }

    /// Renames set dimensions positionally.
    pub fn with_dims(&self, dims: Vec<String>) -> Result<IntSet, AffineError> {
        if dims.len() != self.space.dims.len() {
            return Err(AffineError::DimensionMismatch { expected: self.space.dims.len(), found: dims.len() });
        }
        Ok(IntSet { space: Space { dims, params: self.space.params.clone() }, pieces: self.pieces.clone() })
    }

    /// Constant lower and upper bounds of one dimension over all pieces,
    /// after eliminating every other column (including parameters).
    pub fn constant_bounds(&self, dim: usize) -> (Option<i64>, Option<i64>) {
        let mut lo: Option<Option<i64>> = None;
        let mut hi: Option<Option<i64>> = None;
        for p in &self.pieces {
            let others: Vec<usize> = (0..self.space.ncols()).filter(|&c| c != dim).collect();
            let Some(proj) = p.eliminate_all(&others).0 else { continue };
            let (l, h) = single_col_bounds(&proj, dim);
            lo = Some(match lo {
                None => l,
                Some(prev) => prev.zip(l).map(|(a, b)| a.min(b)),
            });
            hi = Some(match hi {
                None => h,
                Some(prev) => prev.zip(h).map(|(a, b)| a.max(b)),
            });
        }
        (lo.flatten(), hi.flatten())
    }
}

fn single_col_bounds(c: &Conj, col: usize) -> (Option<i64>, Option<i64>) {
    use num_integer::Integer;
    let n = c.ncols;
    let (mut lo, mut hi): (Option<i64>, Option<i64>) = (None, None);
    for row in &c.eqs {
        if row[col] != 0 && row[n] % row[col] == 0 {
            let v = -row[n] / row[col];
            lo = Some(lo.map_or(v, |l| l.max(v)));
            hi = Some(hi.map_or(v, |h| h.min(v)));
        }
    }
    for row in &c.ineqs {
        let a = row[col];
        if a > 0 {
            let v = Integer::div_ceil(&(-row[n]), &a);
            lo = Some(lo.map_or(v, |l| l.max(v)));
        } else if a < 0 {
            let v = Integer::div_floor(&row[n], &(-a));
            hi = Some(hi.map_or(v, |h| h.min(v)));
        }
    }
    (lo, hi)
}

pub(crate) fn conj_from(space: &Space, constraints: &[Constraint]) -> Result<Conj, AffineError> {
    let cols = space.columns();
    let mut conj = Conj::universe(cols.len());
    for c in constraints {
        let row = c.expr.to_row(&cols)?;
        match c.kind {
            ConstraintKind::NonNegative => conj.add_ineq(row),
            ConstraintKind::Zero => conj.add_eq(row),
        }
    }
    Ok(conj)
}

pub(crate) fn param_values(space: &Space, bindings: &Bindings) -> Result<Vec<(usize, i64)>, AffineError> {
    space
        .params
        .iter()
        .enumerate()
        .map(|(i, p)| {
            bindings
                .get(p)
                .map(|&v| (space.dims.len() + i, v))
                .ok_or_else(|| AffineError::UnboundName(p.clone()))
        })
        .collect()
}

/// Pins columns to values with explicit equalities (columns stay in place).
pub(crate) fn pin(conj: &Conj, values: &[(usize, i64)]) -> Conj {
    let mut out = conj.fix(values);
    for &(col, v) in values {
        let mut row = vec![0; conj.ncols + 1];
        row[col] = 1;
        row[conj.ncols] = -v;
        out.add_eq(row);
    }
    out
}

pub(crate) fn column_map(from: &Space, to: &Space) -> Result<Vec<usize>, AffineError> {
    from.columns()
        .iter()
        .map(|c| to.column(c).ok_or_else(|| AffineError::UnknownDim(c.clone())))
        .collect()
}
