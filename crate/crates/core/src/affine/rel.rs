use super::expr::AffineExpr;
use super::poly::Conj;
use super::set::{column_map, conj_from, Bindings, Constraint, EmptinessMode, Emptiness, IntSet, Space};
use super::AffineError;

/// Binary relation between integer tuples, `{ [in] -> [out] : constraints }`.
///
/// Stored as a union of conjunctions over the concatenated columns
/// `in ++ out ++ params`. Input and output dimension names are disjoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntRel {
    pub(crate) inputs: Vec<String>,
    pub(crate) outputs: Vec<String>,
    pub(crate) params: Vec<String>,
    pub(crate) pieces: Vec<Conj>,
}

/// Suffix appended to output names that clash with input names.
pub const PRIME: &str = "'";

/// Output names for a relation whose target tuple reuses source names.
pub fn primed(names: &[String]) -> Vec<String> {
    names.iter().map(|n| format!("{n}{PRIME}")).collect()
}

impl IntRel {
    pub fn empty(inputs: Vec<String>, outputs: Vec<String>, params: Vec<String>) -> Result<Self, AffineError> {
        check_disjoint(&inputs, &outputs)?;
        Ok(Self { inputs, outputs, params, pieces: Vec::new() })
    }

    pub fn universe(inputs: Vec<String>, outputs: Vec<String>, params: Vec<String>) -> Result<Self, AffineError> {
        let mut r = Self::empty(inputs, outputs, params)?;
        r.pieces.push(Conj::universe(r.ncols()));
        Ok(r)
    }

    pub fn from_constraints(
        inputs: Vec<String>,
        outputs: Vec<String>,
        params: Vec<String>,
        constraints: &[Constraint],
    ) -> Result<Self, AffineError> {
        let mut r = Self::empty(inputs, outputs, params)?;
        let conj = conj_from(&r.set_space(), constraints)?;
        r.pieces = conj.normalized().into_iter().collect();
        Ok(r)
    }

    /// Finite relation listing explicit pairs, one piece per pair.
    pub fn from_points(
        inputs: Vec<String>,
        outputs: Vec<String>,
        params: Vec<String>,
        pairs: &[(Vec<i64>, Vec<i64>)],
    ) -> Result<Self, AffineError> {
        let mut r = Self::empty(inputs, outputs, params)?;
        let (n_in, n_out) = (r.inputs.len(), r.outputs.len());
        let ncols = r.ncols();
        let mut sorted: Vec<&(Vec<i64>, Vec<i64>)> = pairs.iter().collect();
        sorted.sort();
        sorted.dedup();
        for (a, b) in sorted {
            if a.len() != n_in || b.len() != n_out {
                return Err(AffineError::DimensionMismatch { expected: n_in + n_out, found: a.len() + b.len() });
            }
            let mut c = Conj::universe(ncols);
            for (col, v) in a.iter().chain(b).enumerate() {
                let mut row = vec![0; ncols + 1];
                row[col] = 1;
                row[ncols] = -v;
                c.add_eq(row);
            }
            r.pieces.push(c);
        }
        Ok(r)
    }

    /// Reinterprets a set over `in ++ out` dimensions.
    pub fn from_set(set: &IntSet, n_in: usize) -> Result<Self, AffineError> {
        let dims = &set.space.dims;
        if n_in > dims.len() {
            return Err(AffineError::DimensionMismatch { expected: dims.len(), found: n_in });
        }
        let inputs = dims[..n_in].to_vec();
        let outputs = dims[n_in..].to_vec();
        check_disjoint(&inputs, &outputs)?;
        Ok(Self { inputs, outputs, params: set.space.params.clone(), pieces: set.pieces.clone() })
    }

    pub fn as_set(&self) -> IntSet {
        IntSet { space: self.set_space(), pieces: self.pieces.clone() }
    }

    pub fn set_space(&self) -> Space {
        Space { dims: self.inputs.iter().chain(&self.outputs).cloned().collect(), params: self.params.clone() }
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    fn ncols(&self) -> usize {
        self.inputs.len() + self.outputs.len() + self.params.len()
    }

    fn same_shape(&self, other: &IntRel) -> Result<(), AffineError> {
        if self.inputs != other.inputs || self.outputs != other.outputs || self.params != other.params {
            return Err(AffineError::SpaceMismatch {
                left: format!("{:?} -> {:?}", self.inputs, self.outputs),
                right: format!("{:?} -> {:?}", other.inputs, other.outputs),
            });
        }
        Ok(())
    }

    fn with_set(&self, set: IntSet) -> IntRel {
        IntRel { inputs: self.inputs.clone(), outputs: self.outputs.clone(), params: self.params.clone(), pieces: set.pieces }
    }

    pub fn constrain(&self, c: &Constraint) -> Result<IntRel, AffineError> {
        Ok(self.with_set(self.as_set().constrain(c)?))
    }

    pub fn intersect(&self, other: &IntRel) -> Result<IntRel, AffineError> {
        self.same_shape(other)?;
        Ok(self.with_set(self.as_set().intersect(&other.as_set())?))
    }

    pub fn union(&self, other: &IntRel) -> Result<IntRel, AffineError> {
        self.same_shape(other)?;
        Ok(self.with_set(self.as_set().union(&other.as_set())?))
    }

    pub fn subtract(&self, other: &IntRel) -> Result<IntRel, AffineError> {
        self.same_shape(other)?;
        Ok(self.with_set(self.as_set().subtract(&other.as_set())?))
    }

    pub fn is_subset(&self, other: &IntRel) -> Result<bool, AffineError> {
        self.same_shape(other)?;
        self.as_set().is_subset(&other.as_set())
    }

    pub fn is_empty(&self, mode: EmptinessMode<'_>) -> Result<Emptiness, AffineError> {
        self.as_set().is_empty(mode)
    }

    /// Restricts the input tuple to `domain` (a set over the input names).
    pub fn restrict_domain(&self, domain: &IntSet) -> Result<IntRel, AffineError> {
        let d = domain.with_dims(self.inputs.clone())?.embed(&self.set_space())?;
        Ok(self.with_set(self.as_set().intersect(&d)?))
    }

    /// Restricts the output tuple to `range` (a set over the output arity).
    pub fn restrict_range(&self, range: &IntSet) -> Result<IntRel, AffineError> {
        let r = range.with_dims(self.outputs.clone())?.embed(&self.set_space())?;
        Ok(self.with_set(self.as_set().intersect(&r)?))
    }

    pub fn inverse(&self) -> IntRel {
        let n_in = self.inputs.len();
        let n_out = self.outputs.len();
        let np = self.params.len();
        let mut target = Vec::with_capacity(self.ncols());
        target.extend((0..n_in).map(|i| n_out + i));
        target.extend(0..n_out);
        target.extend((0..np).map(|p| n_in + n_out + p));
        IntRel {
            inputs: self.outputs.clone(),
            outputs: self.inputs.clone(),
            params: self.params.clone(),
            pieces: self.pieces.iter().map(|c| c.embed(self.ncols(), &target)).collect(),
        }
    }

    /// Image of the input-side set: `{ y : ∃x ∈ set, x → y }`, over the output names.
    pub fn apply(&self, set: &IntSet) -> Result<IntSet, AffineError> {
        if set.space.dims.len() != self.inputs.len() {
            return Err(AffineError::DimensionMismatch { expected: self.inputs.len(), found: set.space.dims.len() });
        }
        let restricted = self.restrict_domain(set)?;
        let names: Vec<&str> = self.inputs.iter().map(String::as_str).collect();
        restricted.as_set().project_out(&names)
    }

    pub fn domain(&self) -> Result<IntSet, AffineError> {
        let names: Vec<&str> = self.outputs.iter().map(String::as_str).collect();
        self.as_set().project_out(&names)
    }

    pub fn range(&self) -> Result<IntSet, AffineError> {
        let names: Vec<&str> = self.inputs.iter().map(String::as_str).collect();
        self.as_set().project_out(&names)
    }

    /// Sequential composition: `x → z` iff `x self y` and `y next z`.
    pub fn then(&self, next: &IntRel) -> Result<IntRel, AffineError> {
        if self.outputs.len() != next.inputs.len() {
            return Err(AffineError::DimensionMismatch { expected: self.outputs.len(), found: next.inputs.len() });
        }
        if self.params != next.params {
            return Err(AffineError::SpaceMismatch { left: format!("{:?}", self.params), right: format!("{:?}", next.params) });
        }
        let mids: Vec<String> = (0..self.outputs.len()).map(|k| format!("__mid{k}")).collect();
        let mut outputs = next.outputs.clone();
        for o in outputs.iter_mut() {
            while self.inputs.contains(o) {
                o.push_str(PRIME);
            }
        }
        let dims: Vec<String> = self.inputs.iter().chain(&mids).chain(&outputs).cloned().collect();
        let space = Space { dims, params: self.params.clone() };
        let left = IntSet { space: Space { dims: self.inputs.iter().chain(&mids).cloned().collect(), params: self.params.clone() }, pieces: self.pieces.clone() }
            .embed(&space)?;
        let right = IntSet { space: Space { dims: mids.iter().chain(&outputs).cloned().collect(), params: self.params.clone() }, pieces: next.pieces.clone() }
            .embed(&space)?;
        let joined = left.intersect(&right)?;
        let names: Vec<&str> = mids.iter().map(String::as_str).collect();
        let projected = joined.project_out(&names)?;
        IntRel::from_set(&projected, self.inputs.len())
    }

    /// Difference vectors `out − in` of a same-arity relation.
    pub fn deltas(&self) -> Result<IntSet, AffineError> {
        let d = self.inputs.len();
        if d != self.outputs.len() {
            return Err(AffineError::DimensionMismatch { expected: d, found: self.outputs.len() });
        }
        let delta_names: Vec<String> = (0..d).map(|k| format!("d{k}")).collect();
        let dims: Vec<String> = delta_names.iter().chain(&self.inputs).chain(&self.outputs).cloned().collect();
        let space = Space { dims, params: self.params.clone() };
        let mut cs = Vec::new();
        for k in 0..d {
            cs.push(Constraint::eq(
                AffineExpr::var(&delta_names[k]),
                AffineExpr::var(&self.outputs[k]) - AffineExpr::var(&self.inputs[k]),
            ));
        }
        let base = self.as_set().embed(&space)?;
        let with_deltas = base.intersect(&IntSet::from_constraints(space.clone(), &cs)?)?;
        let names: Vec<&str> = self.inputs.iter().chain(&self.outputs).map(String::as_str).collect();
        with_deltas.project_out(&names)
    }

    /// All pairs at fixed parameters, sorted.
    pub fn enumerate(&self, bindings: &Bindings) -> Result<Vec<(Vec<i64>, Vec<i64>)>, AffineError> {
        let n_in = self.inputs.len();
        Ok(self
            .as_set()
            .enumerate(bindings)?
            .into_iter()
            .map(|mut p| {
                let out = p.split_off(n_in);
                (p, out)
            })
            .collect())
    }

    /// Renames both tuples positionally (parameters untouched).
    pub fn with_names(&self, inputs: Vec<String>, outputs: Vec<String>) -> Result<IntRel, AffineError> {
        if inputs.len() != self.inputs.len() || outputs.len() != self.outputs.len() {
            return Err(AffineError::DimensionMismatch { expected: self.inputs.len() + self.outputs.len(), found: inputs.len() + outputs.len() });
        }
        check_disjoint(&inputs, &outputs)?;
        Ok(IntRel { inputs, outputs, params: self.params.clone(), pieces: self.pieces.clone() })
    }

    /// Re-expresses the relation over a larger parameter list.
    pub fn with_params(&self, params: &[String]) -> Result<IntRel, AffineError> {
        let from = self.set_space();
        let to = Space { dims: from.dims.clone(), params: params.to_vec() };
        let map = column_map(&from, &to)?;
        let n = to.ncols();
        Ok(IntRel {
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            params: params.to_vec(),
            pieces: self.pieces.iter().map(|c| c.embed(n, &map)).collect(),
        })
    }

    /// Pins parameters to fixed values (they stay declared).
    pub fn fix_params(&self, bindings: &Bindings) -> Result<IntRel, AffineError> {
        Ok(self.with_set(self.as_set().fix_params(bindings)?))
    }

    /// Every piece pinned to a single pair.
    pub fn is_point_set(&self) -> bool {
        let n = self.inputs.len() + self.outputs.len();
        self.pieces.iter().all(|p| {
            let dims: Vec<usize> = (0..n).collect();
            p.select_cols(&dims).as_point().is_some() && (n..self.ncols()).all(|c| !p.uses_col(c))
        })
    }
}

fn check_disjoint(inputs: &[String], outputs: &[String]) -> Result<(), AffineError> {
    if let Some(clash) = inputs.iter().find(|n| outputs.contains(n)) {
        return Err(AffineError::NameClash(clash.clone()));
    }
    Ok(())
}

/// Strict lexicographic order `x ≪ y` on `d`-tuples, as `d` disjoint pieces.
pub fn lex_lt(inputs: Vec<String>, outputs: Vec<String>, params: Vec<String>) -> Result<IntRel, AffineError> {
    if inputs.len() != outputs.len() {
        return Err(AffineError::DimensionMismatch { expected: inputs.len(), found: outputs.len() });
    }
    let xs: Vec<AffineExpr> = inputs.iter().map(AffineExpr::var).collect();
    let ys: Vec<AffineExpr> = outputs.iter().map(AffineExpr::var).collect();
    let mut r = IntRel::empty(inputs, outputs, params)?;
    let space = r.set_space();
    for piece in lex_lt_pieces(&xs, &ys) {
        r.pieces.push(conj_from(&space, &piece)?);
    }
    Ok(r)
}

/// Pieces of `a ≪ b` for affine tuples, zero-padding the shorter one at the end.
pub fn lex_lt_pieces(a: &[AffineExpr], b: &[AffineExpr]) -> Vec<Vec<Constraint>> {
    let d = a.len().max(b.len());
    let at = |v: &[AffineExpr], k: usize| v.get(k).cloned().unwrap_or_default();
    let mut pieces = Vec::new();
    for k in 0..d {
        let mut piece: Vec<Constraint> = (0..k).map(|m| Constraint::eq(at(a, m), at(b, m))).collect();
        piece.push(Constraint::lt(at(a, k), at(b, k)));
        if piece.iter().all(|c| !trivially_false(c)) {
            pieces.push(piece);
        }
    }
    pieces
}

/// Pieces of `a ≼ b` (lexicographically smaller or equal), zero-padded.
pub fn lex_le_pieces(a: &[AffineExpr], b: &[AffineExpr]) -> Vec<Vec<Constraint>> {
    let mut pieces = lex_lt_pieces(a, b);
    pieces.push(eq_pieces(a, b));
    pieces
}

/// Component-wise equality of two zero-padded tuples.
pub fn eq_pieces(a: &[AffineExpr], b: &[AffineExpr]) -> Vec<Constraint> {
    let d = a.len().max(b.len());
    let at = |v: &[AffineExpr], k: usize| v.get(k).cloned().unwrap_or_default();
    (0..d).map(|m| Constraint::eq(at(a, m), at(b, m))).collect()
}

fn trivially_false(c: &Constraint) -> bool {
    c.expr.is_constant()
        && match c.kind {
            super::set::ConstraintKind::NonNegative => c.expr.constant_term() < 0,
            super::set::ConstraintKind::Zero => c.expr.constant_term() != 0,
        }
}
