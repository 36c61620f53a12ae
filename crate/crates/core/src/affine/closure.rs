//! Transitive closure of same-arity relations.
//!
//! Uniform relations (every piece a constant shift) get the closed form
//! `{x → x + Σ kᵢ·dᵢ : kᵢ ≥ 0, Σ kᵢ ≥ 1}`. Anything else is bounded by the
//! box hull of its distance vectors scaled by a positive step count. Both
//! results are intersected with `domain × domain`.

use super::expr::AffineExpr;
use super::poly::Conj;
use super::rel::IntRel;
use super::set::{Bindings, Constraint, EmptinessMode, IntSet, Space};
use super::AffineError;

#[derive(Clone, Debug)]
pub struct Closure {
    pub relation: IntRel,
    /// `true` when the relation equals the true closure, not just contains it.
    pub exact: bool,
}

/// Constant distance vector of one piece, if the piece is a uniform shift.
fn constant_delta(rel: &IntRel, piece: &Conj) -> Result<Option<Vec<i64>>, AffineError> {
    let single = IntRel { pieces: vec![piece.clone()], ..rel.clone() };
    let deltas = single.deltas()?;
    let d = rel.inputs.len();
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        let (lo, hi) = deltas.constant_bounds(k);
        match (lo, hi) {
            (Some(l), Some(h)) if l == h => out.push(l),
            _ => return Ok(None),
        }
    }
    Ok(Some(out))
}

fn gcd_vec(v: &[i64]) -> i64 {
    use num_integer::Integer;
    v.iter().fold(0i64, |g, &c| g.gcd(&c))
}

pub fn transitive_closure(rel: &IntRel, domain: &IntSet) -> Result<Closure, AffineError> {
    let d = rel.inputs.len();
    if d != rel.outputs.len() {
        return Err(AffineError::DimensionMismatch { expected: d, found: rel.outputs.len() });
    }
    if rel.pieces.is_empty() {
        return Ok(Closure { relation: rel.clone(), exact: true });
    }
    let mut deltas: Vec<Vec<i64>> = Vec::new();
    let mut uniform = true;
    for p in &rel.pieces {
        match constant_delta(rel, p)? {
            Some(delta) => {
                if !deltas.contains(&delta) {
                    deltas.push(delta);
                }
            }
            None => {
                uniform = false;
                break;
            }
        }
    }

    let ins: Vec<AffineExpr> = rel.inputs.iter().map(AffineExpr::var).collect();
    let outs: Vec<AffineExpr> = rel.outputs.iter().map(AffineExpr::var).collect();
    let step_names: Vec<String> = if uniform { (0..deltas.len()).map(|i| format!("__k{i}")).collect() } else { vec!["__k".to_string()] };
    let dims: Vec<String> = rel.inputs.iter().chain(&rel.outputs).chain(&step_names).cloned().collect();
    let space = Space { dims, params: rel.params.clone() };
    let mut cs: Vec<Constraint> = Vec::new();

    if uniform {
        // y = x + Σ kᵢ dᵢ, kᵢ ≥ 0, Σ kᵢ ≥ 1
        for m in 0..d {
            let mut rhs = ins[m].clone();
            for (i, delta) in deltas.iter().enumerate() {
                rhs = rhs + AffineExpr::term(&step_names[i], delta[m]);
            }
            cs.push(Constraint::eq(outs[m].clone(), rhs));
        }
        let mut total = AffineExpr::constant(0);
        for k in &step_names {
            cs.push(Constraint::ge(AffineExpr::var(k), AffineExpr::constant(0)));
            total = total + AffineExpr::var(k);
        }
        cs.push(Constraint::ge(total, AffineExpr::constant(1)));
    } else {
        let delta_set = rel.deltas()?;
        let k = AffineExpr::var(&step_names[0]);
        cs.push(Constraint::ge(k.clone(), AffineExpr::constant(1)));
        for m in 0..d {
            let (lo, hi) = delta_set.constant_bounds(m);
            let diff = outs[m].clone() - ins[m].clone();
            if let Some(l) = lo {
                cs.push(Constraint::ge(diff.clone(), k.clone() * l));
            }
            if let Some(h) = hi {
                cs.push(Constraint::le(diff, k.clone() * h));
            }
        }
    }

    let steps = IntSet::from_constraints(space.clone(), &cs)?;
    let names: Vec<&str> = step_names.iter().map(String::as_str).collect();
    let projected = steps.project_out(&names)?;
    let shaped = IntRel::from_set(&projected, d)?;
    let dom_in = shaped.restrict_domain(domain)?;
    let result = dom_in.restrict_range(domain)?;

    let mut exact = uniform
        && deltas.len() == 1
        && gcd_vec(&deltas[0]) == 1
        && domain.piece_count() == 1
        && full_shift_contained(rel, &deltas[0], domain)?;
    if !exact {
        // Over-approximation collapses onto the input when that is already closed.
        exact = contained(&result, rel)?;
    }
    Ok(Closure { relation: result, exact })
}

/// Whether `rel` contains every `x → x + delta` with both ends in `domain`.
fn full_shift_contained(rel: &IntRel, delta: &[i64], domain: &IntSet) -> Result<bool, AffineError> {
    let mut cs = Vec::new();
    for (m, (i, o)) in rel.inputs.iter().zip(&rel.outputs).enumerate() {
        cs.push(Constraint::eq(AffineExpr::var(o), AffineExpr::var(i) + AffineExpr::constant(delta[m])));
    }
    let shift = IntRel::from_constraints(rel.inputs.clone(), rel.outputs.clone(), rel.params.clone(), &cs)?
        .restrict_domain(domain)?
        .restrict_range(domain)?;
    contained(&shift, rel)
}

/// Subset test that switches to enumeration when both sides are finite
/// and parameter-free, where symbolic complements would explode.
fn contained(a: &IntRel, b: &IntRel) -> Result<bool, AffineError> {
    if b.is_point_set() {
        let none = Bindings::new();
        let free = a.params.is_empty() || a.pieces.iter().all(|p| (a.inputs.len() + a.outputs.len()..p.ncols).all(|c| !p.uses_col(c)));
        if free {
            let zeros: Bindings = a.params.iter().map(|p| (p.clone(), 0)).collect();
            let bind = if a.params.is_empty() { &none } else { &zeros };
            if let Ok(pa) = a.enumerate(bind) {
                let pb = b.enumerate(bind)?;
                return Ok(pa.iter().all(|p| pb.binary_search(p).is_ok()));
            }
        }
    }
    a.is_subset(b)
}

impl Closure {
    pub fn is_empty(&self) -> Result<bool, AffineError> {
        Ok(self.relation.is_empty(EmptinessMode::Rational)?.empty)
    }
}
