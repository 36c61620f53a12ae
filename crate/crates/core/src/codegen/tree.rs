//! Loop tree regenerated from a schedule.

use std::collections::BTreeMap;

use super::CodegenError;
use crate::affine::{AffineError, AffineExpr, Constraint, ConstraintKind, IntSet, Space};
use crate::ir::Scop;
use crate::schedule::transform::{loop_matrix, loop_positions, unimodular_inverse};
use crate::schedule::Schedule;

/// Inverse of a statement's loop rows.
pub(crate) struct Inverse {
    /// Schedule dimensions holding loop rows.
    pub dims: Vec<usize>,
    inv: Vec<Vec<i64>>,
    offsets: Vec<i64>,
}

impl Inverse {
    /// Coefficient of the loop at schedule dimension `dim` in iterator `m`.
    pub fn coeff(&self, m: usize, dim: usize) -> i64 {
        self.dims.iter().position(|&d| d == dim).map_or(0, |n| self.inv[m][n])
    }

    /// Iterator `m` in terms of the loop variables `names` (one per loop dim).
    pub fn iterator_expr(&self, m: usize, names: &[String]) -> AffineExpr {
        let mut e = AffineExpr::default();
        for (n, name) in names.iter().enumerate() {
            let c = self.inv[m][n];
            if c != 0 {
                e = e + (AffineExpr::var(name.as_str()) - AffineExpr::constant(self.offsets[n])) * c;
            }
        }
        e
    }
}

pub(crate) fn inverse_rows(scop: &Scop, schedule: &Schedule, stmt: usize) -> Option<Inverse> {
    let st = &scop.statements[stmt];
    let rows = schedule.rows(stmt);
    let (m, offsets) = loop_matrix(rows, &st.iterators)?;
    if m.len() != st.iterators.len() {
        return None;
    }
    let inv = unimodular_inverse(&m)?;
    Some(Inverse { dims: loop_positions(rows, &st.iterators), inv, offsets })
}

/// Drops duplicate and implied constraints, keeping the first of equals.
pub(crate) fn prune(space: &Space, cs: Vec<Constraint>) -> Result<Vec<Constraint>, AffineError> {
    let mut uniq: Vec<Constraint> = Vec::new();
    for c in cs {
        if c.expr.is_constant() && c.kind == ConstraintKind::NonNegative && c.expr.constant_term() >= 0 {
            continue;
        }
        if !uniq.contains(&c) {
            uniq.push(c);
        }
    }
    let mut keep = vec![true; uniq.len()];
    for i in 0..uniq.len() {
        if uniq[i].kind == ConstraintKind::Zero {
            continue;
        }
        let mut others: Vec<Constraint> = uniq.iter().enumerate().filter(|(j, _)| *j != i && keep[*j]).map(|(_, c)| c.clone()).collect();
        others.push(negate(&uniq[i]));
        if IntSet::from_constraints(space.clone(), &others)?.is_rationally_empty() {
            keep[i] = false;
        }
    }
    Ok(uniq.into_iter().zip(keep).filter(|(_, k)| *k).map(|(c, _)| c).collect())
}

/// Integer complement of `e ≥ 0`.
pub(crate) fn negate(c: &Constraint) -> Constraint {
    Constraint { expr: -c.expr.clone() - AffineExpr::constant(1), kind: ConstraintKind::NonNegative }
}

/// One side of a loop bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Bound {
    Affine(AffineExpr),
    /// `ceil(e / d)`
    Ceil(AffineExpr, i64),
    /// `floor(e / d)`
    Floor(AffineExpr, i64),
    Max(Vec<Bound>),
    Min(Vec<Bound>),
}

impl Bound {
    fn combine(mut parts: Vec<Bound>, max: bool) -> Bound {
        parts.dedup();
        let mut uniq: Vec<Bound> = Vec::new();
        for p in parts {
            if !uniq.contains(&p) {
                uniq.push(p);
            }
        }
        if uniq.len() == 1 {
            uniq.pop().unwrap()
        } else if max {
            Bound::Max(uniq)
        } else {
            Bound::Min(uniq)
        }
    }

    /// Constraints `var ≥ self` (lower) or `var ≤ self` (upper) implied by
    /// this bound; empty when the bound is a disjunction.
    fn implied(&self, var: &str, lower: bool) -> Vec<Constraint> {
        let v = AffineExpr::var(var);
        match (self, lower) {
            (Bound::Affine(e), true) => vec![Constraint::ge(v, e.clone())],
            (Bound::Affine(e), false) => vec![Constraint::le(v, e.clone())],
            (Bound::Ceil(e, d), true) => vec![Constraint::ge(v * *d, e.clone())],
            (Bound::Floor(e, d), false) => vec![Constraint::le(v * *d, e.clone())],
            (Bound::Max(parts), true) | (Bound::Min(parts), false) => parts.iter().flat_map(|p| p.implied(var, lower)).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Tree {
    Loop { dim: usize, var: String, stmts: Vec<usize>, lower: Bound, upper: Bound, body: Vec<Tree> },
    Stmt { stmt: usize, guards: Vec<Constraint> },
}

/// Per-statement view of the regenerated nest.
pub(crate) struct StmtSpace {
    /// Loop variable names, one per loop dimension of the statement.
    pub names: Vec<String>,
    /// Iterators in terms of loop variables.
    pub iterators: Vec<AffineExpr>,
    /// Domain over the loop variables.
    pub domain: Vec<Constraint>,
}

fn row(schedule: &Schedule, s: usize, k: usize) -> AffineExpr {
    schedule.rows(s).get(k).cloned().unwrap_or_default()
}

struct Builder<'a> {
    scop: &'a Scop,
    schedule: &'a Schedule,
    dims: usize,
}

impl Builder<'_> {
    fn is_loop(&self, s: usize, k: usize) -> bool {
        let r = row(self.schedule, s, k);
        self.scop.statements[s].iterators.iter().any(|i| r.uses(i))
    }

    /// Tree skeleton with placeholder bounds, plus each statement's loop names.
    fn skeleton(&self, group: Vec<usize>, k: usize, names: &mut BTreeMap<usize, Vec<String>>, path: &mut Vec<String>) -> Result<Vec<Tree>, CodegenError> {
        if k == self.dims {
            let mut g = group;
            g.sort_unstable();
            for &s in &g {
                names.insert(s, path.clone());
            }
            return Ok(g.into_iter().map(|stmt| Tree::Stmt { stmt, guards: Vec::new() }).collect());
        }
        let loops: Vec<bool> = group.iter().map(|&s| self.is_loop(s, k)).collect();
        if loops.iter().all(|l| !l) {
            let mut by_value: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
            for &s in &group {
                let r = row(self.schedule, s, k);
                if !r.is_constant() {
                    return Err(CodegenError::OutsideFamily(format!("row {r} of {} mentions a parameter", self.scop.statements[s].name)));
                }
                by_value.entry(r.constant_term()).or_default().push(s);
            }
            let mut out = Vec::new();
            for (_, g) in by_value {
                out.extend(self.skeleton(g, k + 1, names, path)?);
            }
            return Ok(out);
        }
        if !loops.iter().all(|l| *l) {
            return Err(CodegenError::OutsideFamily(format!("dimension {k} mixes loops and textual positions")));
        }
        let first = row(self.schedule, group[0], k);
        let single_var = first.constant_term() == 0 && first.terms().count() == 1 && first.terms().all(|(_, c)| c == 1);
        let var = if single_var && group.iter().all(|&s| row(self.schedule, s, k) == first) {
            first.names().next().unwrap().to_string()
        } else {
            format!("c{k}")
        };
        path.push(var.clone());
        let body = self.skeleton(group.clone(), k + 1, names, path)?;
        path.pop();
        let placeholder = Bound::Affine(AffineExpr::default());
        Ok(vec![Tree::Loop { dim: k, var, stmts: group, lower: placeholder.clone(), upper: placeholder, body }])
    }
}

pub(crate) fn stmt_space(scop: &Scop, schedule: &Schedule, s: usize, names: &[String]) -> Result<StmtSpace, CodegenError> {
    let st = &scop.statements[s];
    let inv = inverse_rows(scop, schedule, s).ok_or_else(|| {
        CodegenError::OutsideFamily(format!("the loop rows of {} are not a unimodular transformation of its iterators", st.name))
    })?;
    let iterators: Vec<AffineExpr> = (0..st.iterators.len()).map(|m| inv.iterator_expr(m, names)).collect();
    let pieces = st.domain.pieces();
    if pieces.len() != 1 {
        return Err(CodegenError::Unsupported(format!("domain of {} is not convex", st.name)));
    }
    let domain = pieces[0]
        .iter()
        .map(|c| Constraint { expr: substitute(&c.expr, &st.iterators, &iterators), kind: c.kind })
        .collect();
    Ok(StmtSpace { names: names.to_vec(), iterators, domain })
}

/// Replaces each name in `from` by the matching expression, simultaneously.
pub(crate) fn substitute(e: &AffineExpr, from: &[String], to: &[AffineExpr]) -> AffineExpr {
    let mut out = AffineExpr::constant(e.constant_term());
    for (name, c) in e.terms() {
        match from.iter().position(|f| f == name) {
            Some(k) => out = out + to[k].clone() * c,
            None => out.add_term(name, c),
        }
    }
    out
}

/// Lower and upper bounds of `names[level]` after projecting out deeper loops.
fn level_bounds(scop: &Scop, sp: &StmtSpace, level: usize) -> Result<(Bound, Bound), CodegenError> {
    let space = Space::new(sp.names.clone(), scop.params.clone());
    let set = IntSet::from_constraints(space, &sp.domain)?;
    let inner: Vec<&str> = sp.names[level + 1..].iter().map(String::as_str).collect();
    let proj = set.project_out(&inner)?;
    let pieces = proj.pieces();
    let var = &sp.names[level];
    let cs = match pieces.len() {
        0 => Vec::new(),
        1 => prune(proj.space(), pieces.into_iter().next().unwrap())?,
        _ => return Err(CodegenError::Unsupported("non-convex loop bounds".into())),
    };
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for c in cs {
        let a = c.expr.coeff(var);
        if a == 0 {
            continue;
        }
        let rest = c.expr.clone() - AffineExpr::term(var.as_str(), a);
        let eq = c.kind == ConstraintKind::Zero;
        if a > 0 || eq {
            // a·v + rest ≥ 0  ⇒  v ≥ -rest / a
            let (num, d) = if a > 0 { (-rest.clone(), a) } else { (rest.clone(), -a) };
            lo.push(if d == 1 { Bound::Affine(num) } else { Bound::Ceil(num, d) });
        }
        if a < 0 || eq {
            let (num, d) = if a < 0 { (rest.clone(), -a) } else { (-rest, a) };
            hi.push(if d == 1 { Bound::Affine(num) } else { Bound::Floor(num, d) });
        }
    }
    if lo.is_empty() || hi.is_empty() {
        return Err(CodegenError::Unsupported(format!("loop {var} is unbounded")));
    }
    Ok((Bound::combine(lo, true), Bound::combine(hi, false)))
}

/// Extent of one schedule row over a statement's domain, when both ends are
/// single affine bounds.
pub(crate) fn row_extent(scop: &Scop, stmt: usize, row_expr: &AffineExpr) -> Option<AffineExpr> {
    let st = &scop.statements[stmt];
    let t = "__t".to_string();
    let mut dims = vec![t.clone()];
    dims.extend(st.iterators.iter().cloned());
    let space = Space::new(dims, scop.params.clone());
    let mut cs = st.domain.pieces().into_iter().next()?;
    cs.push(Constraint::eq(AffineExpr::var(t.as_str()), row_expr.clone()));
    let set = IntSet::from_constraints(space, &cs).ok()?;
    let its: Vec<&str> = st.iterators.iter().map(String::as_str).collect();
    let proj = set.project_out(&its).ok()?;
    let sp = StmtSpace { names: vec![t], iterators: Vec::new(), domain: proj.pieces().into_iter().next()? };
    match level_bounds(scop, &sp, 0).ok()? {
        (Bound::Affine(l), Bound::Affine(u)) => Some(u - l + AffineExpr::constant(1)),
        _ => None,
    }
}

/// Regenerates the loop nest of `schedule`.
pub(crate) fn build(scop: &Scop, schedule: &Schedule) -> Result<(Vec<Tree>, BTreeMap<usize, StmtSpace>), CodegenError> {
    let b = Builder { scop, schedule, dims: schedule.dims() };
    let mut names = BTreeMap::new();
    let mut tree = b.skeleton((0..scop.statements.len()).collect(), 0, &mut names, &mut Vec::new())?;
    let mut spaces = BTreeMap::new();
    for (s, n) in names {
        spaces.insert(s, stmt_space(scop, schedule, s, &n)?);
    }
    fill(scop, &mut tree, &spaces, &mut Vec::new(), 0)?;
    Ok((tree, spaces))
}

fn fill(scop: &Scop, nodes: &mut [Tree], spaces: &BTreeMap<usize, StmtSpace>, context: &mut Vec<Constraint>, level: usize) -> Result<(), CodegenError> {
    for node in nodes {
        match node {
            Tree::Loop { var, stmts, lower, upper, body, .. } => {
                let (mut los, mut his) = (Vec::new(), Vec::new());
                for s in stmts.iter() {
                    let (l, u) = level_bounds(scop, &spaces[s], level)?;
                    los.push(l);
                    his.push(u);
                }
                *lower = Bound::combine(los, false);
                *upper = Bound::combine(his, true);
                let before = context.len();
                context.extend(lower.implied(var, true));
                context.extend(upper.implied(var, false));
                fill(scop, body, spaces, context, level + 1)?;
                context.truncate(before);
            }
            Tree::Stmt { stmt, guards } => {
                let sp = &spaces[stmt];
                let space = Space::new(sp.names.clone(), scop.params.clone());
                let own = prune(&space, sp.domain.clone())?;
                for c in own {
                    let mut test = context.clone();
                    test.push(negate(&c));
                    if c.kind == ConstraintKind::Zero || !IntSet::from_constraints(space.clone(), &test)?.is_rationally_empty() {
                        guards.push(c);
                    }
                }
            }
        }
    }
    Ok(())
}
