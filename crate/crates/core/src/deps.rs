//! Dependence analysis: memory-based (symbolic) and value-based
//! (enumerated) dependences, their split into reduction and non-reduction
//! parts, reduction closures and privatization dependences.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::affine::{lex_lt_pieces, primed, transitive_closure, AffineError, AffineExpr, Bindings, Constraint, EmptinessMode, IntRel, IntSet, Space};
use crate::detect::{detect, ReductionInfo};
use crate::ir::{InstId, IrError, Scop, Statement};
use crate::schedule::instances;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DepKind {
    Raw,
    Waw,
    War,
}

impl fmt::Display for DepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DepKind::Raw => "RAW",
            DepKind::Waw => "WAW",
            DepKind::War => "WAR",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Memory,
    Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// One dependence per statement pair and kind.
    Statement,
    /// One dependence per access pair and kind.
    Access,
    /// Reduction loads and stores tracked individually, everything else per
    /// statement.
    Hybrid,
}

impl FromStr for Granularity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stmt" | "statement" => Ok(Granularity::Statement),
            "access" => Ok(Granularity::Access),
            "hybrid" => Ok(Granularity::Hybrid),
            _ => Err(format!("unknown granularity `{s}` (expected stmt, access or hybrid)")),
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Statement => "stmt",
            Granularity::Access => "access",
            Granularity::Hybrid => "hybrid",
        })
    }
}

/// Instance pairs `source → target`. `None` accesses stand for the grouped
/// remainder of the statement.
#[derive(Clone, Debug, PartialEq)]
pub struct Dependence {
    pub source: usize,
    pub source_access: Option<InstId>,
    pub target: usize,
    pub target_access: Option<InstId>,
    pub kind: DepKind,
    pub basis: Basis,
    /// Over the source iterators and the primed target iterators.
    pub relation: IntRel,
}

#[derive(Clone, Debug)]
pub struct ReductionClosure {
    pub statement: usize,
    pub relation: IntRel,
    pub exact: bool,
}

#[derive(Clone, Debug)]
pub struct Partition {
    pub rho: Vec<Dependence>,
    pub nu: Vec<Dependence>,
    pub tau: Vec<Dependence>,
    pub closures: Vec<ReductionClosure>,
    pub reductions: Vec<ReductionInfo>,
}

#[derive(Clone, Debug)]
pub struct DependenceSet {
    pub granularity: Granularity,
    pub basis: Basis,
    /// Parameter values the set was computed at (value basis only).
    pub bindings: Option<Bindings>,
    pub all: Vec<Dependence>,
    /// Per-access dependences, whatever the granularity.
    pub fine: Vec<Dependence>,
    pub partition: Option<Partition>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DepError {
    #[error(transparent)]
    Affine(#[from] AffineError),
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error("statement `{statement}`: {reason}")]
    Refused { statement: String, reason: String },
    #[error("out-of-extent access {array}{subscripts:?} in `{statement}`")]
    OutOfBounds { statement: String, array: String, subscripts: Vec<i64> },
}

fn kind_of(src_write: bool, tgt_write: bool) -> Option<DepKind> {
    match (src_write, tgt_write) {
        (true, true) => Some(DepKind::Waw),
        (true, false) => Some(DepKind::Raw),
        (false, true) => Some(DepKind::War),
        (false, false) => None,
    }
}

/// Renames an expression over `from` to the matching names in `to`.
fn rename_iters(e: &AffineExpr, from: &[String], to: &[String]) -> AffineExpr {
    e.rename(|n| match from.iter().position(|f| f == n) {
        Some(k) => to[k].clone(),
        None => n.to_string(),
    })
}

fn pair_space(scop: &Scop, s: &Statement, t: &Statement) -> (Vec<String>, Vec<String>, Space) {
    let ins = s.iterators.clone();
    let outs = primed(&t.iterators);
    let space = Space::new(ins.iter().chain(&outs).cloned(), scop.params.clone());
    (ins, outs, space)
}

/// `{ (i, i') ∈ I_S × I_T : f(i) = g(i') ∧ θ_S(i) ≪ θ_T(i') }`.
fn memory_relation(scop: &Scop, src: usize, a: InstId, tgt: usize, b: InstId) -> Result<IntRel, DepError> {
    let (s, t) = (&scop.statements[src], &scop.statements[tgt]);
    let (ins, outs, space) = pair_space(scop, s, t);
    let theta = scop.original_schedule();
    let (_, fa) = s.instructions[a].access().expect("access");
    let (_, gb) = t.instructions[b].access().expect("access");
    let mut base = s.domain.embed(&space)?.intersect(&t.domain.with_dims(outs.clone())?.embed(&space)?)?;
    for (f, g) in fa.iter().zip(gb) {
        base = base.constrain(&Constraint::eq(f.clone(), rename_iters(g, &t.iterators, &outs)))?;
    }
    let ts: Vec<AffineExpr> = theta.rows(src).to_vec();
    let tt: Vec<AffineExpr> = theta.rows(tgt).iter().map(|e| rename_iters(e, &t.iterators, &outs)).collect();
    let mut rel = IntRel::empty(ins.clone(), outs.clone(), scop.params.clone())?;
    for piece in lex_lt_pieces(&ts, &tt) {
        let mut p = base.clone();
        for c in &piece {
            p = p.constrain(c)?;
        }
        rel = rel.union(&IntRel::from_set(&p, ins.len())?)?;
    }
    Ok(rel)
}

fn nonempty(r: &IntRel) -> Result<bool, AffineError> {
    Ok(!r.is_empty(EmptinessMode::Rational)?.empty)
}

fn same_array(s: &Statement, a: InstId, t: &Statement, b: InstId) -> bool {
    match (s.instructions[a].access(), t.instructions[b].access()) {
        (Some((x, _)), Some((y, _))) => x == y,
        _ => false,
    }
}

/// Memory-based dependences under the original schedule.
pub fn memory_deps(scop: &Scop, granularity: Granularity) -> Result<DependenceSet, DepError> {
    let mut fine = Vec::new();
    for (src, s) in scop.statements.iter().enumerate() {
        for (tgt, t) in scop.statements.iter().enumerate() {
            for a in s.accesses() {
                for b in t.accesses() {
                    let Some(kind) = kind_of(a.is_store(), b.is_store()) else { continue };
                    if !same_array(s, a.id, t, b.id) {
                        continue;
                    }
                    let relation = memory_relation(scop, src, a.id, tgt, b.id)?;
                    if nonempty(&relation)? {
                        fine.push(Dependence {
                            source: src,
                            source_access: Some(a.id),
                            target: tgt,
                            target_access: Some(b.id),
                            kind,
                            basis: Basis::Memory,
                            relation,
                        });
                    }
                }
            }
        }
    }
    finish(scop, granularity, Basis::Memory, None, fine)
}

type Site = (usize, InstId, Vec<i64>);

/// Value-based dependences by interpreting the original schedule at fixed
/// parameters: last-writer RAW, immediately preceding WAW, and WAR from every
/// read since the last write.
pub fn value_deps(scop: &Scop, granularity: Granularity, bindings: &Bindings) -> Result<DependenceSet, DepError> {
    let theta = scop.original_schedule();
    let mut last_writer: BTreeMap<(String, Vec<i64>), Site> = BTreeMap::new();
    let mut readers: BTreeMap<(String, Vec<i64>), Vec<Site>> = BTreeMap::new();
    let mut pairs: BTreeMap<(usize, InstId, usize, InstId, DepKind), Vec<(Vec<i64>, Vec<i64>)>> = BTreeMap::new();
    for inst in instances(scop, &theta, bindings)? {
        let s = &scop.statements[inst.statement];
        for acc in s.accesses() {
            let (array, subs) = acc.access().expect("access");
            let lookup = |n: &str| s.iterators.iter().position(|i| i == n).map(|k| inst.point[k]).or_else(|| bindings.get(n).copied());
            let loc: Vec<i64> = subs.iter().map(|e| e.eval(lookup)).collect::<Result<_, _>>()?;
            let key = (array.to_string(), loc);
            let here: Site = (inst.statement, acc.id, inst.point.clone());
            let other_instance = |w: &Site| !(w.0 == here.0 && w.2 == here.2);
            if acc.is_load() {
                if let Some(w) = last_writer.get(&key) {
                    if other_instance(w) {
                        pairs.entry((w.0, w.1, here.0, here.1, DepKind::Raw)).or_default().push((w.2.clone(), here.2.clone()));
                    }
                }
                readers.entry(key).or_default().push(here);
            } else {
                if let Some(w) = last_writer.get(&key) {
                    if other_instance(w) {
                        pairs.entry((w.0, w.1, here.0, here.1, DepKind::Waw)).or_default().push((w.2.clone(), here.2.clone()));
                    }
                }
                for r in readers.remove(&key).unwrap_or_default() {
                    if other_instance(&r) {
                        pairs.entry((r.0, r.1, here.0, here.1, DepKind::War)).or_default().push((r.2.clone(), here.2.clone()));
                    }
                }
                last_writer.insert(key, here);
            }
        }
    }
    let mut fine = Vec::new();
    for ((src, a, tgt, b, kind), list) in pairs {
        let (s, t) = (&scop.statements[src], &scop.statements[tgt]);
        let relation = IntRel::from_points(s.iterators.clone(), primed(&t.iterators), scop.params.clone(), &list)?;
        fine.push(Dependence { source: src, source_access: Some(a), target: tgt, target_access: Some(b), kind, basis: Basis::Value, relation });
    }
    finish(scop, granularity, Basis::Value, Some(bindings.clone()), fine)
}

/// Accesses tracked individually at hybrid granularity.
fn reduction_accesses(reductions: &[ReductionInfo]) -> BTreeSet<(usize, InstId)> {
    reductions.iter().flat_map(|r| [(r.statement, r.load), (r.statement, r.store)]).collect()
}

fn group_key(granularity: Granularity, tracked: &BTreeSet<(usize, InstId)>, stmt: usize, access: Option<InstId>) -> Option<InstId> {
    match granularity {
        Granularity::Access => access,
        Granularity::Statement => None,
        Granularity::Hybrid => access.filter(|a| tracked.contains(&(stmt, *a))),
    }
}

type Key = (usize, Option<InstId>, usize, Option<InstId>, DepKind);

/// Unions dependences that share a granularity key, in key order.
fn group(deps: &[Dependence], granularity: Granularity, tracked: &BTreeSet<(usize, InstId)>) -> Result<Vec<Dependence>, DepError> {
    let mut groups: BTreeMap<Key, Dependence> = BTreeMap::new();
    for d in deps {
        let key = (
            d.source,
            group_key(granularity, tracked, d.source, d.source_access),
            d.target,
            group_key(granularity, tracked, d.target, d.target_access),
            d.kind,
        );
        match groups.get_mut(&key) {
            Some(g) => g.relation = g.relation.union(&d.relation)?,
            None => {
                groups.insert(key, Dependence { source_access: key.1, target_access: key.3, ..d.clone() });
            }
        }
    }
    Ok(groups.into_values().collect())
}

fn finish(scop: &Scop, granularity: Granularity, basis: Basis, bindings: Option<Bindings>, fine: Vec<Dependence>) -> Result<DependenceSet, DepError> {
    let tracked = if granularity == Granularity::Hybrid { reduction_accesses(&detect(scop)?) } else { BTreeSet::new() };
    let all = group(&fine, granularity, &tracked)?;
    Ok(DependenceSet { granularity, basis, bindings, all, fine, partition: None })
}

impl DependenceSet {
    /// Domain of a statement as used for closures: pinned to the bindings for
    /// value-based sets.
    fn closure_domain(&self, stmt: &Statement) -> Result<IntSet, AffineError> {
        match &self.bindings {
            Some(b) => stmt.domain.fix_params(b),
            None => Ok(stmt.domain.clone()),
        }
    }

    /// Splits the dependences into D_rho and D_nu and derives the reduction
    /// closures and D_tau.
    pub fn partition(mut self, scop: &Scop, reductions: &[ReductionInfo]) -> Result<DependenceSet, DepError> {
        let tracked = reduction_accesses(reductions);
        let red_stmts: BTreeSet<usize> = reductions.iter().map(|r| r.statement).collect();
        let is_rho = |d: &Dependence| {
            d.kind == DepKind::Waw
                && d.source == d.target
                && reductions.iter().any(|r| r.statement == d.source && d.source_access == Some(r.store) && d.target_access == Some(r.store))
        };
        let in_reduction_pair = |d: &Dependence| {
            d.source == d.target
                && reductions.iter().any(|r| {
                    r.statement == d.source
                        && [r.load, r.store].contains(&d.source_access.unwrap_or(usize::MAX))
                        && [r.load, r.store].contains(&d.target_access.unwrap_or(usize::MAX))
                })
        };

        // D_rho per statement, from the per-access log.
        let mut rho_stmt: BTreeMap<usize, IntRel> = BTreeMap::new();
        let mut rho_fine = Vec::new();
        for d in self.fine.iter().filter(|d| is_rho(d)) {
            match rho_stmt.get_mut(&d.source) {
                Some(r) => *r = r.union(&d.relation)?,
                None => {
                    rho_stmt.insert(d.source, d.relation.clone());
                }
            }
            rho_fine.push(d.clone());
        }

        let mut nu_fine = Vec::new();
        for d in &self.fine {
            if is_rho(d) {
                continue;
            }
            if in_reduction_pair(d) {
                let rest = d.relation.subtract(&rho_stmt[&d.source])?;
                if nonempty(&rest)? {
                    nu_fine.push(Dependence { relation: rest, ..d.clone() });
                }
            } else {
                nu_fine.push(d.clone());
            }
        }

        let (rho, nu) = if self.granularity == Granularity::Statement {
            self.statement_split(scop, &red_stmts, &rho_stmt, &in_reduction_pair)?
        } else {
            (group(&rho_fine, self.granularity, &tracked)?, group(&nu_fine, self.granularity, &tracked)?)
        };

        let mut closures = Vec::new();
        for (&stmt, rel) in &rho_stmt {
            let domain = self.closure_domain(&scop.statements[stmt])?;
            let c = transitive_closure(rel, &domain)?;
            let s = &scop.statements[stmt];
            let relation = c.relation.with_names(s.iterators.clone(), primed(&s.iterators))?;
            closures.push(ReductionClosure { statement: stmt, relation, exact: c.exact });
        }

        let mut tau_fine = Vec::new();
        for d in self.fine.iter().filter(|d| d.source != d.target) {
            let into = closures.iter().find(|c| c.statement == d.target);
            let from = closures.iter().find(|c| c.statement == d.source);
            if into.is_none() && from.is_none() {
                continue;
            }
            let (ins, outs) = (d.relation.inputs().to_vec(), d.relation.outputs().to_vec());
            let mut rel = d.relation.clone();
            if let Some(c) = into {
                rel = rel.union(&rel.then(&c.relation)?.with_names(ins.clone(), outs.clone())?)?;
            }
            if let Some(c) = from {
                rel = rel.union(&c.relation.then(&rel)?.with_names(ins.clone(), outs.clone())?)?;
            }
            tau_fine.push(Dependence { relation: rel, ..d.clone() });
        }
        let tau = group(&tau_fine, self.granularity, &tracked)?;

        self.partition = Some(Partition { rho, nu, tau, closures, reductions: reductions.to_vec() });
        Ok(self)
    }

    /// Statement granularity: D_rho is every WAW self-dependence of a
    /// reduction statement. Refuses when that would mix in non-reduction
    /// accesses.
    fn statement_split(
        &self,
        scop: &Scop,
        red_stmts: &BTreeSet<usize>,
        rho_stmt: &BTreeMap<usize, IntRel>,
        in_reduction_pair: &dyn Fn(&Dependence) -> bool,
    ) -> Result<(Vec<Dependence>, Vec<Dependence>), DepError> {
        let mut rho = Vec::new();
        let mut whole_waw: BTreeMap<usize, IntRel> = BTreeMap::new();
        for d in self.all.iter().filter(|d| d.kind == DepKind::Waw && d.source == d.target && red_stmts.contains(&d.source)) {
            whole_waw.insert(d.source, d.relation.clone());
            rho.push(d.clone());
        }
        for &s in red_stmts {
            let name = &scop.statements[s].name;
            let exact = &rho_stmt.get(&s).cloned().unwrap_or(IntRel::empty(
                scop.statements[s].iterators.clone(),
                primed(&scop.statements[s].iterators),
                scop.params.clone(),
            )?);
            if let Some(w) = whole_waw.get(&s) {
                if nonempty(&w.subtract(exact)?)? {
                    return Err(DepError::Refused {
                        statement: name.clone(),
                        reason: "write-after-write dependences of non-reduction stores cannot be told apart from reduction dependences at statement granularity".into(),
                    });
                }
            }
            for d in self.fine.iter().filter(|d| d.source == s && d.target == s && d.kind != DepKind::Waw && !in_reduction_pair(d)) {
                if nonempty(&d.relation.intersect(exact)?)? {
                    return Err(DepError::Refused {
                        statement: name.clone(),
                        reason: "non-reduction accesses overlap the reduction location at statement granularity".into(),
                    });
                }
            }
        }
        let mut nu = Vec::new();
        for d in &self.all {
            if d.kind == DepKind::Waw && d.source == d.target && red_stmts.contains(&d.source) {
                continue;
            }
            match whole_waw.get(&d.source).filter(|_| d.source == d.target) {
                Some(w) => {
                    let rest = d.relation.subtract(w)?;
                    if nonempty(&rest)? {
                        nu.push(Dependence { relation: rest, ..d.clone() });
                    }
                }
                None => nu.push(d.clone()),
            }
        }
        Ok((rho, nu))
    }

    pub fn partitioned(&self) -> Option<&Partition> {
        self.partition.as_ref()
    }

    /// `(D_rho ∩ I_S × I_S)⁺` for one statement, if it carries reductions.
    pub fn reduction_closure(&self, stmt: usize) -> Option<&ReductionClosure> {
        self.partition.as_ref()?.closures.iter().find(|c| c.statement == stmt)
    }
}

/// Memory-based dependences at the given granularity, partitioned by the
/// detected reductions.
pub fn analyze(scop: &Scop, granularity: Granularity) -> Result<DependenceSet, DepError> {
    let reductions = detect(scop)?;
    memory_deps(scop, granularity)?.partition(scop, &reductions)
}

/// Value-based counterpart of [`analyze`] at fixed parameters.
pub fn analyze_values(scop: &Scop, granularity: Granularity, bindings: &Bindings) -> Result<DependenceSet, DepError> {
    let reductions = detect(scop)?;
    value_deps(scop, granularity, bindings)?.partition(scop, &reductions)
}

/// Enumerated pairs of a dependence list grouped by statement pair and kind.
pub fn enumerate_by_kind(
    deps: &[Dependence],
    bindings: &Bindings,
) -> Result<BTreeMap<(usize, usize, DepKind), BTreeSet<(Vec<i64>, Vec<i64>)>>, AffineError> {
    let mut out: BTreeMap<_, BTreeSet<_>> = BTreeMap::new();
    for d in deps {
        out.entry((d.source, d.target, d.kind)).or_default().extend(d.relation.enumerate(bindings)?);
    }
    Ok(out)
}

/// Enumerated pairs per statement pair, kinds merged.
pub fn enumerate_pairs(deps: &[Dependence], bindings: &Bindings) -> Result<BTreeMap<(usize, usize), BTreeSet<(Vec<i64>, Vec<i64>)>>, AffineError> {
    let mut out: BTreeMap<_, BTreeSet<_>> = BTreeMap::new();
    for d in deps {
        out.entry((d.source, d.target)).or_default().extend(d.relation.enumerate(bindings)?);
    }
    out.retain(|_, v| !v.is_empty());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    const BICG: &str = include_str!("../kernels/bicg.scop");
    const SUM: &str = include_str!("../kernels/array_sum.scop");

    fn bind(pairs: &[(&str, i64)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn pairs_of(set: &DependenceSet, src: &str, tgt: &str, kind: DepKind, scop: &Scop, b: &Bindings) -> BTreeSet<(Vec<i64>, Vec<i64>)> {
        let s = scop.statement(src).unwrap().0;
        let t = scop.statement(tgt).unwrap().0;
        enumerate_by_kind(&set.all, b).unwrap().remove(&(s, t, kind)).unwrap_or_default()
    }

    #[test]
    fn array_sum_memory_waw_is_transitive() {
        let scop = parse(SUM, false).unwrap();
        let d = memory_deps(&scop, Granularity::Access).unwrap();
        let b = bind(&[("N", 1)]);
        let waw = pairs_of(&d, "S", "S", DepKind::Waw, &scop, &b);
        let expected: BTreeSet<_> = (0..4).flat_map(|i| (i + 1..4).map(move |j| (vec![i], vec![j]))).collect();
        assert_eq!(waw, expected);
    }

    #[test]
    fn array_sum_value_waw_is_consecutive() {
        let scop = parse(SUM, false).unwrap();
        let b = bind(&[("N", 1)]);
        let d = value_deps(&scop, Granularity::Access, &b).unwrap();
        let waw = pairs_of(&d, "S", "S", DepKind::Waw, &scop, &b);
        let expected: BTreeSet<_> = (0..3).map(|i| (vec![i], vec![i + 1])).collect();
        assert_eq!(waw, expected);
    }

    #[test]
    fn bicg_value_r_to_s_only_at_first_column() {
        let scop = parse(BICG, false).unwrap();
        let b = bind(&[("NX", 4), ("NY", 4)]);
        let d = value_deps(&scop, Granularity::Hybrid, &b).unwrap();
        let raw = pairs_of(&d, "R", "S", DepKind::Raw, &scop, &b);
        let expected: BTreeSet<_> = (0..4).map(|i| (vec![i], vec![i, 0])).collect();
        assert_eq!(raw, expected);
    }

    #[test]
    fn bicg_partition_and_closure() {
        let scop = parse(BICG, false).unwrap();
        let d = analyze(&scop, Granularity::Hybrid).unwrap();
        let p = d.partitioned().unwrap();
        let b = bind(&[("NX", 3), ("NY", 3)]);
        let (s, _) = scop.statement("S").unwrap();
        let rho_s: BTreeSet<_> = p.rho.iter().filter(|r| r.source == s).flat_map(|r| r.relation.enumerate(&b).unwrap()).collect();
        let expected: BTreeSet<_> =
            (0..3).flat_map(|i| (0..3).flat_map(move |j| (j + 1..3).map(move |j2| (vec![i, j], vec![i, j2])))).collect();
        assert_eq!(rho_s, expected);
        let c = d.reduction_closure(s).unwrap();
        assert!(c.exact);
        assert_eq!(c.relation.enumerate(&b).unwrap().into_iter().collect::<BTreeSet<_>>(), expected);
        // No R→S dependence is reclassified as a reduction.
        let (r, _) = scop.statement("R").unwrap();
        assert!(p.rho.iter().all(|x| x.source != r));
        assert!(p.nu.iter().any(|x| x.source == r && x.target == s));
        // S carries no non-reduction self-dependence.
        assert!(p.nu.iter().all(|x| !(x.source == s && x.target == s)));
    }

    #[test]
    fn bicg_value_tau_covers_later_columns() {
        let scop = parse(BICG, false).unwrap();
        let b = bind(&[("NX", 4), ("NY", 4)]);
        let d = analyze_values(&scop, Granularity::Hybrid, &b).unwrap();
        let p = d.partitioned().unwrap();
        let (r, _) = scop.statement("R").unwrap();
        let (s, _) = scop.statement("S").unwrap();
        let tau: BTreeSet<_> = p.tau.iter().filter(|t| t.source == r && t.target == s).flat_map(|t| t.relation.enumerate(&b).unwrap()).collect();
        for i in 0..4 {
            for j in 0..4 {
                assert!(tau.contains(&(vec![i], vec![i, j])), "R({i}) -> S({i},{j})");
            }
        }
        assert!(d.reduction_closure(s).unwrap().exact);
    }

    #[test]
    fn statement_granularity_refuses_fused_gemm_only() {
        let gemm = include_str!("../kernels/gemm.scop");
        let fused = parse(gemm, true).unwrap();
        assert!(matches!(analyze(&fused, Granularity::Statement), Err(DepError::Refused { .. })));
        assert!(analyze(&fused, Granularity::Hybrid).is_ok());
        let bicg = parse(BICG, true).unwrap();
        assert!(analyze(&bicg, Granularity::Statement).is_ok());
    }

    #[test]
    fn no_reduction_means_empty_rho_and_tau() {
        let control = include_str!("../kernels/control.scop");
        let scop = parse(control, false).unwrap();
        let p = analyze(&scop, Granularity::Hybrid).unwrap().partition.unwrap();
        assert!(p.rho.is_empty() && p.tau.is_empty() && p.closures.is_empty());
    }
}
