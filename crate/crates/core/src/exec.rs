//! Reference interpreter: original order versus scheduled, privatized,
//! randomly interleaved execution.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::affine::{AffineError, Bindings};
use crate::codegen::PrivatizationPlan;
use crate::ir::{InstKind, Operand, Operator, Scop};
use crate::schedule::{instances, Instance, LegalityMode, Schedule, Validated};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("{statement}{point:?}: {array}{subscripts:?} is out of bounds")]
    OutOfBounds { statement: String, point: Vec<i64>, array: String, subscripts: Vec<i64> },
    #[error("{statement}{point:?}: division by zero")]
    DivisionByZero { statement: String, point: Vec<i64> },
    #[error("at least one context is required")]
    NoContexts,
    #[error(transparent)]
    Affine(#[from] AffineError),
}

/// Exact integer memory. Locations never written read a pseudo-random
/// initial value derived from the seed, the array and the location.
#[derive(Clone, Debug)]
pub struct Memory {
    seed: u64,
    cells: BTreeMap<String, BTreeMap<Vec<i64>, i64>>,
}

fn fnv(array: &str, loc: &[i64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |b: u8| {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    };
    array.bytes().for_each(&mut eat);
    eat(0xff);
    for v in loc {
        v.to_le_bytes().into_iter().for_each(&mut eat);
    }
    h
}

impl Memory {
    pub fn seeded(seed: u64) -> Self {
        Memory { seed, cells: BTreeMap::new() }
    }

    /// Initial value of a location: a small integer in `-9..=9`.
    pub fn initial(&self, array: &str, loc: &[i64]) -> i64 {
        ChaCha8Rng::seed_from_u64(self.seed ^ fnv(array, loc)).gen_range(-9..=9)
    }

    pub fn get(&self, array: &str, loc: &[i64]) -> i64 {
        self.cells.get(array).and_then(|m| m.get(loc)).copied().unwrap_or_else(|| self.initial(array, loc))
    }

    pub fn set(&mut self, array: &str, loc: Vec<i64>, v: i64) {
        self.cells.entry(array.to_string()).or_default().insert(loc, v);
    }

    /// Locations written so far, with their values.
    pub fn written(&self) -> impl Iterator<Item = (&str, &Vec<i64>, i64)> {
        self.cells.iter().flat_map(|(a, m)| m.iter().map(move |(l, v)| (a.as_str(), l, *v)))
    }

    /// Locations whose values differ, over everything either side wrote.
    pub fn diff(&self, other: &Memory) -> Vec<(String, Vec<i64>, i64, i64)> {
        let mut keys: BTreeSet<(String, Vec<i64>)> = BTreeSet::new();
        for (a, l, _) in self.written().chain(other.written()) {
            keys.insert((a.to_string(), l.clone()));
        }
        keys.into_iter()
            .filter_map(|(a, l)| {
                let (x, y) = (self.get(&a, &l), other.get(&a, &l));
                (x != y).then_some((a, l, x, y))
            })
            .collect()
    }
}

impl PartialEq for Memory {
    fn eq(&self, other: &Self) -> bool {
        self.diff(other).is_empty()
    }
}

/// Private copies of reduction locations, per context.
#[derive(Default)]
struct Private {
    cells: BTreeMap<(String, usize, Vec<i64>), i64>,
}

struct Redirect<'a> {
    plan: &'a PrivatizationPlan,
    ctx: usize,
}

fn run_instance(scop: &Scop, inst: &Instance, bindings: &Bindings, mem: &mut Memory, private: &mut Private, redirect: Option<Redirect<'_>>) -> Result<(), ExecError> {
    let st = &scop.statements[inst.statement];
    let lookup = |n: &str| st.iterators.iter().position(|i| i == n).map(|k| inst.point[k]).or_else(|| bindings.get(n).copied());
    let privatized = |id: usize| -> Option<(usize, i64)> {
        let r = redirect.as_ref()?;
        r.plan
            .privatized
            .iter()
            .find(|p| p.statement == inst.statement && (p.load == id || p.store == id))
            .map(|p| (r.ctx, p.identity))
    };
    let mut values = vec![0i64; st.instructions.len()];
    let value = |o: &Operand, values: &[i64]| -> Result<i64, ExecError> {
        Ok(match o {
            Operand::Inst(id) => values[*id],
            Operand::Const(v) => *v,
            Operand::Affine(e) => e.eval(lookup)?,
        })
    };
    for ins in &st.instructions {
        match &ins.kind {
            InstKind::Load { array, subscripts } | InstKind::Store { array, subscripts, .. } => {
                let loc = subscripts.iter().map(|e| e.eval(lookup)).collect::<Result<Vec<_>, _>>()?;
                check_bounds(scop, inst, array, &loc, bindings)?;
                let target = privatized(ins.id);
                match &ins.kind {
                    InstKind::Load { .. } => {
                        values[ins.id] = match target {
                            Some((ctx, id)) => *private.cells.get(&(array.clone(), ctx, loc)).unwrap_or(&id),
                            None => mem.get(array, &loc),
                        };
                    }
                    InstKind::Store { value: v, .. } => {
                        let v = value(v, &values)?;
                        match target {
                            Some((ctx, _)) => {
                                private.cells.insert((array.clone(), ctx, loc), v);
                            }
                            None => mem.set(array, loc, v),
                        }
                    }
                    InstKind::BinOp { .. } => unreachable!(),
                }
            }
            InstKind::BinOp { operator, lhs, rhs } => {
                let (a, b) = (value(lhs, &values)?, value(rhs, &values)?);
                values[ins.id] = operator
                    .apply(a, b)
                    .ok_or_else(|| ExecError::DivisionByZero { statement: st.name.clone(), point: inst.point.clone() })?;
            }
        }
    }
    Ok(())
}

fn check_bounds(scop: &Scop, inst: &Instance, array: &str, loc: &[i64], bindings: &Bindings) -> Result<(), ExecError> {
    let Some(decl) = scop.array(array) else { return Ok(()) };
    for (v, ext) in loc.iter().zip(&decl.extents) {
        let Some(ext) = ext else { continue };
        let n = ext.eval(|p| bindings.get(p).copied())?;
        if *v < 0 || *v >= n {
            return Err(ExecError::OutOfBounds {
                statement: scop.statements[inst.statement].name.clone(),
                point: inst.point.clone(),
                array: array.to_string(),
                subscripts: loc.to_vec(),
            });
        }
    }
    Ok(())
}

/// Executes every instance in the original loop order.
pub fn run_sequential(scop: &Scop, bindings: &Bindings, input: &Memory) -> Result<Memory, ExecError> {
    let mut mem = input.clone();
    let mut private = Private::default();
    for inst in instances(scop, &scop.original_schedule(), bindings)? {
        run_instance(scop, &inst, bindings, &mut mem, &mut private, None)?;
    }
    Ok(mem)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExecConfig {
    pub bindings: Bindings,
    pub contexts: usize,
    /// Seed of the interleaving.
    pub seed: u64,
}

fn aggregate(plan: &PrivatizationPlan, mem: &mut Memory, private: &mut Private) {
    let cells = std::mem::take(&mut private.cells);
    // Context-ascending per location: x := x ⊕ x_1 ⊕ … ⊕ x_p.
    let mut by_loc: BTreeMap<(String, Vec<i64>), Vec<(usize, i64)>> = BTreeMap::new();
    for ((array, ctx, loc), v) in cells {
        by_loc.entry((array, loc)).or_default().push((ctx, v));
    }
    for ((array, loc), mut parts) in by_loc {
        parts.sort_unstable();
        let op: Operator = plan.privatized.iter().find(|p| p.array == array).map(|p| p.operator).expect("planned array");
        let mut acc = mem.get(&array, &loc);
        for (_, v) in parts {
            acc = op.apply(acc, v).expect("reduction operators are total");
        }
        mem.set(&array, loc, acc);
    }
}

fn is_loop_at(scop: &Scop, schedule: &Schedule, stmt: usize, k: usize) -> bool {
    schedule.rows(stmt).get(k).is_some_and(|r| scop.statements[stmt].iterators.iter().any(|i| r.uses(i)))
}

/// Executes a validated schedule: instances sharing the timestamp prefix
/// before the parallel dimension run as `p` contexts (blocked over that
/// dimension) interleaved at random, with privatized reduction accesses.
pub fn run_scheduled(scop: &Scop, validated: &Validated, plan: &PrivatizationPlan, config: &ExecConfig, input: &Memory) -> Result<Memory, ExecError> {
    if config.contexts == 0 {
        return Err(ExecError::NoContexts);
    }
    let schedule = validated.schedule();
    let bindings = &config.bindings;
    let all = instances(scop, schedule, bindings)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut mem = input.clone();
    let mut private = Private::default();
    let mut region: Option<Vec<i64>> = None;
    let mut idx = 0;
    while idx < all.len() {
        let inst = &all[idx];
        if let (Some(r), Some(key)) = (plan.region_dim, &region) {
            if inst.timestamp[..r] != key[..] {
                aggregate(plan, &mut mem, &mut private);
                region = None;
            }
        }
        let Some(k) = plan.parallel_dim.filter(|&k| is_loop_at(scop, schedule, inst.statement, k)) else {
            run_instance(scop, inst, bindings, &mut mem, &mut private, None)?;
            idx += 1;
            continue;
        };
        // One parallel loop execution.
        let prefix = &inst.timestamp[..k];
        let mut end = idx;
        while end < all.len() && all[end].timestamp[..k] == *prefix && is_loop_at(scop, schedule, all[end].statement, k) {
            end += 1;
        }
        let segment = &all[idx..end];
        if let Some(r) = plan.region_dim {
            if region.is_none() && segment.iter().any(|i| plan.privatizes(i.statement)) {
                region = Some(inst.timestamp[..r].to_vec());
            }
        }
        let values: Vec<i64> = segment.iter().map(|i| i.timestamp[k]).collect::<BTreeSet<_>>().into_iter().collect();
        let block = values.len().div_ceil(config.contexts).max(1);
        let mut queues: Vec<std::collections::VecDeque<&Instance>> = vec![Default::default(); config.contexts];
        for i in segment {
            let pos = values.binary_search(&i.timestamp[k]).expect("collected above");
            queues[pos / block].push_back(i);
        }
        loop {
            let live: Vec<usize> = (0..queues.len()).filter(|&c| !queues[c].is_empty()).collect();
            if live.is_empty() {
                break;
            }
            let ctx = live[rng.gen_range(0..live.len())];
            let i = queues[ctx].pop_front().expect("live");
            run_instance(scop, i, bindings, &mut mem, &mut private, Some(Redirect { plan, ctx }))?;
        }
        idx = end;
    }
    aggregate(plan, &mut mem, &mut private);
    Ok(mem)
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckEntry {
    pub label: String,
    pub mode: LegalityMode,
    pub contexts: usize,
    pub seed: u64,
    pub equal: bool,
    /// First differing location, as `array[loc]: expected vs found`.
    pub first_difference: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub entries: Vec<CheckEntry>,
}

impl CheckReport {
    pub fn all_equal(&self) -> bool {
        self.entries.iter().all(|e| e.equal)
    }
}

/// Runs the original order once and every configuration against it.
pub fn differential_check(
    scop: &Scop,
    schedules: &[(String, Validated, PrivatizationPlan)],
    bindings: &Bindings,
    contexts: &[usize],
    seeds: &[u64],
    input: &Memory,
) -> Result<CheckReport, ExecError> {
    let reference = run_sequential(scop, bindings, input)?;
    let mut entries = Vec::new();
    for (label, v, plan) in schedules {
        for &p in contexts {
            for &seed in seeds {
                let cfg = ExecConfig { bindings: bindings.clone(), contexts: p, seed };
                let out = run_scheduled(scop, v, plan, &cfg, input)?;
                let d = reference.diff(&out);
                entries.push(CheckEntry {
                    label: label.clone(),
                    mode: v.mode(),
                    contexts: p,
                    seed,
                    equal: d.is_empty(),
                    first_difference: d.first().map(|(a, l, x, y)| format!("{a}{l:?}: expected {x}, found {y}")),
                });
            }
        }
    }
    Ok(CheckReport { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::{plan_privatization, ParallelChoice, Placement};
    use crate::deps::{analyze, analyze_values, Granularity};
    use crate::detect::detect;
    use crate::frontend::parse;
    use crate::schedule::{classify_dims, parse_rows, validate};

    const ARRAY_SUM: &str = include_str!("../kernels/array_sum.scop");
    const BICG: &str = include_str!("../kernels/bicg.scop");

    fn bind(pairs: &[(&str, i64)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn plan_for(scop: &Scop, v: &Validated) -> PrivatizationPlan {
        let deps = analyze(scop, Granularity::Access).unwrap();
        let class = classify_dims(scop, v.schedule(), &deps, v.mode()).unwrap();
        plan_privatization(scop, v.schedule(), &class, &detect(scop).unwrap(), &ParallelChoice::Auto, Placement::Auto).unwrap()
    }

    #[test]
    fn array_sum_adds_up() {
        let scop = parse(ARRAY_SUM, false).unwrap();
        let b = bind(&[("N", 1)]);
        let mut mem = Memory::seeded(0);
        for (i, v) in [1, 2, 3, 4].into_iter().enumerate() {
            mem.set("A", vec![i as i64], v);
        }
        mem.set("sum", vec![], 0);
        let out = run_sequential(&scop, &b, &mem).unwrap();
        assert_eq!(out.get("sum", &[]), 10);

        let deps = analyze(&scop, Granularity::Access).unwrap();
        let v = validate(&scop, &scop.original_schedule(), &deps, LegalityMode::Privatized).unwrap();
        let plan = plan_for(&scop, &v);
        assert_eq!(plan.privatized.len(), 1);
        for p in [1, 2, 3, 8] {
            let cfg = ExecConfig { bindings: b.clone(), contexts: p, seed: 7 };
            assert_eq!(run_scheduled(&scop, &v, &plan, &cfg, &mem).unwrap().get("sum", &[]), 10);
        }
    }

    #[test]
    fn out_of_bounds_is_reported() {
        let scop = parse("scop t(N) { int A[N]; for (i = 0; i <= N; i++) S: A[i] = 0; }", false).unwrap();
        let err = run_sequential(&scop, &bind(&[("N", 2)]), &Memory::seeded(0)).unwrap_err();
        assert!(matches!(err, ExecError::OutOfBounds { .. }));
    }

    #[test]
    fn reversed_reduction_loop_matches() {
        let scop = parse(BICG, false).unwrap();
        let b = bind(&[("NX", 3), ("NY", 5)]);
        let deps = analyze(&scop, Granularity::Access).unwrap();
        let idx = scop.statement("S").unwrap().0;
        let s = scop.original_schedule().with_rows(idx, parse_rows("i, 1, -j, 0").unwrap());
        let v = validate(&scop, &s, &deps, LegalityMode::Relaxed).unwrap();
        let plan = plan_for(&scop, &v);
        let input = Memory::seeded(3);
        let report = differential_check(&scop, &[("reversed".into(), v, plan)], &b, &[1, 2, 4], &[0, 1, 2, 3], &input).unwrap();
        assert!(report.all_equal(), "{:?}", report.entries.iter().find(|e| !e.equal));
    }

    #[test]
    fn hoist_without_tau_changes_the_result() {
        let scop = parse(BICG, false).unwrap();
        let b = bind(&[("NX", 4), ("NY", 4)]);
        let deps = analyze_values(&scop, Granularity::Access, &b).unwrap();
        let (r, s) = (scop.statement("R").unwrap().0, scop.statement("S").unwrap().0);
        let sched = scop.original_schedule().with_rows(s, parse_rows("i, 1, -j, 1").unwrap()).with_rows(r, parse_rows("i, 1, 0, 0").unwrap());
        let v = validate(&scop, &sched, &deps, LegalityMode::Relaxed).unwrap();
        let plan = PrivatizationPlan::sequential();
        let report = differential_check(&scop, &[("hoist".into(), v, plan)], &b, &[1], &[0], &Memory::seeded(1)).unwrap();
        assert!(!report.all_equal());
    }

    #[test]
    fn forcing_a_sequential_loop_parallel_is_caught() {
        let scop = parse(include_str!("../kernels/cond_reduction.scop"), false).unwrap();
        let b = bind(&[("N", 6), ("M", 6)]);
        let deps = analyze(&scop, Granularity::Access).unwrap();
        let v = validate(&scop, &scop.original_schedule(), &deps, LegalityMode::Strict).unwrap();
        let plan = PrivatizationPlan { parallel_dim: Some(0), ..PrivatizationPlan::sequential() };
        let report = differential_check(&scop, &[("forced".into(), v, plan)], &b, &[4], &(0..20).collect::<Vec<_>>(), &Memory::seeded(2)).unwrap();
        assert!(!report.all_equal());
    }

    #[test]
    fn empty_domain_leaves_memory_unchanged() {
        let scop = parse(BICG, false).unwrap();
        let input = Memory::seeded(4);
        let out = run_sequential(&scop, &bind(&[("NX", 0), ("NY", 3)]), &input).unwrap();
        assert_eq!(out.written().count(), 0);
        assert_eq!(out, input);
    }

    #[test]
    fn bicg_two_by_two_by_hand() {
        let scop = parse(BICG, false).unwrap();
        let mut mem = Memory::seeded(0);
        let a = [[1, 2], [3, 4]];
        for i in 0..2 {
            for j in 0..2 {
                mem.set("A", vec![i, j], a[i as usize][j as usize]);
            }
        }
        mem.set("p", vec![0], 5);
        mem.set("p", vec![1], 6);
        mem.set("r", vec![0], 7);
        mem.set("r", vec![1], 8);
        mem.set("s", vec![0], 0);
        mem.set("s", vec![1], 0);
        let out = run_sequential(&scop, &bind(&[("NX", 2), ("NY", 2)]), &mem).unwrap();
        // q = A p, s = A^T r
        assert_eq!((out.get("q", &[0]), out.get("q", &[1])), (17, 39));
        assert_eq!((out.get("s", &[0]), out.get("s", &[1])), (31, 46));
    }

    #[test]
    fn memory_initial_values_are_deterministic() {
        let (a, b) = (Memory::seeded(5), Memory::seeded(5));
        assert_eq!(a.initial("A", &[1, 2]), b.initial("A", &[1, 2]));
        assert_eq!(a, b);
        let mut c = a.clone();
        c.set("A", vec![0], a.get("A", &[0]));
        assert_eq!(a, c);
        c.set("A", vec![0], a.get("A", &[0]) + 1);
        assert_eq!(a.diff(&c).len(), 1);
    }
}
