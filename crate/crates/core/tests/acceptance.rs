//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use common::*;
use polyred::affine::Bindings;
use polyred::codegen::{emit_c, plan_privatization, ParallelChoice, Placement, PrivatizationPlan};
use polyred::deps::{analyze, analyze_values, enumerate_by_kind, memory_deps, value_deps, DepError, DepKind, Dependence, Granularity};
use polyred::detect::detect;
use polyred::exec::{differential_check, Memory};
use polyred::ir::{Operator, Scop};
use polyred::schedule::{classify_dims, parse_rows, search, validate, DepClass, DimClass, LegalityMode, Schedule, ScheduleError, SearchConfig, Validated};

const DETECT_LIMIT: Duration = Duration::from_secs(1);
const ORACLE_LIMIT: Duration = Duration::from_secs(30);
const EXEC_LIMIT: Duration = Duration::from_secs(60);
const EXTENTS: [i64; 4] = [1, 2, 4, 6];
const CONTEXTS: [usize; 4] = [1, 2, 4, 8];
const SEEDS: u64 = 50;
const MODES: [LegalityMode; 3] = [LegalityMode::Strict, LegalityMode::Relaxed, LegalityMode::Privatized];

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<String, String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:?}, limit {limit:?}"))?;
    Ok(format!("{:.2}s", t.as_secs_f64()))
}

fn rows(scop: &Scop, base: &Schedule, stmt: &str, text: &str) -> Schedule {
    base.with_rows(scop.statement(stmt).unwrap().0, parse_rows(text).unwrap())
}

fn detection() -> Outcome {
    let start = Instant::now();
    for (name, want) in [("array_sum", 1), ("bicg", 2), ("cond_reduction", 1), ("control", 0)] {
        let got = detect(&kernel(name)).map_err(|e| e.to_string())?;
        ensure(got.len() == want, || format!("{name}: {} reductions, expected {want}", got.len()))?;
    }
    let scop = fused("gemm");
    let reds = detect(&scop).map_err(|e| e.to_string())?;
    let [r] = reds.as_slice() else { return Err(format!("fused gemm: {} reductions, expected 1", reds.len())) };
    let st = &scop.statements[r.statement];
    ensure(st.is_compound() && r.operator == Operator::Add && st.access_text(r.store) == "C[i][j]", || "fused gemm: wrong reduction".into())?;
    within(start, DETECT_LIMIT)
}

fn memory_vs_interpreter() -> Outcome {
    let start = Instant::now();
    let mut compared = 0;
    for name in KERNELS {
        let scop = kernel(name);
        let mem = memory_deps(&scop, Granularity::Access).map_err(|e| e.to_string())?;
        for v in EXTENTS {
            let b = uniform(&scop, v);
            let log = access_log(&scop, &b);
            let mut got = enumerate_by_kind(&mem.all, &b).map_err(|e| e.to_string())?;
            got.retain(|_, p| !p.is_empty());
            ensure(got == by_statements(&memory_oracle(&log)), || format!("{name} at {v}: memory dependences differ"))?;
            let val = value_deps(&scop, Granularity::Access, &b).map_err(|e| e.to_string())?;
            let mut got = enumerate_by_kind(&val.all, &b).map_err(|e| e.to_string())?;
            got.retain(|_, p| !p.is_empty());
            ensure(got == by_statements(&value_oracle(&log)), || format!("{name} at {v}: value dependences differ"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} kernel/extent pairs, {}", within(start, ORACLE_LIMIT)?))
}

fn pairs(deps: &[Dependence], src: usize, tgt: usize, b: &Bindings) -> BTreeSet<(Vec<i64>, Vec<i64>)> {
    deps.iter().filter(|d| d.source == src && d.target == tgt).flat_map(|d| d.relation.enumerate(b).unwrap()).collect()
}

fn value_bicg() -> Outcome {
    let scop = kernel("bicg");
    let b = bind(&[("NX", 4), ("NY", 4)]);
    let deps = analyze_values(&scop, Granularity::Access, &b).map_err(|e| e.to_string())?;
    let (r, s) = (scop.statement("R").unwrap().0, scop.statement("S").unwrap().0);
    let c = deps.reduction_closure(s).ok_or("no closure for S")?;
    let want: BTreeSet<(Vec<i64>, Vec<i64>)> = (0..4)
        .flat_map(|i| (0..4).flat_map(move |j| (j + 1..4).map(move |k| (vec![i, j], vec![i, k]))))
        .collect();
    let got: BTreeSet<_> = c.relation.enumerate(&b).map_err(|e| e.to_string())?.into_iter().collect();
    ensure(got == want, || format!("closure of S has {} pairs, expected {}", got.len(), want.len()))?;
    ensure(c.exact, || "closure of S not exact".into())?;
    let tau = pairs(&deps.partitioned().ok_or("no partition")?.tau, r, s, &b);
    let need: BTreeSet<_> = (0..4).flat_map(|i| (1..4).map(move |j| (vec![i], vec![i, j]))).collect();
    ensure(need.is_subset(&tau), || "D_tau misses R(i) -> S(i, j), j >= 1".into())?;
    let hoist = rows(&scop, &rows(&scop, &scop.original_schedule(), "S", "i, 1, -j, 1"), "R", "i, 1, 0, 0");
    ensure(validate(&scop, &hoist, &deps, LegalityMode::Relaxed).is_ok(), || "hoist rejected without D_tau".into())?;
    match validate(&scop, &hoist, &deps, LegalityMode::Privatized) {
        Err(ScheduleError::Violation(v)) if v.class == DepClass::Tau => Ok("closure exact, hoist needs D_tau".into()),
        other => Err(format!("hoist with D_tau: {other:?}")),
    }
}

fn relaxation() -> Outcome {
    let scop = kernel("bicg");
    let deps = analyze(&scop, Granularity::Hybrid).map_err(|e| e.to_string())?;
    let reversed = rows(&scop, &scop.original_schedule(), "S", "i, 1, -j, 0");
    ensure(validate(&scop, &reversed, &deps, LegalityMode::Strict).is_err(), || "(i, -j) accepted in strict mode".into())?;
    ensure(validate(&scop, &reversed, &deps, LegalityMode::Relaxed).is_ok(), || "(i, -j) rejected in relaxed mode".into())?;
    let collapsed = rows(&scop, &scop.original_schedule(), "S", "i, 1, 0, 0");
    for mode in MODES {
        ensure(validate(&scop, &collapsed, &deps, mode).is_err(), || format!("(i, 0) accepted in {mode} mode"))?;
    }
    Ok("(i,-j) relaxed only; (i,0) never".into())
}

fn classification() -> Outcome {
    use DimClass::*;
    let scop = kernel("bicg");
    let deps = analyze(&scop, Granularity::Hybrid).map_err(|e| e.to_string())?;
    let c = classify_dims(&scop, &scop.original_schedule(), &deps, LegalityMode::Relaxed).map_err(|e| e.to_string())?;
    let (s, t) = (scop.statement("S").unwrap().0, scop.statement("T").unwrap().0);
    ensure(c.loops(s) == [Parallel, ReductionParallel], || format!("S: {:?}", c.loops(s)))?;
    ensure(c.loops(t) == [ReductionParallel, Parallel], || format!("T: {:?}", c.loops(t)))?;
    Ok("S (par, red-par), T (red-par, par)".into())
}

/// Parameters for execution: distinct small values so loops are not square.
fn exec_params(scop: &Scop) -> Bindings {
    scop.params.iter().enumerate().map(|(k, p)| (p.clone(), 3 + k as i64)).collect()
}

fn plan(scop: &Scop, v: &Validated, choice: ParallelChoice, placement: Placement) -> Result<PrivatizationPlan, String> {
    let deps = analyze(scop, Granularity::Hybrid).map_err(|e| e.to_string())?;
    let class = classify_dims(scop, v.schedule(), &deps, v.mode()).map_err(|e| e.to_string())?;
    plan_privatization(scop, v.schedule(), &class, &detect(scop).unwrap(), &choice, placement).map_err(|e| e.to_string())
}

fn execution() -> Outcome {
    let start = Instant::now();
    let seeds: Vec<u64> = (0..SEEDS).collect();
    let mut runs = 0;
    for name in KERNELS {
        let scop = kernel(name);
        let deps = analyze(&scop, Granularity::Hybrid).map_err(|e| e.to_string())?;
        let mut configs = Vec::new();
        for mode in MODES {
            let out = search(&scop, &deps, mode, SearchConfig::default()).map_err(|e| e.to_string())?;
            let v = validate(&scop, &out.schedule, &deps, mode).map_err(|e| format!("{name} {mode}: search output invalid: {e}"))?;
            let p = plan(&scop, &v, ParallelChoice::Auto, Placement::Auto)?;
            configs.push((format!("{name} {mode} search"), v, p));
            if let Ok(v) = validate(&scop, &scop.original_schedule(), &deps, mode) {
                let p = plan(&scop, &v, ParallelChoice::Auto, Placement::Auto)?;
                configs.push((format!("{name} {mode} original"), v, p));
            }
        }
        if name == "priv_placement" {
            for placement in [Placement::Auto, Placement::Depth(1), Placement::Depth(2)] {
                let v = validate(&scop, &scop.original_schedule(), &deps, LegalityMode::Privatized).unwrap();
                let p = plan(&scop, &v, ParallelChoice::Loop("k".into()), placement)?;
                configs.push((format!("{name} k-parallel {placement}"), v, p));
            }
        }
        let b = exec_params(&scop);
        let report = differential_check(&scop, &configs, &b, &CONTEXTS, &seeds, &Memory::seeded(11)).map_err(|e| e.to_string())?;
        if let Some(e) = report.entries.iter().find(|e| !e.equal) {
            return Err(format!("{} p={} seed={}: {}", e.label, e.contexts, e.seed, e.first_difference.as_deref().unwrap_or("")));
        }
        runs += report.entries.len();
    }
    // The hoist accepted without D_tau must change the result.
    let scop = kernel("bicg");
    let b = bind(&[("NX", 4), ("NY", 4)]);
    let deps = analyze_values(&scop, Granularity::Access, &b).map_err(|e| e.to_string())?;
    let hoist = rows(&scop, &rows(&scop, &scop.original_schedule(), "S", "i, 1, -j, 1"), "R", "i, 1, 0, 0");
    let v = validate(&scop, &hoist, &deps, LegalityMode::Relaxed).map_err(|e| e.to_string())?;
    let p = plan(&scop, &v, ParallelChoice::Auto, Placement::Auto)?;
    let report = differential_check(&scop, &[("hoist".into(), v, p)], &b, &CONTEXTS, &seeds, &Memory::seeded(11)).map_err(|e| e.to_string())?;
    ensure(!report.all_equal(), || "unsound hoist matched the sequential result".into())?;
    Ok(format!("{runs} runs equal, hoist differs, {}", within(start, EXEC_LIMIT)?))
}

type Grouped = BTreeMap<(usize, usize, DepKind), BTreeSet<(Vec<i64>, Vec<i64>)>>;

fn split(scop: &Scop, g: Granularity, b: &Bindings, value: bool) -> Result<(Grouped, Grouped), String> {
    let d = if value { analyze_values(scop, g, b) } else { analyze(scop, g) }.map_err(|e| e.to_string())?;
    let p = d.partitioned().ok_or("no partition")?;
    let e = |ds: &[Dependence]| -> Result<Grouped, String> {
        let mut m = enumerate_by_kind(ds, b).map_err(|e| e.to_string())?;
        m.retain(|_, v| !v.is_empty());
        Ok(m)
    };
    Ok((e(&p.rho)?, e(&p.nu)?))
}

fn granularity() -> Outcome {
    for name in KERNELS {
        for scop in [kernel(name), fused(name)] {
            for (v, value) in [(2, false), (4, false), (4, true)] {
                let b = uniform(&scop, v);
                let access = split(&scop, Granularity::Access, &b, value)?;
                let hybrid = split(&scop, Granularity::Hybrid, &b, value)?;
                ensure(access == hybrid, || format!("{name} (fused {}): access and hybrid differ", scop.fused))?;
            }
            let refused = matches!(analyze(&scop, Granularity::Statement), Err(DepError::Refused { .. }));
            let expect = scop.fused && name == "gemm";
            ensure(refused == expect, || format!("{name} (fused {}): statement granularity refused={refused}", scop.fused))?;
        }
    }
    Ok("access = hybrid everywhere; statement refuses fused gemm only".into())
}

fn golden(file: &str, kernel_name: &str, choice: ParallelChoice, placement: Placement) -> Result<(), String> {
    let scop = kernel(kernel_name);
    let deps = analyze(&scop, Granularity::Hybrid).map_err(|e| e.to_string())?;
    let v = validate(&scop, &scop.original_schedule(), &deps, LegalityMode::Privatized).map_err(|e| e.to_string())?;
    let class = classify_dims(&scop, v.schedule(), &deps, v.mode()).map_err(|e| e.to_string())?;
    let p = plan(&scop, &v, choice, placement)?;
    let code = emit_c(&scop, v.schedule(), &class, &p).map_err(|e| e.to_string())?;
    let want = std::fs::read_to_string(format!("{}/tests/golden/{file}", env!("CARGO_MANIFEST_DIR"))).map_err(|e| e.to_string())?;
    ensure(code == want, || format!("{file} differs"))
}

fn goldens() -> Outcome {
    golden("array_sum.c", "array_sum", ParallelChoice::Auto, Placement::Auto)?;
    golden("bicg_outer.c", "bicg", ParallelChoice::Auto, Placement::Auto)?;
    golden("priv_placement_auto.c", "priv_placement", ParallelChoice::Loop("k".into()), Placement::Auto)?;
    golden("priv_placement_depth2.c", "priv_placement", ParallelChoice::Loop("k".into()), Placement::Depth(2))?;
    Ok("4 files byte-identical".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("detection on the corpus", detection),
        ("dependences equal the interpreter log", memory_vs_interpreter),
        ("value-based BiCG closure and D_tau", value_bicg),
        ("relaxed legality of BiCG variants", relaxation),
        ("BiCG dimension classification", classification),
        ("scheduled execution equals sequential", execution),
        ("granularity equivalence and refusal", granularity),
        ("codegen goldens", goldens),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {}: {name} ({detail})", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}: {name}: {why}", k + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
