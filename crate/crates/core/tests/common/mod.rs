//! Shared test support: the bundled kernels and a brute-force dependence
//! oracle that walks the loop tree directly.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use polyred::affine::Bindings;
use polyred::deps::DepKind;
use polyred::frontend::parse;
use polyred::ir::{Node, Scop};

pub const KERNELS: [&str; 6] = ["array_sum", "bicg", "cond_reduction", "control", "gemm", "priv_placement"];

pub fn kernel_path(name: &str) -> String {
    format!("{}/kernels/{name}.scop", env!("CARGO_MANIFEST_DIR"))
}

pub fn kernel_src(name: &str) -> String {
    std::fs::read_to_string(kernel_path(name)).unwrap()
}

pub fn kernel(name: &str) -> Scop {
    parse(&kernel_src(name), false).unwrap()
}

pub fn fused(name: &str) -> Scop {
    parse(&kernel_src(name), true).unwrap()
}

pub fn bind(pairs: &[(&str, i64)]) -> Bindings {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Every parameter set to `v`.
pub fn uniform(scop: &Scop, v: i64) -> Bindings {
    scop.params.iter().map(|p| (p.clone(), v)).collect()
}

/// One memory access in execution order.
#[derive(Clone, Debug)]
pub struct Access {
    /// Sequence number of the statement instance.
    pub instance: usize,
    pub stmt: usize,
    pub inst: usize,
    pub point: Vec<i64>,
    pub array: String,
    pub loc: Vec<i64>,
    pub write: bool,
}

/// Runs the loop tree and records every access.
pub fn access_log(scop: &Scop, b: &Bindings) -> Vec<Access> {
    fn walk(scop: &Scop, nodes: &[Node], env: &mut BTreeMap<String, i64>, b: &Bindings, out: &mut Vec<Access>, count: &mut usize) {
        for n in nodes {
            match n {
                Node::Loop { iterator, upper, body } => {
                    let hi = upper.eval(|v| env.get(v).or_else(|| b.get(v)).copied()).unwrap();
                    for x in 0..hi {
                        env.insert(iterator.clone(), x);
                        walk(scop, body, env, b, out, count);
                    }
                    env.remove(iterator);
                }
                Node::Stmt(s) => {
                    let st = &scop.statements[*s];
                    let point: Vec<i64> = st.iterators.iter().map(|i| env[i]).collect();
                    for ins in &st.instructions {
                        if let Some((array, subs)) = ins.access() {
                            let loc = subs.iter().map(|e| e.eval(|v| env.get(v).or_else(|| b.get(v)).copied()).unwrap()).collect();
                            out.push(Access { instance: *count, stmt: *s, inst: ins.id, point: point.clone(), array: array.to_string(), loc, write: ins.is_store() });
                        }
                    }
                    *count += 1;
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(scop, &scop.tree, &mut BTreeMap::new(), b, &mut out, &mut 0);
    out
}

pub type Pairs = BTreeSet<(Vec<i64>, Vec<i64>)>;
/// Keyed by source statement, source access, target statement, target access and kind.
pub type Log = BTreeMap<(usize, usize, usize, usize, DepKind), Pairs>;

fn kind(src_write: bool, tgt_write: bool) -> Option<DepKind> {
    match (src_write, tgt_write) {
        (true, true) => Some(DepKind::Waw),
        (true, false) => Some(DepKind::Raw),
        (false, true) => Some(DepKind::War),
        (false, false) => None,
    }
}

fn record(log: &mut Log, x: &Access, y: &Access, k: DepKind) {
    log.entry((x.stmt, x.inst, y.stmt, y.inst, k)).or_default().insert((x.point.clone(), y.point.clone()));
}

/// Every ordered pair of accesses to one location from different instances.
pub fn memory_oracle(log: &[Access]) -> Log {
    let mut out = Log::new();
    for (a, x) in log.iter().enumerate() {
        for y in &log[a + 1..] {
            if x.instance == y.instance || x.array != y.array || x.loc != y.loc {
                continue;
            }
            if let Some(k) = kind(x.write, y.write) {
                record(&mut out, x, y, k);
            }
        }
    }
    out
}

/// RAW from the last write, WAW from the previous write, WAR from every
/// read since the previous write. Pairs inside one instance are dropped.
pub fn value_oracle(log: &[Access]) -> Log {
    let mut out = Log::new();
    for (b, y) in log.iter().enumerate() {
        let same = |x: &Access| x.array == y.array && x.loc == y.loc;
        let last_write = log[..b].iter().rposition(|x| x.write && same(x));
        if let Some(w) = last_write {
            let x = &log[w];
            if x.instance != y.instance {
                record(&mut out, x, y, if y.write { DepKind::Waw } else { DepKind::Raw });
            }
        }
        if y.write {
            let from = last_write.map_or(0, |w| w + 1);
            for x in log[from..b].iter().filter(|x| !x.write && same(x) && x.instance != y.instance) {
                record(&mut out, x, y, DepKind::War);
            }
        }
    }
    out
}

/// Merges access-level keys into statement pairs and kinds.
pub fn by_statements(log: &Log) -> BTreeMap<(usize, usize, DepKind), Pairs> {
    let mut out: BTreeMap<_, Pairs> = BTreeMap::new();
    for ((s, _, t, _, k), p) in log {
        out.entry((*s, *t, *k)).or_default().extend(p.iter().cloned());
    }
    out.retain(|_, v| !v.is_empty());
    out
}

/// Access-level pairs of a dependence list.
pub fn enumerate_fine(deps: &[polyred::deps::Dependence], b: &Bindings) -> Log {
    let mut out = Log::new();
    for d in deps {
        let key = (d.source, d.source_access.expect("per-access"), d.target, d.target_access.expect("per-access"), d.kind);
        out.entry(key).or_default().extend(d.relation.enumerate(b).unwrap());
    }
    out.retain(|_, v| !v.is_empty());
    out
}
