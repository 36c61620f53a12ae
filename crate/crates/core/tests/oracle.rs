//! Dependence analysis checked against the brute-force interpreter.

mod common;

use common::*;
use polyred::deps::{enumerate_by_kind, memory_deps, value_deps, DepKind, Granularity};
use proptest::prelude::*;

fn check(name: &str, b: &polyred::affine::Bindings) {
    let scop = kernel(name);
    let log = access_log(&scop, b);
    if b.values().all(|&v| v >= 2) {
        assert!(!value_oracle(&log).is_empty(), "{name}: no dependences at all");
    }
    let mem = memory_deps(&scop, Granularity::Access).unwrap();
    assert_eq!(enumerate_fine(&mem.fine, b), memory_oracle(&log).into_iter().filter(|(_, v)| !v.is_empty()).collect(), "{name} memory {b:?}");
    let val = value_deps(&scop, Granularity::Access, b).unwrap();
    assert_eq!(enumerate_fine(&val.fine, b), value_oracle(&log), "{name} value {b:?}");
}

#[test]
fn every_kernel_at_uniform_extents() {
    for name in KERNELS {
        let scop = kernel(name);
        for v in [0, 1, 2, 4, 6] {
            check(name, &uniform(&scop, v));
        }
    }
}

#[test]
fn per_kind_grouping_matches_the_log() {
    let scop = kernel("bicg");
    let b = bind(&[("NX", 3), ("NY", 5)]);
    let log = access_log(&scop, &b);
    for g in [Granularity::Access, Granularity::Hybrid, Granularity::Statement] {
        let mem = memory_deps(&scop, g).unwrap();
        let mut got = enumerate_by_kind(&mem.all, &b).unwrap();
        got.retain(|_, v| !v.is_empty());
        assert_eq!(got, by_statements(&memory_oracle(&log)), "{g}");
    }
}

#[test]
fn value_waw_is_the_transitive_reduction_of_memory_waw() {
    for name in KERNELS {
        let scop = kernel(name);
        let b = uniform(&scop, 3);
        let log = access_log(&scop, &b);
        let mem = by_statements(&memory_oracle(&log));
        let val = by_statements(&value_oracle(&log));
        // Group WAW pairs per written location chain: memory WAW is the
        // closure of value WAW.
        let waw = |m: &std::collections::BTreeMap<(usize, usize, DepKind), Pairs>| -> std::collections::BTreeSet<((usize, Vec<i64>), (usize, Vec<i64>))> {
            m.iter()
                .filter(|((_, _, k), _)| *k == DepKind::Waw)
                .flat_map(|((s, t, _), ps)| ps.iter().map(move |(a, c)| ((*s, a.clone()), (*t, c.clone()))))
                .collect()
        };
        let (m, v) = (waw(&mem), waw(&val));
        let mut closure = v.clone();
        loop {
            let extra: Vec<_> = closure
                .iter()
                .flat_map(|(a, c)| closure.iter().filter(move |(c2, _)| c2 == c).map(move |(_, d)| (a.clone(), d.clone())))
                .filter(|p| !closure.contains(p))
                .collect();
            if extra.is_empty() {
                break;
            }
            closure.extend(extra);
        }
        assert_eq!(closure, m, "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn random_parameters_match_the_oracle(k in 0..KERNELS.len(), vals in proptest::collection::vec(0i64..=6, 3)) {
        let name = KERNELS[k];
        let scop = kernel(name);
        let b = scop.params.iter().zip(&vals).map(|(p, v)| (p.clone(), *v)).collect();
        check(name, &b);
    }
}
