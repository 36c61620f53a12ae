//! The bundled kernels against their `.expected.json` sidecars.

mod common;

use std::collections::BTreeMap;

use common::*;
use polyred::deps::{analyze, Granularity};
use polyred::detect::detect;
use polyred::frontend::{parse, print_scop};
use polyred::schedule::{classify_dims, LegalityMode};
use serde::Deserialize;

#[derive(Deserialize)]
struct Expected {
    reductions: usize,
    reductions_fused: usize,
    classification: BTreeMap<String, BTreeMap<String, Vec<String>>>,
}

fn expected(name: &str) -> Expected {
    let path = format!("{}/kernels/{name}.expected.json", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn mode(name: &str) -> LegalityMode {
    match name {
        "strict" => LegalityMode::Strict,
        "relaxed" => LegalityMode::Relaxed,
        "privatized" => LegalityMode::Privatized,
        other => panic!("unknown mode {other}"),
    }
}

#[test]
fn reduction_counts() {
    for name in KERNELS {
        let want = expected(name);
        assert_eq!(detect(&kernel(name)).unwrap().len(), want.reductions, "{name}");
        assert_eq!(detect(&fused(name)).unwrap().len(), want.reductions_fused, "{name} fused");
    }
}

#[test]
fn original_schedule_classification() {
    for name in KERNELS {
        let scop = kernel(name);
        let deps = analyze(&scop, Granularity::Hybrid).unwrap();
        let want = expected(name);
        assert_eq!(want.classification.len(), 3, "{name}");
        for (m, stmts) in &want.classification {
            let c = classify_dims(&scop, &scop.original_schedule(), &deps, mode(m)).unwrap();
            let got: BTreeMap<String, Vec<String>> =
                scop.statements.iter().enumerate().map(|(k, s)| (s.name.clone(), c.loops(k).iter().map(|x| x.to_string()).collect())).collect();
            assert_eq!(&got, stmts, "{name} {m}");
        }
    }
}

#[test]
fn kernels_survive_a_print_parse_round_trip() {
    for name in KERNELS {
        for fuse in [false, true] {
            let scop = parse(&kernel_src(name), fuse).unwrap();
            let again = parse(&print_scop(&scop), fuse).unwrap();
            assert_eq!(print_scop(&again), print_scop(&scop), "{name}");
            assert_eq!(detect(&again).unwrap(), detect(&scop).unwrap(), "{name}");
        }
    }
}
