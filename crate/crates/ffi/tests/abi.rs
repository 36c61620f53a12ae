use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use polyred_ffi::*;

fn kernel(name: &str) -> String {
    format!("{}/../core/kernels/{name}.scop", env!("CARGO_MANIFEST_DIR"))
}

fn scop(name: &str) -> *mut PolyredScop {
    let src = CString::new(std::fs::read_to_string(kernel(name)).unwrap()).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { polyred_scop_parse(src.as_ptr(), false, &mut out) }, PolyredStatus::Ok);
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(polyred_last_error_message()) }.to_str().unwrap().to_string()
}

#[test]
fn bicg_round_trip() {
    let s = scop("bicg");
    let mut n = 0;
    unsafe {
        assert_eq!(polyred_scop_statement_count(s, &mut n), PolyredStatus::Ok);
        assert_eq!(n, 3);
        assert_eq!(polyred_scop_reduction_count(s, &mut n), PolyredStatus::Ok);
        assert_eq!(n, 2);

        let mut plan = ptr::null_mut();
        assert_eq!(polyred_plan_new(s, PolyredMode::Privatized, PolyredScheduleSource::Original, &mut plan), PolyredStatus::Ok);
        let mut dim = -2;
        assert_eq!(polyred_plan_parallel_dim(plan, &mut dim), PolyredStatus::Ok);
        assert_eq!(dim, 0);
        assert_eq!(polyred_plan_privatized_count(plan, &mut n), PolyredStatus::Ok);
        assert_eq!(n, 1);

        let mut code = ptr::null_mut();
        assert_eq!(polyred_plan_emit_c(plan, &mut code), PolyredStatus::Ok);
        let text = CStr::from_ptr(code).to_str().unwrap().to_string();
        polyred_string_free(code);
        let golden = std::fs::read_to_string(format!("{}/../core/tests/golden/bicg_outer.c", env!("CARGO_MANIFEST_DIR"))).unwrap();
        assert_eq!(text, golden);

        let params = CString::new("NX=3, NY=4").unwrap();
        let mut equal = false;
        assert_eq!(polyred_plan_verify(plan, params.as_ptr(), 4, 5, 0, &mut equal), PolyredStatus::Ok);
        assert!(equal);

        polyred_plan_free(plan);
        polyred_scop_free(s);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let bad = CString::new("scop x( {").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(polyred_scop_parse(bad.as_ptr(), false, &mut out), PolyredStatus::ParseError);
        assert!(out.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(polyred_scop_parse(ptr::null(), false, &mut out), PolyredStatus::NullArgument);
        assert!(last_error().contains("source"));

        let invalid = [0xffu8, 0];
        assert_eq!(polyred_scop_parse(invalid.as_ptr().cast(), false, &mut out), PolyredStatus::InvalidUtf8);

        let mut n = 0;
        assert_eq!(polyred_scop_reduction_count(ptr::null(), &mut n), PolyredStatus::NullArgument);

        // Incomplete or malformed parameter bindings.
        let s = scop("gemm");
        let mut plan = ptr::null_mut();
        assert_eq!(polyred_plan_new(s, PolyredMode::Strict, PolyredScheduleSource::Original, &mut plan), PolyredStatus::Ok);
        let params = CString::new("NI=2").unwrap();
        let mut equal = false;
        assert_eq!(polyred_plan_verify(plan, params.as_ptr(), 2, 1, 0, &mut equal), PolyredStatus::InvalidArgument);
        assert!(last_error().contains("missing"));
        let params = CString::new("NI=2,NJ=x").unwrap();
        assert_eq!(polyred_plan_verify(plan, params.as_ptr(), 2, 1, 0, &mut equal), PolyredStatus::InvalidArgument);
        polyred_plan_free(plan);
        polyred_scop_free(s);

        polyred_scop_free(ptr::null_mut());
        polyred_plan_free(ptr::null_mut());
        polyred_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(format!("{}/include/polyred.h", env!("CARGO_MANIFEST_DIR"))).unwrap();
    let src = std::fs::read_to_string(format!("{}/src/lib.rs", env!("CARGO_MANIFEST_DIR"))).unwrap();
    let exports: Vec<&str> = src.lines().filter_map(|l| l.split("extern \"C\" fn ").nth(1)).map(|r| r.split('(').next().unwrap()).collect();
    assert!(exports.len() >= 10);
    for f in exports {
        assert!(header.contains(&format!("{f}(")), "{f} missing from the header");
    }
    for t in ["typedef struct PolyredScop PolyredScop;", "typedef struct PolyredPlan PolyredPlan;", "POLYRED_STATUS_OK = 0"] {
        assert!(header.contains(t), "{t}");
    }
}

/// Builds `tests/c/smoke.c` against the static library and runs it.
#[test]
fn c_program_links_and_runs() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // The test binary lives in target/<profile>/deps, next to the static library.
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let target = deps.parent().unwrap().to_path_buf();
    let lib = [deps.join("libpolyred_ffi.a"), target.join("libpolyred_ffi.a")].into_iter().find(|p| p.exists()).expect("libpolyred_ffi.a not built");
    let exe = target.join("polyred_ffi_smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(dir.join("include"))
        .arg(dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap_or_else(|e| panic!("running {cc}: {e}"));
    assert!(status.success());
    let out = Command::new(&exe).arg(kernel("bicg")).arg("NX=4,NY=3").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "reductions=2 dim=0 pragma=1 equal=1 parse_rejected=1");
}
