use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use bqc_ffi::*;

fn profile_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn crate_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn bounds_through_the_abi() {
    let mut v = f64::NAN;
    assert_eq!(unsafe { bqc_fidelity_bound(0.5, 2, &mut v) }, BqcStatus::Ok);
    assert_eq!(v, 1.0);
    assert_eq!(unsafe { bqc_detection_bound(1.0, 2, 5, &mut v) }, BqcStatus::Ok);
    assert!((v - (1.0 - 0.75f64.powi(5))).abs() < 1e-15);
    assert_eq!(unsafe { bqc_g_from_info(0.0, 4, &mut v) }, BqcStatus::Ok);
    assert!((v - 0.25).abs() < 1e-15);
    assert_eq!(unsafe { bqc_min_entropy(0.25, &mut v) }, BqcStatus::Ok);
    assert!((v - 2.0).abs() < 1e-15);
    assert_eq!(unsafe { bqc_detection_bound(-1.0, 2, 5, &mut v) }, BqcStatus::Domain);
}

#[test]
fn attack_reports() {
    let mut r = BqcAttackReport::default();
    let status = unsafe { bqc_evaluate_attack(BqcAttackKind::PartialMeasure, 0.5, 3, &mut r) };
    assert_eq!(status, BqcStatus::Ok);
    let mut bound = 0.0;
    unsafe { bqc_fidelity_bound(r.g, 3, &mut bound) };
    assert!((r.f - bound).abs() < 1e-12);
    let status = unsafe { bqc_evaluate_attack(BqcAttackKind::EntanglingProbe, 0.0, 3, &mut r) };
    assert_eq!(status, BqcStatus::Unsupported);
    let status = unsafe { bqc_evaluate_attack(BqcAttackKind::PartialMeasure, 1.5, 3, &mut r) };
    assert_ne!(status, BqcStatus::Ok);
    assert!(!bqc_last_error().is_null());
}

#[test]
fn rvf_handles() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { bqc_rvf_new(BqcRvfKind::GraphIso, 5, 4, &mut h) }, BqcStatus::Ok);
    assert_eq!(unsafe { bqc_rvf_domain_size(h) }, 11150);
    assert_eq!(unsafe { bqc_rvf_output_size(h) }, 120);
    unsafe { bqc_rvf_free(h) };
    assert_eq!(unsafe { bqc_rvf_domain_size(ptr::null()) }, 0);
    let mut h = ptr::null_mut();
    assert_ne!(unsafe { bqc_rvf_new(BqcRvfKind::Factoring, 40, 0, &mut h) }, BqcStatus::Ok);
    assert!(h.is_null());
}

fn simulate(trials: usize, seed: u64) -> (BqcSummary, String) {
    let mut rvf = ptr::null_mut();
    assert_eq!(unsafe { bqc_rvf_new(BqcRvfKind::Toy, 3, 0, &mut rvf) }, BqcStatus::Ok);
    let cfg = BqcSimConfig {
        variant: BqcVariant::Interactive,
        attack: BqcAttackKind::PartialMeasure,
        strength: 0.4,
        ancilla_digits: 1,
        decoys: 6,
        trials,
        seed,
        announce_position: true,
        stop_on_detect: -1,
    };
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { bqc_simulate(rvf, &cfg, &mut run) }, BqcStatus::Ok);
    let mut s = BqcSummary::default();
    assert_eq!(unsafe { bqc_run_summary(run, &mut s) }, BqcStatus::Ok);
    let raw = unsafe { bqc_run_to_json(run) };
    let json = unsafe { CStr::from_ptr(raw) }.to_str().unwrap().to_owned();
    unsafe {
        bqc_string_free(raw);
        bqc_run_free(run);
        bqc_rvf_free(rvf);
    }
    (s, json)
}

#[test]
fn simulation_round_trip() {
    let (s, json) = simulate(5000, 3);
    assert_eq!((s.trials, s.n), (5000, 3));
    assert!(s.detection > 0.0 && s.bound_pass);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["config"]["stop_on_detect"], true);
    assert_eq!(v["attack"]["name"], "partial-measure");
    assert_eq!(v["stats"]["detection"]["mean"].as_f64().unwrap(), s.detection);
    assert_eq!(simulate(5000, 3).1, json);
}

#[test]
fn simulate_rejects_null_arguments() {
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { bqc_simulate(ptr::null(), ptr::null(), &mut run) }, BqcStatus::NullPointer);
    let msg = unsafe { CStr::from_ptr(bqc_last_error()) }.to_str().unwrap();
    assert!(msg.contains("null"));
    assert!(unsafe { bqc_run_to_json(ptr::null()) }.is_null());
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(crate_dir().join("include/bqc.h")).unwrap();
    for name in [
        "bqc_last_error",
        "bqc_fidelity_bound",
        "bqc_detection_bound",
        "bqc_g_from_info",
        "bqc_min_entropy",
        "bqc_rvf_new",
        "bqc_rvf_free",
        "bqc_evaluate_attack",
        "bqc_simulate",
        "bqc_run_summary",
        "bqc_run_to_json",
        "bqc_run_free",
        "bqc_string_free",
        "typedef struct BqcRun BqcRun;",
        "BQC_STATUS_NULL_POINTER",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

#[test]
fn c_program_links_against_the_static_library() {
    let lib = profile_dir().join("libbqc_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler ({cc})");
        return;
    }
    let out_dir = tempfile::tempdir().unwrap();
    let exe = out_dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(crate_dir().join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout), "ok\n");
}
