use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use hyperepp_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(he_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn exhaustive_run_through_handles() {
    let mut rep = ptr::null_mut();
    unsafe {
        assert_eq!(he_run_epp(0.4, 0.3, 0.2, 0.1, 0.0, 0.0, 0, 0, &mut rep), HeStatus::Ok);
        let mut n = 0usize;
        assert_eq!(he_report_branch_count(rep, &mut n), HeStatus::Ok);
        assert!(n > 0);
        let mut total = 0.0;
        assert_eq!(he_report_total_probability(rep, &mut total), HeStatus::Ok);
        assert!((total - 1.0).abs() < 1e-10);
        let (mut lo, mut hi) = (0.0, 0.0);
        assert_eq!(he_report_fidelity_range(rep, &mut lo, &mut hi), HeStatus::Ok);
        assert!((lo - 1.0).abs() < 1e-10 && (hi - 1.0).abs() < 1e-10);
        let mut json = ptr::null_mut();
        assert_eq!(he_report_to_json(rep, &mut json), HeStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["branches"].as_array().unwrap().len(), n);
        he_string_free(json);
        he_report_free(rep);
    }
}

#[test]
fn sampled_runs_repeat() {
    let json = |seed| unsafe {
        let mut rep = ptr::null_mut();
        assert_eq!(he_run_epp(0.4, 0.3, 0.2, 0.1, 0.2, 0.0, seed, 500, &mut rep), HeStatus::Ok);
        let mut s = ptr::null_mut();
        he_report_to_json(rep, &mut s);
        let out = CStr::from_ptr(s).to_string_lossy().into_owned();
        he_string_free(s);
        he_report_free(rep);
        out
    };
    assert_eq!(json(3), json(3));
}

#[test]
fn errors_map_to_codes() {
    let mut rep = ptr::null_mut();
    unsafe {
        assert_eq!(he_run_epp(0.9, 0.9, 0.0, 0.0, 0.0, 0.0, 0, 0, &mut rep), HeStatus::InvalidArgument);
        assert!(rep.is_null());
        assert!(last_error().contains("sum"));
        assert_eq!(he_run_epp(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0, 0, ptr::null_mut()), HeStatus::NullPointer);
        let (mut f, mut p) = (0.0, 0.0);
        assert_eq!(he_pan_purify_round(2.0, &mut f, &mut p), HeStatus::InvalidArgument);
        assert_eq!(he_pan_purify_round(0.75, &mut f, &mut p), HeStatus::Ok);
        assert!((f - 0.9).abs() < 1e-12 && (p - 0.625).abs() < 1e-12);
        assert!(last_error().is_empty());
        let re = [0.8, 0.6, 0.0, 0.0];
        let im = [0.0; 4];
        let mut label = HeBell::PhiPlus;
        assert_eq!(he_nbsa_classify(re.as_ptr(), im.as_ptr(), &mut label), HeStatus::ClassificationUndefined);
        he_report_free(ptr::null_mut());
        he_state_free(ptr::null_mut());
        he_string_free(ptr::null_mut());
    }
}

#[test]
fn bell_classification_and_formula() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut label = HeBell::PhiPlus;
    unsafe {
        let (re, im) = ([0.0, s, -s, 0.0], [0.0; 4]);
        assert_eq!(he_nbsa_classify(re.as_ptr(), im.as_ptr(), &mut label), HeStatus::Ok);
        assert_eq!(label, HeBell::PsiMinus);
        let mut f = 0.0;
        assert_eq!(he_bitflip_fidelity_formula(0.4, 0.3, 0.2, 0.1, 0.7, &mut f), HeStatus::Ok);
        assert!((f - (1.0 + 0.2 * 0.7f64.cos()) / 2.0).abs() < 1e-15);
    }
}

#[test]
fn state_round_trip_and_size_check() {
    unsafe {
        let mut st = ptr::null_mut();
        assert_eq!(he_source_state(&mut st), HeStatus::Ok);
        let mut f = 0.0;
        assert_eq!(he_state_polarization_fidelity(st, HeBell::PhiPlus, &mut f), HeStatus::Ok);
        assert!((f - 1.0).abs() < 1e-14);
        let mut json = ptr::null_mut();
        assert_eq!(he_state_to_json(st, &mut json), HeStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(he_state_from_json(json, &mut back), HeStatus::Ok);
        he_string_free(json);
        he_state_free(back);
        he_state_free(st);

        let small = CString::new(r#"{"basis":"v1","re":[[1,0],[0,0]],"im":[[0,0],[0,0]]}"#).unwrap();
        let mut bad = ptr::null_mut();
        assert_eq!(he_state_from_json(small.as_ptr(), &mut bad), HeStatus::InvalidState);
        assert!(bad.is_null());
        assert_eq!(he_state_from_json(ptr::null(), &mut bad), HeStatus::NullPointer);
    }
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hyperepp.h")).unwrap();
    assert!(header.starts_with("#ifndef HYPEREPP_H"));
    for name in [
        "he_run_epp",
        "he_report_free",
        "he_state_from_json",
        "he_nbsa_classify",
        "he_last_error",
        "typedef struct HeReport HeReport",
        "HE_STATUS_PANIC = 8",
    ] {
        assert!(header.contains(name), "{name} missing");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "hyperepp.h"

int main(void) {
    HeReport *r = NULL;
    if (he_run_epp(0.25, 0.25, 0.25, 0.25, 0.0, 0.0, 0, 0, &r) != HE_STATUS_OK) return 1;
    double lo = 0.0, hi = 0.0;
    if (he_report_fidelity_range(r, &lo, &hi) != HE_STATUS_OK) return 2;
    he_report_free(r);
    if (fabs(lo - 1.0) > 1e-10) return 3;
    if (he_run_epp(2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0, 0, &r) != HE_STATUS_INVALID_ARGUMENT) return 4;
    if (he_last_error()[0] == '\0') return 5;
    printf("ok\n");
    return 0;
}
"#;

#[test]
fn c_program_links_against_the_library() {
    let lib_dir: PathBuf = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let so = lib_dir.join("libhyperepp_ffi.so");
    assert!(so.exists(), "{} not built", so.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let exe = dir.path().join("smoke");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg("-L")
        .arg(&lib_dir)
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .args(["-lhyperepp_ffi", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler is available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "ok\n");
}
