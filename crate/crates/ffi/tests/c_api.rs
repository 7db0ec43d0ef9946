use std::ffi::{c_char, CStr, CString};
use std::process::Command;
use std::ptr;

use dptr_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    unsafe {
        dptr_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn collection(rows: &[(f64, f64, usize)]) -> *mut DptrEstimates {
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(dptr_estimates_new(0.05, &mut h), DptrStatus::Ok);
        for &(tau, v, n) in rows {
            assert_eq!(dptr_estimates_push(h, tau, v, 2.0, n), DptrStatus::Ok);
        }
    }
    h
}

#[test]
fn push_and_read_back() {
    let h = collection(&[(1.0, 4.0, 16), (-0.5, 1.0, 4)]);
    let (mut len, mut tau, mut v, mut lb, mut ub) = (0usize, 0.0, 0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(dptr_estimates_len(h, &mut len), DptrStatus::Ok);
        assert_eq!(dptr_estimates_get(h, 0, &mut tau, &mut v, &mut lb, &mut ub), DptrStatus::Ok);
        assert_eq!(dptr_estimates_get(h, 2, &mut tau, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), DptrStatus::DataError);
        dptr_estimates_free(h);
    }
    assert_eq!(len, 2);
    assert_eq!((tau, v), (1.0, 4.0));
    // se = sqrt(4 / 16) = 0.5
    assert!((lb - (1.0 - 1.959963984540054 * 0.5)).abs() < 1e-9);
    assert!((ub - (1.0 + 1.959963984540054 * 0.5)).abs() < 1e-9);
}

#[test]
fn difference_in_means_matches_hand_computation() {
    let y = [3.0, 5.0, 1.0, 2.0, 4.0, 0.0];
    let d = [1u8, 1, 1, 0, 0, 0];
    let mut h = ptr::null_mut();
    let mut tau = 0.0;
    unsafe {
        assert_eq!(dptr_estimates_new(0.05, &mut h), DptrStatus::Ok);
        assert_eq!(dptr_estimates_push_dm(h, y.as_ptr(), d.as_ptr(), y.len()), DptrStatus::Ok);
        assert_eq!(dptr_estimates_get(h, 0, &mut tau, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), DptrStatus::Ok);
        dptr_estimates_free(h);
    }
    assert!((tau - (3.0 - 2.0)).abs() < 1e-12);
}

#[test]
fn iht_mask_follows_lower_bounds() {
    let rows = [(2.0, 1.0, 10), (0.1, 1.0, 10), (-1.0, 1.0, 10), (0.7, 1.0, 10)];
    let h = collection(&rows);
    let mut mask = [9u8; 4];
    unsafe {
        assert_eq!(dptr_decide(h, DptrMethod::Iht, 10.0, mask.as_mut_ptr(), 4), DptrStatus::Ok);
        dptr_estimates_free(h);
    }
    let z = 1.959963984540054;
    let expected: Vec<u8> = rows
        .iter()
        .map(|&(t, v, n)| u8::from(t - z * (v / n as f64).sqrt() > 0.0))
        .collect();
    assert_eq!(mask.to_vec(), expected);
}

#[test]
fn every_method_fills_the_mask() {
    let rows: Vec<_> = (0..20).map(|k| (k as f64 / 5.0 - 1.0, 9.0, 10)).collect();
    let h = collection(&rows);
    for m in [DptrMethod::Iht, DptrMethod::Dptr, DptrMethod::DptrP, DptrMethod::Bayes] {
        let mut mask = [7u8; 20];
        unsafe {
            assert_eq!(dptr_decide(h, m, 10.0, mask.as_mut_ptr(), 20), DptrStatus::Ok, "{m:?}");
        }
        assert!(mask.iter().all(|&b| b <= 1));
    }
    let (mut anchor, mut beta) = (0.0, 0.0);
    let mut betas = [0.0; 20];
    unsafe {
        assert_eq!(dptr_anchor(h, &mut anchor), DptrStatus::Ok);
        assert_eq!(dptr_shared_beta(h, 10.0, &mut beta), DptrStatus::Ok);
        assert_eq!(dptr_personalized_betas(h, 10.0, betas.as_mut_ptr(), 20), DptrStatus::Ok);
        dptr_estimates_free(h);
    }
    let mean = rows.iter().map(|r| r.0).sum::<f64>() / 20.0;
    assert!((anchor - mean).abs() < 1e-12);
    assert!(beta > 0.0 && betas.iter().all(|&b| b > 0.0));
}

#[test]
fn wrong_buffer_length_is_reported() {
    let h = collection(&[(1.0, 1.0, 10), (2.0, 1.0, 10)]);
    let mut mask = [0u8; 3];
    let status = unsafe { dptr_decide(h, DptrMethod::Iht, 10.0, mask.as_mut_ptr(), 3) };
    unsafe { dptr_estimates_free(h) };
    assert_eq!(status, DptrStatus::BufferLength);
    assert!(last_error().contains("expected 2"), "{}", last_error());
}

#[test]
fn null_pointers_and_bad_input() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(dptr_anchor(ptr::null(), &mut out), DptrStatus::NullPointer);
        assert_eq!(dptr_estimates_push(ptr::null_mut(), 0.0, 1.0, 2.0, 1), DptrStatus::NullPointer);
        let mut h = ptr::null_mut();
        assert_eq!(dptr_estimates_new(1.5, &mut h), DptrStatus::ConfigError);
        assert!(h.is_null());
        assert_eq!(dptr_estimates_new(0.05, ptr::null_mut()), DptrStatus::NullPointer);
        dptr_estimates_free(ptr::null_mut());
    }
    let h = collection(&[]);
    unsafe {
        assert_eq!(dptr_estimates_push(h, f64::NAN, 1.0, 2.0, 5), DptrStatus::DataError);
        assert_ne!(dptr_anchor(h, &mut out), DptrStatus::Ok);
        dptr_estimates_free(h);
    }
    assert!(!last_error().is_empty());
}

#[test]
fn oracle_beta_at_default_parameters() {
    let mut beta = 0.0;
    let status = unsafe { dptr_oracle_beta(1.0, 9.0, 9.0, 10.0, 0.05, 2.0, &mut beta) };
    assert_eq!(status, DptrStatus::Ok);
    assert!((beta - 41.1877).abs() < 1e-4, "{beta}");
}

#[test]
fn truncated_error_message() {
    unsafe { dptr_estimates_new(2.0, &mut ptr::null_mut()) };
    let mut small = [1 as c_char; 6];
    let full = unsafe { dptr_last_error(small.as_mut_ptr(), small.len()) };
    let got = unsafe { CStr::from_ptr(small.as_ptr()) }.to_str().unwrap();
    assert_eq!(got.len(), 5);
    assert!(full > 5);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(dptr_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn simulate_from_toml_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let toml = CString::new(
        r#"
        methods = ["IHT", "DPTR"]
        replications = 5
        master_seed = 3
        [scenario]
        scenario = "S1_OLS"
        k = 20
        [output]
        run_id = "ffi"
        "#,
    )
    .unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let status = unsafe { dptr_simulate_toml(toml.as_ptr(), out.as_ptr()) };
    assert_eq!(status, DptrStatus::Ok, "{}", last_error());
    for ext in ["replications.csv", "aggregate.csv", "manifest.json"] {
        assert!(dir.path().join(format!("ffi.{ext}")).is_file(), "{ext}");
    }

    let bad = CString::new("replications = 0").unwrap();
    assert_eq!(unsafe { dptr_simulate_toml(bad.as_ptr(), out.as_ptr()) }, DptrStatus::ConfigError);
    assert_eq!(unsafe { dptr_simulate_toml(ptr::null(), out.as_ptr()) }, DptrStatus::NullPointer);
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/dptr.h");
    for (cc, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(status) = Command::new(cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, header])
            .status()
        else {
            eprintln!("{cc} not available, skipping");
            continue;
        };
        assert!(status.success(), "{cc} rejected the header");
    }
}
