use std::ffi::{CStr, CString};
use std::fs;
use std::ptr;

use adiabat_ffi::*;

fn last_error() -> String {
    let p = adiabat_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn dimer(u: f64) -> *mut AdiabatChain {
    let mut chain = ptr::null_mut();
    let s = unsafe { adiabat_chain_new(2, u, 0.5, AdiabatConvention::Symmetric, &mut chain) };
    assert_eq!(s, AdiabatStatus::Ok);
    chain
}

/// Interleaved (re, im) row-major diagonal matrix.
fn diagonal(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let mut m = vec![0.0; 2 * n * n];
    for (i, x) in p.iter().enumerate() {
        m[2 * (i * n + i)] = *x;
    }
    m
}

#[test]
fn chain_lifecycle_and_spectrum() {
    let chain = dimer(4.0);
    assert_eq!(unsafe { adiabat_chain_dim(chain) }, 4);
    let mut e = [0.0; 4];
    let status = unsafe { adiabat_chain_spectrum(chain, 0.25, e.as_mut_ptr(), 4) };
    assert_eq!(status, AdiabatStatus::Ok);
    assert!(e.windows(2).all(|w| w[0] <= w[1]));
    // Potentials cancel on the trace and on the decoupled triplet.
    assert!((e.iter().sum::<f64>() - 8.0).abs() < 1e-12, "{e:?}");
    assert!(e.iter().any(|x| x.abs() < 1e-12), "{e:?}");

    let mut five = [0.0; 5];
    let status = unsafe { adiabat_chain_spectrum(chain, 0.0, five.as_mut_ptr(), 5) };
    assert_eq!(status, AdiabatStatus::Domain);
    assert!(last_error().contains("dimension 4"));
    unsafe { adiabat_chain_free(chain) };
    unsafe { adiabat_chain_free(ptr::null_mut()) };
}

#[test]
fn invalid_parameters_map_to_status_codes() {
    let mut chain = ptr::null_mut();
    let s = unsafe { adiabat_chain_new(3, 1.0, 1.0, AdiabatConvention::Symmetric, &mut chain) };
    assert_eq!(s, AdiabatStatus::Domain);
    assert!(chain.is_null());
    assert!(last_error().contains("even"));

    let s = unsafe { adiabat_chain_new(2, 1.0, 1.0, AdiabatConvention::Symmetric, ptr::null_mut()) };
    assert_eq!(s, AdiabatStatus::NullPointer);

    let mut x = 0.0;
    let s = unsafe { adiabat_chain_gradient(ptr::null(), 0.0, &mut x) };
    assert_eq!(s, AdiabatStatus::NullPointer);
    assert!(last_error().contains("chain"));
    assert_eq!(unsafe { adiabat_chain_dim(ptr::null()) }, 0);
}

#[test]
fn gradient_epsilon_and_diagnostics() {
    let chain = dimer(5.0);
    let mut m = 0.0;
    assert_eq!(unsafe { adiabat_chain_gradient(chain, 0.0, &mut m) }, AdiabatStatus::Ok);
    assert!(m > 0.0 && m.is_finite());

    let mut eps = -1.0;
    assert_eq!(unsafe { adiabat_chain_epsilon(chain, 0.1, 2.5, &mut eps) }, AdiabatStatus::Ok);
    assert!(eps >= 0.0);

    let n = 11;
    let (mut t, mut db, mut e) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let s = unsafe {
        adiabat_chain_diagnose(
            chain,
            2.5,
            m,
            n,
            t.as_mut_ptr(),
            db.as_mut_ptr(),
            ptr::null_mut(),
            e.as_mut_ptr(),
        )
    };
    assert_eq!(s, AdiabatStatus::Ok);
    assert_eq!(t[0], 0.0);
    assert!((t[n - 1] - 1.0).abs() < 1e-12);
    assert!(db[0] < 1e-10);
    assert!(db.iter().all(|x| (0.0..=2f64.sqrt() + 1e-12).contains(x)));
    unsafe { adiabat_chain_free(chain) };
}

#[test]
fn thresholds_follow_the_gradient() {
    let mut th = AdiabatThresholds::default();
    assert_eq!(unsafe { adiabat_thresholds(0.2, &mut th) }, AdiabatStatus::Ok);
    assert_eq!(th.gradient, 0.2);
    assert!(th.delta_rho > 0.0 && th.delta_trace > 0.0 && th.delta_n > 0.0);
    assert_ne!(unsafe { adiabat_thresholds(-1.0, &mut th) }, AdiabatStatus::Ok);
}

#[test]
fn metrics_on_raw_arrays() {
    let a = diagonal(&[1.0, 0.0]);
    let b = diagonal(&[0.0, 1.0]);
    let (mut db, mut dt) = (0.0, 0.0);
    assert_eq!(unsafe { adiabat_bures_distance(a.as_ptr(), b.as_ptr(), 2, &mut db) }, AdiabatStatus::Ok);
    assert_eq!(unsafe { adiabat_trace_distance(a.as_ptr(), b.as_ptr(), 2, &mut dt) }, AdiabatStatus::Ok);
    assert!((db - 2f64.sqrt()).abs() < 1e-12);
    assert!((dt - 1.0).abs() < 1e-12);

    // Off-diagonal imaginary parts: |+i><+i| against |-i><-i|.
    let plus = [0.5, 0.0, 0.0, -0.5, 0.0, 0.5, 0.5, 0.0];
    let minus = [0.5, 0.0, 0.0, 0.5, 0.0, -0.5, 0.5, 0.0];
    unsafe { adiabat_trace_distance(plus.as_ptr(), minus.as_ptr(), 2, &mut dt) };
    assert!((dt - 1.0).abs() < 1e-12);

    let bad = diagonal(&[2.0, 0.0]);
    let s = unsafe { adiabat_bures_distance(a.as_ptr(), bad.as_ptr(), 2, &mut db) };
    assert_eq!(s, AdiabatStatus::Domain);

    let (n1, n2) = ([1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]);
    let mut dn = 0.0;
    let s = unsafe { adiabat_density_distance(n1.as_ptr(), n2.as_ptr(), 4, 2, &mut dn) };
    assert_eq!(s, AdiabatStatus::Ok);
    assert!((dn - 2.0).abs() < 1e-12);
    let s = unsafe { adiabat_density_distance(n1.as_ptr(), n2.as_ptr(), 4, 3, &mut dn) };
    assert_eq!(s, AdiabatStatus::Domain);
}

#[test]
fn scenario_file_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bundle");
    let cfg = tmp.path().join("s.toml");
    fs::write(
        &cfg,
        format!(
            "n_sites = 2\ntau_times_j = 0.5\noutput_points = 5\noutput_dir = {:?}\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let path = CString::new(cfg.to_str().unwrap()).unwrap();
    let mut m = 0.0;
    assert_eq!(unsafe { adiabat_run_scenario(path.as_ptr(), &mut m) }, AdiabatStatus::Ok);
    assert!(m > 0.0);
    assert!(out.join("diagnostics.csv").exists());

    let missing = CString::new(tmp.path().join("nope.toml").to_str().unwrap()).unwrap();
    let s = unsafe { adiabat_run_scenario(missing.as_ptr(), ptr::null_mut()) };
    assert_eq!(s, AdiabatStatus::Io);

    fs::write(&cfg, "n_sites = \"two\"\n").unwrap();
    assert_eq!(unsafe { adiabat_run_scenario(path.as_ptr(), ptr::null_mut()) }, AdiabatStatus::Config);
    assert_eq!(unsafe { adiabat_run_scenario(ptr::null(), ptr::null_mut()) }, AdiabatStatus::NullPointer);
}

#[test]
fn header_declares_every_export() {
    let header = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/adiabat.h")).unwrap();
    for name in [
        "adiabat_last_error",
        "adiabat_chain_new",
        "adiabat_chain_free",
        "adiabat_chain_dim",
        "adiabat_chain_spectrum",
        "adiabat_chain_gradient",
        "adiabat_chain_epsilon",
        "adiabat_chain_diagnose",
        "adiabat_thresholds",
        "adiabat_bures_distance",
        "adiabat_trace_distance",
        "adiabat_density_distance",
        "adiabat_run_scenario",
        "ADIABAT_STATUS_NULL_POINTER",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
