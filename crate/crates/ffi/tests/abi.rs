use std::ffi::CStr;
use std::ptr;

use chargekit_ffi::*;

const SQUARE: [f64; 12] = [1.0, 1.0, 0.0, -1.0, 1.0, 0.0, -1.0, -1.0, 0.0, 1.0, -1.0, 0.0];
const ALTERNATING: [f64; 4] = [1.0, -1.0, 1.0, -1.0];

fn square() -> *mut CkConfig {
    let mut cfg = ptr::null_mut();
    let s = unsafe { ck_config_new(3, 4, SQUARE.as_ptr(), ALTERNATING.as_ptr(), &mut cfg) };
    assert_eq!(s, CkStatus::Ok);
    assert!(!cfg.is_null());
    cfg
}

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    let n = unsafe { ck_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
    assert_eq!(n, s.len());
    s
}

#[test]
fn handle_round_trip() {
    let cfg = square();
    unsafe {
        assert_eq!(ck_config_len(cfg), 4);
        assert_eq!(ck_config_dimension(cfg), 3);
        let mut pos = [0.0; 12];
        let mut q = [0.0; 4];
        assert_eq!(ck_config_get(cfg, pos.as_mut_ptr(), q.as_mut_ptr()), CkStatus::Ok);
        assert_eq!(pos, SQUARE);
        assert_eq!(q, ALTERNATING);
        ck_config_free(cfg);
        ck_config_free(ptr::null_mut());
        assert_eq!(ck_config_len(ptr::null()), 0);
    }
}

#[test]
fn evaluations_match_closed_forms() {
    let cfg = square();
    unsafe {
        let x = [0.0, 0.0, 2.0];
        let mut u = f64::NAN;
        assert_eq!(ck_potential(cfg, false, x.as_ptr(), &mut u), CkStatus::Ok);
        // Equal distances to all four charges with zero net charge.
        assert!(u.abs() < 1e-15);

        let mut h = [0.0; 9];
        assert_eq!(ck_hessian(cfg, false, x.as_ptr(), h.as_mut_ptr()), CkStatus::Ok);
        assert!((h[0] + h[4] + h[8]).abs() < 1e-14);

        // Ordered pairs: 4 sides (q q = -1, r = 2) and 2 diagonals (+1, r = 2 sqrt 2), each twice.
        let mut w = 0.0;
        assert_eq!(ck_energy(cfg, CkLaw::Newtonian, 0.0, &mut w), CkStatus::Ok);
        let expect = 2.0 * (-4.0 / 2.0 + 2.0 / (2.0 * 2f64.sqrt()));
        assert!((w - expect).abs() < 1e-14, "{w} vs {expect}");

        let mut o = CkOnsager::default();
        assert_eq!(ck_onsager(cfg, &mut o), CkStatus::Ok);
        assert!((o.lhs - 2.0).abs() < 1e-14);
        assert!((o.margin - 0.5f64.sqrt()).abs() < 1e-12);

        let mut r = f64::NAN;
        assert_eq!(ck_equilibrium_residual(cfg, CkLaw::Riesz, 1.0, &mut r), CkStatus::Ok);
        assert!(r > 0.1);
        ck_config_free(cfg);
    }
}

#[test]
fn gon_is_an_equilibrium() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(ck_construct_gon(6, 1.0, &mut cfg), CkStatus::Ok);
        assert_eq!(ck_config_dimension(cfg), 2);
        let mut r = f64::NAN;
        assert_eq!(ck_equilibrium_residual(cfg, CkLaw::Log, 0.0, &mut r), CkStatus::Ok);
        assert!(r < 1e-12);
        let mut q = [0.0; 6];
        assert_eq!(ck_config_get(cfg, ptr::null_mut(), q.as_mut_ptr()), CkStatus::Ok);
        assert!(ck_abanov_residual(q.as_ptr(), q.len()) < 1e-12);
        ck_config_free(cfg);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let dup = [0.0; 6];
        let q = [1.0, 2.0];
        let mut cfg = ptr::null_mut();
        assert_eq!(ck_config_new(3, 2, dup.as_ptr(), q.as_ptr(), &mut cfg), CkStatus::DuplicatePosition);
        assert!(cfg.is_null());
        assert!(!last_error().is_empty());

        let zero = [1.0, 0.0];
        let pos = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        assert_eq!(ck_config_new(3, 2, pos.as_ptr(), zero.as_ptr(), &mut cfg), CkStatus::ZeroCharge);

        assert_eq!(ck_config_new(3, 2, ptr::null(), q.as_ptr(), &mut cfg), CkStatus::NullPointer);
        assert!(last_error().contains("positions"));

        let sq = square();
        let on = [1.0, 1.0, 0.0];
        let mut u = 0.0;
        assert_eq!(ck_potential(sq, false, on.as_ptr(), &mut u), CkStatus::EvaluationOnCharge);
        let mut w = 0.0;
        assert_eq!(ck_energy(sq, CkLaw::Riesz, -1.0, &mut w), CkStatus::InvalidInput);

        // A success clears the previous message.
        assert_eq!(ck_energy(sq, CkLaw::Log, 0.0, &mut w), CkStatus::Ok);
        assert_eq!(last_error(), "");
        ck_config_free(sq);

        let mut out = ptr::null_mut();
        let two = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let like = [1.0, 1.0];
        assert_eq!(ck_config_new(3, 2, two.as_ptr(), like.as_ptr(), &mut cfg), CkStatus::Ok);
        assert_eq!(ck_equilibrium_solve(cfg, CkLaw::Newtonian, 0.0, &mut out), CkStatus::NoConvergence);
        assert!(out.is_null());
        ck_config_free(cfg);
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(ck_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles the C smoke program against the generated header and the
/// static library when a C compiler is on the path.
#[test]
fn c_program_links_against_header() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib_dir = root.join("../../target/debug");
    let lib = lib_dir.join("libchargekit_ffi.a");
    if !lib.exists() || std::process::Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C toolchain or static library");
        return;
    }
    let dir = tempfile_dir();
    let exe = dir.join("smoke");
    let status = std::process::Command::new("cc")
        .arg(root.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = std::process::Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("chargekit-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
