use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use resonator_ffi::*;

fn last_error() -> String {
    let p = rn_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn model_equilibrium_and_hopf() {
    let p = rn_inapik_default_params();
    let mut sys = ptr::null_mut();
    unsafe {
        assert_eq!(rn_inapik_new(&p, &mut sys), RnStatus::Ok);
        assert_eq!(rn_system_dim(sys), 2);
        let mut eqs = [RnEquilibrium {
            dim: 0,
            state: [0.0; RN_MAX_DIM],
            stability: RnStability::Saddle,
            stable: false,
            residual: 0.0,
        }; 4];
        let mut n = 0;
        let st = rn_find_equilibria(sys, 12.0, -100.0, 60.0, 2000, eqs.as_mut_ptr(), eqs.len(), &mut n);
        assert_eq!(st, RnStatus::Ok);
        assert_eq!(n, 1);
        assert_eq!(eqs[0].stability, RnStability::StableFocus);
        assert!(eqs[0].stable);
        let mut d = [0.0; 2];
        assert_eq!(rn_system_derivatives(sys, eqs[0].state.as_ptr(), 2, 12.0, d.as_mut_ptr()), RnStatus::Ok);
        assert!(d[0].abs() < 1e-9 && d[1].abs() < 1e-9);
        let mut h = 0.0;
        assert_eq!(rn_hopf_locate(sys, 300.0, 400.0, 1e-6, &mut h), RnStatus::Ok);
        assert!((h - 353.55).abs() < 0.1, "{h}");
        rn_system_free(sys);
    }
}

#[test]
fn simulate_through_handles() {
    let name = CString::new("fig6d").unwrap();
    let mut sys = ptr::null_mut();
    unsafe {
        assert_eq!(rn_system_from_preset(name.as_ptr(), &mut sys), RnStatus::Ok);
        let init = [0.2336, 0.2336];
        let mut traj = ptr::null_mut();
        let st = rn_simulate_constant(sys, init.as_ptr(), 2, 70e-6, 0.01, 1e-8, 1e-5, &mut traj);
        assert_eq!(st, RnStatus::Ok);
        let len = rn_trajectory_len(traj);
        assert_eq!(len, 1001);
        let times = std::slice::from_raw_parts(rn_trajectory_times(traj), len);
        assert_eq!(times[0], 0.0);
        assert_eq!(times[len - 1], 0.01);
        let mut small = vec![0.0; 10];
        assert_eq!(rn_trajectory_component(traj, 0, small.as_mut_ptr(), small.len()), RnStatus::BufferTooSmall);
        let mut v = vec![0.0; len];
        assert_eq!(rn_trajectory_component(traj, 0, v.as_mut_ptr(), len), RnStatus::Ok);
        let hi = v.iter().cloned().fold(f64::MIN, f64::max);
        assert!(hi > 1.2, "expected a spike, max {hi}");
        rn_trajectory_free(traj);
        rn_system_free(sys);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut p = rn_inapik_default_params();
        p.c_mem = -1.0;
        let mut sys = ptr::null_mut();
        assert_eq!(rn_inapik_new(&p, &mut sys), RnStatus::InvalidParameter);
        assert!(last_error().contains("c_mem"));
        assert!(sys.is_null());

        assert_eq!(rn_system_from_config(ptr::null(), &mut sys), RnStatus::InvalidArgument);
        let cfg = CString::new("system = fet_resonator\nexperiment = simulate\n").unwrap();
        assert_eq!(rn_system_from_config(cfg.as_ptr(), &mut sys), RnStatus::InvalidConfig);
        assert!(last_error().contains("params.c1"));

        let mut d = [0.0; 2];
        let state = [0.0; 2];
        assert_eq!(rn_system_derivatives(ptr::null(), state.as_ptr(), 2, 0.0, d.as_mut_ptr()), RnStatus::InvalidArgument);
        rn_system_free(ptr::null_mut());
        rn_string_free(ptr::null_mut());
    }
}

#[test]
fn devices() {
    let n = RnMosfetParams {
        k_trans: 100e-6,
        v_t0: 0.0,
        lambda: 0.0,
        p_channel: false,
    };
    let mut i = 0.0;
    unsafe {
        assert_eq!(rn_mosfet_ids(&n, 2.0, 5.0, &mut i), RnStatus::Ok);
    }
    // Saturation with the half convention: k/2 (vgs - vt)^2.
    assert!((i - 0.5 * 100e-6 * 4.0).abs() < 1e-15);

    let m = RnMemristorParams {
        r_on: 5e3,
        r_off: 70e3,
        alpha: 5e10,
        beta_rate: 1e10,
        v_rst: 1.8,
        v_set: 0.8,
    };
    let (mut cur, mut rate) = (0.0, 0.0);
    unsafe {
        assert_eq!(rn_memristor_eval(&m, 70e3, 1.0, &mut cur, &mut rate), RnStatus::Ok);
        assert_eq!(cur, 1.0 / 70e3);
        assert!(rate < 0.0);
        assert_eq!(rn_memristor_eval(&m, 1e3, 1.0, &mut cur, &mut rate), RnStatus::InvalidParameter);
    }
}

#[test]
fn run_scenario_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CString::new(
        "system = nndr_pair\nexperiment = iv\n[params]\nfamily = jfet\n\
         [params.upper]\nbeta = 100 uA/V^2\nv_t0 = -2 V\nlambda = 0 1/V\n\
         [params.lower]\nbeta = 100 uA/V^2\nv_t0 = -2 V\nlambda = 0 1/V\n\
         [numerics]\nv_min = 0 V\nv_max = 6 V\nn_points = 61\n",
    )
    .unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut summary = ptr::null_mut();
    unsafe {
        assert_eq!(rn_run_scenario(cfg.as_ptr(), out.as_ptr(), false, &mut summary), RnStatus::Ok, "{}", last_error());
        let s = CStr::from_ptr(summary).to_str().unwrap().to_owned();
        rn_string_free(summary);
        assert!(s.contains("\"experiment\":\"iv\""), "{s}");
    }
    assert!(dir.path().join("iv.csv").exists());
}

fn target_dir() -> PathBuf {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    // <target>/<profile>/deps/c_abi-xxxx
    exe.parent()
        .and_then(|d| d.parent())
        .map(PathBuf::from)
        .unwrap_or_else(|| manifest.join("../../target/debug"))
}

#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libresonator_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C smoke program failed to compile");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke exited with {:?}", out.status.code());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("-57.09"), "{text}");
}
