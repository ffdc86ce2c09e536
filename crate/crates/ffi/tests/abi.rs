use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use arearemap_ffi::*;

const N: usize = 17;

fn blob() -> Vec<f64> {
    let h = 1.0 / (N - 1) as f64;
    let mut v = Vec::with_capacity(N * N);
    for j in 0..N {
        for i in 0..N {
            let (x, y) = (i as f64 * h - 0.5, j as f64 * h - 0.5);
            let r2 = x * x + y * y;
            let on_edge = i == 0 || j == 0 || i == N - 1 || j == N - 1;
            v.push(if on_edge { 0.0 } else { (-20.0 * r2).exp() });
        }
    }
    v
}

fn new_field(values: &[f64]) -> *mut ArField {
    let mut f = ptr::null_mut();
    assert_eq!(
        unsafe { ar_field_new(N, N, values.as_ptr(), &mut f) },
        ArStatus::Ok
    );
    f
}

fn values(f: *const ArField) -> Vec<f64> {
    let mut out = vec![0.0; N * N];
    assert_eq!(
        unsafe { ar_field_values(f, out.as_mut_ptr(), out.len()) },
        ArStatus::Ok
    );
    out
}

fn last_error() -> String {
    let p = ar_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn field_round_trip_and_dims() {
    let v = blob();
    let f = new_field(&v);
    let (mut nx, mut ny) = (0, 0);
    assert_eq!(unsafe { ar_field_dims(f, &mut nx, &mut ny) }, ArStatus::Ok);
    assert_eq!((nx, ny), (N, N));
    assert_eq!(values(f), v);
    let mut short = vec![0.0; 3];
    assert_eq!(
        unsafe { ar_field_values(f, short.as_mut_ptr(), 3) },
        ArStatus::Input
    );
    assert!(last_error().contains("3"));
    unsafe { ar_field_free(f) };
}

#[test]
fn errors_map_to_status_codes() {
    let v = blob();
    let mut f = ptr::null_mut();
    assert_eq!(
        unsafe { ar_field_new(2, 2, v.as_ptr(), &mut f) },
        ArStatus::Config
    );
    assert!(f.is_null());
    assert!(last_error().contains("3x3"));
    assert_eq!(
        unsafe { ar_field_new(N, N, ptr::null(), &mut f) },
        ArStatus::NullPointer
    );
    assert_eq!(
        unsafe { ar_poisson(ptr::null(), &mut f) },
        ArStatus::NullPointer
    );

    let field = new_field(&v);
    let mut nan = v.clone();
    nan[N + 1] = f64::NAN;
    assert_ne!(
        unsafe { ar_field_new(N, N, nan.as_ptr(), &mut f) },
        ArStatus::Ok
    );
    let mut area = ptr::null_mut();
    assert_eq!(
        unsafe { ar_area_tabulate(field, 2, false, &mut area) },
        ArStatus::Config
    );
    assert!(area.is_null());

    // a successful call clears the message
    let mut n = 0;
    assert_eq!(
        unsafe { ar_area_tabulate(field, 64, false, &mut area) },
        ArStatus::Ok
    );
    assert!(ar_last_error().is_null());
    assert_eq!(unsafe { ar_area_len(area, &mut n) }, ArStatus::Ok);
    assert!(n >= 2);
    unsafe {
        ar_area_free(area);
        ar_field_free(field);
        ar_field_free(ptr::null_mut());
    }
}

#[test]
fn jacobian_of_field_with_itself_vanishes() {
    let f = new_field(&blob());
    for kind in [ArJacobian::Arakawa, ArJacobian::Central] {
        let mut j = ptr::null_mut();
        assert_eq!(unsafe { ar_jacobian(kind, f, f, &mut j) }, ArStatus::Ok);
        assert!(values(j).iter().all(|x| x.abs() < 1e-12));
        unsafe { ar_field_free(j) };
    }
    unsafe { ar_field_free(f) };
}

#[test]
fn poisson_matches_core_solver() {
    let v = blob();
    let f = new_field(&v);
    let mut psi = ptr::null_mut();
    assert_eq!(unsafe { ar_poisson(f, &mut psi) }, ArStatus::Ok);
    let grid = arearemap::Grid::new(N, N).unwrap();
    let omega = arearemap::ScalarField::from_values(grid, v).unwrap();
    let expected = arearemap::schemes::solve_poisson(&omega).unwrap();
    assert_eq!(values(psi), expected.values());
    unsafe {
        ar_field_free(psi);
        ar_field_free(f);
    }
}

#[test]
fn area_evaluate_and_invert_agree() {
    let f = new_field(&blob());
    let mut area = ptr::null_mut();
    assert_eq!(
        unsafe { ar_area_tabulate(f, 200, true, &mut area) },
        ArStatus::Ok
    );
    let (mut at_low, mut at_high) = (0.0, 0.0);
    unsafe {
        ar_area_evaluate(area, -1.0, &mut at_low);
        ar_area_evaluate(area, 2.0, &mut at_high);
    }
    assert_eq!((at_low, at_high), (1.0, 0.0));
    for target in [0.1, 0.3, 0.5] {
        let (mut c, mut a) = (0.0, 0.0);
        assert_eq!(
            unsafe { ar_area_invert(area, target, &mut c) },
            ArStatus::Ok
        );
        assert_eq!(unsafe { ar_area_evaluate(area, c, &mut a) }, ArStatus::Ok);
        assert!((a - target).abs() < 1e-6, "{target} -> {c} -> {a}");
    }
    unsafe {
        ar_area_free(area);
        ar_field_free(f);
    }
}

#[test]
fn projections_restore_initial_values() {
    let v0 = blob();
    let initial = new_field(&v0);
    let mut table = ptr::null_mut();
    let mut area = ptr::null_mut();
    unsafe {
        assert_eq!(ar_rank_table_new(initial, &mut table), ArStatus::Ok);
        assert_eq!(
            ar_area_tabulate(initial, 200, false, &mut area),
            ArStatus::Ok
        );
    }
    // a monotone distortion keeps the ordering, so rank projection undoes it
    let distorted: Vec<f64> = v0.iter().map(|x| x * x).collect();
    let moved = new_field(&distorted);
    let mut ranked = ptr::null_mut();
    assert_eq!(
        unsafe { ar_rank_project(moved, table, &mut ranked) },
        ArStatus::Ok
    );
    assert_eq!(values(ranked), v0);

    let mut relabelled = ptr::null_mut();
    assert_eq!(
        unsafe { ar_relabel(initial, area, 200, false, &mut relabelled) },
        ArStatus::Ok
    );
    let out = values(relabelled);
    for (a, b) in out.iter().zip(&v0) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
    unsafe {
        ar_field_free(relabelled);
        ar_field_free(ranked);
        ar_field_free(moved);
        ar_area_free(area);
        ar_rank_table_free(table);
        ar_field_free(initial);
    }
}

#[test]
fn run_experiment_writes_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let text = arearemap::experiment::preset_text("paper-fig3d")
        .unwrap()
        .replace("steps = 400", "steps = 20");
    let config = CString::new(text).unwrap();
    let dir = CString::new(tmp.path().to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { ar_run_experiment(config.as_ptr(), dir.as_ptr()) },
        ArStatus::Ok
    );
    assert!(tmp.path().join("summary.txt").exists());

    let bad = CString::new("name = \"x\"\n[scheme]\ndt = -1.0\n").unwrap();
    assert_eq!(
        unsafe { ar_run_experiment(bad.as_ptr(), dir.as_ptr()) },
        ArStatus::Config
    );
    assert!(last_error().contains("dt"));
    assert_eq!(
        unsafe { ar_run_experiment(ptr::null(), dir.as_ptr()) },
        ArStatus::NullPointer
    );
}

fn staticlib() -> PathBuf {
    // target/<profile>/deps/<test binary> -> target/<profile>/libarearemap_ffi.a
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    profile_dir.join("libarearemap_ffi.a")
}

#[test]
fn c_program_links_against_header_and_staticlib() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = staticlib();
    assert!(
        lib.exists(),
        "static library not built at {}",
        lib.display()
    );
    let exe = Path::new(env!("CARGO_TARGET_TMPDIR")).join("arearemap_smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
