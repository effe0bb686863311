use std::ffi::{CStr, CString};
use std::ptr;

use goalgan_ffi::*;

const TINY: &str = r#"
method = "goalgan"
iterations = 2
seed = 3

[env]
kind = "point-mass"
dim = 2
horizon = 40

[rl]
inner_iterations = 1
episodes_per_iteration = 8

[gan]
generator_hidden = [8, 8]
discriminator_hidden = [8, 8]
train_iterations = 3
init_iterations = 3
init_episodes = 4

[curriculum]
gan_goals = 10
replay_goals = 5

[eval]
every = 1
grid_resolution = 1.0
"#;

fn last_error() -> String {
    let p = gg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn tiny_config() -> *mut GgConfig {
    let text = CString::new(TINY).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { gg_config_from_toml(text.as_ptr(), &mut cfg) }, GgStatus::Ok);
    cfg
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(gg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_handles_are_reported() {
    let mut n = 0usize;
    assert_eq!(unsafe { gg_result_iterations(ptr::null(), &mut n) }, GgStatus::NullPointer);
    assert!(last_error().contains("result"));
    let cfg = gg_config_default();
    assert_eq!(unsafe { gg_config_set_method(cfg, ptr::null()) }, GgStatus::NullPointer);
    unsafe {
        gg_config_free(cfg);
        gg_config_free(ptr::null_mut());
        gg_result_free(ptr::null_mut());
        gg_policy_free(ptr::null_mut());
    }
}

#[test]
fn config_errors_carry_the_key() {
    let text = CString::new("[thresholds]\nrmax_typo = 0.9\n").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { gg_config_from_toml(text.as_ptr(), &mut cfg) }, GgStatus::Config);
    assert!(cfg.is_null());
    assert!(last_error().contains("rmax_typo"), "{}", last_error());

    let cfg = gg_config_default();
    let bad = CString::new("not-a-method").unwrap();
    assert_eq!(unsafe { gg_config_set_method(cfg, bad.as_ptr()) }, GgStatus::Config);
    let maze = CString::new("multipath-maze").unwrap();
    assert_eq!(unsafe { gg_config_set_env(cfg, maze.as_ptr(), 3) }, GgStatus::Ok);
    assert_eq!(unsafe { gg_config_validate(cfg) }, GgStatus::Config);
    unsafe { gg_config_free(cfg) };
}

#[test]
fn invalid_utf8_is_rejected() {
    let cfg = gg_config_default();
    let bytes = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { gg_config_set_method(cfg, bytes.as_ptr().cast()) },
        GgStatus::InvalidUtf8
    );
    unsafe { gg_config_free(cfg) };
}

#[test]
fn run_write_and_reload_policy() {
    let cfg = tiny_config();
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { gg_run(cfg, &mut res) }, GgStatus::Ok, "{}", last_error());
    let mut n = 0usize;
    assert_eq!(unsafe { gg_result_iterations(res, &mut n) }, GgStatus::Ok);
    assert_eq!(n, 2);
    let mut c = -1.0;
    assert_eq!(unsafe { gg_result_coverage(res, 1, &mut c) }, GgStatus::Ok);
    assert!((0.0..=1.0).contains(&c));
    assert_eq!(unsafe { gg_result_coverage(res, 99, &mut c) }, GgStatus::NotFound);
    assert_eq!(unsafe { gg_result_final_coverage(res, &mut c) }, GgStatus::Ok);

    let dir = tempfile::tempdir().unwrap();
    let d = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { gg_result_write(res, d.as_ptr()) }, GgStatus::Ok, "{}", last_error());
    let ckpt = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_str().unwrap().starts_with("checkpoint_"))
        .expect("checkpoint written");

    let p = CString::new(ckpt.to_str().unwrap()).unwrap();
    let mut pol = ptr::null_mut();
    assert_eq!(unsafe { gg_policy_load(p.as_ptr(), &mut pol) }, GgStatus::Ok, "{}", last_error());
    let mut dim = 0usize;
    assert_eq!(unsafe { gg_policy_dim(pol, &mut dim) }, GgStatus::Ok);
    assert_eq!(dim, 2);
    let pos = [0.0, 0.0];
    let vel = [0.0, 0.0];
    let goal = [1.0, -1.0];
    let mut act = [f64::NAN; 2];
    assert_eq!(
        unsafe { gg_policy_mean_action(pol, pos.as_ptr(), vel.as_ptr(), goal.as_ptr(), 2, act.as_mut_ptr()) },
        GgStatus::Ok
    );
    assert!(act.iter().all(|a| a.is_finite()));
    assert_eq!(
        unsafe { gg_policy_mean_action(pol, pos.as_ptr(), vel.as_ptr(), goal.as_ptr(), 3, act.as_mut_ptr()) },
        GgStatus::InvalidArgument
    );
    let mut cov = -1.0;
    assert_eq!(unsafe { gg_policy_coverage(pol, 1, 0, &mut cov) }, GgStatus::Ok);
    assert!((0.0..=1.0).contains(&cov));

    unsafe {
        gg_policy_free(pol);
        gg_result_free(res);
        gg_config_free(cfg);
    }
}

#[test]
fn missing_checkpoint_is_an_io_error() {
    let p = CString::new("/nonexistent/checkpoint.tensors").unwrap();
    let mut pol = ptr::null_mut();
    assert_eq!(unsafe { gg_policy_load(p.as_ptr(), &mut pol) }, GgStatus::Io);
    assert!(pol.is_null());
}

#[test]
fn header_declares_every_export_and_compiles() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/goalgan.h");
    let text = std::fs::read_to_string(&header).expect("header generated by build.rs");
    for name in [
        "gg_last_error_message",
        "gg_version",
        "gg_config_default",
        "gg_config_from_toml",
        "gg_config_free",
        "gg_config_set_method",
        "gg_config_set_env",
        "gg_config_set_seed",
        "gg_config_set_iterations",
        "gg_config_validate",
        "gg_run",
        "gg_result_free",
        "gg_result_iterations",
        "gg_result_coverage",
        "gg_result_final_coverage",
        "gg_result_write",
        "gg_policy_load",
        "gg_policy_free",
        "gg_policy_dim",
        "gg_policy_mean_action",
        "gg_policy_coverage",
        "GG_STATUS_PANIC",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    // Syntax check with the system C compiler when one is present.
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .output()
    {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
