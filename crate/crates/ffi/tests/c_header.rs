//! Compiles a C program against the generated header and the shared
//! library. Skipped when no C compiler is on the PATH.

use std::path::PathBuf;
use std::process::Command;

use ttshield::predictors::{LogisticModel, Model, Scorer};

fn library_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_predicts() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let lib = library_dir();
    if !lib.join("libttshield_ffi.so").exists() && !lib.join("libttshield_ffi.dylib").exists() {
        eprintln!("shared library not built in {}; skipping", lib.display());
        return;
    }
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(crate_dir.join("tests/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg("-L")
        .arg(&lib)
        .arg("-lttshield_ffi")
        .arg(format!("-Wl,-rpath,{}", lib.display()))
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());

    let model = Model::Lr(LogisticModel::from_coefficients(vec![0.5, -1.0, 2.0], 0.25).unwrap());
    let path = dir.path().join("m.json");
    std::fs::write(&path, model.to_json().unwrap()).unwrap();
    let out = Command::new(&bin).arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert_eq!(p, model.score(&[0.0, 0.0, 0.0]).unwrap());
}
