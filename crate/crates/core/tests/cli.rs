use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ttshield"));
    c.env_remove("TTSHIELD_OUT").env_remove("RUST_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn manifest_path(o: &Output) -> String {
    stdout(o).lines().find_map(|l| l.strip_prefix("manifest ")).expect("manifest line").to_string()
}

const SMALL: &str = r#"
seed = 7

[attack]
access = ["sbb", "wb"]
probes = 10
replicates = 2
repeats = 1
folds = 2
targets = ["lr-vanilla"]

[attack.adversary]
epochs = 5
"#;

#[test]
fn help_exits_zero() {
    for args in [&["--help"][..], &["attack", "--help"], &["--version"]] {
        let o = run(args);
        assert!(o.status.success(), "{args:?}");
        assert!(!o.stdout.is_empty());
    }
}

#[test]
fn usage_errors_are_one_json_line() {
    for args in [&["--bogus"][..], &["attack", "--seed", "abc"], &["--access", "wbb1", "gen"]] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8(o.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
        assert!(v["error"]["kind"].is_string() && v["error"]["message"].is_string(), "{v}");
    }
}

#[test]
fn missing_input_is_a_tool_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["--out", out, "sensitivity", "--input", "/nonexistent.json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(v["error"]["kind"], "io");
}

#[test]
fn gen_is_reproducible_and_append_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let a = run(&["--out", out_s, "gen"]);
    let b = run(&["--out", out_s, "gen"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    let other = run(&["--out", out_s, "--seed", "8", "gen"]);
    assert_ne!(manifest_path(&a), manifest_path(&other));
    assert_eq!(std::fs::read_dir(out.join("manifest")).unwrap().count(), 2);
}

#[test]
fn environment_overrides_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let env_out = dir.path().join("env");
    let flag_out = dir.path().join("flag");
    let o = bin()
        .env("TTSHIELD_OUT", &env_out)
        .args(["--out", flag_out.to_str().unwrap(), "gen"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(env_out.join("manifest").is_dir());
    assert!(!flag_out.exists());
}

#[test]
fn train_then_interpret_from_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["--out", out, "train", "--family", "tt-lr-b6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let tt_path = stdout(&o).lines().find_map(|l| l.split(" -> ").nth(1)).unwrap().split(' ').next().unwrap().to_string();
    assert!(Path::new(&tt_path).exists());

    let s = run(&["--out", out, "sensitivity", "--input", &tt_path]);
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    assert!(stdout(&s).contains("TMB"));
    let m = run(&["--out", out, "monotonicity", "--input", &tt_path]);
    assert!(m.status.success(), "{}", String::from_utf8_lossy(&m.stderr));
    assert!(stdout(&m).starts_with("input: slope"));
}

#[test]
fn small_attack_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    let args = ["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let a = bin().args(args).arg("attack").output().unwrap();
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(stdout(&a).contains("LR / vanilla"));

    let r = bin().args(args).args(["report", "--format", "csv"]).output().unwrap();
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = stdout(&r);
    assert!(text.starts_with("model,defense,access,mean,std,chance_mean,chance_std"));
    assert_eq!(text.lines().filter(|l| !l.starts_with("manifest ")).count(), 3);

    // the same configuration reproduces the same table bytes
    let again = dir.path().join("again");
    let b = bin().args(["--config", cfg.to_str().unwrap(), "--out", again.to_str().unwrap(), "attack"]).output().unwrap();
    let table = |o: &Output| stdout(o).lines().filter(|l| !l.starts_with("manifest")).collect::<Vec<_>>().join("\n");
    assert_eq!(table(&a), table(&b));
}

#[test]
fn serve_rounds_model_scores() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["--out", out, "train", "--family", "lr-vanilla"]);
    assert!(o.status.success());
    let path = stdout(&o).lines().find_map(|l| l.split(" -> ").nth(1)).unwrap().split(' ').next().unwrap().to_string();
    let model = ttshield::predictors::Model::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();

    let mut child = bin()
        .args(["serve", "--input", &path, "--bind", "127.0.0.1:0", "--decimals", "3"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().strip_prefix("listening on ").expect("listening line").to_string();

    let q = "tmb=8.5&psth=1&albumin=3.9&nlr=4.2&age=66&cancer_type=5";
    let body = ureq::get(&format!("{url}/predict?{q}")).call().unwrap().into_string().unwrap();
    child.kill().unwrap();
    let _ = child.wait();

    let row = ttshield::harness::serve::parse_query(q).unwrap();
    let p = ttshield::predictors::Scorer::score(&model, &row).unwrap();
    let shown = ttshield::harness::serve::round_to(p, 3);
    assert_eq!(body, format!("{{\"probability\":{shown:.3}}}"));
}
