use std::process::{Command, Output};

fn lprom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lprom"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn list_shows_every_entry() {
    let o = lprom(&["list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for id in ["kolmogorov-demo", "adv1d-basis", "adv1d-inhomogeneous", "burgers-riemann", "euler-sod"] {
        assert!(text.contains(id), "{text}");
    }
}

#[test]
fn printed_config_feeds_back_in() {
    let dir = tempfile::tempdir().unwrap();
    let o = lprom(&["config", "burgers-riemann", "--scale", "paper", "--seed", "9"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("seed = 9") && text.contains("scale = \"paper\""), "{text}");
    let path = dir.path().join("c.toml");
    std::fs::write(&path, &text).unwrap();
    let again = lprom(&["config", path.to_str().unwrap()]);
    assert!(again.status.success());
    assert_eq!(stdout(&again), text);
}

#[test]
fn unknown_entry_fails_with_the_registry_listed() {
    let o = lprom(&["run", "no-such-entry"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("kolmogorov-demo"), "{err}");
}

#[test]
fn run_writes_a_manifest_and_spectra() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k");
    let o = lprom(&["run", "kolmogorov-demo", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("spectrum: Ok"), "{text}");
    assert!(out.join("manifest.json").is_file());
    assert!(std::fs::read_dir(out.join("spectrum")).unwrap().count() > 0);
}
