use std::process::{Command, Output};

fn lsi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsi-instab")).args(args).output().expect("spawn lsi-instab")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn help_lists_subcommands() {
    let out = lsi(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let help = text(&out.stdout);
    for cmd in ["theorem1", "example-gb", "heavytail", "instability", "hwi-chain", "bhi-deficit", "bhi-pw", "bhi-ew", "bhi-optimizer-check", "fixtures-regen"] {
        assert!(help.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn unknown_subcommand_suggests() {
    let out = lsi(&["theorm1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("theorem1"));
}

#[test]
fn bad_values_name_the_field() {
    let out = lsi(&["theorem1", "--k", "1,10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("`k`"), "{}", text(&out.stderr));
    let out = lsi(&["bhi-ew", "--weight", "power:1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("`weight`"));
}

#[test]
fn passing_run_exits_zero() {
    let out = lsi(&["example-gb"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let csv = text(&out.stdout);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("b,I,H,delta,m2"));
    assert_eq!(lines.count(), 5);
    assert!(text(&out.stderr).starts_with("PASS"));
}

#[test]
fn failing_claim_exits_two() {
    let out = lsi(&["bhi-pw", "--weight", "lebesgue"]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("FAIL lebesgue_p4_ratio_decay"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"b": [1.0, 2.0], "format": "json"}"#).unwrap();
    let cfg = cfg.to_str().unwrap();

    let from_file = lsi(&["example-gb", "--config", cfg]);
    assert_eq!(from_file.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_slice(&from_file.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);

    let over = lsi(&["example-gb", "--config", cfg, "--b", "3", "--format", "csv"]);
    let csv = text(&over.stdout);
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("3.0000000000000000e0,"));

    std::fs::write(dir.path().join("bad.json"), r#"{"bb": [1.0]}"#).unwrap();
    let bad = lsi(&["example-gb", "--config", dir.path().join("bad.json").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn output_is_byte_identical() {
    let args = ["theorem1", "--k", "10,14,20,28,40,57"];
    let a = lsi(&args);
    let b = lsi(&args);
    assert_eq!(a.status.code(), Some(0), "{}", text(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert!(text(&a.stdout).starts_with("k,I,H,delta,w2_sq,delta_tal,m2,m1,m3\n"));
}

#[test]
fn out_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/heavy.json");
    let out = lsi(&["heavytail", "--format", "json", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["theorem"], "heavytail");
    assert_eq!(v["per_claim"]["uniform_floor"]["pass"], true);
}
