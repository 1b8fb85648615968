use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use optbound::cli::output::sha256_hex;

const SMALL: &str = r#"
schema_version = 1

[[experiment]]
kind = "vanilla_smile"
name = "smile"
forward = 1.0
nus = [0.01, 0.04]
strikes = { start = 0.5, stop = 2.0, step = 0.05 }

[[experiment]]
kind = "fx_cross"
name = "fx"
forward = 1.0
nu1 = 0.04
nu2 = 0.09
rhos = [0.0, 0.5]
strikes = { start = 0.5, stop = 2.0, count = 16 }

[[experiment]]
kind = "caplet_cdf"
name = "caplet"
period = 10
rho = 0.995
shifts = [0.0, 1.0]
strikes = { start = -1.05, stop = 0.06, step = 0.01 }
curve = { periods = 10, discount_rate = 0.01, forward = 0.02, vol = 0.4 }
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optbound"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map(|it| it.map(|e| e.unwrap().file_name().into_string().unwrap()).collect())
        .unwrap_or_default();
    names.sort();
    names
}

#[test]
fn writes_tables_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let res = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert_eq!(files_in(&out), ["caplet.csv", "fx.csv", "manifest.json", "smile.csv"]);

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"], sha256_hex(SMALL.as_bytes()));
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["experiments"][0]["rows"], 62);

    let smile = fs::read_to_string(out.join("smile.csv")).unwrap();
    assert!(!smile.contains('\r'));
    assert!(smile.starts_with("nu,strike,bound,implied_vol,cdf\n"));
    assert_eq!(smile.lines().nth(1).unwrap().split(',').count(), 5);

    let caplet = &manifest["experiments"][2]["summary"];
    assert!(caplet.to_string().contains("mass_at_zero"));
}

#[test]
fn output_is_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = tmp.path().join(format!("t{threads}"));
        let res = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads]);
        assert!(res.status.success(), "{}", stderr(&res));
        outputs.push(
            files_in(&out)
                .into_iter()
                .map(|f| fs::read(out.join(&f)).unwrap())
                .collect::<Vec<_>>(),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn validate_only_and_listing_write_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let res = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--validate-only"]);
    assert!(res.status.success());
    assert!(!out.exists());

    let res = run(&["--list-experiments"]);
    assert!(res.status.success());
    let listing = String::from_utf8(res.stdout).unwrap();
    for kind in ["vanilla_smile", "flat_refine", "linear_refine", "caplet_cdf", "global_attain"] {
        assert!(listing.contains(kind));
    }
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        SMALL.replace("forward = 1.0\nnus", "forward = 1.0\ncolour = 3\nnus"),
        SMALL.replace("schema_version = 1", "schema_version = 2"),
        SMALL.replace("nus = [0.01, 0.04]", "nus = [0.01, 1.5]"),
        SMALL.replace("kind = \"fx_cross\"", "kind = \"fx_crosss\""),
        SMALL.replace("name = \"fx\"", "name = \"smile\""),
        SMALL.replace("shifts = [0.0, 1.0]", "shifts = [-0.5]"),
    ];
    for text in cases {
        let cfg = write_config(tmp.path(), &text);
        let out = tmp.path().join("out");
        let res = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(res.status.code(), Some(2), "{}", stderr(&res));
        let err = stderr(&res);
        assert!(err.starts_with("error: config: "), "{err}");
        assert_eq!(err.trim_end().lines().count(), 1);
        assert!(!out.exists());
    }
    assert_eq!(run(&["--bogus-flag"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
schema_version = 1
[[experiment]]
kind = "linear_refine"
name = "extreme"
forward = 1.0
vol = 20.0
strikes = [0.5, 1.0]
partitions = [{ start = 0.1, stop = 2.9, count = 29 }]
"#;
    let cfg = write_config(tmp.path(), text);
    let out = tmp.path().join("out");
    let res = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    let err = stderr(&res);
    assert!(err.starts_with("error: numerical/DegenerateCell: experiment extreme:"), "{err}");
    assert!(!out.exists());
}

#[test]
fn io_failures_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.toml");
    let res = run(&["--config", missing.to_str().unwrap(), "--out", "x"]);
    assert_eq!(res.status.code(), Some(4));
    assert!(stderr(&res).starts_with("error: io: "));

    let cfg = write_config(tmp.path(), SMALL);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let res = run(&["--config", cfg.to_str().unwrap(), "--out", blocker.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(4));
}

#[test]
fn partial_output_is_removed_when_a_write_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    // A directory where the manifest should go makes the last write fail.
    fs::create_dir_all(out.join("manifest.json")).unwrap();
    let res = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(4), "{}", stderr(&res));
    assert_eq!(files_in(&out), ["manifest.json"]);
}
