use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CLAIM: &str = "All McDonald's locations have multiple complaints about poor service quality";

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

/// Data directory with schema, records, scripted oracle and claims.
fn data_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let f = fixtures();
    fs::copy(f.join("schema.json"), dir.path().join("schema.json")).unwrap();
    fs::copy(f.join("reviews.jsonl"), dir.path().join("records.jsonl")).unwrap();
    fs::copy(f.join("oracle.json"), dir.path().join("oracle.json")).unwrap();
    fs::copy(f.join("claims.jsonl"), dir.path().join("claims.jsonl")).unwrap();
    dir
}

fn claimq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_claimq"))
        .arg("--cache-dir")
        .arg(dir.join("cache"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn cache_stats_on_empty_cache() {
    let d = tempfile::tempdir().unwrap();
    let out = stdout(&claimq(d.path(), &["cache", "stats"]));
    assert!(out.contains("entries: 0"), "{out}");
}

#[test]
fn offline_verify_prints_cited_rows() {
    let d = data_dir();
    let data = d.path().to_str().unwrap();
    let out = stdout(&claimq(d.path(), &["verify", "--claim", CLAIM, "--data", data, "--offline"]));
    assert!(out.starts_with("verdict: false"), "{out}");
    assert!(out.contains("cited tuples"), "{out}");
    assert!(out.contains("- row "), "{out}");

    // the second run is answered from the cache
    let out = stdout(&claimq(d.path(), &["verify", "--claim", CLAIM, "--data", data, "--offline"]));
    assert!(out.contains("(0 backend"), "{out}");
    let stats = stdout(&claimq(d.path(), &["cache", "stats"]));
    assert!(!stats.contains("entries: 0"), "{stats}");
    stdout(&claimq(d.path(), &["cache", "clear"]));
    assert!(stdout(&claimq(d.path(), &["cache", "stats"])).contains("entries: 0"));
}

#[test]
fn verify_json_round_trips_through_explain() {
    let d = data_dir();
    let data = d.path().to_str().unwrap();
    let program = fixtures().join("ordinal.vq");
    let verdict = d.path().join("verdict.json");
    let out = stdout(&claimq(
        d.path(),
        &[
            "verify",
            "--program",
            program.to_str().unwrap(),
            "--data",
            data,
            "--offline",
            "--json",
            "--out",
            verdict.to_str().unwrap(),
        ],
    ));
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["verdict"]["value"], true);
    let cited = doc["verdict"]["tokens"].as_array().unwrap().len();
    assert!(cited > 0);

    let out = stdout(&claimq(d.path(), &["explain", "--verdict", verdict.to_str().unwrap(), "--data", data]));
    assert!(out.contains("with_rank"), "{out}");
    assert!(out.contains(&format!("cited tuples ({cited})")), "{out}");
}

#[test]
fn compile_then_ingest_then_verify_the_program() {
    let d = data_dir();
    let data = d.path().to_str().unwrap();
    let prog = d.path().join("claim.vq");
    stdout(&claimq(
        d.path(),
        &["compile", "--claim", CLAIM, "--data", data, "--offline", "--out", prog.to_str().unwrap()],
    ));
    assert!(fs::read_to_string(&prog).unwrap().contains("bool_and"));

    let rel = d.path().join("relation.json");
    let args = |out: &Path| {
        vec![
            "ingest".to_string(),
            "--schema".into(),
            d.path().join("schema.json").to_str().unwrap().into(),
            "--records".into(),
            d.path().join("records.jsonl").to_str().unwrap().into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let run = |out: &Path| {
        let a = args(out);
        stdout(&claimq(d.path(), &a.iter().map(String::as_str).collect::<Vec<_>>()))
    };
    assert!(run(&rel).contains("230 rows"));
    let again = d.path().join("again.json");
    run(&again);
    assert_eq!(fs::read(&rel).unwrap(), fs::read(&again).unwrap());

    let out = stdout(&claimq(
        d.path(),
        &["verify", "--program", prog.to_str().unwrap(), "--data", rel.to_str().unwrap(), "--offline"],
    ));
    assert!(out.starts_with("verdict: false"), "{out}");
}

#[test]
fn bench_reports_quality_and_ablation() {
    let d = data_dir();
    let data = d.path().to_str().unwrap();
    let out = stdout(&claimq(d.path(), &["bench", "--data", data, "--offline", "--trials", "1"]));
    assert!(out.contains("f1        1.000"), "{out}");
    let out = stdout(&claimq(
        d.path(),
        &["bench", "--data", data, "--offline", "--trials", "1", "--no-cache", "--ablate=all"],
    ));
    assert!(out.lines().any(|l| l.starts_with("all")), "{out}");
}

#[test]
fn failures_exit_nonzero_with_a_structured_error() {
    let d = data_dir();
    let data = d.path().to_str().unwrap();
    let o = claimq(d.path(), &["verify", "--claim", CLAIM, "--data", data, "--offline", "--disable", "warp"]);
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("warp"), "{err}");

    let o = claimq(d.path(), &["verify", "--claim", CLAIM, "--data", "/nonexistent", "--offline"]);
    assert!(!o.status.success());
}
