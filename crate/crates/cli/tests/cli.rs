use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use torsynth::io::parse_consensus;
use torsynth::Consensus;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn torsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torsynth")).args(args).output().expect("spawn torsynth")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn excerpt() -> String {
    fixture("consensus-excerpt.txt").to_str().unwrap().to_string()
}

fn load(path: &Path) -> Consensus {
    parse_consensus(&fs::read_to_string(path).unwrap()).unwrap()
}

/// A copy of the excerpt with another valid-after, only the first `keep`
/// relays and every weight multiplied by `weight_factor`.
fn shifted_copy(dir: &Path, name: &str, valid_after: &str, keep: usize, weight_factor: u64) -> PathBuf {
    let mut c = parse_consensus(&fs::read_to_string(fixture("consensus-excerpt.txt")).unwrap()).unwrap();
    c.valid_after = chrono::NaiveDateTime::parse_from_str(valid_after, "%Y-%m-%d %H:%M:%S").unwrap();
    c.relays.truncate(keep);
    for r in &mut c.relays {
        r.weight *= weight_factor;
    }
    let path = dir.join(name);
    fs::write(&path, torsynth::io::serialize_consensus(&c).unwrap()).unwrap();
    path
}

#[test]
fn vertical_one_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.txt");
    stdout(&torsynth(&["scale", "--vertical", "1.0", "--in", &excerpt(), "--out", out.to_str().unwrap()]));
    let (a, b) = (load(&fixture("consensus-excerpt.txt")), load(&out));
    assert_eq!(a.relays, b.relays);
    assert_eq!(a.valid_after, b.valid_after);
    assert!(dir.path().join("out.txt.manifest.json").exists());
}

#[test]
fn stages_compose_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.txt");
    let fam = dir.path().join("fam.txt");
    stdout(&torsynth(&[
        "scale",
        "--horizontal",
        "2",
        "--vertical",
        "2",
        "--seed",
        "11",
        "--in",
        &excerpt(),
        "--families",
        fixture("families.txt").to_str().unwrap(),
        "--asn-db",
        fixture("asn-table.txt").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--families-out",
        fam.to_str().unwrap(),
    ]));
    let (orig, scaled) = (load(&fixture("consensus-excerpt.txt")), load(&out));
    assert_eq!(scaled.len(), 2 * orig.len());
    let original_weights: std::collections::HashSet<u64> = orig.relays.iter().map(|r| r.weight).collect();
    for r in &scaled.relays {
        match orig.get(&r.fingerprint) {
            Some(o) => assert_eq!(r.weight, 2 * o.weight),
            None => assert!(r.weight % 2 == 0 && original_weights.contains(&(r.weight / 2))),
        }
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out.txt.manifest.json")).unwrap()).unwrap();
    let kinds: Vec<&str> = manifest["stages"].as_array().unwrap().iter().map(|s| s["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["horizontal", "vertical_uniform"]);
    assert_eq!(manifest["stages"][0]["seed"], 11);
    assert_eq!(manifest["output"]["relays"], 2 * orig.len());
    assert!(manifest["consensus"]["sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn second_horizontal_stage_gets_next_seed() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.json");
    let args = ["scale", "--horizontal", "1.5", "--horizontal", "1.5", "--seed", "3", "--in", &excerpt()];
    let mut args: Vec<&str> = args.to_vec();
    args.extend(["--manifest", manifest.to_str().unwrap()]);
    stdout(&torsynth(&args));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
    assert_eq!(manifest["stages"][0]["seed"], 3);
    assert_eq!(manifest["stages"][1]["seed"], 4);
    assert_eq!(manifest["output"]["relays"], 64 + 32 + 48);
}

#[test]
fn scale_to_stdout() {
    let text = stdout(&torsynth(&["scale", "--vertical-quantiles", "1,2", &excerpt()]));
    let c = parse_consensus(&text).unwrap();
    assert_eq!(c.len(), 64);
}

#[test]
fn scale_errors() {
    for args in [
        vec!["scale", "--in", excerpt().as_str()].into_iter().map(String::from).collect::<Vec<_>>(),
        ["scale", "--horizontal", "2", "--in", &excerpt()].map(String::from).to_vec(),
        ["scale", "--horizontal", "0.5", "--seed", "1", "--in", &excerpt()].map(String::from).to_vec(),
        ["scale", "--vertical-roles", "1,2", "--in", &excerpt()].map(String::from).to_vec(),
        ["scale", "--vertical", "2", "--in", "/nonexistent/consensus"].map(String::from).to_vec(),
    ] {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = torsynth(&args);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn analyze_flat_archive() {
    let dir = tempfile::tempdir().unwrap();
    let a = shifted_copy(dir.path(), "a", "2020-01-01 00:00:00", 64, 1);
    let b = shifted_copy(dir.path(), "b", "2020-12-31 00:00:00", 64, 1);
    // Files given in reverse order.
    let text = stdout(&torsynth(&["analyze", "--delta-t", "365", b.to_str().unwrap(), a.to_str().unwrap()]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t\tn\tb\tH\tV\tH_smoothed\tV_smoothed");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("2020-01-01T00:00:00Z\t64\t"));
    // Neither sample has both window endpoints.
    assert!(lines[1].ends_with("\t\t\t\t"));
}

#[test]
fn analyze_growth() {
    let dir = tempfile::tempdir().unwrap();
    shifted_copy(dir.path(), "0", "2020-01-01 00:00:00", 16, 1);
    shifted_copy(dir.path(), "1", "2020-07-01 12:00:00", 32, 2);
    shifted_copy(dir.path(), "2", "2020-12-31 00:00:00", 64, 5);
    let text = stdout(&torsynth(&["analyze", "--delta-t", "365", "--window", "1", dir.path().to_str().unwrap()]));
    let middle: Vec<&str> = text.lines().nth(2).unwrap().split('\t').collect();
    assert_eq!(middle[0], "2020-07-01T12:00:00Z");
    assert_eq!(middle[3], "4");
    let v: f64 = middle[4].parse().unwrap();
    let first = load(&dir.path().join("0"));
    let last = load(&dir.path().join("2"));
    let expected = (last.total_weight() as f64 / 64.0) / (first.total_weight() as f64 / 16.0);
    assert!((v - expected).abs() < 1e-12);
    assert_eq!(middle[5], "4");
}

#[test]
fn analyze_rejects_duplicates_and_single_file() {
    let out = torsynth(&["analyze", &excerpt(), &excerpt()]);
    assert!(!out.status.success());
    let out = torsynth(&["analyze", &excerpt()]);
    assert!(!out.status.success());
}

#[test]
fn validate_reports_median() {
    let dir = tempfile::tempdir().unwrap();
    let cdf = dir.path().join("cdf.tsv");
    let text = stdout(&torsynth(&["validate", &excerpt(), &excerpt(), "--cdf-out", cdf.to_str().unwrap()]));
    assert_eq!(text, "median_deviation_pct\tn_compared\n0\t64\n");
    let cdf = fs::read_to_string(cdf).unwrap();
    assert!(cdf.starts_with("source\tweight\tcumshare\n"));
    assert!(cdf.lines().any(|l| l.starts_with("scaled\t")));
    assert!(cdf.lines().any(|l| l.starts_with("reference\t")));
}

#[test]
fn stats_lists_family_share() {
    let text = stdout(&torsynth(&[
        "stats",
        &excerpt(),
        "--families",
        fixture("families.txt").to_str().unwrap(),
        "--asn-db",
        fixture("asn-table.txt").to_str().unwrap(),
    ]));
    assert!(text.contains("relays\t64\n"));
    assert!(text.contains(&format!("p_fam\t{}\n", 5.0 / 64.0)));
    assert!(text.contains("families\t2\n"));
    assert!(text.contains("family_sizes\t2:1 3:1\n"));
}
