//! End-to-end acceptance check for the selection pipeline binary.

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

fn temp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("polarlab-acceptance-{}-{name}", std::process::id()));
    p
}

#[test]
fn criterion_08_select_determinism_and_coverage() {
    let start = Instant::now();
    let first = temp_path("select-1.json");
    let second = temp_path("select-2.json");
    for out in [&first, &second] {
        let status = Command::new(env!("CARGO_BIN_EXE_polarlab"))
            .args([
                "select", "--ell", "4", "--mu", "3", "--pool", "200", "--seed", "7", "--out",
            ])
            .arg(out)
            .status()
            .expect("binary runs");
        assert!(status.success());
    }
    let a = std::fs::read(&first).unwrap();
    let b = std::fs::read(&second).unwrap();
    assert_eq!(a, b, "two runs with the same seed must be byte-identical");

    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    let coverage = report["coverage"].as_f64().unwrap();
    assert!(
        coverage >= 0.9,
        "covered only {coverage} of the bundles; uncoverable: {}",
        report["uncoverable"]
    );
    let uncoverable = report["uncoverable"].as_array().unwrap().len();
    let covered = report["covered"].as_u64().unwrap() as usize;
    let total = report["bundle_count"].as_u64().unwrap() as usize;
    assert_eq!(
        covered + uncoverable,
        total,
        "uncoverables must be reported"
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!(
        "criterion 8 PASS: select --ell 4 --mu 3 --pool 200 --seed 7 byte-identical, \
         coverage {coverage} ({elapsed:?})"
    );
    std::fs::remove_file(&first).ok();
    std::fs::remove_file(&second).ok();
}
