//! Secondary checks: operator cross-checks, format roundtrips, RNG stream
//! discipline, error reporting. Everything registered under `cov_` must pass.

use mildns_cli::checks;

#[test]
fn all_coverage_checks_pass() {
    let results = checks::run_all(Some("cov_"));
    assert!(!results.is_empty());
    let mut failed = Vec::new();
    for res in &results {
        let tag = if res.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {} ({:.2}s): {}", res.name, res.seconds, res.detail);
        if !res.passed {
            failed.push(res.name.clone());
        }
    }
    assert!(failed.is_empty(), "failed checks: {failed:?}");
}
