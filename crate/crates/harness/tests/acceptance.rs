use std::io::Write;

use maisac::acceptance::run_all;
use maisac_core::config::SystemConfig;

#[test]
fn acceptance_criteria() {
    let checks = run_all(&SystemConfig::default());
    // Straight to stderr so the report shows even when output is captured.
    let mut err = std::io::stderr().lock();
    writeln!(err).unwrap();
    for c in &checks {
        writeln!(err, "{c}").unwrap();
    }
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.to_string()).collect();
    assert!(failed.is_empty(), "failing criteria:\n{}", failed.join("\n"));
}
