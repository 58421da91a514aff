//! Full verification suite as a test target: one pass/fail line per check
//! (run with `--nocapture` to see the lines on success).
//!
//! The Monte Carlo check runs 20 000 replicas by default (roughly an hour
//! on one core); set `LOGGAS_ACCEPT_REPLICAS` to trade precision for time
//! in local iteration.

use loggas::verify;

#[test]
fn acceptance() {
    let replicas: usize = std::env::var("LOGGAS_ACCEPT_REPLICAS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(20_000);
    let results = verify::run_all(replicas);
    let mut all = true;
    for c in &results {
        println!(
            "criterion {:2} [{}] {} — observed {:.3e} (threshold {:.1e}) in {:.1}s: {}",
            c.id,
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.observed,
            c.threshold,
            c.seconds,
            c.detail
        );
        all &= c.passed;
    }
    assert!(all, "verification suite failed");
}
