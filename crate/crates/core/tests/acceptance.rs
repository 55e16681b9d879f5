//! End-to-end acceptance checks, one line per criterion.

use missmass::verify::{run_check, Level, CHECKS};

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    for &(id, name) in CHECKS.iter() {
        let c = run_check(id, Level::Full);
        println!(
            "[{}] {:>2} {:<24} {:>7.2}s  {}",
            if c.passed { "PASS" } else { "FAIL" },
            id,
            name,
            c.seconds,
            c.detail
        );
        if !c.passed {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
