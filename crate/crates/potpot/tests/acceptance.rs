//! Acceptance gate: runs the eight self-check criteria and prints one
//! pass/fail line per criterion.

use potpot::selftest;

#[test]
fn acceptance() {
    let results = selftest::run_all();
    let mut failed = Vec::new();
    for r in &results {
        println!("{}", r.line());
        if !r.passed {
            failed.push(r.id);
        }
    }
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
