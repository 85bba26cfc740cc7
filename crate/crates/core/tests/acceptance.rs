//! Runs the full acceptance battery and prints one line per criterion.

use fcp_core::verify::criteria;

const SEED: u64 = 20_240_601;

#[test]
fn acceptance_battery() {
    println!();
    let mut failed = Vec::new();
    for criterion in criteria() {
        let outcome = criterion.run(SEED);
        println!("{outcome}");
        if !outcome.passed {
            failed.push(outcome.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
