//! Runs every acceptance criterion and prints one line per criterion.
//! Exits nonzero when any criterion fails.

use std::process::ExitCode;

fn main() -> ExitCode {
    let only: Vec<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = Vec::new();
    for c in gnnlab_repro::criteria() {
        if !only.is_empty() && !only.contains(&c.id) {
            continue;
        }
        let outcome = (c.check)();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} ({}): {verdict} ({}, {:.1} s)",
            c.id,
            c.name,
            outcome.detail,
            outcome.elapsed.as_secs_f64()
        );
        if !outcome.pass {
            failed.push(c.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
