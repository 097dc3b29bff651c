//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::ExitCode;

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("scratch directory");
    println!("acceptance suite");
    let outcomes = modify_core::verify::run_all(scratch.path(), |o| println!("{o}"));
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("acceptance: {} passed, {} failed, {} total", outcomes.len() - failed, failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
