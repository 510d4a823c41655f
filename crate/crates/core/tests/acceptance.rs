//! Runs every acceptance criterion at its stated tolerance and budget and
//! prints one line per criterion. Built without the libtest harness so the
//! lines are shown on every run.

use std::process::ExitCode;

use cellboard::battery::{run_criterion, BatteryConfig, CRITERIA};

fn main() -> ExitCode {
    let config = BatteryConfig::default();
    let mut failed = Vec::new();
    for (id, _, _) in CRITERIA {
        let outcome = run_criterion(id, &config);
        println!("{}", outcome.line());
        if !outcome.passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: {} criteria passed", CRITERIA.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
