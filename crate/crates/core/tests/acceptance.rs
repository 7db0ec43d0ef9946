//! One PASS/FAIL line per acceptance criterion. Set DPTR_ACCEPTANCE_FULL=1
//! for the full presets. Criteria that fail only on a documented known gap
//! are printed as failures but do not fail the target.

use std::process::ExitCode;

use dptr::selftest::{run, Options, Preset, CRITERIA};

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are not meaningful here.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let full = std::env::var("DPTR_ACCEPTANCE_FULL").is_ok_and(|v| v == "1");
    let opts = Options {
        preset: if full { Preset::Full } else { Preset::Reduced },
        ..Options::default()
    };
    let outcomes = run(&CRITERIA, &opts, std::io::stdout()).expect("write to stdout");
    let passed = outcomes.iter().filter(|o| o.passed).count();
    let gaps = outcomes.iter().filter(|o| o.known_gap).count();
    let hard: Vec<u8> = outcomes.iter().filter(|o| !o.passed && !o.known_gap).map(|o| o.id).collect();
    println!(
        "acceptance: {passed} passed, {gaps} known gaps, {} failed{}",
        hard.len(),
        if full { " (full preset)" } else { " (reduced preset)" }
    );
    if hard.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
