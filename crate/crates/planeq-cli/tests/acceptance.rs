//! Runs every acceptance criterion and prints one line per criterion.

use std::process::ExitCode;

use planeq_cli::suite::{run_suite, SuiteOptions};

fn main() -> ExitCode {
    let opts = SuiteOptions {
        seed: 1,
        ..Default::default()
    };
    let report = run_suite(&opts, |o| println!("{}", o.line()));
    let passed = report.criteria.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass", report.criteria.len());
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
