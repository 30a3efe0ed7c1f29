//! The batch layer: parse a TOML job config, run it, and print the resulting
//! JSON report (sorted keys, byte-deterministic for a given seed).
//!
//! Run with: cargo run --example batch_report

use obschart::report::{parse_config, report_to_json, run_job};
use obschart::Result;

const JOB: &str = r#"
schema_version = 1
seed = 7
theta0 = [0.0, 0.0, 0.0]

[model]
kind = "gmm"

[model.params]
sigma = 1.0

[chart]
observables = ["m1", "k2", "k3"]

[[arcs]]
id = "e_delta"
coefficients = [[0.0, 1.0, 0.0]]
"#;

fn main() -> Result<()> {
    let job = parse_config(JOB)?;
    let report = run_job(&job)?;
    print!("{}", report_to_json(&report)?);
    Ok(())
}
