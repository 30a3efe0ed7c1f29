//! Batch CLI over job configs: `analyze`, `build-chart`, `probe`, `verify`.
//!
//! Exit codes: 0 success, 1 job error, 2 config error, 3 internal/numeric
//! error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use obschart::builder::ProbeEntry;
use obschart::report::{
    build_model, emit_report, load_job, report_to_json, resolve_pool, run_job, BuildTraceReport,
};
use obschart::{Error, GridSpec, Order, ParamVector};

#[derive(Parser)]
#[command(name = "obschart", version, about = "Observable-chart analysis of parametric models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a job end to end and emit the full report.
    Analyze {
        /// Job config (TOML).
        job: PathBuf,
    },
    /// Run the chart builder and print the final chart with its trace.
    BuildChart {
        job: PathBuf,
    },
    /// Per-candidate orders of vanishing along θ0 + t·v for one direction v.
    Probe {
        job: PathBuf,
        /// Direction components, comma separated (normalized internally).
        #[arg(long, value_delimiter = ',', required = true)]
        direction: Vec<f64>,
    },
    /// Run the per-arc order-theorem checks and print one verdict per arc.
    Verify {
        job: PathBuf,
    },
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Parse(_) | Error::Config(_) | Error::Io { .. } => ExitCode::from(2),
        Error::InvalidParameter { .. } | Error::InvalidArgument(_) | Error::OutOfSupport { .. } => {
            ExitCode::from(1)
        }
        Error::Numeric { .. } | Error::NonFinite { .. } | Error::Undetermined { .. } => {
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.cmd {
        Cmd::Analyze { job } => {
            let job = load_job(&job)?;
            let report = run_job(&job)?;
            match &job.outputs {
                Some(outputs) => {
                    let written = emit_report(&report, outputs)?;
                    for path in written {
                        eprintln!("[obschart] wrote {}", path.display());
                    }
                    if outputs.report.is_none() {
                        print!("{}", report_to_json(&report)?);
                    }
                }
                None => print!("{}", report_to_json(&report)?),
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::BuildChart { job } => {
            let job = load_job(&job)?;
            if job.builder.is_none() {
                return Err(Error::InvalidArgument(
                    "build-chart requires a job with a [builder] section".into(),
                ));
            }
            let report = run_job(&job)?;
            let trace: &BuildTraceReport = report
                .build_trace
                .as_ref()
                .expect("builder job produces a trace");
            let out = serde_json::json!({
                "chart": report.chart,
                "build_trace": trace,
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Probe { job, direction } => {
            let job = load_job(&job)?;
            let handle = build_model(&job.model)?;
            let theta0 = ParamVector::new(job.theta0.clone())?;
            let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::InvalidArgument(
                    "--direction must be a nonzero finite vector".into(),
                ));
            }
            let v: Vec<f64> = direction.iter().map(|x| x / norm).collect();
            let pool = resolve_pool(
                job.builder.as_ref().and_then(|b| b.pool.as_ref()),
                &handle,
            )?;
            let grid = job.grid.clone().map(|g| g.to_grid()).unwrap_or_else(GridSpec::default);
            let budget = obschart::Budget::default().with_seed(job.seed);
            let table = obschart::builder::probe_direction(
                handle.model.as_ref(),
                &theta0,
                &v,
                &pool,
                &grid,
                &budget,
            )?;
            println!("{:<24} {:>10} {:>12} {:>10}", "observable", "order", "slope", "residual");
            for (id, entry) in &table {
                match entry {
                    ProbeEntry::Order(est) => {
                        let slope = if est.raw_slope.is_finite() {
                            format!("{:.4}", est.raw_slope)
                        } else {
                            "-".to_string()
                        };
                        println!(
                            "{:<24} {:>10} {:>12} {:>10.4}",
                            id,
                            est.order.to_string(),
                            slope,
                            est.residual
                        );
                    }
                    ProbeEntry::Undetermined(msg) => {
                        println!("{id:<24} {:>10}  ({msg})", "UNDET");
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { job } => {
            let job = load_job(&job)?;
            let report = run_job(&job)?;
            let mut failed = false;
            for arc in &report.arcs {
                match &arc.check {
                    Some(check) => {
                        let obs = order_str(&check.observable_order.order);
                        let kl = order_str(&check.kl_order.order);
                        let verdict = if check.inequality_holds { "OK" } else { "VIOLATED" };
                        let equality = match check.equality_holds {
                            Some(true) => "equality",
                            Some(false) => "strict",
                            None => "n/a",
                        };
                        let complete = if check.chart_complete {
                            ""
                        } else {
                            " [chart incomplete: inequality not guaranteed]"
                        };
                        println!(
                            "arc `{}`: o_psi={obs} o_kl={kl} o_kl >= 2*o_psi: {verdict} ({equality}){complete}",
                            arc.arc_id
                        );
                        if !check.inequality_holds {
                            failed = true;
                        }
                    }
                    None => {
                        println!(
                            "arc `{}`: UNDETERMINED ({})",
                            arc.arc_id,
                            arc.error.as_deref().unwrap_or("no detail")
                        );
                    }
                }
            }
            for w in &report.warnings {
                eprintln!("[obschart] warning: {w}");
            }
            Ok(if failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
    }
}

fn order_str(o: &obschart::report::OrderRepr) -> String {
    match o {
        obschart::report::OrderRepr::Finite(k) => Order::Finite(*k).to_string(),
        obschart::report::OrderRepr::Infinite => Order::Infinite.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
