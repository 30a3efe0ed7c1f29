//! Local geometry of parametric statistical models through observable charts.
//!
//! An *observable chart* is a finite list of expectation functionals
//! Ψ(θ) = (E_θ[f₁], …, E_θ[f_m]). This crate computes chart Jacobians, Fisher
//! information, and their kernels; estimates the *observable order* and *KL
//! order* of analytic arcs through a reference parameter; checks the order
//! inequality o_K ≥ 2·o_Ψ for first-order complete charts; and iteratively
//! builds charts that reveal hidden parameter directions at finite order.
//!
//! Entry points:
//! - [`model::Model`] — density/score/sampling abstraction, with the
//!   reference models in [`zoo`].
//! - [`chart`] — observables, charts, Jacobians, completeness.
//! - [`arc`] — arcs, order-of-vanishing estimation, the order theorem check.
//! - [`builder`] — iterative chart construction.
//! - [`report`] — TOML job configs, orchestration, JSON reports, CSV traces.
//!
//! The `examples/` directory walks through each capability; the `obschart`
//! binary wraps [`report::run_job`] for batch use.

pub mod arc;
pub mod builder;
pub mod chart;
pub mod error;
pub mod model;
pub mod numerics;
pub mod quad;
pub mod report;
pub mod zoo;

pub use arc::{Arc, GridSpec, Order, OrderEstimate, TheoremCheck};
pub use builder::{build_chart, BuildOptions, BuildTrace, ObservablePool, TerminationReason};
pub use chart::{
    chart_jacobian, completeness_check, hidden_directions, identifiable_rank, Chart, Observable,
};
pub use error::{Error, Result};
pub use model::{Model, ParamVector};
pub use numerics::{expectation, fisher_information, kl_divergence, Budget, Method};
pub use report::{parse_config, run_job, AnalysisReport, JobConfig};
