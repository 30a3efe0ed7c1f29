//! Reference models: Gaussian mixture, one-unit tanh network, and
//! reduced-rank regression, with closed-form expectations, scores, and KL
//! registrations where available.

mod gmm;
mod rrr;
mod tanh;

pub use gmm::{gaussian_raw_moment, GmmModel};
pub use rrr::{cross_moment_chart, determinant_relation, RrrModel};
pub use tanh::TanhUnitModel;
