//! Vector Gaussian models: outer bounds and the Gaussian-encoder solver.

mod ba;
mod boundary;

pub use ba::{
    ba_gauss_run, ba_gauss_solve, ba_gauss_step, evaluate_gauss_pair, gauss_cost, induced_covariance, GaussBaConfig,
    GaussIterRecord, GaussSolution, GaussTrace, GaussianEncoderSet,
};
pub use boundary::{
    boundary_at_rate, boundary_at_s, cib_bound, cib_curve, region_bound, sum_boundary, sum_boundary_at_rates,
    BoundaryPoint, OmegaSet, OMEGA_TOL,
};
