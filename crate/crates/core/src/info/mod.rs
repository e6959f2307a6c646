//! Probability and information primitives shared by every solver.
//!
//! All logarithms are natural; every quantity is in nats.

pub mod discrete;
pub mod gaussian;
pub mod linalg;
pub mod tensor;

pub use discrete::{
    entropy, kl_discrete, ConditionalPmf, DiscretePmf, JointPmf, MarkovCheck,
};
pub use gaussian::{
    gaussian_conditional, kl_gaussian, FieldFactor, GaussianChannel, GaussianConditional,
    GaussianDist, LinearGaussianModel,
};

/// Converts nats to bits for display.
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}
