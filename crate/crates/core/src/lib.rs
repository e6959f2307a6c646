//! Distributed information bottleneck: discrete and Gaussian alternating
//! solvers, Gaussian outer bounds, a variational trainer and data tooling.

pub mod cli;
pub mod datagen;
pub mod discrete_ba;
pub mod dvib;
pub mod error;
pub mod gauss_dib;
pub mod info;
pub mod rng;
pub mod sweep;
pub mod tradeoff;

pub use error::{DibError, Result};
pub use tradeoff::TradeoffPoint;
