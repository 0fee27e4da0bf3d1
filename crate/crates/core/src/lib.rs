//! Critical Galton–Watson processes with immigration.
//!
//! The chain `X_{n+1} = Σ_{i ≤ X_n} A_{n+1,i} + B_{n+1}` with a critical
//! offspring law in the domain of attraction of a (1+α)-stable law and either
//! finite-mean or Sibuya immigration. The crate provides
//!
//! * [`dists`]: offspring and immigration laws with exact samplers,
//! * [`genfun`]: generating-function numerics and predicted tail constants,
//! * [`sim`]: Monte Carlo engines for the chain, total progeny and clans,
//! * [`est`]: tail and extreme-value estimators,
//! * [`rng`]: counter-based random streams.

pub mod dists;
pub mod error;
pub mod est;
pub mod genfun;
pub mod rng;
pub mod sim;
pub mod special;
pub mod stats;

pub use dists::{DiscreteLaw, ImmigrationKind, ImmigrationLaw, OffspringKind, OffspringLaw, PointMass};
pub use error::{Error, Result};
pub use genfun::{ChainModel, TailLaw};
pub use rng::{seed_stream, RngStream};
