//! Model-independent upper bounds for option prices from partial moment data.
//!
//! The bound for an option on `Σ λ_n a_n` is the sum of the positive
//! eigenvalues of `P = S Λ Sᵀ`, where `Q = SᵀS` collects the moments
//! `E[√(a_m a_n)]`. The crate builds `Q` from prices, root-variances and
//! square-root correlations, refines vanilla bounds with partitions of the
//! asset, applies them to FX crosses and caplets, and checks attainment.

pub mod attainment;
pub mod bound_engine;
pub mod cli;
pub mod error;
pub mod market;
pub mod moment_model;
pub mod partition;
pub mod reference_models;
pub mod vanilla_bounds;

pub use bound_engine::{
    positive_eigenvalue_bound, BoundResult, MomentMatrix, QuantityVector, Tolerances,
};
pub use error::{BoundError, Result};
pub use moment_model::{assemble_q, AssetMoments, CorrelationMatrix};
pub use partition::{PartitionKind, PartitionSpec};
pub use reference_models::LognormalModel;
pub use vanilla_bounds::{implied_cdf, vanilla_bound};
