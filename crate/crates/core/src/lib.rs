pub mod bernoulli;
pub mod bounds;
pub mod cli;
pub mod coupling;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod rational;
pub mod special;
pub mod stein;
pub mod weighted_sum;

pub use error::{Error, Result};
pub use lattice::{exact_distribution, exact_tail, LatticeDistribution, TailInterval};
pub use rational::Rational;
pub use weighted_sum::{
    moments, normal_approx_tail, normalize_weights, scaled_poisson_tail, SumMoments, Tail, TailMode, WeightedPoissonSum,
};
