//! Denoising and unwrapping of noisy modulo-1 samples.
//!
//! Noisy residues `y_i = (f(x_i) + noise) mod 1` on a regular grid are mapped
//! to the unit circle and denoised by graph-Laplacian-regularized least
//! squares ([`trs`] or [`manifold`]). The denoised residues are then unwrapped
//! ([`unwrap`]) to recover the samples of `f` up to a global shift.
//!
//! Numeric routines are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

// Negated comparisons are how parameter checks reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod angular;
pub mod denoise;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod grid_graph;
pub mod io;
pub mod linalg;
pub mod manifold;
pub mod noise;
pub mod scalar;
pub mod trs;
pub mod unwrap;

pub use error::{Error, Result};
pub use scalar::Real;

pub use denoise::Method;
pub use grid_graph::{GridSpec, NeighborGraph, SparseLaplacian};
pub use noise::{FunctionSpec, NoiseModel};
pub use unwrap::UnwrapMethod;

pub type Samples = angular::Mod1Samples<f64>;
pub type Embedding = angular::CircleEmbedding<f64>;
pub type Problem<'a> = trs::TrsProblem<'a, f64>;
pub type Solution = trs::TrsSolution<f64>;
pub type Phases = manifold::PhaseState<f64>;
pub type BmFactors = manifold::BmState<f64>;
pub type Options = manifold::SolverOptions<f64>;
pub type Config = denoise::DenoiseConfig<f64>;
pub type Alignment = eval::ShiftAlignment<f64>;
