//! Free-energy estimation for Ising models and binary Markov random fields
//! from small random vertex samples.
//!
//! The library is organized around one pipeline:
//!
//! 1. [`model`] — dense Ising models `P(x) ∝ exp(xᵀJx + h·x)` on `{±1}^n`,
//!    sparse higher-order fields, exact (enumeration and closed-form)
//!    free-energy oracles, and the `n/q`-rescaled restriction of a model to a
//!    vertex sample.
//! 2. [`meanfield`] — the naive mean-field variational free energy
//!    `F* = max_{x ∈ [-1,1]^n} xᵀJx + h·x + Σᵢ H((1+xᵢ)/2)` via multi-start
//!    coordinate ascent, with a-priori bounds on the gap `F − F*`.
//! 3. [`regularity`] — weak-regularity cut decompositions `J ≈ Σᵢ dᵢ 1_{Rᵢ}1_{Cᵢ}ᵀ`
//!    with certified `∞→1`-norm residuals.
//! 4. [`maxent`] — box-constrained max-entropy programs over cut decompositions,
//!    solved through a bounded smooth dual, plus the grid search that turns a
//!    decomposition into a variational free-energy value.
//! 5. [`sampler`] — the sampling estimator: restrict to a random `q`-subset,
//!    rescale by `n/q`, take the median over repeats.
//! 6. [`magnet`] — mean magnetization from three free-energy oracle calls.
//! 7. [`lowerbound`] — the dense pair construction showing that o(n²)
//!    coefficient probes cannot approximate the free energy of unnormalized
//!    dense models.
//! 8. [`harness`] — instance generators and the reproducible experiment suite
//!    used by the CLI.
//!
//! All randomized routines take an explicit 64-bit seed and derive named
//! substreams from it (see [`rng`]), so every result in the crate — including
//! the experiment CSV outputs — is reproducible bit-for-bit for a fixed seed,
//! independent of thread count.

#![forbid(unsafe_code)]
// Parameter guards are written `!(x >= lo)` on purpose: unlike `x < lo`,
// the negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod io;
pub mod lowerbound;
pub mod magnet;
pub mod maxent;
pub mod meanfield;
pub mod model;
pub mod regularity;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use model::{IsingModel, Model, ModelNorms, Mrf};
