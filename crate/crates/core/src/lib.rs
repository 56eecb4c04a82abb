//! Few-step generative modeling of amorphous atomic structures in periodic cells.
//!
//! The crate implements a complete desk-scale pipeline:
//!
//! - [`geometry`]: periodic-cell arithmetic, minimum-image displacements, and
//!   cutoff neighbor lists.
//! - [`model`]: the sample data model (cell, positions, element one-hots with a
//!   ghost class for density control) and property sets.
//! - [`extxyz`]: extended-XYZ persistence for samples and per-frame properties.
//! - [`autodiff`]: a minimal reverse-mode differentiation engine with a fixed,
//!   finite-difference-checked primitive set.
//! - [`denoiser`]: an equivariant message-passing denoiser with flexible
//!   property conditioning via null embeddings.
//! - [`diffusion`]: noise schedules, forward noising, and the drift
//!   parameterizations used for reverse-time integration.
//! - [`training`]: loss construction (including the step-size self-consistency
//!   loss), the optimization loop, and checkpointing.
//! - [`sampling`]: Euler–Maruyama and deterministic samplers, including the
//!   few-step shortcut sampler.
//! - [`analysis`]: radial/angular distribution functions, ring statistics,
//!   simple observables, and regression metrics.
//! - [`toy`]: a synthetic soft-sphere packing dataset with computable
//!   ground-truth properties.
//!
//! Everything is deterministic given a master seed: randomness is fanned out
//! through [`seeds::derive_seed`], and data-parallel loops (enabled by the
//! `parallel` feature, on by default) never change results.

pub mod analysis;
pub mod autodiff;
pub mod denoiser;
pub mod diffusion;
pub mod extxyz;
pub mod geometry;
pub mod model;
pub mod parallel;
pub mod sampling;
pub mod seeds;
pub mod tensor;
pub mod toy;
pub mod training;

mod error;

pub use error::{Error, Result};
