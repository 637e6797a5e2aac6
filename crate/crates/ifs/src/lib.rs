//! Affine iterated function systems on ℝ^m: explicit contraction pairs,
//! Hutchinson attractors, grid-certified minimality with dense-branch
//! construction, strong-robustness trials over perturbed family sequences,
//! and fiber-contracting skew products over shift spaces (symbolic
//! blenders) with a topological-mixing probe.
//!
//! Start with the runnable examples (`cargo run --example construct`) or
//! the `ifs` binary, which exposes each stage as a subcommand.

pub mod affine;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod hutchinson;
pub mod maps;
pub mod minimality;
pub mod symbolic;

pub use error::{IfsError, Result};

/// Library version string.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
