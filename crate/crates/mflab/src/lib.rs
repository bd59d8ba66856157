//! # mflab
//!
//! A numerical laboratory for convolutional filtering on sampled manifolds.
//!
//! The crate builds kernel graphs from points sampled off analytic manifolds
//! (circle, flat torus), decomposes their Laplacians, and applies spectral
//! filters on both the graph and the manifold side so the approximation error
//! can be measured against closed-form ground truth. On top of that sit
//! convergence-rate experiments with log-log slope fitting and a navigation
//! control task where layered graph filters learn shortest-path direction
//! fields.
//!
//! Everything randomized takes an explicit 64-bit seed; identical
//! configurations produce byte-identical experiment reports regardless of
//! thread count.

pub mod convergence;
pub mod error;
pub mod filters;
pub mod graph;
pub mod linalg;
pub mod manifold;
pub mod navigation;
pub mod report;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
