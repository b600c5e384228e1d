//! Coupled hyperbolic random walks and Brownian paths, the Dirac operators
//! they drive, and the spectra of those operators.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod couple;
pub mod config;
pub mod dirac;
pub mod dist;
pub mod error;
pub mod experiments;
pub mod hgeom;
pub mod linalg;
pub mod manifest;
pub mod paths;
pub mod quad;
pub mod rng;
pub mod spectrum;
pub mod stats;
pub mod svg;
pub mod tol;

pub use error::{Error, Result};
