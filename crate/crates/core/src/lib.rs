//! Data-driven model reduction for elliptic PDEs with random multiscale coefficients.
//!
//! The offline stage solves the PDE for sampled coefficients ([`snapshots`]),
//! extracts a POD basis from the snapshot correlation matrix ([`pod`]) and
//! fits maps from random inputs to basis coefficients ([`maps`], [`resnet`]).
//! The online stage reconstructs new solutions from those maps, from a
//! reduced Galerkin system ([`galerkin`]) or from point measurements at
//! pivoted-QR sensor locations ([`sensing`]). [`separability`] measures the
//! singular-value decay of discrete Green's function blocks.

pub mod cli;
pub mod coeff;
pub mod error;
pub mod fem;
pub mod galerkin;
mod io;
pub mod maps;
pub mod mesh;
pub mod pod;
pub mod resnet;
pub mod sensing;
pub mod separability;
pub mod snapshots;
pub mod sparse;

pub use error::{Error, Result};
