//! Monte Carlo simulation of how merging heterogeneous article sets
//! attenuates the Spearman correlation between quality scores and
//! citation counts.
//!
//! The pipeline: [`quality`] fixes how many articles sit at each quality
//! level and what each level's expected citation count is; [`citation`]
//! draws discretised lognormal counts and searches for the spread that
//! gives a target within-set correlation; [`engine`] merges sets and
//! aggregates the combined correlation over iterations and grids;
//! [`inversion`] runs that forward model backwards.
//!
//! With the default `parallel` feature, sweeps and iterations run on rayon.
//! Output is identical to serial execution because every random stream is
//! seeded from its grid position ([`seed`]).

pub mod citation;
pub mod cli;
pub mod engine;
pub mod error;
pub mod inversion;
pub mod quality;
pub mod results;
pub mod runspec;
pub mod seed;
pub mod stats;
pub mod svg;

pub use error::{Error, Result};
