//! Linked aggregate face codes.
//!
//! A face image is sampled on a sparse grid of facial points. At every point a
//! bank of 36 Gabor filters (3 wavenumbers, 6 orientations, even and odd phase)
//! is applied, and the even/odd pairs are combined into 18 phase-insensitive
//! amplitudes: the *jet* at that point. Two faces are compared by averaging the
//! normalized dot product of corresponding jets.
//!
//! Alongside the face model the crate carries the behavioral analysis used to
//! compare it with people: triad generation and prediction, concordance,
//! subject-level bootstrap, Spearman correlation, rating normalization and
//! nonmetric multidimensional scaling.
//!
//! ```no_run
//! use lac::{gabor::{BankParams, FilterBank}, graph::{FaceCode, FaceGraph}, imageio, similarity};
//!
//! let bank = FilterBank::new(&BankParams::default())?;
//! let grid = FaceGraph::regular_grid(7, 7, (32.0, 32.0), 10.0)?;
//! let a = FaceCode::extract("a", &imageio::load_image("a.pgm")?, &grid, &bank)?;
//! let b = FaceCode::extract("b", &imageio::load_image("b.pgm")?, &grid, &bank)?;
//! println!("{}", similarity::lac_similarity(&a, &b)?);
//! # Ok::<(), lac::Error>(())
//! ```

pub mod cli;
pub mod config;
mod error;
pub mod gabor;
pub mod graph;
pub mod imageio;
pub mod nmds;
pub mod numfmt;
pub mod rng;
pub mod session;
pub mod similarity;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
