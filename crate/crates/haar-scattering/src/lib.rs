//! Haar scattering on graphs.
//!
//! A Haar scattering transform summarizes a signal on a graph through a
//! deep cascade of pairwise sums and absolute differences driven by a
//! multiresolution approximation of the vertex set. The crate covers:
//!
//! * [`multires`] — multiresolution approximations, grid constructions,
//!   connectivity scoring against a ground-truth graph;
//! * [`scattering`] — the cascade, order indexing and truncation, and the
//!   boolean or/xor variant;
//! * [`haar_wavelet`] — the orthogonal Haar basis of a multiresolution,
//!   used as an independent route to the same coefficients;
//! * [`pairing_learn`] — unsupervised learning of multiresolutions by
//!   exact minimum-weight perfect matching of total-variation costs;
//! * [`reconstruct`] — interlaced multiresolution families and exact
//!   inversion of the transform;
//! * [`features`] — greedy partial-least-squares feature selection with
//!   Gram-Schmidt orthogonalization;
//! * [`classify`] — a Gaussian-kernel one-versus-all classifier head;
//! * [`datasets`] — IDX image I/O, scrambling, grid and sphere
//!   geometries, synthetic signal generators;
//! * [`cli`] — configuration and the subcommands behind the `haarscat`
//!   binary.

pub mod classify;
pub mod cli;
pub mod datasets;
pub mod error;
pub mod features;
pub mod haar_wavelet;
pub mod multires;
pub mod pairing_learn;
pub mod reconstruct;
pub mod scattering;

pub use error::{Error, Result};
pub use multires::{connectivity_fraction, grid_multires, Graph, MultiresApprox, Pairing};
pub use scattering::{transform, ScatteringTensor};
