//! Beam pattern design for single-user massive MIMO in the spherical-mode domain.
//!
//! The crate computes optimal analog beam patterns as spherical mode coefficient
//! (SMC) vectors by alternating eigen-optimization at the base station (BS) and
//! the user equipment (UE), projects them onto patterns that a constrained
//! current surface can radiate, and evaluates conventional DFT-codebook hybrid
//! beamforming baselines on the same channel model.
//!
//! Lengths are in wavelengths throughout, so the wavenumber is `2π`.
//!
//! The crate is `no_std` compatible (with `alloc`) when the default `std`
//! feature is disabled.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod angular_profile;
pub mod capacity;
pub mod conventional;
pub mod correlation;
pub mod linalg;
pub mod obpb;
pub mod special;
pub mod spherical_modes;
pub mod surface_projection;

pub use faer::{c64, Mat};

/// Wavenumber for lengths measured in wavelengths.
pub const K0: f64 = 2.0 * core::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid mode index (s={s}, m={m}, n={n})")]
    InvalidMode { s: u8, m: i32, n: u32 },
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("negative marginal profile value at node {0}")]
    NegativeMarginal(usize),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("zero diagonal entry at {0}")]
    ZeroDiagonal(usize),
    #[error("eigendecomposition failed")]
    Eigen,
    #[error("singular value decomposition failed")]
    Svd,
    #[error("transfer matrix is identically zero")]
    ZeroTransfer,
    #[error("requested {requested} beams but only {available} are available")]
    TooManyBeams { requested: usize, available: usize },
    #[error("index out of range: {0}")]
    OutOfRange(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
