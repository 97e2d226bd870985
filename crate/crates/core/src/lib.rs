//! Signature estimation for dual-wideband mmWave massive-MIMO uplink channels.
//!
//! The crate covers the whole chain from scene synthesis to evaluation:
//!
//! * [`channel`] builds space-frequency channels `H` from path signatures
//!   (spatial frequency, delay, complex gain) including the beam-squint
//!   phase-shift matrix.
//! * [`transform`] maps `H` to the delay-angle domain `G` with a unitary
//!   2-D DFT and provides the fine-rotation diagonals.
//! * [`link`] transmits a QPSK preamble over the channel with AWGN and forms
//!   the least-squares channel estimate.
//! * [`denoise`] normalizes `|G|` to an image, filters it (mean, median or a
//!   residual CNN trained here) and scores it with the image-equivalent SNR.
//! * [`cluster`] prepares a point set by hard thresholding, counts paths with
//!   local-gravitation clustering (or k-means + elbow) and scores clusterings.
//! * [`estimate`] runs the coarse-to-fine loop and the DMSE / NMSE metrics.

pub mod channel;
pub mod cluster;
pub mod config;
pub mod denoise;
pub mod error;
pub mod estimate;
pub mod link;
pub mod matrix_io;
pub mod rng;
pub mod transform;

pub use config::SystemConfig;
pub use error::{Error, Result};

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex64;
/// Complex `rows x cols` matrix (space-frequency or delay-angle).
pub type CMatrix = ndarray::Array2<C64>;
/// Real `rows x cols` matrix (magnitudes, images).
pub type RMatrix = ndarray::Array2<f64>;
