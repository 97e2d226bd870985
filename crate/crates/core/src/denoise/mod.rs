//! Image-domain denoising of delay-angle magnitudes.

pub mod cnn;
pub mod dataset;
pub mod filters;
pub mod image;
pub mod metrics;
pub mod train;
pub mod weights_io;

use std::fmt;
use std::sync::Arc;

pub use cnn::{cnn_denoise, cnn_forward, Architecture, DenoiserWeights};
pub use dataset::{make_training_set, DatasetParams, TrainingPair};
pub use filters::{mean_filter, median_filter};
pub use image::{back_map, from_image, magnitude_to_image, to_image, ImageEquivalent, NormRecord};
pub use metrics::{image_equivalent_snr, relative_snr_gain};
pub use train::{cnn_train, TrainConfig, TrainReport};
pub use weights_io::{decode_weights, encode_weights, load_weights, save_weights};

use crate::error::Result;
use crate::{CMatrix, RMatrix};

/// Denoiser applied to the normalized magnitude image.
#[derive(Clone)]
pub enum Denoiser {
    None,
    Mean { kernel: usize },
    Median { kernel: usize },
    Cnn(Arc<DenoiserWeights>),
}

impl fmt::Debug for Denoiser {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => write!(f, "None"),
            Self::Mean { kernel } => write!(f, "Mean({kernel})"),
            Self::Median { kernel } => write!(f, "Median({kernel})"),
            Self::Cnn(w) => write!(f, "Cnn(D={}, C={})", w.arch.depth, w.arch.channels),
        }
    }
}

impl Denoiser {
    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Mean { .. } => "mean",
            Self::Median { .. } => "median",
            Self::Cnn(_) => "cnn",
        }
    }

    /// Denoise a `[0, 1]` image. `noise_level` (image units) is used only by
    /// networks with a noise-level input channel.
    pub fn apply_image(&self, img: &RMatrix, noise_level: f64) -> Result<RMatrix> {
        let out = match self {
            Self::None => img.clone(),
            Self::Mean { kernel } => mean_filter(img, *kernel)?,
            Self::Median { kernel } => median_filter(img, *kernel)?,
            Self::Cnn(w) => cnn_denoise(img, w, w.arch.noise_channel.then_some(noise_level))?,
        };
        Ok(out.mapv(|v| v.clamp(0.0, 1.0)))
    }

    /// `|G|` -> image -> denoise -> back to magnitudes. `sigma` is the
    /// per-entry noise standard deviation of `G`.
    pub fn denoise_magnitudes(&self, g: &CMatrix, sigma: f64) -> Result<RMatrix> {
        let image = to_image(g);
        if image.degenerate || matches!(self, Self::None) {
            return Ok(from_image(&image));
        }
        let level = sigma / image.norm.span();
        Ok(back_map(&self.apply_image(&image.img, level)?, &image.norm))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::magnitude;
    use crate::C64;

    #[test]
    fn none_returns_magnitudes() {
        let g = CMatrix::from_shape_fn((4, 5), |(i, j)| C64::new(i as f64, -(j as f64)));
        let out = Denoiser::None.denoise_magnitudes(&g, 0.1).unwrap();
        for (a, b) in out.iter().zip(magnitude(&g).iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_network_behaves_like_none() {
        let g = CMatrix::from_shape_fn((12, 12), |(i, j)| C64::new((i * j) as f64 * 0.1, 1.0));
        let net = Arc::new(DenoiserWeights::zeros(Architecture::desk()).unwrap());
        let a = Denoiser::Cnn(net).denoise_magnitudes(&g, 0.1).unwrap();
        let b = Denoiser::None.denoise_magnitudes(&g, 0.1).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn filtered_output_stays_in_magnitude_range() {
        let g = CMatrix::from_shape_fn((9, 9), |(i, j)| C64::new(((i * 7 + j * 3) % 5) as f64, 0.0));
        for d in [Denoiser::Mean { kernel: 3 }, Denoiser::Median { kernel: 3 }] {
            let out = d.denoise_magnitudes(&g, 0.0).unwrap();
            assert!(out.iter().all(|v| (0.0..=4.0 + 1e-12).contains(v)));
        }
    }
}
