//! Noisy/clean image patches for training the residual denoiser.

use rand::Rng;

use super::image::{magnitude_to_image, normalize_with};
use crate::channel::{draw_random_scene, synthesize_channel, SceneParams};
use crate::error::Result;
use crate::link::{apply_channel_awgn, generate_preamble, ls_estimate};
use crate::transform::{magnitude, Dft2};
use crate::{RMatrix, SystemConfig};

/// One training example. Both images share the noisy frame's normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub noisy: RMatrix,
    pub clean: RMatrix,
    /// Noise standard deviation in image units (for the known-variance net).
    pub noise_level: f64,
    pub snr_db: f64,
}

/// How training frames are drawn and cropped.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetParams {
    /// Square crop side; `None` keeps whole frames.
    pub patch: Option<usize>,
    /// Crops taken from every frame.
    pub patches_per_frame: usize,
    pub scene: SceneParams,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self { patch: Some(40), patches_per_frame: 4, scene: SceneParams::default() }
    }
}

/// Full-frame pair `(noisy image, clean image, noise level)` at one SNR.
pub fn make_frame_pair<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SystemConfig,
    dft: &Dft2,
    scene: &SceneParams,
    snr_db: f64,
) -> Result<TrainingPair> {
    let realization = draw_random_scene(rng, cfg, scene);
    let h = synthesize_channel(&realization, cfg)?;
    let preamble = generate_preamble(rng, cfg.subcarriers);
    let frame = apply_channel_awgn(&h, &preamble, snr_db, rng)?;
    let h_hat = ls_estimate(&frame, &preamble)?;
    let clean_mag = magnitude(&dft.to_delay_angle(&h)?);
    let noisy = magnitude_to_image(&magnitude(&dft.to_delay_angle(&h_hat)?));
    let clean = normalize_with(&clean_mag, &noisy.norm);
    let span = noisy.norm.span();
    let noise_level = if span > 0.0 { frame.sigma2.sqrt() / span } else { 0.0 };
    Ok(TrainingPair { noisy: noisy.img, clean, noise_level, snr_db })
}

/// Draw `count` frames with SNR uniform in `snr_range` and crop patches.
pub fn make_training_set<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SystemConfig,
    count: usize,
    snr_range: (f64, f64),
    params: &DatasetParams,
) -> Result<Vec<TrainingPair>> {
    cfg.validate()?;
    let dft = Dft2::new(cfg.antennas, cfg.subcarriers);
    let (rows, cols) = cfg.shape();
    let mut out = Vec::with_capacity(count * params.patches_per_frame.max(1));
    for _ in 0..count {
        let snr = if snr_range.1 > snr_range.0 { rng.random_range(snr_range.0..=snr_range.1) } else { snr_range.0 };
        let pair = make_frame_pair(rng, cfg, &dft, &params.scene, snr)?;
        match params.patch {
            Some(p) if p < rows || p < cols => {
                let (ph, pw) = (p.min(rows), p.min(cols));
                for _ in 0..params.patches_per_frame {
                    let y0 = rng.random_range(0..=rows - ph);
                    let x0 = rng.random_range(0..=cols - pw);
                    let crop = |m: &RMatrix| m.slice(ndarray::s![y0..y0 + ph, x0..x0 + pw]).to_owned();
                    out.push(TrainingPair { noisy: crop(&pair.noisy), clean: crop(&pair.clean), ..pair.clone() });
                }
            }
            _ => out.push(pair),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn small_cfg() -> SystemConfig {
        SystemConfig { antennas: 32, subcarriers: 32, delay_spread_s: 2e-9, ..SystemConfig::full_scale() }
    }

    #[test]
    fn very_high_snr_pairs_coincide() {
        let params = DatasetParams { patch: Some(16), ..Default::default() };
        let set = make_training_set(&mut rng::seeded(1), &small_cfg(), 3, (300.0, 300.0), &params).unwrap();
        for p in &set {
            for (a, b) in p.noisy.iter().zip(p.clean.iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let params = DatasetParams::default();
        let a = make_training_set(&mut rng::seeded(5), &small_cfg(), 2, (-25.0, 0.0), &params).unwrap();
        let b = make_training_set(&mut rng::seeded(5), &small_cfg(), 2, (-25.0, 0.0), &params).unwrap();
        assert_eq!(a, b);
        let c = make_training_set(&mut rng::seeded(6), &small_cfg(), 2, (-25.0, 0.0), &params).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn whole_frames_when_patch_covers_frame() {
        let params = DatasetParams { patch: Some(64), ..Default::default() };
        let set = make_training_set(&mut rng::seeded(2), &small_cfg(), 2, (-10.0, -10.0), &params).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set[0].noisy.dim(), (32, 32));
    }
}
