//! The coarse-to-fine signature estimation loop and its error metrics.
//!
//! [`estimate_all`] runs: LS estimate, delay-angle transform, magnitude
//! denoising, threshold, clustering, then per cluster the coarse peak,
//! beam-squint compensation, rotation search and final `(θ̂, τ̂)`, and a
//! joint least-squares fit of the gains.

pub mod fine;
pub mod gains;
pub mod matching;
pub mod metrics;

use std::fmt::Write as _;

pub use fine::{
    coarse_bins, fine_rotation, finalize_signature, remove_dual_wideband, squint_candidates, strongest_bin, CoarseBin,
    Rotation,
};
pub use gains::{estimate_gains, GainFit};
pub use matching::{hungarian, match_paths, PathMatch};
pub use metrics::{dmse, dmse_term, gain_nmse, nmse_sig, path_error_proportions, PathCounts};

use crate::channel::{path_atom, wrap_half, ChannelRealization, WidebandModel};
use crate::cluster::{ClusterDataset, Clusterer, Clustering, LgcParams, Threshold};
use crate::denoise::Denoiser;
use crate::error::Result;
use crate::link::{ls_estimate, Preamble, ReceivedFrame};
use crate::transform::Dft2;
use crate::{CMatrix, RMatrix, SystemConfig, C64};

/// Pipeline switches.
#[derive(Debug, Clone)]
pub struct EstimateOptions {
    pub denoiser: Denoiser,
    pub threshold: Threshold,
    pub clusterer: Clusterer,
    pub r_m: usize,
    pub r_n: usize,
    /// Remove the beam-squint phase before the rotation search. Off gives
    /// the temporal-wideband-only baseline.
    pub compensate: bool,
    /// Subtract each estimated path before refining the next one.
    pub sic: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            denoiser: Denoiser::None,
            threshold: Threshold::Percentile(95.0),
            clusterer: Clusterer::Lgc(LgcParams::default()),
            r_m: 15,
            r_n: 15,
            compensate: true,
            sic: false,
        }
    }
}

impl EstimateOptions {
    fn model(&self) -> WidebandModel {
        if self.compensate {
            WidebandModel::Dual
        } else {
            WidebandModel::TemporalOnly
        }
    }
}

/// One estimated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineSignature {
    pub coarse: CoarseBin,
    pub delta_m: f64,
    pub delta_n: f64,
    pub theta: f64,
    /// `θ̂` moved by a whole cycle when the peak was found across the band
    /// edge; the squint phase (and so the gain fit) depends on this value.
    pub squint_theta: f64,
    pub tau: f64,
    pub alpha: C64,
    pub objective: f64,
}

/// Everything the pipeline produced for one frame.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub h_hat: CMatrix,
    /// Denoised, back-mapped `|G|`.
    pub g_denoised: RMatrix,
    pub dataset: ClusterDataset,
    pub clustering: Clustering,
    pub signatures: Vec<FineSignature>,
    pub gains_rank_deficient: bool,
}

impl PipelineOutput {
    pub fn l_hat(&self) -> usize {
        self.signatures.len()
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.signatures.iter().map(|s| (s.theta, s.tau)).collect()
    }

    pub fn gains(&self) -> Vec<C64> {
        self.signatures.iter().map(|s| s.alpha).collect()
    }

    /// `cluster,m,n,delta_m,delta_n,theta_hat,tau_hat_s,alpha_re,alpha_im`.
    pub fn signature_csv(&self) -> String {
        let mut s = String::from("cluster,m,n,delta_m,delta_n,theta_hat,tau_hat_s,alpha_re,alpha_im\n");
        for f in &self.signatures {
            let _ = writeln!(
                s,
                "{},{},{},{:e},{:e},{:.10},{:e},{:e},{:e}",
                f.coarse.cluster, f.coarse.m, f.coarse.n, f.delta_m, f.delta_n, f.theta, f.tau, f.alpha.re, f.alpha.im
            );
        }
        s
    }
}

/// Full pipeline on a received preamble.
pub fn estimate_all(
    frame: &ReceivedFrame,
    preamble: &Preamble,
    cfg: &SystemConfig,
    dft: &Dft2,
    opts: &EstimateOptions,
) -> Result<PipelineOutput> {
    let h_hat = ls_estimate(frame, preamble)?;
    estimate_from_channel(h_hat, frame.sigma2.sqrt(), cfg, dft, opts)
}

/// Pipeline from an LS channel estimate onwards. `sigma` is the per-entry
/// noise standard deviation of `ĥ` (only used by known-variance networks).
pub fn estimate_from_channel(
    h_hat: CMatrix,
    sigma: f64,
    cfg: &SystemConfig,
    dft: &Dft2,
    opts: &EstimateOptions,
) -> Result<PipelineOutput> {
    let g = dft.to_delay_angle(&h_hat)?;
    let g_denoised = opts.denoiser.denoise_magnitudes(&g, sigma)?;
    estimate_from_magnitudes(h_hat, g_denoised, cfg, dft, opts)
}

/// Pipeline after denoising: `g_denoised` are the back-mapped magnitudes
/// of `ĥ`'s delay-angle transform. `opts.denoiser` is ignored.
///
/// Squint compensation moves a path's peak, so each cluster's coarse bin is
/// looked up again on the compensated transform (restricted to the
/// cluster's support) before the rotation search.
pub fn estimate_from_magnitudes(
    h_hat: CMatrix,
    g_denoised: RMatrix,
    cfg: &SystemConfig,
    dft: &Dft2,
    opts: &EstimateOptions,
) -> Result<PipelineOutput> {
    let dataset = opts.threshold.apply(&g_denoised)?;
    let clustering = opts.clusterer.run(&dataset);
    let mut bins = coarse_bins(&g_denoised, &dataset, &clustering);
    if opts.sic {
        bins.sort_by(|a, b| g_denoised[[b.m, b.n]].total_cmp(&g_denoised[[a.m, a.n]]));
    }

    let model = opts.model();
    let supports = clustering.supports();
    let mut residual = h_hat.clone();
    let mut signatures = Vec::with_capacity(bins.len());
    for bin in bins {
        let members: Vec<(usize, usize)> = supports[bin.cluster]
            .iter()
            .map(|&i| (dataset.points[i].i, dataset.points[i].j))
            .collect();
        let source = if opts.sic { &residual } else { &h_hat };
        let candidates = if opts.compensate { squint_candidates(bin.m, cfg) } else { vec![0.0] };
        let mut best: Option<(usize, usize, Rotation, f64)> = None;
        for theta_c in candidates {
            let (m, n, rot, near) = if opts.compensate {
                let h_tilde = remove_dual_wideband(source, theta_c, cfg);
                let (m, n) = strongest_bin(&dft.to_delay_angle(&h_tilde)?, &members).unwrap_or((bin.m, bin.n));
                let first = fine_rotation(&h_tilde, m, n, opts.r_m, opts.r_n);
                // Second pass with the squint of the refined angle removed.
                let (theta_1, _) = finalize_signature(m, n, first.delta_m, first.delta_n, cfg);
                let theta_1 = theta_c + wrap_half(theta_1 - theta_c);
                let h_tilde = remove_dual_wideband(source, theta_1, cfg);
                (m, n, fine_rotation(&h_tilde, m, n, opts.r_m, opts.r_n), theta_c)
            } else {
                (bin.m, bin.n, fine_rotation(source, bin.m, bin.n, opts.r_m, opts.r_n), 0.0)
            };
            if best.as_ref().is_none_or(|b| rot.objective > b.2.objective) {
                best = Some((m, n, rot, near));
            }
        }
        let (m, n, rot, theta_c) = best.expect("at least one candidate");
        let (theta, tau) = finalize_signature(m, n, rot.delta_m, rot.delta_n, cfg);
        let squint_theta = theta_c + wrap_half(theta - theta_c);
        if opts.sic {
            let atom = path_atom(squint_theta, tau, cfg, model);
            let energy: f64 = atom.iter().map(|v| v.norm_sqr()).sum();
            let proj: C64 = atom.iter().zip(residual.iter()).map(|(a, r)| a.conj() * r).sum::<C64>() / energy;
            residual.zip_mut_with(&atom, |r, a| *r -= proj * a);
        }
        signatures.push(FineSignature {
            coarse: CoarseBin { m, n, cluster: bin.cluster },
            delta_m: rot.delta_m,
            delta_n: rot.delta_n,
            theta,
            squint_theta,
            tau,
            alpha: C64::new(0.0, 0.0),
            objective: rot.objective,
        });
    }

    let pairs: Vec<(f64, f64)> = signatures.iter().map(|s| (s.squint_theta, s.tau)).collect();
    let fit = estimate_gains(&h_hat, &pairs, cfg, model);
    for (s, a) in signatures.iter_mut().zip(&fit.alpha) {
        s.alpha = *a;
    }
    Ok(PipelineOutput { h_hat, g_denoised, dataset, clustering, signatures, gains_rank_deficient: fit.rank_deficient })
}

/// Score one pipeline output against the true scene.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationReport {
    pub matching: PathMatch,
    pub counts: PathCounts,
    pub nmse: Option<f64>,
    pub dmse_term: Option<f64>,
    pub gain_nmse: Option<f64>,
}

pub fn evaluate(truth: &ChannelRealization, out: &PipelineOutput, gate_bins: f64, cfg: &SystemConfig) -> EstimationReport {
    let est = out.pairs();
    let matching = match_paths(&truth.paths, &est, gate_bins, cfg);
    let nmse = nmse_sig(&truth.paths, &est, &matching, cfg);
    let counts = PathCounts { l: truth.len(), l_hat: est.len(), n_false: matching.n_false, n_miss: matching.n_miss };
    EstimationReport {
        nmse,
        dmse_term: nmse.map(|v| dmse_term(v, matching.n_false)),
        gain_nmse: gain_nmse(&truth.paths, &out.gains(), &matching),
        counts,
        matching,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{synthesize_channel_with, PathSignature};

    #[test]
    fn noiseless_on_grid_scene_is_recovered_exactly() {
        let cfg = SystemConfig { antennas: 32, subcarriers: 32, delay_spread_s: 4e-9, ..SystemConfig::full_scale() };
        let dft = Dft2::new(32, 32);
        let truth = ChannelRealization::new(vec![
            PathSignature::on_grid(4, 3, C64::new(1.0, 0.2), &cfg),
            PathSignature::on_grid(-9, 12, C64::new(-0.5, 0.6), &cfg),
            PathSignature::on_grid(14, 20, C64::new(0.3, -0.8), &cfg),
        ]);
        let h = synthesize_channel_with(&truth, &cfg, WidebandModel::TemporalOnly).unwrap();
        let opts = EstimateOptions { threshold: Threshold::Energy, compensate: false, ..Default::default() };
        let out = estimate_from_channel(h, 0.0, &cfg, &dft, &opts).unwrap();
        assert_eq!(out.l_hat(), 3);
        let report = evaluate(&truth, &out, 3.0, &cfg);
        assert_eq!(report.matching.pairs.len(), 3);
        for &(t, e) in &report.matching.pairs {
            let (p, s) = (&truth.paths[t], &out.signatures[e]);
            assert!((p.theta - s.theta).abs() < 1e-8 && (p.tau - s.tau).abs() < 1e-8 * cfg.delay_bin());
            assert!((p.alpha - s.alpha).norm() < 1e-8);
        }
        assert!(report.nmse.unwrap() < 1e-16);
        let csv = out.signature_csv();
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn empty_dataset_gives_no_paths() {
        let cfg = SystemConfig { antennas: 8, subcarriers: 8, delay_spread_s: 1e-9, ..SystemConfig::full_scale() };
        let out = estimate_from_channel(CMatrix::zeros((8, 8)), 0.0, &cfg, &Dft2::new(8, 8), &EstimateOptions::default()).unwrap();
        assert_eq!(out.l_hat(), 0);
        assert!(out.dataset.degenerate);
    }
}
