use super::matching::{bin_offsets, PathMatch};
use crate::channel::PathSignature;
use crate::{SystemConfig, C64};

/// Below this `|θ|` (and `τΔ`) the squared error is taken unnormalized.
pub const NMSE_GUARD: f64 = 1e-4;

/// `(1/L̃) Σ (|θ̂-θ|²/θ² + |τ̂-τ|²/τ²)` over matched pairs; `None` without
/// matches. Differences are circular. Truths with `|θ| < 1e-4` use the plain
/// squared error in cycles, truths with `τΔ < 1e-4` the squared error in
/// units of the delay window `1/Δ`.
pub fn nmse_sig(truth: &[PathSignature], estimates: &[(f64, f64)], matching: &PathMatch, cfg: &SystemConfig) -> Option<f64> {
    if matching.pairs.is_empty() {
        return None;
    }
    let window = cfg.max_unaliased_delay();
    let total: f64 = matching
        .pairs
        .iter()
        .map(|&(t, e)| {
            let p = &truth[t];
            let (db_theta, db_tau) = bin_offsets((p.theta, p.tau), estimates[e], cfg);
            let dtheta = db_theta / cfg.antennas as f64;
            let dtau_frac = db_tau / cfg.subcarriers as f64;
            let a = if p.theta.abs() < NMSE_GUARD { dtheta * dtheta } else { (dtheta / p.theta).powi(2) };
            let tau_frac = p.tau / window;
            let b = if tau_frac < NMSE_GUARD { dtau_frac * dtau_frac } else { (dtau_frac / tau_frac).powi(2) };
            a + b
        })
        .sum();
    Some(total / matching.pairs.len() as f64)
}

/// Per-trial DMSE term `NMSE / (1 + N_F)`.
pub fn dmse_term(nmse: f64, n_false: usize) -> f64 {
    nmse / (1.0 + n_false as f64)
}

/// Mean of the per-trial terms; trials without matches (`None`) are skipped.
/// Returns the mean and the number of skipped trials.
pub fn dmse(terms: &[Option<f64>]) -> (f64, usize) {
    let vals: Vec<f64> = terms.iter().flatten().copied().collect();
    let skipped = terms.len() - vals.len();
    if vals.is_empty() {
        return (f64::NAN, skipped);
    }
    (vals.iter().sum::<f64>() / vals.len() as f64, skipped)
}

/// Counts from one trial for [`path_error_proportions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathCounts {
    pub l: usize,
    pub l_hat: usize,
    pub n_false: usize,
    pub n_miss: usize,
}

/// `(Σ false / Σ L̂, Σ missed / Σ L)`.
pub fn path_error_proportions(trials: &[PathCounts]) -> (f64, f64) {
    let sum = |f: fn(&PathCounts) -> usize| trials.iter().map(f).sum::<usize>() as f64;
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    (ratio(sum(|t| t.n_false), sum(|t| t.l_hat)), ratio(sum(|t| t.n_miss), sum(|t| t.l)))
}

/// `Σ|α̂-α|² / Σ|α|²` over matched pairs.
pub fn gain_nmse(truth: &[PathSignature], gains: &[C64], matching: &PathMatch) -> Option<f64> {
    if matching.pairs.is_empty() {
        return None;
    }
    let (num, den) = matching.pairs.iter().fold((0.0, 0.0), |(n, d), &(t, e)| {
        (n + (gains[e] - truth[t].alpha).norm_sqr(), d + truth[t].alpha.norm_sqr())
    });
    Some(if den > 0.0 { num / den } else { num })
}
