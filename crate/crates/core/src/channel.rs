//! Dual-wideband space-frequency channel synthesis.
//!
//! A path with spatial frequency `θ`, delay `τ` and gain `α` contributes
//! `α d(θ) c(τ)ᵀ ∘ S(θ)` to the `M x N` antenna/subcarrier matrix, where the
//! phase-shift matrix `S` carries the beam-squint coupling between antenna
//! index and subcarrier frequency.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::{CMatrix, C64};

/// One physical propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSignature {
    /// Spatial frequency `θ = d sin φ / λ_c` (cycles per element).
    pub theta: f64,
    /// Delay `τ` (s).
    pub tau: f64,
    /// Effective complex gain `α`.
    pub alpha: C64,
    /// Physical angle of arrival `φ` (rad), kept for reporting only.
    pub phi: Option<f64>,
}

impl PathSignature {
    pub fn new(theta: f64, tau: f64, alpha: C64) -> Self {
        Self { theta, tau, alpha, phi: None }
    }

    /// Path sitting exactly on DFT bin `(angle_bin, delay_bin)`.
    pub fn on_grid(angle_bin: isize, delay_bin: usize, alpha: C64, cfg: &SystemConfig) -> Self {
        let m = cfg.antennas as f64;
        let theta = wrap_half(angle_bin as f64 / m);
        Self::new(theta, delay_bin as f64 * cfg.delay_bin(), alpha)
    }
}

/// A static scene: the set of paths seen by one user.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelRealization {
    pub paths: Vec<PathSignature>,
}

impl ChannelRealization {
    pub fn new(paths: Vec<PathSignature>) -> Self {
        Self { paths }
    }

    /// Number of physical paths `L`.
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Which wideband effects the synthesized channel carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WidebandModel {
    /// Temporal and spatial wideband: the full `S(θ)` phase-shift matrix.
    Dual,
    /// Temporal wideband only, `S ≡ 1` (rank-L narrowband array model).
    TemporalOnly,
}

/// Wrap a spatial frequency into `[-1/2, 1/2)`.
pub fn wrap_half(x: f64) -> f64 {
    let w = x - x.floor();
    if w >= 0.5 {
        w - 1.0
    } else {
        w
    }
}

/// Direction (spatial beamforming) vector, entry `r = exp(-j2π r θ)`.
pub fn steering_direction(theta: f64, antennas: usize) -> Array1<C64> {
    Array1::from_shape_fn(antennas, |r| C64::from_polar(1.0, -TAU * r as f64 * theta))
}

/// Subcarrier (temporal beamforming) vector, entry `n = exp(-j2π n Δ τ)`.
pub fn steering_subcarrier(tau: f64, subcarriers: usize, spacing_hz: f64) -> Array1<C64> {
    Array1::from_shape_fn(subcarriers, |n| C64::from_polar(1.0, -TAU * n as f64 * spacing_hz * tau))
}

/// Beam-squint phase-shift matrix, entry `(r, n) = exp(-j2π r n Δ θ / f_c)`.
pub fn phase_shift_matrix(theta: f64, cfg: &SystemConfig) -> CMatrix {
    let k = -TAU * cfg.subcarrier_spacing() * theta / cfg.carrier_hz;
    Array2::from_shape_fn(cfg.shape(), |(r, n)| C64::from_polar(1.0, k * (r * n) as f64))
}

fn check_delay(path: &PathSignature, cfg: &SystemConfig) -> Result<()> {
    let limit = cfg.max_unaliased_delay();
    if path.tau.is_nan() || path.tau < 0.0 || path.tau >= limit {
        return Err(Error::DelayAliasing { tau: path.tau, limit });
    }
    Ok(())
}

/// Space-frequency channel `H = Σ α d(θ) c(τ)ᵀ ∘ S(θ)`.
pub fn synthesize_channel(realization: &ChannelRealization, cfg: &SystemConfig) -> Result<CMatrix> {
    synthesize_channel_with(realization, cfg, WidebandModel::Dual)
}

pub fn synthesize_channel_with(
    realization: &ChannelRealization,
    cfg: &SystemConfig,
    model: WidebandModel,
) -> Result<CMatrix> {
    let mut h = CMatrix::zeros(cfg.shape());
    for path in &realization.paths {
        check_delay(path, cfg)?;
        add_path_atom(&mut h, path.theta, path.tau, path.alpha, cfg, model);
    }
    Ok(h)
}

/// Accumulate `alpha * atom(θ, τ)` into `h`.
pub(crate) fn add_path_atom(
    h: &mut CMatrix,
    theta: f64,
    tau: f64,
    alpha: C64,
    cfg: &SystemConfig,
    model: WidebandModel,
) {
    let delta = cfg.subcarrier_spacing();
    let squint = match model {
        WidebandModel::Dual => delta * theta / cfg.carrier_hz,
        WidebandModel::TemporalOnly => 0.0,
    };
    for ((r, n), v) in h.indexed_iter_mut() {
        let (r, n) = (r as f64, n as f64);
        let phase = -TAU * (r * theta + n * delta * tau + r * n * squint);
        *v += alpha * C64::from_polar(1.0, phase);
    }
}

/// Unit-norm-free basis atom `d(θ) c(τ)ᵀ ∘ S(θ)` (or without `S`).
pub fn path_atom(theta: f64, tau: f64, cfg: &SystemConfig, model: WidebandModel) -> CMatrix {
    let mut h = CMatrix::zeros(cfg.shape());
    add_path_atom(&mut h, theta, tau, C64::new(1.0, 0.0), cfg, model);
    h
}

/// Scene statistics for [`draw_random_scene`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    pub min_paths: usize,
    pub max_paths: usize,
    /// Minimum pairwise separation in DFT bins, required in both angle
    /// (circularly) and delay. `None` disables the check.
    pub min_separation_bins: Option<f64>,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self { min_paths: 2, max_paths: 4, min_separation_bins: Some(2.0) }
    }
}

const MAX_SCENE_ATTEMPTS: usize = 10_000;

/// Random scene: `φ ~ U(-π/2, π/2)`, `τ` truncated-exponential on
/// `[0, τ_max]` with rate `3/τ_max`, `α ~ CN(0, 1/L)` so `E Σ|α|² = 1`.
pub fn draw_random_scene<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SystemConfig,
    params: &SceneParams,
) -> ChannelRealization {
    assert!(params.min_paths >= 1 && params.min_paths <= params.max_paths, "bad path range");
    let count = rng.random_range(params.min_paths..=params.max_paths);
    let mut paths = Vec::with_capacity(count);
    let mut attempts = 0;
    while paths.len() < count {
        let candidate = draw_path(rng, cfg, count);
        attempts += 1;
        let separated = match params.min_separation_bins {
            Some(sep) if attempts < MAX_SCENE_ATTEMPTS => {
                paths.iter().all(|p| bins_apart(p, &candidate, cfg, sep))
            }
            _ => true,
        };
        if separated {
            paths.push(candidate);
        }
    }
    ChannelRealization { paths }
}

fn draw_path<R: Rng + ?Sized>(rng: &mut R, cfg: &SystemConfig, count: usize) -> PathSignature {
    let phi = rng.random_range(-PI / 2.0..PI / 2.0);
    let theta = wrap_half(cfg.spatial_frequency(phi));
    let tau = truncated_exponential(rng, cfg.delay_spread_s);
    let scale = (0.5 / count as f64).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    PathSignature { theta, tau, alpha: C64::new(re * scale, im * scale), phi: Some(phi) }
}

fn truncated_exponential<R: Rng + ?Sized>(rng: &mut R, tau_max: f64) -> f64 {
    if tau_max <= 0.0 {
        return 0.0;
    }
    let rate = 3.0 / tau_max;
    let u: f64 = rng.random();
    let tau = -(1.0 - u * (1.0 - (-rate * tau_max).exp())).ln() / rate;
    tau.clamp(0.0, tau_max)
}

fn bins_apart(a: &PathSignature, b: &PathSignature, cfg: &SystemConfig, sep: f64) -> bool {
    let angle = wrap_half(a.theta - b.theta).abs() * cfg.antennas as f64;
    let delay = (a.tau - b.tau).abs() / cfg.delay_bin();
    angle >= sep && delay >= sep
}

/// Parse a scene file: one path per line `theta tau_seconds alpha_re alpha_im`,
/// `#` starts a comment.
pub fn parse_scene(text: &str) -> Result<ChannelRealization> {
    let mut paths = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Format {
                what: "scene file",
                detail: format!("line {}: expected 4 columns, found {}", lineno + 1, fields.len()),
            });
        }
        let mut v = [0.0; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|e| Error::Format {
                what: "scene file",
                detail: format!("line {}: {f:?}: {e}", lineno + 1),
            })?;
        }
        paths.push(PathSignature::new(v[0], v[1], C64::new(v[2], v[3])));
    }
    Ok(ChannelRealization { paths })
}

pub fn format_scene(realization: &ChannelRealization) -> String {
    let mut out = String::from("# theta tau_seconds alpha_re alpha_im\n");
    for p in &realization.paths {
        let _ = writeln!(out, "{:e} {:e} {:e} {:e}", p.theta, p.tau, p.alpha.re, p.alpha.im);
    }
    out
}

pub fn read_scene(path: &Path) -> Result<ChannelRealization> {
    parse_scene(&std::fs::read_to_string(path)?)
}

pub fn write_scene(path: &Path, realization: &ChannelRealization) -> Result<()> {
    std::fs::write(path, format_scene(realization))?;
    Ok(())
}
