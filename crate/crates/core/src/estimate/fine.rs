//! Coarse bin extraction, beam-squint compensation and the 2-D rotation
//! search around a coarse bin.

use std::f64::consts::TAU;

use crate::channel::{phase_shift_matrix, wrap_half};
use crate::cluster::{ClusterDataset, Clustering};
use crate::{CMatrix, RMatrix, SystemConfig, C64};

/// Coarse peak of one cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoarseBin {
    pub m: usize,
    pub n: usize,
    pub cluster: usize,
}

/// Per cluster, the support point with the largest value in `g_d`; ties go
/// to the smallest `(m, n)`. Empty supports are skipped.
pub fn coarse_bins(g_d: &RMatrix, dataset: &ClusterDataset, clustering: &Clustering) -> Vec<CoarseBin> {
    clustering
        .supports()
        .iter()
        .enumerate()
        .filter_map(|(cluster, members)| {
            let best = members
                .iter()
                .map(|&idx| dataset.points[idx])
                .map(|p| (p.i, p.j, g_d[[p.i, p.j]]))
                .max_by(|a, b| a.2.total_cmp(&b.2).then(b.0.cmp(&a.0)).then(b.1.cmp(&a.1)));
            if best.is_none() {
                log::warn!("cluster {cluster} has an empty support");
            }
            best.map(|(m, n, _)| CoarseBin { m, n, cluster })
        })
        .collect()
}

/// `H̃ = Ĥ ∘ S*(θ)`.
pub fn remove_dual_wideband(h_hat: &CMatrix, theta: f64, cfg: &SystemConfig) -> CMatrix {
    let s = phase_shift_matrix(theta, cfg);
    h_hat * &s.mapv(|v| v.conj())
}

/// Spatial frequencies to try when removing the beam squint of a peak seen
/// at angle bin `m`. Squint pushes a peak outward by up to `θ f_s / f_c`,
/// so near `±1/2` the observed bin may sit on the wrong side of the band
/// edge; the mirrored frequency is then tried too.
pub fn squint_candidates(m: usize, cfg: &SystemConfig) -> Vec<f64> {
    let theta = wrap_half(m as f64 / cfg.antennas as f64);
    let reach = 0.5 * cfg.bandwidth_hz / cfg.carrier_hz + 1.0 / cfg.antennas as f64;
    if theta.abs() >= 0.5 - reach {
        vec![theta, theta - theta.signum()]
    } else {
        vec![theta]
    }
}

/// Bin of largest `|g|` among `bins`; ties go to the earliest entry.
pub fn strongest_bin(g: &CMatrix, bins: &[(usize, usize)]) -> Option<(usize, usize)> {
    bins.iter().copied().fold(None, |best: Option<((usize, usize), f64)>, b| {
        let v = g[b].norm_sqr();
        match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((b, v)),
        }
    })
    .map(|(b, _)| b)
}

/// `R` uniform offsets on `[-1/(2K), 1/(2K)]`.
pub fn rotation_grid(k: usize, r: usize) -> Vec<f64> {
    let half = 0.5 / k as f64;
    if r < 2 {
        return vec![0.0];
    }
    (0..r).map(|i| -half + 2.0 * half * i as f64 / (r - 1) as f64).collect()
}

/// Normalized rotation objective
/// `|Σ_r Σ_n H̃[r,n] e^{j2π r(m/M+δm)} e^{j2π n(n0/N+δn)}|² / (MN)`.
pub fn rotation_objective(h: &CMatrix, m: usize, n: usize, dm: f64, dn: f64) -> f64 {
    let (rows, cols) = h.dim();
    let u = phasors(rows, m as f64 / rows as f64 + dm);
    let w = phasors(cols, n as f64 / cols as f64 + dn);
    let mut acc = C64::new(0.0, 0.0);
    for (r, row) in h.outer_iter().enumerate() {
        let inner: C64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
        acc += u[r] * inner;
    }
    acc.norm_sqr() / (rows * cols) as f64
}

fn phasors(k: usize, freq: f64) -> Vec<C64> {
    (0..k).map(|i| C64::from_polar(1.0, TAU * i as f64 * freq)).collect()
}

/// Result of the rotation search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub delta_m: f64,
    pub delta_n: f64,
    pub objective: f64,
}

/// Exhaustive `R_M x R_N` search. Ties (within 1e-12 relative) go to the
/// smaller `(δm M)² + (δn N)²`.
pub fn fine_rotation(h: &CMatrix, m: usize, n: usize, r_m: usize, r_n: usize) -> Rotation {
    let (rows, cols) = h.dim();
    let grid_m = rotation_grid(rows, r_m);
    let grid_n = rotation_grid(cols, r_n);
    let w_all: Vec<Vec<C64>> = grid_n.iter().map(|&dn| phasors(cols, n as f64 / cols as f64 + dn)).collect();
    let norm = (rows * cols) as f64;
    let mut best = Rotation { delta_m: 0.0, delta_n: 0.0, objective: f64::NEG_INFINITY };
    let size = |dm: f64, dn: f64| (dm * rows as f64).powi(2) + (dn * cols as f64).powi(2);
    for &dm in &grid_m {
        let u = phasors(rows, m as f64 / rows as f64 + dm);
        // v = uᵀ H̃, reused for every δn
        let mut v = vec![C64::new(0.0, 0.0); cols];
        for (r, row) in h.outer_iter().enumerate() {
            for (acc, x) in v.iter_mut().zip(row.iter()) {
                *acc += u[r] * x;
            }
        }
        for (dn, w) in grid_n.iter().zip(&w_all) {
            let obj = v.iter().zip(w).map(|(a, b)| a * b).sum::<C64>().norm_sqr() / norm;
            let tol = 1e-12 * obj.abs();
            let better = !best.objective.is_finite()
                || obj > best.objective + tol
                || ((obj - best.objective).abs() <= tol && size(dm, *dn) < size(best.delta_m, best.delta_n));
            if better {
                best = Rotation { delta_m: dm, delta_n: *dn, objective: obj };
            }
        }
    }
    best
}

/// `θ̂ = wrap(m/M + δm)`, `τ̂ = (n + δn N)/(NΔ)` wrapped to `[0, 1/Δ)`.
pub fn finalize_signature(m: usize, n: usize, delta_m: f64, delta_n: f64, cfg: &SystemConfig) -> (f64, f64) {
    let theta = wrap_half(m as f64 / cfg.antennas as f64 + delta_m);
    let window = cfg.max_unaliased_delay();
    let tau = ((n as f64 + delta_n * cfg.subcarriers as f64) / cfg.subcarriers as f64 * window).rem_euclid(window);
    (theta, if tau >= window { 0.0 } else { tau })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{path_atom, WidebandModel};
    use crate::cluster::Point;
    use crate::transform::{magnitude, to_delay_angle};
    use crate::SystemConfig;

    fn cfg() -> SystemConfig {
        SystemConfig { antennas: 32, subcarriers: 32, delay_spread_s: 2e-9, ..SystemConfig::full_scale() }
    }

    #[test]
    fn edge_bins_get_a_mirrored_candidate() {
        let cfg = SystemConfig { antennas: 64, subcarriers: 64, delay_spread_s: 5e-9, ..SystemConfig::full_scale() };
        assert_eq!(squint_candidates(10, &cfg), vec![10.0 / 64.0]);
        let c = squint_candidates(33, &cfg);
        assert_eq!(c.len(), 2);
        assert!((c[0] + 31.0 / 64.0).abs() < 1e-15 && (c[1] - 33.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn coarse_bin_is_the_support_peak() {
        let c = cfg();
        let tau = |q: usize| q as f64 * c.delay_bin();
        let h = path_atom(5.0 / 32.0, tau(3), &c, WidebandModel::TemporalOnly)
            + path_atom(-10.0 / 32.0, tau(20), &c, WidebandModel::TemporalOnly).mapv(|v| v * 0.5);
        let g = magnitude(&to_delay_angle(&h));
        let points = vec![
            Point { i: 5, j: 3, w: g[[5, 3]] },
            Point { i: 5, j: 4, w: g[[5, 4]] },
            Point { i: 22, j: 20, w: g[[22, 20]] },
            Point { i: 22, j: 19, w: g[[22, 19]] },
        ];
        let ds = ClusterDataset { points, shape: (32, 32), degenerate: false };
        let cl = Clustering { labels: vec![Some(0), Some(0), Some(1), Some(1)], l_hat: 2, fallback: false };
        let bins = coarse_bins(&g, &ds, &cl);
        assert_eq!(bins, vec![CoarseBin { m: 5, n: 3, cluster: 0 }, CoarseBin { m: 22, n: 20, cluster: 1 }]);
    }

    #[test]
    fn coarse_ties_take_smallest_index() {
        let g = RMatrix::from_elem((4, 4), 1.0);
        let points = vec![Point { i: 2, j: 1, w: 1.0 }, Point { i: 1, j: 3, w: 1.0 }, Point { i: 1, j: 2, w: 1.0 }];
        let ds = ClusterDataset { points, shape: (4, 4), degenerate: false };
        let cl = Clustering { labels: vec![Some(0); 3], l_hat: 1, fallback: false };
        assert_eq!(coarse_bins(&g, &ds, &cl)[0], CoarseBin { m: 1, n: 2, cluster: 0 });
    }

    #[test]
    fn compensation_identities() {
        let c = cfg();
        let h = path_atom(0.2, 1e-9, &c, WidebandModel::Dual);
        assert_eq!(remove_dual_wideband(&h, 0.0, &c), h);
        let flat = remove_dual_wideband(&phase_shift_matrix(0.3, &c), 0.3, &c);
        assert!(flat.iter().all(|v| (v - C64::new(1.0, 0.0)).norm() < 1e-12));
        // exact θ removes the squint entirely
        let rank_one = remove_dual_wideband(&h, 0.2, &c);
        let plain = path_atom(0.2, 1e-9, &c, WidebandModel::TemporalOnly);
        assert!(rank_one.iter().zip(plain.iter()).all(|(a, b)| (a - b).norm() < 1e-9));
    }

    #[test]
    fn compensation_concentrates_energy() {
        let c = SystemConfig { carrier_hz: 28e9, bandwidth_hz: 0.2 * 28e9, antennas: 64, subcarriers: 64, ..cfg() };
        let theta = 10.0 / 64.0;
        let h = path_atom(theta, 5.0 * c.delay_bin(), &c, WidebandModel::Dual);
        let frac = |x: &CMatrix| {
            let g = to_delay_angle(x);
            let e: f64 = g.iter().map(|v| v.norm_sqr()).sum();
            g.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max) / e
        };
        let before = frac(&h);
        let after = frac(&remove_dual_wideband(&h, theta, &c));
        assert!(after >= before && after > 0.999, "{before} -> {after}");
        let obj = |x: &CMatrix| rotation_objective(x, 10, 5, 0.0, 0.0);
        assert!(obj(&remove_dual_wideband(&h, theta, &c)) >= obj(&h));
    }

    #[test]
    fn on_grid_path_needs_no_rotation() {
        let c = cfg();
        let h = path_atom(7.0 / 32.0, 4.0 * c.delay_bin(), &c, WidebandModel::TemporalOnly);
        let rot = fine_rotation(&h, 7, 4, 15, 15);
        assert_eq!((rot.delta_m, rot.delta_n), (0.0, 0.0));
        assert!((rot.objective - 32.0 * 32.0).abs() < 1e-6);
    }

    #[test]
    fn off_grid_path_is_refined_to_grid_resolution() {
        let c = cfg();
        let (p, q) = (6usize, 9usize);
        let theta = (p as f64 + 0.3) / 32.0;
        let tau = (q as f64 + 0.25) * c.delay_bin();
        let h = path_atom(theta, tau, &c, WidebandModel::TemporalOnly);
        let rot = fine_rotation(&h, p, q, 15, 15);
        let step = 1.0 / (32.0 * 14.0);
        assert!((rot.delta_m - 0.3 / 32.0).abs() <= step / 2.0 + 1e-12);
        assert!((rot.delta_n - 0.25 / 32.0).abs() <= step / 2.0 + 1e-12);
        // dense oracle: objective is unimodal around the peak along each axis
        let dense: Vec<f64> = rotation_grid(32, 301).iter().map(|&d| rotation_objective(&h, p, q, d, rot.delta_n)).collect();
        let peak = dense.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(dense[..peak].windows(2).all(|w| w[0] <= w[1]));
        assert!(dense[peak..].windows(2).all(|w| w[0] >= w[1]));
        assert!(rot.objective >= rotation_objective(&h, p, q, 0.0, 0.0));

        let (th, ta) = finalize_signature(p, q, rot.delta_m, rot.delta_n, &c);
        assert!((th - theta).abs() <= 1.0 / (2.0 * 32.0 * 14.0) + 1e-12);
        assert!((ta - tau).abs() <= c.delay_bin() / (2.0 * 14.0) + 1e-18);
    }

    #[test]
    fn finalize_wraps() {
        let c = cfg();
        let (th, ta) = finalize_signature(3, 4, 0.0, 0.0, &c);
        assert_eq!(th, 3.0 / 32.0);
        assert!((ta - 4.0 * c.delay_bin()).abs() < 1e-20);
        assert_eq!(finalize_signature(31, 0, 0.0, 0.0, &c).0, -1.0 / 32.0);
        let (_, ta) = finalize_signature(0, 0, -0.25 / 32.0, -0.25 / 32.0, &c);
        assert!((ta - (c.max_unaliased_delay() - 0.25 * c.delay_bin())).abs() < 1e-18);
    }

    #[test]
    fn grid_has_requested_points() {
        let g = rotation_grid(32, 15);
        assert_eq!(g.len(), 15);
        assert!((g[0] + 1.0 / 64.0).abs() < 1e-15 && (g[14] - 1.0 / 64.0).abs() < 1e-15);
        assert_eq!(g[7], 0.0);
    }
}
