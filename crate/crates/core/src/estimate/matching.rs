//! Optimal assignment between true and estimated paths.

use crate::channel::{wrap_half, PathSignature};
use crate::SystemConfig;

/// Minimum-cost assignment of rows to columns (`rows <= cols`), O(n² m).
/// Returns the column of each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return vec![];
    }
    let m = cost[0].len();
    assert!(n <= m, "hungarian needs rows <= cols");
    // 1-based potentials formulation
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

/// Angle and delay offset of `est` from `truth`, both circular, in bins.
pub fn bin_offsets(truth: (f64, f64), est: (f64, f64), cfg: &SystemConfig) -> (f64, f64) {
    let window = cfg.max_unaliased_delay();
    let dtheta = wrap_half(est.0 - truth.0) * cfg.antennas as f64;
    let dtau = wrap_half((est.1 - truth.1) / window) * cfg.subcarriers as f64;
    (dtheta, dtau)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathMatch {
    /// `(true index, estimate index)`.
    pub pairs: Vec<(usize, usize)>,
    /// Estimates without a partner.
    pub n_false: usize,
    /// True paths without a partner.
    pub n_miss: usize,
}

/// Assign estimates `(θ̂, τ̂)` to true paths minimizing the summed bin
/// distance; pairs further than `gate_bins` in either dimension are dropped.
pub fn match_paths(truth: &[PathSignature], estimates: &[(f64, f64)], gate_bins: f64, cfg: &SystemConfig) -> PathMatch {
    let (l, l_hat) = (truth.len(), estimates.len());
    if l == 0 || l_hat == 0 {
        return PathMatch { pairs: vec![], n_false: l_hat, n_miss: l };
    }
    const OUT_OF_GATE: f64 = 1e6;
    let dist = |t: usize, e: usize| {
        let (a, b) = bin_offsets((truth[t].theta, truth[t].tau), estimates[e], cfg);
        if a.abs() > gate_bins || b.abs() > gate_bins {
            OUT_OF_GATE
        } else {
            a.hypot(b)
        }
    };
    let transpose = l > l_hat;
    let cost: Vec<Vec<f64>> = if transpose {
        (0..l_hat).map(|e| (0..l).map(|t| dist(t, e)).collect()).collect()
    } else {
        (0..l).map(|t| (0..l_hat).map(|e| dist(t, e)).collect()).collect()
    };
    let assign = hungarian(&cost);
    let mut pairs: Vec<(usize, usize)> = assign
        .iter()
        .enumerate()
        .map(|(r, &c)| if transpose { (c, r) } else { (r, c) })
        .filter(|&(t, e)| dist(t, e) < OUT_OF_GATE)
        .collect();
    pairs.sort_unstable();
    let matched = pairs.len();
    PathMatch { pairs, n_false: l_hat - matched, n_miss: l - matched }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;
    use proptest::prelude::*;

    fn cfg() -> SystemConfig {
        SystemConfig { antennas: 32, subcarriers: 32, delay_spread_s: 2e-9, ..SystemConfig::full_scale() }
    }

    fn paths(c: &SystemConfig, bins: &[(f64, f64)]) -> Vec<PathSignature> {
        bins.iter()
            .map(|&(a, d)| PathSignature::new(wrap_half(a / 32.0), d * c.delay_bin(), C64::new(1.0, 0.0)))
            .collect()
    }

    fn brute(cost: &[Vec<f64>]) -> f64 {
        fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..cost[0].len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row][j] + go(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        go(cost, 0, &mut vec![false; cost[0].len()])
    }

    proptest! {
        #[test]
        fn hungarian_is_optimal(vals in prop::collection::vec(0.0f64..10.0, 20), rows in 1usize..5) {
            let cols = 5;
            let cost: Vec<Vec<f64>> = (0..rows.min(4)).map(|r| vals[r * cols..r * cols + cols].to_vec()).collect();
            let a = hungarian(&cost);
            let total: f64 = a.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
            let mut seen = a.clone();
            seen.sort_unstable();
            seen.dedup();
            prop_assert_eq!(seen.len(), a.len());
            prop_assert!((total - brute(&cost)).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_sets_fully_match() {
        let c = cfg();
        let t = paths(&c, &[(3.0, 2.0), (10.0, 7.0), (-4.0, 12.0)]);
        let est: Vec<(f64, f64)> = t.iter().rev().map(|p| (p.theta, p.tau)).collect();
        let m = match_paths(&t, &est, 3.0, &c);
        assert_eq!(m.pairs, vec![(0, 2), (1, 1), (2, 0)]);
        assert_eq!((m.n_false, m.n_miss), (0, 0));
    }

    #[test]
    fn fewer_and_more_estimates() {
        let c = cfg();
        let t = paths(&c, &[(3.0, 2.0), (10.0, 7.0), (-4.0, 12.0), (0.0, 20.0)]);
        let est: Vec<(f64, f64)> = t[..3].iter().map(|p| (p.theta, p.tau)).collect();
        let m = match_paths(&t, &est, 3.0, &c);
        assert_eq!((m.n_false, m.n_miss), (0, 1));

        let mut more: Vec<(f64, f64)> = t.iter().map(|p| (p.theta, p.tau)).collect();
        more.push((0.4, 25.0 * c.delay_bin()));
        let m = match_paths(&t, &more, 3.0, &c);
        assert_eq!((m.n_false, m.n_miss, m.pairs.len()), (1, 0, 4));
    }

    #[test]
    fn gate_rejects_far_estimates_and_wraps() {
        let c = cfg();
        let t = paths(&c, &[(0.0, 5.0)]);
        let far = [(wrap_half(6.0 / 32.0), 5.0 * c.delay_bin())];
        let m = match_paths(&t, &far, 3.0, &c);
        assert_eq!((m.pairs.len(), m.n_false, m.n_miss), (0, 1, 1));
        let across_seam = [(wrap_half(-1.0 / 32.0), 5.0 * c.delay_bin())];
        assert_eq!(match_paths(&t, &across_seam, 3.0, &c).pairs, vec![(0, 0)]);
    }
}
