use super::{Clustering, Geometry};

/// Factor used for a cluster without spread (e.g. a singleton).
pub const CM_FLOOR: f64 = 0.5;

/// Product over clusters of `sqrt(σ_d² + σ_a²)` with population standard
/// deviations of the bin coordinates. NOISE points are ignored; no clusters
/// gives the empty product 1.
pub fn clustering_metric(coords: &[[f64; 2]], geometry: Geometry, clustering: &Clustering) -> f64 {
    clustering
        .supports()
        .iter()
        .filter(|s| !s.is_empty())
        .map(|members| {
            let anchor = coords[members[0]];
            let unwrapped: Vec<[f64; 2]> = members
                .iter()
                .map(|&i| {
                    let d = geometry.delta(anchor, coords[i]);
                    [anchor[0] + d[0], anchor[1] + d[1]]
                })
                .collect();
            let n = unwrapped.len() as f64;
            let var = |ax: usize| {
                let m = unwrapped.iter().map(|p| p[ax]).sum::<f64>() / n;
                unwrapped.iter().map(|p| (p[ax] - m).powi(2)).sum::<f64>() / n
            };
            let spread = (var(0) + var(1)).sqrt();
            if members.len() < 2 || spread == 0.0 {
                CM_FLOOR
            } else {
                spread
            }
        })
        .product()
}

/// `|L̂ - L|`.
pub fn cluster_count_error(l_hat: usize, l: usize) -> usize {
    l_hat.abs_diff(l)
}

/// Mean absolute count error over trials of `(L̂, L)`.
pub fn mae(trials: &[(usize, usize)]) -> f64 {
    if trials.is_empty() {
        return f64::NAN;
    }
    trials.iter().map(|&(a, b)| cluster_count_error(a, b) as f64).sum::<f64>() / trials.len() as f64
}

/// Mean over trials of `(1 + AE) log10(CM)` from `(AE, CM)` pairs.
pub fn ecm(trials: &[(usize, f64)]) -> f64 {
    if trials.is_empty() {
        return f64::NAN;
    }
    trials.iter().map(|&(ae, cm)| (1.0 + ae as f64) * cm.log10()).sum::<f64>() / trials.len() as f64
}
