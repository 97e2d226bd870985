//! Local-gravitation clustering.
//!
//! Every point gets a mass from its k-nearest-neighbor density and feels an
//! attraction from its neighbors (the local resultant force, LRF). Points
//! towards which the neighbors' forces converge have high centrality (CE)
//! and serve as centers. A cluster is a component of the mutual-kNN graph
//! that contains at least one center; stray points are absorbed by nearby
//! clusters or left as noise.
//!
//! When the points carry magnitudes (bins of a delay-angle image), each
//! cluster is further split at its magnitude peaks. A peak survives only if
//! the saddle joining it to a higher peak lies below `1 - peak_prominence`
//! of its height, and peaks under `peak_floor` times the strongest point are
//! dropped as noise. Without magnitudes the geometric clustering is final.

use super::{nearest_rank_percentile, Clustering, Geometry};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LgcParams {
    /// Neighbors `k` (>= 3).
    pub k: usize,
    /// Points whose CE is at or above this percentile become centers.
    pub center_percentile: f64,
    /// Attachment radius as a multiple of the median kNN distance.
    pub r0_factor: f64,
    /// Clusters with fewer points are relabeled NOISE.
    pub min_cluster_size: usize,
    /// With at most `k` points, clusters are the components of the graph
    /// linking points this close (1.5 joins 8-neighbors on a bin grid).
    pub fallback_radius: f64,
    /// Relative depth a saddle needs below a peak to keep the peak apart.
    pub peak_prominence: f64,
    /// Peaks below this fraction of the largest magnitude are noise.
    pub peak_floor: f64,
}

impl Default for LgcParams {
    fn default() -> Self {
        Self {
            k: 8,
            center_percentile: 75.0,
            r0_factor: 2.0,
            min_cluster_size: 1,
            fallback_radius: 1.5,
            peak_prominence: 0.5,
            peak_floor: 0.1,
        }
    }
}

/// Clustering plus the per-point quantities it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct LgcOutput {
    pub clustering: Clustering,
    pub mass: Vec<f64>,
    pub lrf: Vec<[f64; 2]>,
    /// Centrality.
    pub ce: Vec<f64>,
    /// Coordination.
    pub co: Vec<f64>,
    pub centers: Vec<bool>,
}

const FORCE_EPS: f64 = 1e-12;

fn cosine(a: [f64; 2], b: [f64; 2]) -> f64 {
    let na = a[0].hypot(a[1]);
    let nb = b[0].hypot(b[1]);
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (a[0] * b[0] + a[1] * b[1]) / (na * nb)
    }
}

/// Indices of the `k` nearest other points, closest first (ties by index).
pub fn knn(coords: &[[f64; 2]], geometry: Geometry, k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = coords.len();
    (0..n)
        .map(|p| {
            let mut d: Vec<(usize, f64)> =
                (0..n).filter(|&q| q != p).map(|q| (q, geometry.dist(coords[p], coords[q]))).collect();
            let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
            let k = k.min(d.len());
            if k < d.len() {
                d.select_nth_unstable_by(k, cmp);
                d.truncate(k);
            }
            d.sort_by(cmp);
            d
        })
        .collect()
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = x;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

/// Connected components of the graph linking points at most `radius` apart.
pub fn adjacency_components(coords: &[[f64; 2]], geometry: Geometry, radius: f64) -> Clustering {
    let n = coords.len();
    let mut uf = UnionFind((0..n).collect());
    for p in 0..n {
        for q in p + 1..n {
            if geometry.dist(coords[p], coords[q]) <= radius {
                uf.union(p, q);
            }
        }
    }
    let raw: Vec<Option<usize>> = (0..n).map(|p| Some(uf.find(p))).collect();
    Clustering::from_raw(&raw)
}

pub fn lgc_cluster(coords: &[[f64; 2]], weights: Option<&[f64]>, geometry: Geometry, params: &LgcParams) -> LgcOutput {
    let n = coords.len();
    let k = params.k.max(1);
    if n < k + 1 {
        let clustering = if n == 0 {
            Clustering::empty()
        } else {
            let mut c = adjacency_components(coords, geometry, params.fallback_radius);
            c.fallback = true;
            c
        };
        return LgcOutput {
            clustering,
            mass: vec![],
            lrf: vec![],
            ce: vec![],
            co: vec![],
            centers: vec![false; n],
        };
    }

    let nn = knn(coords, geometry, k);
    let mass: Vec<f64> = nn
        .iter()
        .map(|row| {
            let mean = row.iter().map(|(_, d)| d).sum::<f64>() / row.len() as f64;
            1.0 / mean.max(FORCE_EPS)
        })
        .collect();

    let lrf: Vec<[f64; 2]> = (0..n)
        .map(|p| {
            let mut f = [0.0; 2];
            for &(q, r) in &nn[p] {
                let d = geometry.delta(coords[p], coords[q]);
                let s = mass[p] * mass[q] / (r * r * r).max(FORCE_EPS);
                f[0] += s * d[0];
                f[1] += s * d[1];
            }
            f
        })
        .collect();

    let ce: Vec<f64> = (0..n)
        .map(|p| {
            nn[p].iter().map(|&(q, _)| cosine(lrf[q], geometry.delta(coords[q], coords[p]))).sum::<f64>() / k as f64
        })
        .collect();
    let co: Vec<f64> =
        (0..n).map(|p| nn[p].iter().map(|&(q, _)| cosine(lrf[p], lrf[q])).sum::<f64>() / k as f64).collect();

    let cut = nearest_rank_percentile(&ce, params.center_percentile);
    let centers: Vec<bool> = ce.iter().map(|&c| c >= cut).collect();

    let mut all_d: Vec<f64> = nn.iter().flat_map(|row| row.iter().map(|&(_, d)| d)).collect();
    all_d.sort_by(f64::total_cmp);
    let r0 = params.r0_factor * all_d[all_d.len() / 2];

    // Components of the mutual-kNN graph over all points, plus direct links
    // between centers closer than r0.
    let mut uf = UnionFind((0..n).collect());
    for (p, row) in nn.iter().enumerate() {
        for &(q, _) in row {
            if p < q && nn[q].iter().any(|&(r, _)| r == p) {
                uf.union(p, q);
            }
        }
    }
    let center_idx: Vec<usize> = (0..n).filter(|&p| centers[p]).collect();
    for (i, &a) in center_idx.iter().enumerate() {
        for &b in &center_idx[i + 1..] {
            if geometry.dist(coords[a], coords[b]) <= r0 {
                uf.union(a, b);
            }
        }
    }

    // Only components holding a center are clusters. The remaining points
    // are absorbed one at a time, closest first, by any labeled point
    // within r0; whatever is left is noise.
    let seeded: Vec<bool> = {
        let mut s = vec![false; n];
        for &c in &center_idx {
            s[uf.find(c)] = true;
        }
        s
    };
    let mut raw: Vec<Option<usize>> = (0..n)
        .map(|p| {
            let root = uf.find(p);
            seeded[root].then_some(root)
        })
        .collect();
    let mut nearest: Vec<(f64, usize)> = (0..n)
        .map(|p| {
            (0..n)
                .filter(|&q| raw[q].is_some())
                .map(|q| (geometry.dist(coords[p], coords[q]), q))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .unwrap_or((f64::INFINITY, usize::MAX))
        })
        .collect();
    loop {
        let next = (0..n)
            .filter(|&p| raw[p].is_none() && nearest[p].0 <= r0)
            .min_by(|&a, &b| nearest[a].0.total_cmp(&nearest[b].0).then(a.cmp(&b)));
        let Some(p) = next else { break };
        raw[p] = raw[nearest[p].1];
        for q in 0..n {
            if raw[q].is_none() {
                let d = geometry.dist(coords[q], coords[p]);
                if d < nearest[q].0 || (d == nearest[q].0 && p < nearest[q].1) {
                    nearest[q] = (d, p);
                }
            }
        }
    }

    let mutual: Vec<Vec<usize>> = (0..n)
        .map(|p| nn[p].iter().map(|&(q, _)| q).filter(|&q| nn[q].iter().any(|&(r, _)| r == p)).collect())
        .collect();
    if let Some(w) = weights {
        assert_eq!(w.len(), n, "one weight per point");
        raw = split_at_peaks(coords, w, &raw, &mutual, geometry, r0, params);
    }

    let mut clustering = Clustering::from_raw(&raw);
    if params.min_cluster_size > 1 {
        let sizes: Vec<usize> = clustering.supports().iter().map(Vec::len).collect();
        let pruned: Vec<Option<usize>> =
            clustering.labels.iter().map(|l| l.filter(|&l| sizes[l] >= params.min_cluster_size)).collect();
        clustering = Clustering::from_raw(&pruned);
    }

    LgcOutput { clustering, mass, lrf, ce, co, centers }
}

/// Peak trees inside each cluster, built by sweeping points from the largest
/// magnitude down. Two points are adjacent when they share a cluster and are
/// within `r0` or mutual neighbors.
fn split_at_peaks(
    coords: &[[f64; 2]],
    w: &[f64],
    labels: &[Option<usize>],
    mutual: &[Vec<usize>],
    geometry: Geometry,
    r0: f64,
    params: &LgcParams,
) -> Vec<Option<usize>> {
    let n = coords.len();
    let mut order: Vec<usize> = (0..n).filter(|&p| labels[p].is_some()).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    let Some(&top) = order.first() else { return labels.to_vec() };

    let mut uf = UnionFind((0..n).collect());
    let mut peak = vec![0.0; n];
    let mut done = vec![false; n];
    for &p in &order {
        let ups: Vec<usize> = (0..n)
            .filter(|&q| {
                done[q]
                    && labels[q] == labels[p]
                    && (geometry.dist(coords[p], coords[q]) <= r0 || mutual[p].contains(&q))
            })
            .collect();
        done[p] = true;
        let Some(&higher) = ups.iter().max_by(|&&a, &&b| w[a].total_cmp(&w[b]).then(b.cmp(&a))) else {
            peak[p] = w[p];
            continue;
        };
        let root = uf.find(higher);
        uf.0[p] = root;
        for &q in &ups {
            let (a, b) = (uf.find(q), uf.find(p));
            if a == b {
                continue;
            }
            let (lo, hi) = if (peak[a], b) < (peak[b], a) { (a, b) } else { (b, a) };
            if peak[lo] - w[p] < params.peak_prominence * peak[lo] {
                uf.0[lo] = hi;
            }
        }
    }
    let floor = params.peak_floor * w[top];
    (0..n)
        .map(|p| {
            labels[p]?;
            let r = uf.find(p);
            (peak[r] >= floor).then_some(r)
        })
        .collect()
}
