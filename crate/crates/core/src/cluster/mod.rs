//! Point-set preparation by hard thresholding, path counting by clustering,
//! and clustering quality metrics.

pub mod kmeans;
pub mod lgc;
pub mod metrics;

use std::fmt::Write as _;

pub use kmeans::{kmeans_elbow, KMeansParams};
pub use lgc::{lgc_cluster, LgcParams};
pub use metrics::{cluster_count_error, clustering_metric, ecm, mae, CM_FLOOR};

use crate::RMatrix;

/// One retained delay-angle bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    /// Angle bin, row of `G`.
    pub i: usize,
    /// Delay bin, column of `G`.
    pub j: usize,
    pub w: f64,
}

/// Distance model for cluster coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    Plane,
    /// Both axes wrap with the given periods (DFT bins are circular).
    Torus { period: [f64; 2] },
}

impl Geometry {
    /// Displacement `b - a` (minimum image on the torus).
    pub fn delta(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let mut d = [b[0] - a[0], b[1] - a[1]];
        if let Geometry::Torus { period } = self {
            for (x, p) in d.iter_mut().zip(period) {
                *x -= p * (*x / p).round();
            }
        }
        d
    }

    pub fn dist(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d = self.delta(a, b);
        d[0].hypot(d[1])
    }
}

/// Points kept by a threshold, in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDataset {
    pub points: Vec<Point>,
    pub shape: (usize, usize),
    /// The source matrix was all zero or all equal.
    pub degenerate: bool,
}

impl ClusterDataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn coords(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|p| [p.i as f64, p.j as f64]).collect()
    }

    /// The bin grid wraps in both directions.
    pub fn geometry(&self) -> Geometry {
        Geometry::Torus { period: [self.shape.0 as f64, self.shape.1 as f64] }
    }

    /// `i,j,w,label` rows; NOISE is written as `-1`.
    pub fn to_csv(&self, clustering: Option<&Clustering>) -> String {
        let mut s = String::from("i,j,w,label\n");
        for (idx, p) in self.points.iter().enumerate() {
            let label = clustering.and_then(|c| c.labels[idx]).map_or(-1, |l| l as i64);
            let _ = writeln!(s, "{},{},{},{}", p.i, p.j, p.w, label);
        }
        s
    }
}

/// Which hard threshold prepares the dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Energy,
    Percentile(f64),
}

impl Threshold {
    pub fn apply(&self, g: &RMatrix) -> crate::Result<ClusterDataset> {
        match *self {
            Threshold::Energy => Ok(energy_threshold(g)),
            Threshold::Percentile(a) => percentile_threshold(g, a),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Threshold::Energy => "ET".into(),
            Threshold::Percentile(a) => format!("PT{a}"),
        }
    }
}

/// Magnitudes at or below this fraction of the largest entry are round-off
/// and never kept, whatever the cutoff.
pub const NUMERICAL_ZERO: f64 = 1e-9;

fn keep_above(g: &RMatrix, cutoff: f64, degenerate: bool) -> ClusterDataset {
    let top = g.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let cutoff = cutoff.max(NUMERICAL_ZERO * top);
    let points = g
        .indexed_iter()
        .filter(|(_, &v)| v > cutoff)
        .map(|((i, j), &w)| Point { i, j, w })
        .collect();
    ClusterDataset { points, shape: g.dim(), degenerate }
}

/// Keep entries strictly above the RMS value `sqrt(‖G‖²/(NM))`.
pub fn energy_threshold(g: &RMatrix) -> ClusterDataset {
    let n = g.len().max(1) as f64;
    let cutoff = (g.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    keep_above(g, cutoff, cutoff == 0.0)
}

/// Nearest-rank `alpha`-th percentile of `values`.
pub fn nearest_rank_percentile(values: &[f64], alpha: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((alpha / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Keep entries strictly above the nearest-rank `alpha`-th percentile.
pub fn percentile_threshold(g: &RMatrix, alpha: f64) -> crate::Result<ClusterDataset> {
    if !(alpha > 0.0 && alpha < 100.0) {
        return Err(crate::Error::InvalidArgument(format!("percentile must be in (0, 100), got {alpha}")));
    }
    if g.is_empty() {
        return Ok(ClusterDataset { points: vec![], shape: g.dim(), degenerate: true });
    }
    let flat: Vec<f64> = g.iter().copied().collect();
    let cutoff = nearest_rank_percentile(&flat, alpha);
    let degenerate = flat.iter().all(|&v| v == flat[0]);
    Ok(keep_above(g, cutoff, degenerate))
}

/// Labels per point (`None` is NOISE) and the cluster count.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub labels: Vec<Option<usize>>,
    pub l_hat: usize,
    /// Too few points for the algorithm; everything was put in one cluster.
    pub fallback: bool,
}

impl Clustering {
    pub fn empty() -> Self {
        Self { labels: vec![], l_hat: 0, fallback: false }
    }

    /// Relabel to `0..l_hat` in order of first appearance.
    pub fn from_raw(raw: &[Option<usize>]) -> Self {
        let mut map = std::collections::BTreeMap::new();
        let labels: Vec<Option<usize>> = raw
            .iter()
            .map(|l| {
                l.map(|l| {
                    let next = map.len();
                    *map.entry(l).or_insert(next)
                })
            })
            .collect();
        Self { labels, l_hat: map.len(), fallback: false }
    }

    /// Point indices of each cluster.
    pub fn supports(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.l_hat];
        for (idx, l) in self.labels.iter().enumerate() {
            if let Some(l) = l {
                out[*l].push(idx);
            }
        }
        out
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }
}

/// Which clusterer counts the paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Clusterer {
    Lgc(LgcParams),
    KMeans(KMeansParams),
}

impl Clusterer {
    /// Cluster the dataset's bins. LGC also uses the bin magnitudes.
    pub fn run(&self, dataset: &ClusterDataset) -> Clustering {
        let coords = dataset.coords();
        match self {
            Clusterer::Lgc(p) => {
                let w: Vec<f64> = dataset.points.iter().map(|p| p.w).collect();
                lgc_cluster(&coords, Some(&w), dataset.geometry(), p).clustering
            }
            Clusterer::KMeans(p) => kmeans_elbow(&coords, dataset.geometry(), p),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Clusterer::Lgc(_) => "lgc",
            Clusterer::KMeans(_) => "kmeans",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;

    #[test]
    fn energy_threshold_boundaries() {
        assert!(energy_threshold(&Array2::ones((4, 4))).is_empty());
        let mut g = Array2::zeros((4, 4));
        g[[1, 2]] = 10.0;
        let d = energy_threshold(&g);
        assert_eq!(d.points, vec![Point { i: 1, j: 2, w: 10.0 }]);
        let z = energy_threshold(&Array2::zeros((3, 3)));
        assert!(z.is_empty() && z.degenerate);
    }

    #[test]
    fn percentile_counts() {
        let mut vals: Vec<f64> = (0..128 * 128).map(|v| v as f64 * 0.37 + 1.0).collect();
        vals.shuffle(&mut crate::rng::seeded(3));
        let g = Array2::from_shape_vec((128, 128), vals).unwrap();
        assert_eq!(percentile_threshold(&g, 95.0).unwrap().len(), 819);

        let g = Array2::from_shape_vec((10, 10), (1..=100).map(|v| v as f64).collect()).unwrap();
        let kept: Vec<f64> = percentile_threshold(&g, 50.0).unwrap().points.iter().map(|p| p.w).collect();
        assert_eq!(kept, (51..=100).map(|v| v as f64).collect::<Vec<_>>());

        let flat = percentile_threshold(&Array2::from_elem((5, 5), 2.0), 90.0).unwrap();
        assert!(flat.is_empty() && flat.degenerate);
        assert!(percentile_threshold(&g, 100.0).is_err());
    }

    #[test]
    fn round_off_is_never_kept() {
        let mut g = Array2::from_shape_fn((16, 16), |(i, j)| 1e-17 * (1 + i * 16 + j) as f64);
        g[[3, 4]] = 1.0;
        g[[9, 12]] = 0.6;
        let kept: Vec<(usize, usize)> = percentile_threshold(&g, 90.0).unwrap().points.iter().map(|p| (p.i, p.j)).collect();
        assert_eq!(kept, vec![(3, 4), (9, 12)]);
        assert_eq!(energy_threshold(&g).len(), 2);
    }

    #[test]
    fn torus_distance_wraps() {
        let t = Geometry::Torus { period: [64.0, 64.0] };
        assert_eq!(t.delta([63.0, 0.0], [0.0, 63.0]), [1.0, -1.0]);
        assert!((t.dist([1.0, 1.0], [62.0, 1.0]) - 3.0).abs() < 1e-12);
        assert_eq!(Geometry::Plane.dist([0.0, 0.0], [3.0, 4.0]), 5.0);
    }

    #[test]
    fn csv_export() {
        let d = ClusterDataset { points: vec![Point { i: 1, j: 2, w: 0.5 }, Point { i: 3, j: 4, w: 1.0 }], shape: (8, 8), degenerate: false };
        let c = Clustering { labels: vec![Some(0), None], l_hat: 1, fallback: false };
        assert_eq!(d.to_csv(Some(&c)), "i,j,w,label\n1,2,0.5,0\n3,4,1,-1\n");
    }

    #[test]
    fn relabel_in_order_of_appearance() {
        let c = Clustering::from_raw(&[Some(7), None, Some(2), Some(7)]);
        assert_eq!(c.labels, vec![Some(0), None, Some(1), Some(0)]);
        assert_eq!(c.l_hat, 2);
        assert_eq!(c.supports(), vec![vec![0, 3], vec![2]]);
    }

    proptest! {
        #[test]
        fn higher_percentile_keeps_a_subset(vals in prop::collection::vec(0.0f64..1.0, 64)) {
            let g = Array2::from_shape_vec((8, 8), vals).unwrap();
            let hi = percentile_threshold(&g, 97.0).unwrap();
            let lo = percentile_threshold(&g, 95.0).unwrap();
            for p in &hi.points {
                prop_assert!(lo.points.contains(p));
            }
        }
    }
}
