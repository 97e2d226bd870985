//! Lloyd's k-means with farthest-point seeding and elbow selection of K.

use rand::Rng;

use super::{Clustering, Geometry};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k_max: usize,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self { k_max: 8, max_iter: 50, restarts: 5, seed: 0 }
    }
}

/// Mean of `members` (circular per axis on a torus).
fn centroid(coords: &[[f64; 2]], members: &[usize], geometry: Geometry) -> [f64; 2] {
    let m = members.len() as f64;
    match geometry {
        Geometry::Plane => {
            let mut c = [0.0; 2];
            for &i in members {
                c[0] += coords[i][0];
                c[1] += coords[i][1];
            }
            [c[0] / m, c[1] / m]
        }
        Geometry::Torus { period } => {
            let mut c = [0.0; 2];
            for (ax, p) in period.iter().enumerate() {
                let (mut s, mut co) = (0.0, 0.0);
                for &i in members {
                    let a = std::f64::consts::TAU * coords[i][ax] / p;
                    s += a.sin();
                    co += a.cos();
                }
                c[ax] = if s == 0.0 && co == 0.0 {
                    coords[members[0]][ax]
                } else {
                    (s.atan2(co) / std::f64::consts::TAU * p).rem_euclid(*p)
                };
            }
            c
        }
    }
}

fn nearest(p: [f64; 2], centers: &[[f64; 2]], geometry: Geometry) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(c, &x)| (c, geometry.dist(p, x)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("at least one center")
}

/// One Lloyd run; returns labels and WCSS.
fn lloyd(coords: &[[f64; 2]], geometry: Geometry, mut centers: Vec<[f64; 2]>, max_iter: usize) -> (Vec<usize>, f64) {
    let mut labels = vec![usize::MAX; coords.len()];
    for _ in 0..max_iter {
        let mut changed = false;
        for (p, l) in coords.iter().zip(labels.iter_mut()) {
            let (c, _) = nearest(*p, &centers, geometry);
            if *l != c {
                *l = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..coords.len()).filter(|&i| labels[i] == c).collect();
            if !members.is_empty() {
                *center = centroid(coords, &members, geometry);
            }
        }
    }
    let wcss = coords.iter().map(|&p| nearest(p, &centers, geometry).1.powi(2)).sum();
    for (p, l) in coords.iter().zip(labels.iter_mut()) {
        *l = nearest(*p, &centers, geometry).0;
    }
    (labels, wcss)
}

fn farthest_point_init(coords: &[[f64; 2]], geometry: Geometry, k: usize, first: usize) -> Vec<[f64; 2]> {
    let mut centers = vec![coords[first]];
    let mut dmin: Vec<f64> = coords.iter().map(|&p| geometry.dist(p, coords[first])).collect();
    while centers.len() < k {
        let (far, _) = dmin
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("non-empty");
        centers.push(coords[far]);
        for (d, &p) in dmin.iter_mut().zip(coords) {
            *d = d.min(geometry.dist(p, coords[far]));
        }
    }
    centers
}

/// Best of `restarts` seeded runs at fixed K.
pub fn kmeans(coords: &[[f64; 2]], geometry: Geometry, k: usize, params: &KMeansParams) -> (Vec<usize>, f64) {
    let mut rng = rng::stream(params.seed, k as u64);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..params.restarts.max(1) {
        let first = rng.random_range(0..coords.len());
        let run = lloyd(coords, geometry, farthest_point_init(coords, geometry, k, first), params.max_iter);
        if best.as_ref().is_none_or(|b| run.1 < b.1) {
            best = Some(run);
        }
    }
    best.expect("at least one restart")
}

/// Within-cluster sum of squares for `K = 1..=k_max` (after clamping).
pub fn wcss_curve(coords: &[[f64; 2]], geometry: Geometry, params: &KMeansParams) -> Vec<(Vec<usize>, f64)> {
    let mut distinct = coords.to_vec();
    distinct.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    distinct.dedup();
    let k_max = params.k_max.max(1).min(distinct.len());
    (1..=k_max).map(|k| kmeans(coords, geometry, k, params)).collect()
}

/// Pick K at the largest discrete second difference of the WCSS curve.
pub fn elbow(wcss: &[f64]) -> usize {
    if wcss.is_empty() {
        return 0;
    }
    if wcss.len() == 1 || wcss[0] <= 1e-12 {
        return 1;
    }
    let at = |k: usize| wcss[(k - 1).min(wcss.len() - 1)];
    (2..=wcss.len())
        .map(|k| (k, at(k - 1) - 2.0 * at(k) + at(k + 1)))
        .fold((1, f64::NEG_INFINITY), |best, (k, d)| if d > best.1 { (k, d) } else { best })
        .0
}

pub fn kmeans_elbow(coords: &[[f64; 2]], geometry: Geometry, params: &KMeansParams) -> Clustering {
    if coords.is_empty() {
        return Clustering::empty();
    }
    let runs = wcss_curve(coords, geometry, params);
    let wcss: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let k = elbow(&wcss);
    let raw: Vec<Option<usize>> = runs[k - 1].0.iter().map(|&l| Some(l)).collect();
    Clustering::from_raw(&raw)
}
