use nalgebra::{DMatrix, DVector};

use crate::channel::{path_atom, WidebandModel};
use crate::{CMatrix, SystemConfig, C64};

pub const GAIN_RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GainFit {
    pub alpha: Vec<C64>,
    /// Two basis atoms are (numerically) parallel.
    pub rank_deficient: bool,
}

/// Least-squares gains for fixed `(θ̂, τ̂)`: `α̂ = (BᴴB + λI)⁻¹ Bᴴ vec(Ĥ)`.
pub fn estimate_gains(h_hat: &CMatrix, signatures: &[(f64, f64)], cfg: &SystemConfig, model: WidebandModel) -> GainFit {
    let l = signatures.len();
    if l == 0 {
        return GainFit { alpha: vec![], rank_deficient: false };
    }
    let rows = h_hat.len();
    let mut b = DMatrix::<C64>::zeros(rows, l);
    for (col, &(theta, tau)) in signatures.iter().enumerate() {
        for (r, v) in path_atom(theta, tau, cfg, model).iter().enumerate() {
            b[(r, col)] = *v;
        }
    }
    let y = DVector::from_iterator(rows, h_hat.iter().copied());
    let mut gram = b.adjoint() * &b;
    let diag: Vec<f64> = (0..l).map(|i| gram[(i, i)].re).collect();
    let mut rank_deficient = false;
    for i in 0..l {
        for j in i + 1..l {
            if gram[(i, j)].norm() >= (1.0 - 1e-9) * (diag[i] * diag[j]).sqrt() {
                rank_deficient = true;
            }
        }
    }
    for i in 0..l {
        gram[(i, i)] += C64::new(GAIN_RIDGE, 0.0);
    }
    let rhs = b.adjoint() * y;
    let alpha = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => {
            rank_deficient = true;
            gram.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(l))
        }
    };
    if rank_deficient {
        log::debug!("gain fit: rank-deficient basis for {l} signatures");
    }
    GainFit { alpha: alpha.iter().copied().collect(), rank_deficient }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SystemConfig {
        SystemConfig { antennas: 16, subcarriers: 16, delay_spread_s: 1e-9, ..SystemConfig::full_scale() }
    }

    #[test]
    fn single_exact_path() {
        let c = cfg();
        let (th, ta, a) = (0.137, 0.7e-9, C64::new(0.4, -1.1));
        let h = path_atom(th, ta, &c, WidebandModel::Dual).mapv(|v| v * a);
        let fit = estimate_gains(&h, &[(th, ta)], &c, WidebandModel::Dual);
        assert!((fit.alpha[0] - a).norm() < 1e-8);
        assert!(!fit.rank_deficient);
    }

    #[test]
    fn two_orthogonal_on_grid_paths() {
        let c = cfg();
        let sigs = [(3.0 / 16.0, 2.0 * c.delay_bin()), (-5.0 / 16.0, 6.0 * c.delay_bin())];
        let gains = [C64::new(1.0, 0.5), C64::new(-0.3, 0.2)];
        let mut h = CMatrix::zeros(c.shape());
        for (&(th, ta), &a) in sigs.iter().zip(&gains) {
            h = h + path_atom(th, ta, &c, WidebandModel::TemporalOnly).mapv(|v| v * a);
        }
        let fit = estimate_gains(&h, &sigs, &c, WidebandModel::TemporalOnly);
        for (e, t) in fit.alpha.iter().zip(&gains) {
            assert!((e - t).norm() < 1e-8);
        }
    }

    #[test]
    fn duplicate_signatures_are_flagged() {
        let c = cfg();
        let h = path_atom(0.1, 1e-10, &c, WidebandModel::Dual);
        let fit = estimate_gains(&h, &[(0.1, 1e-10), (0.1, 1e-10)], &c, WidebandModel::Dual);
        assert!(fit.rank_deficient);
        assert!((fit.alpha[0] + fit.alpha[1] - C64::new(1.0, 0.0)).norm() < 1e-6);
    }
}
