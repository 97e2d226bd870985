//! Preamble transmission over the channel and least-squares estimation.
//!
//! One OFDM symbol carries a QPSK pilot on every subcarrier and is received
//! on all antennas at once: `Y[r, n] = H[r, n] x[n] + w[r, n]`.

use ndarray::Array1;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::{CMatrix, C64};

/// Unit-modulus QPSK pilot vector of length `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Preamble {
    pub symbols: Array1<C64>,
}

impl Preamble {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Received preamble and the noise variance that was injected.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    pub y: CMatrix,
    /// Per complex sample noise variance `σ²`.
    pub sigma2: f64,
}

/// i.i.d. uniform QPSK symbols `(±1 ± j)/√2`.
pub fn generate_preamble<R: Rng + ?Sized>(rng: &mut R, subcarriers: usize) -> Preamble {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let symbols = Array1::from_shape_fn(subcarriers, |_| {
        let bits: u8 = rng.random_range(0..4);
        let re = if bits & 1 == 0 { a } else { -a };
        let im = if bits & 2 == 0 { a } else { -a };
        C64::new(re, im)
    });
    Preamble { symbols }
}

/// Mean received signal power per antenna-subcarrier, `‖H‖²_F / (MN)`.
pub fn signal_power(h: &CMatrix) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    h.iter().map(|v| v.norm_sqr()).sum::<f64>() / h.len() as f64
}

/// Noise variance for a target receive SNR given the signal power.
pub fn noise_variance(signal_power: f64, rx_snr_db: f64) -> f64 {
    signal_power / 10f64.powf(rx_snr_db / 10.0)
}

/// Complex Gaussian sample `CN(0, σ²)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, sigma2: f64) -> C64 {
    let s = (sigma2 / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

/// `Y = H ∘ (1 xᵀ) + W`, `W ~ CN(0, σ²)` with `σ² = P_sig / 10^(snr/10)`.
pub fn apply_channel_awgn<R: Rng + ?Sized>(
    h: &CMatrix,
    preamble: &Preamble,
    rx_snr_db: f64,
    rng: &mut R,
) -> Result<ReceivedFrame> {
    if h.ncols() != preamble.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} subcarriers", h.ncols()),
            actual: format!("preamble of {}", preamble.len()),
        });
    }
    let sigma2 = noise_variance(signal_power(h), rx_snr_db);
    let mut y = h.clone();
    for ((_, n), v) in y.indexed_iter_mut() {
        *v = *v * preamble.symbols[n] + complex_gaussian(rng, sigma2);
    }
    Ok(ReceivedFrame { y, sigma2 })
}

/// Least-squares estimate `Ĥ[r, n] = Y[r, n] / x[n]`.
///
/// For unit-modulus pilots this is a conjugate multiply; other pilots are
/// divided out so corrupt input still gives the LS answer.
pub fn ls_estimate(frame: &ReceivedFrame, preamble: &Preamble) -> Result<CMatrix> {
    if frame.y.ncols() != preamble.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} subcarriers", frame.y.ncols()),
            actual: format!("preamble of {}", preamble.len()),
        });
    }
    if let Some(index) = preamble.symbols.iter().position(|x| x.norm_sqr() == 0.0) {
        return Err(Error::ZeroPilot { index });
    }
    let inv: Vec<C64> = preamble.symbols.iter().map(|x| x.conj() / x.norm_sqr()).collect();
    let mut est = frame.y.clone();
    for ((_, n), v) in est.indexed_iter_mut() {
        *v *= inv[n];
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::Array2;

    fn test_channel(seed: u64) -> CMatrix {
        let mut r = rng::seeded(seed);
        Array2::from_shape_fn((16, 32), |_| complex_gaussian(&mut r, 1.0))
    }

    #[test]
    fn preamble_is_qpsk_and_seeded() {
        let p = generate_preamble(&mut rng::seeded(1), 64);
        assert!(p.symbols.iter().all(|x| (x.norm() - 1.0).abs() < 1e-15));
        assert!(p.symbols.iter().all(|x| x.re.abs() == x.im.abs()));
        assert_eq!(p, generate_preamble(&mut rng::seeded(1), 64));
    }

    #[test]
    fn preamble_symbol_frequencies() {
        let p = generate_preamble(&mut rng::seeded(9), 10_000);
        let mut counts = [0usize; 4];
        for x in p.symbols.iter() {
            counts[(x.re < 0.0) as usize + 2 * (x.im < 0.0) as usize] += 1;
        }
        // binomial std of a quarter of 10⁴ is ≈ 43
        for c in counts {
            assert!((c as f64 - 2500.0).abs() < 4.0 * 43.3, "{counts:?}");
        }
    }

    #[test]
    fn noiseless_reception_and_ls() {
        let h = test_channel(2);
        let p = generate_preamble(&mut rng::seeded(3), 32);
        let frame = apply_channel_awgn(&h, &p, 300.0, &mut rng::seeded(4)).unwrap();
        for ((r, n), y) in frame.y.indexed_iter() {
            assert!((y / p.symbols[n] - h[[r, n]]).norm() < 1e-10);
        }
        let est = ls_estimate(&frame, &p).unwrap();
        for (a, b) in est.iter().zip(h.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn snr_calibration_at_minus_15_db() {
        let h = test_channel(5);
        let p = generate_preamble(&mut rng::seeded(6), 32);
        let mut r = rng::seeded(7);
        let mut sig = 0.0;
        let mut noise = 0.0;
        for _ in 0..100 {
            let frame = apply_channel_awgn(&h, &p, -15.0, &mut r).unwrap();
            for ((i, n), y) in frame.y.indexed_iter() {
                let clean = h[[i, n]] * p.symbols[n];
                sig += clean.norm_sqr();
                noise += (y - clean).norm_sqr();
            }
        }
        let snr = 10.0 * (sig / noise).log10();
        assert!((snr + 15.0).abs() < 0.5, "{snr}");
    }

    #[test]
    fn unit_power_channel_at_zero_db_has_unit_noise() {
        let h = Array2::from_elem((8, 8), C64::new(1.0, 0.0));
        let p = generate_preamble(&mut rng::seeded(1), 8);
        let frame = apply_channel_awgn(&h, &p, 0.0, &mut rng::seeded(2)).unwrap();
        assert!((frame.sigma2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ls_error_is_white_with_variance_sigma2() {
        let h = test_channel(8);
        let p = generate_preamble(&mut rng::seeded(9), 32);
        let mut r = rng::seeded(10);
        let mut acc = 0.0;
        let mut count = 0usize;
        let mut sigma2 = 0.0;
        let mut errs = Vec::new();
        for _ in 0..100 {
            let frame = apply_channel_awgn(&h, &p, -5.0, &mut r).unwrap();
            sigma2 = frame.sigma2;
            let e = &ls_estimate(&frame, &p).unwrap() - &h;
            acc += e.iter().map(|v| v.norm_sqr()).sum::<f64>();
            count += e.len();
            errs.push(e);
        }
        let var = acc / count as f64;
        assert!((var / sigma2 - 1.0).abs() < 0.05, "{var} vs {sigma2}");

        // lag-1 normalized autocorrelation along both axes, 10⁴+ entries
        let (mut num_r, mut num_c, mut den) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), 0.0);
        for e in &errs[..20] {
            for ((i, j), v) in e.indexed_iter() {
                den += v.norm_sqr();
                if i + 1 < e.nrows() {
                    num_r += v * e[[i + 1, j]].conj();
                }
                if j + 1 < e.ncols() {
                    num_c += v * e[[i, j + 1]].conj();
                }
            }
        }
        assert!(num_r.norm() / den < 0.05);
        assert!(num_c.norm() / den < 0.05);
    }

    #[test]
    fn ls_rejects_zero_pilot() {
        let p = Preamble { symbols: Array1::from(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]) };
        let frame = ReceivedFrame { y: CMatrix::zeros((2, 2)), sigma2: 0.0 };
        assert!(matches!(ls_estimate(&frame, &p), Err(Error::ZeroPilot { index: 1 })));
    }
}
