use crate::RMatrix;

/// Image-equivalent SNR (dB) of `test` against the noise-free `clean`
/// magnitudes: `10 log10(‖clean‖² / ‖test - clean‖²)`.
///
/// Identical inputs give `f64::INFINITY`.
pub fn image_equivalent_snr(clean: &RMatrix, test: &RMatrix) -> f64 {
    assert_eq!(clean.dim(), test.dim(), "image_equivalent_snr: shape mismatch");
    let signal: f64 = clean.iter().map(|v| v * v).sum();
    let error: f64 = clean.iter().zip(test.iter()).map(|(a, b)| (b - a) * (b - a)).sum();
    if error == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (signal / error).log10()
}

/// Relative SNR gain in percent, `(γ_AD - γ_BD) / |γ_BD| · 100`.
/// `None` when `γ_BD = 0` or either input is not finite.
pub fn relative_snr_gain(before_db: f64, after_db: f64) -> Option<f64> {
    if before_db == 0.0 || !before_db.is_finite() || !after_db.is_finite() {
        return None;
    }
    Some((after_db - before_db) / before_db.abs() * 100.0)
}
