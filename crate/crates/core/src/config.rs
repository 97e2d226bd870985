use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Carrier, bandwidth and array/subcarrier geometry of the uplink receiver.
///
/// The subcarrier spacing `Δ = f_s / N` and the wavelength `λ_c = c / f_c`
/// are always derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    /// Carrier frequency `f_c` (Hz).
    pub carrier_hz: f64,
    /// System bandwidth `f_s` (Hz).
    pub bandwidth_hz: f64,
    /// Receive antennas `M` of the uniform linear array.
    pub antennas: usize,
    /// OFDM subcarriers `N`.
    pub subcarriers: usize,
    /// Inter-element spacing `d` (m). `None` means half a carrier wavelength.
    pub element_spacing_m: Option<f64>,
    /// Maximum excess delay `τ_max` (s).
    pub delay_spread_s: f64,
}

impl SystemConfig {
    /// Full-scale receiver: 58 GHz carrier, M = N = 128, f_s = 0.1 f_c,
    /// 15 ns delay spread.
    pub fn full_scale() -> Self {
        Self {
            carrier_hz: 58e9,
            bandwidth_hz: 0.1 * 58e9,
            antennas: 128,
            subcarriers: 128,
            element_spacing_m: None,
            delay_spread_s: 15e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 || self.subcarriers == 0 {
            return Err(Error::InvalidConfig(format!(
                "antennas ({}) and subcarriers ({}) must be >= 1",
                self.antennas, self.subcarriers
            )));
        }
        if !self.bandwidth_hz.is_finite() || self.bandwidth_hz <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth_hz
            )));
        }
        if !self.carrier_hz.is_finite() || self.carrier_hz <= self.bandwidth_hz {
            return Err(Error::InvalidConfig(format!(
                "carrier ({}) must exceed bandwidth ({})",
                self.carrier_hz, self.bandwidth_hz
            )));
        }
        if let Some(d) = self.element_spacing_m {
            if d.is_nan() || d <= 0.0 {
                return Err(Error::InvalidConfig(format!("element spacing must be positive, got {d}")));
            }
        }
        if self.delay_spread_s.is_nan()
            || self.delay_spread_s < 0.0
            || self.delay_spread_s >= self.max_unaliased_delay() {
            return Err(Error::InvalidConfig(format!(
                "delay spread {:e} s must lie in [0, 1/Δ = {:e} s)",
                self.delay_spread_s,
                self.max_unaliased_delay()
            )));
        }
        Ok(())
    }

    /// Subcarrier spacing `Δ = f_s / N` (Hz).
    pub fn subcarrier_spacing(&self) -> f64 {
        self.bandwidth_hz / self.subcarriers as f64
    }

    /// Carrier wavelength `λ_c` (m).
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Inter-element spacing `d` (m).
    pub fn element_spacing(&self) -> f64 {
        self.element_spacing_m.unwrap_or(0.5 * self.wavelength())
    }

    /// Delay window `1/Δ` of the subcarrier grid; delays at or beyond it alias.
    pub fn max_unaliased_delay(&self) -> f64 {
        1.0 / self.subcarrier_spacing()
    }

    /// Delay resolution of one delay bin, `1/(NΔ) = 1/f_s`.
    pub fn delay_bin(&self) -> f64 {
        1.0 / (self.subcarriers as f64 * self.subcarrier_spacing())
    }

    /// Spatial frequency `θ = d sin φ / λ_c` of a physical angle of arrival.
    pub fn spatial_frequency(&self, aoa_rad: f64) -> f64 {
        self.element_spacing() * aoa_rad.sin() / self.wavelength()
    }

    /// Matrix shape `(M, N)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.antennas, self.subcarriers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities() {
        let cfg = SystemConfig::full_scale();
        cfg.validate().unwrap();
        assert_eq!(cfg.subcarrier_spacing() * cfg.subcarriers as f64, cfg.bandwidth_hz);
        assert!((cfg.element_spacing() - cfg.wavelength() / 2.0).abs() < 1e-18);
        // half-wavelength spacing maps broadside-to-endfire onto [-1/2, 1/2]
        assert!((cfg.spatial_frequency(std::f64::consts::FRAC_PI_2) - 0.5).abs() < 1e-12);
        assert!(cfg.delay_spread_s < cfg.max_unaliased_delay());
    }

    #[test]
    fn rejects_bad_geometry() {
        let mut cfg = SystemConfig::full_scale();
        cfg.antennas = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = SystemConfig::full_scale();
        cfg.carrier_hz = cfg.bandwidth_hz;
        assert!(cfg.validate().is_err());

        // f_s = 0.2 f_c with N = 128 gives 1/Δ ≈ 11 ns < 15 ns
        let mut cfg = SystemConfig::full_scale();
        cfg.bandwidth_hz = 0.2 * cfg.carrier_hz;
        assert!(cfg.validate().is_err());
    }
}
