//! Unitary 2-D DFT between the space-frequency and delay-angle domains.
//!
//! `G = F_Mᴴ H F_N*` with `F_K[k, l] = exp(-j2π k l / K) / √K`. Applied to a
//! path atom `d(θ) c(τ)ᵀ` this peaks at angle bin `θ M` and delay bin
//! `τ N Δ`, so it is an inverse DFT along both axes. Angle bins above `M/2`
//! are negative spatial frequencies, see [`angle_of_bin`].

use std::f64::consts::TAU;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::{CMatrix, C64};

/// Unitary `K x K` DFT matrix.
pub fn dft_matrix(k: usize) -> CMatrix {
    let scale = 1.0 / (k as f64).sqrt();
    Array2::from_shape_fn((k, k), |(a, b)| {
        C64::from_polar(scale, -TAU * ((a * b) % k) as f64 / k as f64)
    })
}

/// Precomputed FFT plans for one `M x N` grid. Immutable and shareable.
#[derive(Clone)]
pub struct Dft2 {
    rows: usize,
    cols: usize,
    fwd_rows: Arc<dyn Fft<f64>>,
    inv_rows: Arc<dyn Fft<f64>>,
    fwd_cols: Arc<dyn Fft<f64>>,
    inv_cols: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft2").field("rows", &self.rows).field("cols", &self.cols).finish()
    }
}

impl Dft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            // along axis 0 (length = rows)
            fwd_cols: planner.plan_fft_forward(rows),
            inv_cols: planner.plan_fft_inverse(rows),
            // along axis 1 (length = cols)
            fwd_rows: planner.plan_fft_forward(cols),
            inv_rows: planner.plan_fft_inverse(cols),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn check(&self, x: &CMatrix) -> Result<()> {
        if x.dim() != (self.rows, self.cols) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                actual: format!("{}x{}", x.nrows(), x.ncols()),
            });
        }
        Ok(())
    }

    /// `G = F_Mᴴ H F_N*`.
    pub fn to_delay_angle(&self, h: &CMatrix) -> Result<CMatrix> {
        self.check(h)?;
        Ok(self.apply(h, &self.inv_rows, &self.inv_cols))
    }

    /// `H = F_M G F_Nᵀ`, the exact inverse of [`Dft2::to_delay_angle`].
    pub fn to_space_frequency(&self, g: &CMatrix) -> Result<CMatrix> {
        self.check(g)?;
        Ok(self.apply(g, &self.fwd_rows, &self.fwd_cols))
    }

    fn apply(&self, x: &CMatrix, along_rows: &Arc<dyn Fft<f64>>, along_cols: &Arc<dyn Fft<f64>>) -> CMatrix {
        let scale = 1.0 / ((self.rows * self.cols) as f64).sqrt();
        let mut buf: Vec<C64> = x.iter().copied().collect();
        along_rows.process(&mut buf);
        let a = Array2::from_shape_vec((self.rows, self.cols), buf).expect("shape");
        let mut t: Vec<C64> = a.t().iter().copied().collect();
        along_cols.process(&mut t);
        let mut out = Array2::from_shape_vec((self.cols, self.rows), t)
            .expect("shape")
            .reversed_axes()
            .as_standard_layout()
            .into_owned();
        out.mapv_inplace(|v| v * scale);
        out
    }
}

/// One-shot `G = F_Mᴴ H F_N*`.
pub fn to_delay_angle(h: &CMatrix) -> CMatrix {
    let plan = Dft2::new(h.nrows(), h.ncols());
    plan.to_delay_angle(h).expect("shape taken from input")
}

/// One-shot `H = F_M G F_Nᵀ`.
pub fn to_space_frequency(g: &CMatrix) -> CMatrix {
    let plan = Dft2::new(g.nrows(), g.ncols());
    plan.to_space_frequency(g).expect("shape taken from input")
}

/// Spatial frequency of angle bin `m`: `m / M` wrapped to `[-1/2, 1/2)`.
pub fn angle_of_bin(m: f64, antennas: usize) -> f64 {
    crate::channel::wrap_half(m / antennas as f64)
}

/// Diagonal of the fine-rotation matrix, entry `k = exp(j2π k δ)`.
///
/// `δ` is in cycles per sample; the refinement regime is `|δ| ≤ 1/(2K)`,
/// anything beyond a full bin is rejected.
pub fn rotation_diag(k: usize, delta: f64) -> Result<Vec<C64>> {
    if delta.is_nan() || delta.abs() > 1.0 / k as f64 {
        return Err(Error::InvalidArgument(format!(
            "rotation offset {delta} outside ±1/K = ±{}",
            1.0 / k as f64
        )));
    }
    Ok((0..k).map(|i| C64::from_polar(1.0, TAU * i as f64 * delta)).collect())
}

/// Frobenius energy `Σ|x|²`.
pub fn energy(x: &CMatrix) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// Element-wise magnitude.
pub fn magnitude(x: &CMatrix) -> crate::RMatrix {
    x.mapv(|v| v.norm())
}
