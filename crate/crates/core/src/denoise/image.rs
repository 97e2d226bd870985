use crate::{CMatrix, RMatrix};

/// Min/max of the magnitudes an image was normalized with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRecord {
    /// Largest magnitude, maps to 1.
    pub scale: f64,
    /// Smallest magnitude, maps to 0.
    pub offset: f64,
}

impl NormRecord {
    pub fn span(&self) -> f64 {
        self.scale - self.offset
    }

    /// Magnitude -> image value.
    pub fn forward(&self, magnitude: f64) -> f64 {
        let span = self.span();
        if span > 0.0 {
            (magnitude - self.offset) / span
        } else {
            0.0
        }
    }

    /// Image value -> magnitude.
    pub fn inverse(&self, value: f64) -> f64 {
        self.offset + value * self.span()
    }
}

/// `[0, 1]`-normalized magnitude image of a delay-angle channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEquivalent {
    pub img: RMatrix,
    pub norm: NormRecord,
    /// Set when all magnitudes were equal; `img` is then all zeros.
    pub degenerate: bool,
}

/// Normalize `|G|` to `[0, 1]`.
pub fn to_image(g: &CMatrix) -> ImageEquivalent {
    magnitude_to_image(&g.mapv(|v| v.norm()))
}

pub fn magnitude_to_image(mag: &RMatrix) -> ImageEquivalent {
    let (lo, hi) = mag.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let (lo, hi) = if mag.is_empty() { (0.0, 0.0) } else { (lo, hi) };
    let norm = NormRecord { scale: hi, offset: lo };
    let degenerate = hi.is_nan() || lo.is_nan() || hi <= lo;
    let img = if degenerate { RMatrix::zeros(mag.dim()) } else { mag.mapv(|v| norm.forward(v)) };
    ImageEquivalent { img, norm, degenerate }
}

/// Back to magnitudes with the stored record.
pub fn from_image(image: &ImageEquivalent) -> RMatrix {
    if image.degenerate {
        return RMatrix::from_elem(image.img.dim(), image.norm.offset);
    }
    back_map(&image.img, &image.norm)
}

/// Map any image (e.g. a denoised one) back to magnitudes with `norm`.
pub fn back_map(img: &RMatrix, norm: &NormRecord) -> RMatrix {
    img.mapv(|v| norm.inverse(v))
}

/// Normalize `mag` with someone else's record (training targets).
pub fn normalize_with(mag: &RMatrix, norm: &NormRecord) -> RMatrix {
    mag.mapv(|v| norm.forward(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;
    use ndarray::array;

    #[test]
    fn two_level_image() {
        let g = array![[C64::new(0.0, 0.0), C64::new(3.0, 4.0)], [C64::new(0.0, 5.0), C64::new(0.0, 0.0)]];
        let im = to_image(&g);
        assert_eq!(im.img, array![[0.0, 1.0], [1.0, 0.0]]);
        assert!(!im.degenerate);
        assert_eq!(from_image(&im), array![[0.0, 5.0], [5.0, 0.0]]);
    }

    #[test]
    fn roundtrip_is_exact_to_rounding() {
        let g = CMatrix::from_shape_fn((5, 7), |(i, j)| C64::new((i * 7 + j) as f64 * 0.37 - 3.0, (j as f64).sin()));
        let im = to_image(&g);
        assert!(im.img.iter().all(|v| (0.0..=1.0).contains(v)));
        let back = from_image(&im);
        for (a, b) in back.iter().zip(g.iter()) {
            assert!((a - b.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_magnitude_is_degenerate() {
        let g = CMatrix::from_elem((3, 3), C64::new(0.0, 2.0));
        let im = to_image(&g);
        assert!(im.degenerate);
        assert!(im.img.iter().all(|v| *v == 0.0));
        assert!(from_image(&im).iter().all(|v| *v == 2.0));
    }
}
