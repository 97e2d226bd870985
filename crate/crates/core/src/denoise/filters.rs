//! Classical `k x k` smoothing filters with reflect padding.

use crate::error::{Error, Result};
use crate::RMatrix;

fn check_kernel(k: usize) -> Result<()> {
    if k < 3 || k.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("filter size must be odd and >= 3, got {k}")));
    }
    Ok(())
}

/// Reflect index `i` into `[0, n)` mirroring about the edge samples
/// (`d c b | a b c d`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - j;
    }
    j as usize
}

fn neighborhood(img: &RMatrix, r: usize, c: usize, k: usize, out: &mut Vec<f64>) {
    let h = k as isize / 2;
    out.clear();
    for dr in -h..=h {
        let rr = reflect(r as isize + dr, img.nrows());
        for dc in -h..=h {
            out.push(img[[rr, reflect(c as isize + dc, img.ncols())]]);
        }
    }
}

pub fn mean_filter(img: &RMatrix, k: usize) -> Result<RMatrix> {
    check_kernel(k)?;
    let mut buf = Vec::with_capacity(k * k);
    let mut out = RMatrix::zeros(img.dim());
    for ((r, c), v) in out.indexed_iter_mut() {
        neighborhood(img, r, c, k, &mut buf);
        *v = buf.iter().sum::<f64>() / buf.len() as f64;
    }
    Ok(out)
}

pub fn median_filter(img: &RMatrix, k: usize) -> Result<RMatrix> {
    check_kernel(k)?;
    let mut buf = Vec::with_capacity(k * k);
    let mut out = RMatrix::zeros(img.dim());
    for ((r, c), v) in out.indexed_iter_mut() {
        neighborhood(img, r, c, k, &mut buf);
        let mid = buf.len() / 2;
        let (_, m, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
        *v = *m;
    }
    Ok(out)
}
