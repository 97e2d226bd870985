//! Residual-learning convolutional denoiser.
//!
//! Layer 1 is `conv3x3 + ReLU`, layers `2..D-1` are `conv3x3 + BN + ReLU`
//! and layer `D` is a plain `conv3x3` producing one channel. Every conv uses
//! zero "same" padding. The network predicts the noise map `R(y)`; the clean
//! estimate is `y - R(y)`.
//!
//! Feature maps are stored as `channels x (height * width)` matrices so each
//! convolution is one im2col + GEMM.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::RMatrix;

pub const BN_EPS: f64 = 1e-5;
const KERNEL: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    /// Number of conv layers `D` (>= 2).
    pub depth: usize,
    /// Hidden width `C`.
    pub channels: usize,
    /// Batch-norm on hidden layers.
    pub batch_norm: bool,
    /// Extra constant input channel carrying the noise level.
    pub noise_channel: bool,
}

impl Architecture {
    /// Desk-scale network: 7 layers, 32 channels, batch norm, blind.
    pub fn desk() -> Self {
        Self { depth: 7, channels: 32, batch_norm: true, noise_channel: false }
    }

    pub fn input_channels(&self) -> usize {
        1 + self.noise_channel as usize
    }

    /// Side of the square receptive field, `2D + 1`.
    pub fn receptive_field(&self) -> usize {
        2 * self.depth + 1
    }

    /// `(in_ch, out_ch, has_bn)` of layer `l`.
    pub fn layer_shape(&self, l: usize) -> (usize, usize, bool) {
        let last = self.depth - 1;
        let cin = if l == 0 { self.input_channels() } else { self.channels };
        let cout = if l == last { 1 } else { self.channels };
        (cin, cout, self.batch_norm && l > 0 && l < last)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 || self.channels == 0 {
            return Err(Error::InvalidConfig(format!(
                "denoiser needs depth >= 2 and channels >= 1, got depth {} channels {}",
                self.depth, self.channels
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    fn identity(ch: usize) -> Self {
        Self {
            gamma: Array1::ones(ch),
            beta: Array1::zeros(ch),
            running_mean: Array1::zeros(ch),
            running_var: Array1::ones(ch),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    /// `out_ch x (in_ch * 9)`, column index `i * 9 + ky * 3 + kx`.
    pub kernel: Array2<f64>,
    pub bias: Array1<f64>,
    pub bn: Option<BatchNorm>,
}

impl ConvLayer {
    pub fn in_channels(&self) -> usize {
        self.kernel.ncols() / KERNEL
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserWeights {
    pub arch: Architecture,
    pub layers: Vec<ConvLayer>,
}

impl DenoiserWeights {
    /// He (fan-in) initialization; the last layer starts near zero so the
    /// untrained network is close to the identity denoiser.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let layers = (0..arch.depth)
            .map(|l| {
                let (cin, cout, bn) = arch.layer_shape(l);
                let std = (2.0 / (cin * KERNEL) as f64).sqrt();
                let std = if l + 1 == arch.depth { std * 0.1 } else { std };
                let kernel = Array2::from_shape_fn((cout, cin * KERNEL), |_| {
                    let z: f64 = StandardNormal.sample(rng);
                    z * std
                });
                ConvLayer { kernel, bias: Array1::zeros(cout), bn: bn.then(|| BatchNorm::identity(cout)) }
            })
            .collect();
        Ok(Self { arch, layers })
    }

    /// All-zero network: `R ≡ 0`.
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let layers = (0..arch.depth)
            .map(|l| {
                let (cin, cout, bn) = arch.layer_shape(l);
                ConvLayer {
                    kernel: Array2::zeros((cout, cin * KERNEL)),
                    bias: Array1::zeros(cout),
                    bn: bn.then(|| BatchNorm::identity(cout)),
                }
            })
            .collect();
        Ok(Self { arch, layers })
    }

    /// Check the tensors against the architecture descriptor.
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if self.layers.len() != self.arch.depth {
            return Err(Error::ShapeMismatch {
                expected: format!("{} layers", self.arch.depth),
                actual: format!("{} layers", self.layers.len()),
            });
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let (cin, cout, bn) = self.arch.layer_shape(l);
            let bn_ok = match &layer.bn {
                Some(b) => bn && [&b.gamma, &b.beta, &b.running_mean, &b.running_var].iter().all(|v| v.len() == cout),
                None => !bn,
            };
            if layer.kernel.dim() != (cout, cin * KERNEL) || layer.bias.len() != cout || !bn_ok {
                return Err(Error::ShapeMismatch {
                    expected: format!("layer {l}: {cout}x{cin}x3x3, bn={bn}"),
                    actual: format!(
                        "kernel {:?}, bias {}, bn={}",
                        layer.kernel.dim(),
                        layer.bias.len(),
                        layer.bn.is_some()
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.kernel.len() + l.bias.len() + l.bn.as_ref().map_or(0, |b| 2 * b.gamma.len()))
            .sum()
    }
}

/// Network input for one image: `input_channels x (h * w)`.
#[derive(Debug, Clone)]
pub struct FeatureInput {
    pub data: Array2<f64>,
    pub height: usize,
    pub width: usize,
}

impl FeatureInput {
    /// Stack the image and, if requested, a constant noise-level plane.
    pub fn new(img: &RMatrix, noise_level: Option<f64>) -> Self {
        let (h, w) = img.dim();
        let chans = 1 + noise_level.is_some() as usize;
        let mut data = Array2::zeros((chans, h * w));
        for (dst, src) in data.row_mut(0).iter_mut().zip(img.iter()) {
            *dst = *src;
        }
        if let Some(s) = noise_level {
            data.row_mut(1).fill(s);
        }
        Self { data, height: h, width: w }
    }
}

fn im2col(x: &Array2<f64>, h: usize, w: usize) -> Array2<f64> {
    let cin = x.nrows();
    let mut cols = Array2::zeros((cin * KERNEL, h * w));
    for i in 0..cin {
        let src = x.row(i);
        let src = src.as_slice().expect("contiguous feature map");
        for ky in 0..3 {
            for kx in 0..3 {
                let mut row = cols.row_mut(i * KERNEL + ky * 3 + kx);
                let dst = row.as_slice_mut().expect("contiguous");
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let sy = sy as usize;
                    // x range where sx = x + kx - 1 is in bounds
                    let x0 = if kx == 0 { 1 } else { 0 };
                    let x1 = if kx == 2 { w - 1 } else { w };
                    if x0 >= x1 {
                        continue;
                    }
                    let off = kx as isize - 1;
                    let s0 = (sy * w) as isize + x0 as isize + off;
                    dst[y * w + x0..y * w + x1].copy_from_slice(&src[s0 as usize..s0 as usize + (x1 - x0)]);
                }
            }
        }
    }
    cols
}

fn col2im(cols: &Array2<f64>, cin: usize, h: usize, w: usize) -> Array2<f64> {
    let mut x = Array2::<f64>::zeros((cin, h * w));
    for i in 0..cin {
        let mut dst_row = x.row_mut(i);
        let dst = dst_row.as_slice_mut().expect("contiguous");
        for ky in 0..3 {
            for kx in 0..3 {
                let row = cols.row(i * KERNEL + ky * 3 + kx);
                let src = row.as_slice().expect("contiguous");
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let sy = sy as usize;
                    let x0 = if kx == 0 { 1 } else { 0 };
                    let x1 = if kx == 2 { w - 1 } else { w };
                    if x0 >= x1 {
                        continue;
                    }
                    let off = kx as isize - 1;
                    let d0 = ((sy * w) as isize + x0 as isize + off) as usize;
                    for (d, s) in dst[d0..d0 + (x1 - x0)].iter_mut().zip(&src[y * w + x0..y * w + x1]) {
                        *d += *s;
                    }
                }
            }
        }
    }
    x
}

fn conv(layer: &ConvLayer, x: &Array2<f64>, h: usize, w: usize) -> (Array2<f64>, Array2<f64>) {
    let cols = im2col(x, h, w);
    let mut z = layer.kernel.dot(&cols);
    for (mut row, b) in z.axis_iter_mut(Axis(0)).zip(layer.bias.iter()) {
        row += *b;
    }
    (z, cols)
}

/// How batch-norm layers normalize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Statistics of the current batch (training).
    Batch,
    /// Stored running statistics (inference).
    Running,
}

/// Inference: residual estimate `R(img)`.
pub fn cnn_forward(img: &RMatrix, weights: &DenoiserWeights, noise_level: Option<f64>) -> Result<RMatrix> {
    weights.validate()?;
    if weights.arch.noise_channel != noise_level.is_some() {
        return Err(Error::InvalidArgument(format!(
            "network noise-level channel is {}, but noise level was {}",
            if weights.arch.noise_channel { "present" } else { "absent" },
            if noise_level.is_some() { "given" } else { "not given" }
        )));
    }
    let input = FeatureInput::new(img, noise_level);
    let (out, _) = forward_batch(weights, std::slice::from_ref(&input), BnMode::Running);
    let (h, w) = img.dim();
    Ok(out[0].clone().into_shape_with_order((h, w)).expect("single output channel"))
}

/// Denoised image `img - R(img)`.
pub fn cnn_denoise(img: &RMatrix, weights: &DenoiserWeights, noise_level: Option<f64>) -> Result<RMatrix> {
    let residual = cnn_forward(img, weights, noise_level)?;
    Ok(img - &residual)
}

/// Per-layer activations kept for backpropagation.
pub struct ForwardCache {
    /// `acts[l]` is the input of layer `l` per image; `acts[D]` the output.
    acts: Vec<Vec<Array2<f64>>>,
    /// Normalized pre-activations `x̂` of BN layers.
    xhat: Vec<Option<Vec<Array2<f64>>>>,
    /// `1/sqrt(var + eps)` per BN layer.
    inv_std: Vec<Option<Array1<f64>>>,
    /// Batch statistics `(mean, biased var)` per BN layer.
    pub batch_stats: Vec<Option<(Array1<f64>, Array1<f64>)>>,
    dims: Vec<(usize, usize)>,
}

/// Forward pass over a batch; returns one `1 x (h*w)` map per input.
pub fn forward_batch(
    weights: &DenoiserWeights,
    inputs: &[FeatureInput],
    mode: BnMode,
) -> (Vec<Array2<f64>>, ForwardCache) {
    let depth = weights.layers.len();
    let dims: Vec<(usize, usize)> = inputs.iter().map(|x| (x.height, x.width)).collect();
    let mut acts: Vec<Vec<Array2<f64>>> = Vec::with_capacity(depth + 1);
    acts.push(inputs.iter().map(|x| x.data.clone()).collect());
    let mut xhat_all = Vec::with_capacity(depth);
    let mut inv_all = Vec::with_capacity(depth);
    let mut stats_all = Vec::with_capacity(depth);

    for (l, layer) in weights.layers.iter().enumerate() {
        let last = l + 1 == depth;
        let mut zs: Vec<Array2<f64>> =
            acts[l].iter().zip(&dims).map(|(x, &(h, w))| conv(layer, x, h, w).0).collect();

        let (mut xhat, mut inv, mut stats) = (None, None, None);
        if let Some(bn) = &layer.bn {
            let (mean, var) = match mode {
                BnMode::Batch => channel_stats(&zs),
                BnMode::Running => (bn.running_mean.clone(), bn.running_var.clone()),
            };
            let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
            let mut xs = Vec::with_capacity(zs.len());
            for z in zs.iter_mut() {
                let mut xh = z.clone();
                for (c, mut row) in xh.axis_iter_mut(Axis(0)).enumerate() {
                    let (m, s) = (mean[c], inv_std[c]);
                    row.mapv_inplace(|v| (v - m) * s);
                }
                for (c, (mut zrow, xrow)) in z.axis_iter_mut(Axis(0)).zip(xh.axis_iter(Axis(0))).enumerate() {
                    let (g, b) = (bn.gamma[c], bn.beta[c]);
                    zrow.zip_mut_with(&xrow, |dst, &x| *dst = g * x + b);
                }
                xs.push(xh);
            }
            if mode == BnMode::Batch {
                xhat = Some(xs);
                stats = Some((mean, var));
            }
            inv = Some(inv_std);
        }
        if !last {
            for z in zs.iter_mut() {
                z.mapv_inplace(|v| v.max(0.0));
            }
        }
        acts.push(zs);
        xhat_all.push(xhat);
        inv_all.push(inv);
        stats_all.push(stats);
    }

    let out = acts[depth].clone();
    (out, ForwardCache { acts, xhat: xhat_all, inv_std: inv_all, batch_stats: stats_all, dims })
}

fn channel_stats(zs: &[Array2<f64>]) -> (Array1<f64>, Array1<f64>) {
    let ch = zs[0].nrows();
    let count: usize = zs.iter().map(|z| z.ncols()).sum();
    let mut mean = Array1::<f64>::zeros(ch);
    for z in zs {
        mean += &z.sum_axis(Axis(1));
    }
    mean /= count as f64;
    let mut var = Array1::<f64>::zeros(ch);
    for z in zs {
        for (c, row) in z.axis_iter(Axis(0)).enumerate() {
            let m = mean[c];
            var[c] += row.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
        }
    }
    var /= count as f64;
    (mean, var)
}

/// Gradients with the same layout as the trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub kernel: Array2<f64>,
    pub bias: Array1<f64>,
    /// `(d gamma, d beta)` for BN layers.
    pub bn: Option<(Array1<f64>, Array1<f64>)>,
}

/// Backpropagate `d_out` (dLoss/dOutput per image) through a batch-mode
/// forward pass.
pub fn backward(weights: &DenoiserWeights, cache: &ForwardCache, d_out: &[Array2<f64>]) -> Vec<LayerGrad> {
    let depth = weights.layers.len();
    let mut grads: Vec<Option<LayerGrad>> = vec![None; depth];
    let mut delta: Vec<Array2<f64>> = d_out.to_vec();

    for l in (0..depth).rev() {
        let layer = &weights.layers[l];
        let last = l + 1 == depth;
        if !last {
            for (d, a) in delta.iter_mut().zip(&cache.acts[l + 1]) {
                d.zip_mut_with(a, |g, &act| {
                    if act <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
        }
        let mut bn_grad = None;
        if let Some(bn) = &layer.bn {
            let xhat = cache.xhat[l].as_ref().expect("backward needs a batch-mode forward pass");
            let inv_std = cache.inv_std[l].as_ref().expect("bn inverse std");
            let ch = bn.gamma.len();
            let count: usize = delta.iter().map(|d| d.ncols()).sum();
            let mut dgamma = Array1::<f64>::zeros(ch);
            let mut dbeta = Array1::<f64>::zeros(ch);
            for (d, xh) in delta.iter().zip(xhat) {
                for c in 0..ch {
                    let (dr, xr) = (d.row(c), xh.row(c));
                    dbeta[c] += dr.sum();
                    dgamma[c] += dr.iter().zip(xr.iter()).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            // dz = γ·inv_std/n · (n·dy - Σdy - x̂·Σ(dy·x̂))
            for (d, xh) in delta.iter_mut().zip(xhat) {
                for c in 0..ch {
                    let k = bn.gamma[c] * inv_std[c] / count as f64;
                    let (sb, sg) = (dbeta[c], dgamma[c]);
                    let mut dr = d.row_mut(c);
                    dr.zip_mut_with(&xh.row(c), |g, &x| *g = k * (count as f64 * *g - sb - x * sg));
                }
            }
            bn_grad = Some((dgamma, dbeta));
        }

        let mut dk = Array2::<f64>::zeros(layer.kernel.dim());
        let mut db = Array1::<f64>::zeros(layer.bias.len());
        let mut next = Vec::with_capacity(delta.len());
        for ((d, x), &(h, w)) in delta.iter().zip(&cache.acts[l]).zip(&cache.dims) {
            let cols = im2col(x, h, w);
            dk += &d.dot(&cols.t());
            db += &d.sum_axis(Axis(1));
            if l > 0 {
                let dcols = layer.kernel.t().dot(d);
                next.push(col2im(&dcols, layer.in_channels(), h, w));
            }
        }
        grads[l] = Some(LayerGrad { kernel: dk, bias: db, bn: bn_grad });
        delta = next;
    }
    grads.into_iter().map(|g| g.expect("every layer visited")).collect()
}

/// Residual-learning loss `J = 1/(2B) Σ ‖R(y_i) - (y_i - x_i)‖²` and its
/// gradient with respect to each output map.
pub fn residual_loss(outputs: &[Array2<f64>], targets: &[Array2<f64>]) -> (f64, Vec<Array2<f64>>) {
    let b = outputs.len() as f64;
    let mut loss = 0.0;
    let grads = outputs
        .iter()
        .zip(targets)
        .map(|(o, t)| {
            let diff = o - t;
            loss += diff.iter().map(|v| v * v).sum::<f64>();
            diff / b
        })
        .collect();
    (loss / (2.0 * b), grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn rand_img(h: usize, w: usize, seed: u64) -> RMatrix {
        let mut r = rng::seeded(seed);
        RMatrix::from_shape_fn((h, w), |_| r.random::<f64>())
    }

    /// Direct 3x3 zero-padded convolution.
    fn naive_conv(layer: &ConvLayer, x: &Array2<f64>, h: usize, w: usize) -> Array2<f64> {
        let cin = layer.in_channels();
        Array2::from_shape_fn((layer.out_channels(), h * w), |(o, p)| {
            let (y, xx) = (p / w, p % w);
            let mut acc = layer.bias[o];
            for i in 0..cin {
                for ky in 0..3 {
                    for kx in 0..3 {
                        let sy = y as isize + ky as isize - 1;
                        let sx = xx as isize + kx as isize - 1;
                        if sy >= 0 && sy < h as isize && sx >= 0 && sx < w as isize {
                            acc += layer.kernel[[o, i * 9 + ky * 3 + kx]] * x[[i, sy as usize * w + sx as usize]];
                        }
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn im2col_conv_matches_direct_convolution() {
        let arch = Architecture { depth: 3, channels: 4, batch_norm: false, noise_channel: false };
        let net = DenoiserWeights::init(arch, &mut rng::seeded(1)).unwrap();
        let mut r = rng::seeded(2);
        let x = Array2::from_shape_fn((4, 5 * 7), |_| r.random::<f64>() - 0.5);
        let (fast, _) = conv(&net.layers[1], &x, 5, 7);
        let slow = naive_conv(&net.layers[1], &x, 5, 7);
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let mut r = rng::seeded(3);
        let x = Array2::from_shape_fn((2, 4 * 6), |_| r.random::<f64>());
        let c = Array2::from_shape_fn((18, 4 * 6), |_| r.random::<f64>());
        let lhs: f64 = (&im2col(&x, 4, 6) * &c).sum();
        let rhs: f64 = (&x * &col2im(&c, 2, 4, 6)).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn zero_network_is_identity_denoiser() {
        let net = DenoiserWeights::zeros(Architecture::desk()).unwrap();
        let img = rand_img(20, 20, 4);
        assert!(cnn_forward(&img, &net, None).unwrap().iter().all(|v| *v == 0.0));
        assert_eq!(cnn_denoise(&img, &net, None).unwrap(), img);
    }

    #[test]
    fn output_shape_follows_input() {
        let net = DenoiserWeights::init(Architecture::desk(), &mut rng::seeded(5)).unwrap();
        for (h, w) in [(128, 128), (40, 40), (17, 9)] {
            assert_eq!(cnn_forward(&rand_img(h, w, 6), &net, None).unwrap().dim(), (h, w));
        }
    }

    #[test]
    fn residual_identity_holds() {
        let net = DenoiserWeights::init(Architecture::desk(), &mut rng::seeded(7)).unwrap();
        let img = rand_img(24, 24, 8);
        let r = cnn_forward(&img, &net, None).unwrap();
        let d = cnn_denoise(&img, &net, None).unwrap();
        for ((a, b), c) in d.iter().zip(r.iter()).zip(img.iter()) {
            assert!((a + b - c).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut net = DenoiserWeights::init(Architecture::desk(), &mut rng::seeded(9)).unwrap();
        net.layers[2].kernel = Array2::zeros((32, 16 * 9));
        assert!(matches!(cnn_forward(&rand_img(16, 16, 1), &net, None), Err(Error::ShapeMismatch { .. })));
        let net = DenoiserWeights::init(Architecture::desk(), &mut rng::seeded(9)).unwrap();
        assert!(cnn_forward(&rand_img(16, 16, 1), &net, Some(0.1)).is_err());
    }

    #[test]
    fn frozen_batch_statistics_match_inference() {
        let arch = Architecture { depth: 4, channels: 6, batch_norm: true, noise_channel: false };
        let mut net = DenoiserWeights::init(arch, &mut rng::seeded(10)).unwrap();
        for layer in net.layers.iter_mut() {
            if let Some(bn) = layer.bn.as_mut() {
                bn.gamma.mapv_inplace(|_| 1.3);
                bn.beta.mapv_inplace(|_| 0.05);
            }
        }
        let inputs: Vec<FeatureInput> = (0..3).map(|s| FeatureInput::new(&rand_img(12, 12, 20 + s), None)).collect();
        let (train_out, cache) = forward_batch(&net, &inputs, BnMode::Batch);
        for (layer, stats) in net.layers.iter_mut().zip(&cache.batch_stats) {
            if let (Some(bn), Some((m, v))) = (layer.bn.as_mut(), stats) {
                bn.running_mean = m.clone();
                bn.running_var = v.clone();
            }
        }
        let (eval_out, _) = forward_batch(&net, &inputs, BnMode::Running);
        for (a, b) in train_out.iter().zip(&eval_out) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }
}
