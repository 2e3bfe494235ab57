//! Hand-written layers with explicit backward passes.
//!
//! Activations are `(batch, features)` matrices. Convolutional features are
//! stored channel-major (`[channel][row][col]`), so flattening is free.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::spec::ConvShape;

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

pub type ParamId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    /// Running statistics are stored alongside weights but never receive
    /// gradients.
    pub trainable: bool,
}

/// Flat, ordered collection of named parameter arrays.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    pub params: Vec<Param>,
}

impl ParamStore {
    pub fn add(&mut self, name: String, shape: Vec<usize>, data: Vec<f64>, trainable: bool) -> ParamId {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.params.push(Param {
            name,
            shape,
            data,
            trainable,
        });
        self.params.len() - 1
    }

    pub fn data(&self, id: ParamId) -> &[f64] {
        &self.params[id].data
    }

    pub fn matrix(&self, id: ParamId, rows: usize, cols: usize) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((rows, cols), &self.params[id].data).expect("parameter shape")
    }

    pub fn zeros_like(&self) -> Vec<Vec<f64>> {
        self.params.iter().map(|p| vec![0.0; p.data.len()]).collect()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Rounds every value to the nearest `f32`, the storage precision of
    /// checkpoints.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            for v in &mut p.data {
                *v = *v as f32 as f64;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.data.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone)]
pub enum Layer {
    Dense {
        input: usize,
        output: usize,
        weight: ParamId,
        bias: ParamId,
    },
    Conv {
        shape: ConvShape,
        weight: ParamId,
        bias: ParamId,
    },
    ConvTranspose {
        shape: ConvShape,
        weight: ParamId,
        bias: ParamId,
    },
    BatchNorm {
        channels: usize,
        spatial: usize,
        gamma: ParamId,
        beta: ParamId,
        running_mean: ParamId,
        running_var: ParamId,
    },
    Relu,
}

/// Values saved by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub enum Cache {
    Input(Array2<f64>),
    Columns(Vec<Array2<f64>>),
    Norm {
        normalized: Array2<f64>,
        inv_std: Array1<f64>,
        batch_mean: Array1<f64>,
        batch_var: Array1<f64>,
        count: usize,
    },
    Mask(Array2<bool>),
}

/// Gathers kernel windows: row `gy * gw + gx`, column `(ci * k + ky) * k + kx`
/// holds `img[ci][gy * stride - pad + ky][gx * stride - pad + kx]`, zero
/// outside the image.
#[allow(clippy::too_many_arguments)]
pub fn im2col(
    img: &[f64],
    channels: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    gh: usize,
    gw: usize,
) -> Array2<f64> {
    let mut cols = Array2::zeros((gh * gw, channels * k * k));
    for gy in 0..gh {
        for gx in 0..gw {
            let mut row = cols.row_mut(gy * gw + gx);
            for ci in 0..channels {
                for ky in 0..k {
                    let y = (gy * stride + ky) as isize - pad as isize;
                    if y < 0 || y >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let x = (gx * stride + kx) as isize - pad as isize;
                        if x < 0 || x >= w as isize {
                            continue;
                        }
                        row[(ci * k + ky) * k + kx] = img[(ci * h + y as usize) * w + x as usize];
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters column entries back, accumulating.
#[allow(clippy::too_many_arguments)]
pub fn col2im(
    cols: &Array2<f64>,
    channels: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    gh: usize,
    gw: usize,
    img: &mut [f64],
) {
    for gy in 0..gh {
        for gx in 0..gw {
            let row = cols.row(gy * gw + gx);
            for ci in 0..channels {
                for ky in 0..k {
                    let y = (gy * stride + ky) as isize - pad as isize;
                    if y < 0 || y >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let x = (gx * stride + kx) as isize - pad as isize;
                        if x < 0 || x >= w as isize {
                            continue;
                        }
                        img[(ci * h + y as usize) * w + x as usize] += row[(ci * k + ky) * k + kx];
                    }
                }
            }
        }
    }
}

fn add_channel_bias(out: &mut [f64], bias: &[f64], spatial: usize) {
    for (c, chunk) in out.chunks_mut(spatial).enumerate() {
        for v in chunk {
            *v += bias[c];
        }
    }
}

impl Layer {
    pub fn forward(&self, x: &Array2<f64>, store: &ParamStore, mode: Mode) -> (Array2<f64>, Cache) {
        match *self {
            Layer::Dense {
                input,
                output,
                weight,
                bias,
            } => {
                let w = store.matrix(weight, input, output);
                let mut y = x.dot(&w);
                let b = ArrayView2::from_shape((1, output), store.data(bias)).unwrap();
                y += &b;
                (y, Cache::Input(x.clone()))
            }
            Layer::Conv { shape: g, weight, bias } => {
                let ckk = g.in_channels * g.kernel * g.kernel;
                let wm = store.matrix(weight, g.out_channels, ckk);
                let spatial = g.out_h * g.out_w;
                let mut y = Array2::zeros((x.nrows(), g.out_channels * spatial));
                let mut saved = Vec::with_capacity(x.nrows());
                for (b, xi) in x.outer_iter().enumerate() {
                    let cols = im2col(
                        xi.as_slice().unwrap(),
                        g.in_channels,
                        g.in_h,
                        g.in_w,
                        g.kernel,
                        g.stride,
                        g.pad(),
                        g.out_h,
                        g.out_w,
                    );
                    // (out_c, ckk) x (ckk, spatial) -> channel-major output
                    let out = wm.dot(&cols.t());
                    let mut row = y.row_mut(b);
                    let dst = row.as_slice_mut().unwrap();
                    dst.copy_from_slice(out.as_standard_layout().as_slice().unwrap());
                    add_channel_bias(dst, store.data(bias), spatial);
                    saved.push(cols);
                }
                (y, Cache::Columns(saved))
            }
            Layer::ConvTranspose { shape: g, weight, bias } => {
                let okk = g.out_channels * g.kernel * g.kernel;
                let wm = store.matrix(weight, g.in_channels, okk);
                let in_spatial = g.in_h * g.in_w;
                let out_spatial = g.out_h * g.out_w;
                let mut y = Array2::zeros((x.nrows(), g.out_channels * out_spatial));
                for (b, xi) in x.outer_iter().enumerate() {
                    let xm = xi.into_shape_with_order((g.in_channels, in_spatial)).unwrap();
                    let cols = xm.t().dot(&wm);
                    let mut row = y.row_mut(b);
                    let dst = row.as_slice_mut().unwrap();
                    col2im(
                        &cols,
                        g.out_channels,
                        g.out_h,
                        g.out_w,
                        g.kernel,
                        g.stride,
                        g.pad(),
                        g.in_h,
                        g.in_w,
                        dst,
                    );
                    add_channel_bias(dst, store.data(bias), out_spatial);
                }
                (y, Cache::Input(x.clone()))
            }
            Layer::BatchNorm {
                channels,
                spatial,
                gamma,
                beta,
                running_mean,
                running_var,
            } => {
                let n = x.nrows();
                let count = n * spatial;
                let (mean, var) = match mode {
                    Mode::Train => {
                        let mut mean = Array1::zeros(channels);
                        let mut var = Array1::zeros(channels);
                        for xi in x.outer_iter() {
                            for c in 0..channels {
                                for v in xi.slice(s![c * spatial..(c + 1) * spatial]) {
                                    mean[c] += v;
                                }
                            }
                        }
                        mean /= count as f64;
                        for xi in x.outer_iter() {
                            for c in 0..channels {
                                for v in xi.slice(s![c * spatial..(c + 1) * spatial]) {
                                    var[c] += (v - mean[c]).powi(2);
                                }
                            }
                        }
                        var /= count as f64;
                        (mean, var)
                    }
                    Mode::Infer => (
                        Array1::from(store.data(running_mean).to_vec()),
                        Array1::from(store.data(running_var).to_vec()),
                    ),
                };
                let inv_std = var.mapv(|v| 1.0 / (v + BN_EPSILON).sqrt());
                let g = store.data(gamma);
                let bt = store.data(beta);
                let mut normalized = x.clone();
                let mut y = x.clone();
                for (mut nrow, mut yrow) in normalized.outer_iter_mut().zip(y.outer_iter_mut()) {
                    for c in 0..channels {
                        for i in c * spatial..(c + 1) * spatial {
                            let xh = (nrow[i] - mean[c]) * inv_std[c];
                            nrow[i] = xh;
                            yrow[i] = g[c] * xh + bt[c];
                        }
                    }
                }
                (
                    y,
                    Cache::Norm {
                        normalized,
                        inv_std,
                        batch_mean: mean,
                        batch_var: var,
                        count,
                    },
                )
            }
            Layer::Relu => {
                let mask = x.mapv(|v| v > 0.0);
                (x.mapv(|v| v.max(0.0)), Cache::Mask(mask))
            }
        }
    }

    /// Propagates `dy` back through the layer, accumulating parameter
    /// gradients into `grads`. Batch normalization is differentiated in
    /// training mode.
    pub fn backward(&self, dy: &Array2<f64>, cache: &Cache, store: &ParamStore, grads: &mut [Vec<f64>]) -> Array2<f64> {
        match (self, cache) {
            (
                Layer::Dense {
                    input,
                    output,
                    weight,
                    bias,
                },
                Cache::Input(x),
            ) => {
                let dw = x.t().dot(dy);
                for (g, v) in grads[*weight].iter_mut().zip(dw.iter()) {
                    *g += v;
                }
                for (g, v) in grads[*bias].iter_mut().zip(dy.sum_axis(Axis(0)).iter()) {
                    *g += v;
                }
                dy.dot(&store.matrix(*weight, *input, *output).t())
            }
            (Layer::Conv { shape: g, weight, bias }, Cache::Columns(cols)) => {
                let ckk = g.in_channels * g.kernel * g.kernel;
                let spatial = g.out_h * g.out_w;
                let wm = store.matrix(*weight, g.out_channels, ckk);
                let mut dx = Array2::zeros((dy.nrows(), g.in_channels * g.in_h * g.in_w));
                let mut dw = Array2::<f64>::zeros((g.out_channels, ckk));
                for (b, dyi) in dy.outer_iter().enumerate() {
                    let dym = dyi.into_shape_with_order((g.out_channels, spatial)).unwrap();
                    dw += &dym.dot(&cols[b]);
                    for (c, v) in dym.sum_axis(Axis(1)).iter().enumerate() {
                        grads[*bias][c] += v;
                    }
                    let dcols = dym.t().dot(&wm);
                    let mut row = dx.row_mut(b);
                    col2im(
                        &dcols,
                        g.in_channels,
                        g.in_h,
                        g.in_w,
                        g.kernel,
                        g.stride,
                        g.pad(),
                        g.out_h,
                        g.out_w,
                        row.as_slice_mut().unwrap(),
                    );
                }
                for (gw, v) in grads[*weight].iter_mut().zip(dw.iter()) {
                    *gw += v;
                }
                dx
            }
            (Layer::ConvTranspose { shape: g, weight, bias }, Cache::Input(x)) => {
                let okk = g.out_channels * g.kernel * g.kernel;
                let in_spatial = g.in_h * g.in_w;
                let out_spatial = g.out_h * g.out_w;
                let wm = store.matrix(*weight, g.in_channels, okk);
                let mut dx = Array2::zeros((dy.nrows(), g.in_channels * in_spatial));
                let mut dw = Array2::<f64>::zeros((g.in_channels, okk));
                for (b, dyi) in dy.outer_iter().enumerate() {
                    let dy_slice = dyi.as_slice().unwrap();
                    for c in 0..g.out_channels {
                        grads[*bias][c] += dy_slice[c * out_spatial..(c + 1) * out_spatial].iter().sum::<f64>();
                    }
                    let dcols = im2col(
                        dy_slice,
                        g.out_channels,
                        g.out_h,
                        g.out_w,
                        g.kernel,
                        g.stride,
                        g.pad(),
                        g.in_h,
                        g.in_w,
                    );
                    let xm = x.row(b).into_shape_with_order((g.in_channels, in_spatial)).unwrap();
                    dw += &xm.dot(&dcols);
                    // (in_c, okk) x (okk, in_spatial) -> channel-major input grad
                    let dxi = wm.dot(&dcols.t());
                    dx.row_mut(b)
                        .as_slice_mut()
                        .unwrap()
                        .copy_from_slice(dxi.as_standard_layout().as_slice().unwrap());
                }
                for (gw, v) in grads[*weight].iter_mut().zip(dw.iter()) {
                    *gw += v;
                }
                dx
            }
            (
                Layer::BatchNorm {
                    channels,
                    spatial,
                    gamma,
                    beta,
                    ..
                },
                Cache::Norm {
                    normalized,
                    inv_std,
                    count,
                    ..
                },
            ) => {
                let (channels, spatial) = (*channels, *spatial);
                let g = store.data(*gamma);
                let mut sum_dxh = vec![0.0; channels];
                let mut sum_dxh_xh = vec![0.0; channels];
                for (dyr, nr) in dy.outer_iter().zip(normalized.outer_iter()) {
                    for c in 0..channels {
                        for i in c * spatial..(c + 1) * spatial {
                            grads[*gamma][c] += dyr[i] * nr[i];
                            grads[*beta][c] += dyr[i];
                            let dxh = dyr[i] * g[c];
                            sum_dxh[c] += dxh;
                            sum_dxh_xh[c] += dxh * nr[i];
                        }
                    }
                }
                let m = *count as f64;
                let mut dx = Array2::zeros(dy.raw_dim());
                for ((dyr, nr), mut dxr) in dy.outer_iter().zip(normalized.outer_iter()).zip(dx.outer_iter_mut()) {
                    for c in 0..channels {
                        for i in c * spatial..(c + 1) * spatial {
                            let dxh = dyr[i] * g[c];
                            dxr[i] = inv_std[c] / m * (m * dxh - sum_dxh[c] - nr[i] * sum_dxh_xh[c]);
                        }
                    }
                }
                dx
            }
            (Layer::Relu, Cache::Mask(mask)) => {
                let mut dx = dy.clone();
                dx.zip_mut_with(mask, |d, &m| {
                    if !m {
                        *d = 0.0;
                    }
                });
                dx
            }
            _ => unreachable!("cache does not match layer"),
        }
    }

    /// Folds batch statistics from a training pass into the running
    /// estimates (unbiased variance, momentum [`BN_MOMENTUM`]).
    pub fn update_running(&self, cache: &Cache, store: &mut ParamStore) {
        if let (
            Layer::BatchNorm {
                running_mean,
                running_var,
                ..
            },
            Cache::Norm {
                batch_mean,
                batch_var,
                count,
                ..
            },
        ) = (self, cache)
        {
            let correction = if *count > 1 {
                *count as f64 / (*count as f64 - 1.0)
            } else {
                1.0
            };
            for (r, m) in store.params[*running_mean].data.iter_mut().zip(batch_mean.iter()) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m;
            }
            for (r, v) in store.params[*running_var].data.iter_mut().zip(batch_var.iter()) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v * correction;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn im2col_col2im_are_adjoint() {
        // <im2col(x), c> == <x, col2im(c)> for arbitrary x, c
        let (ch, h, w, k, s, p, gh, gw) = (2, 5, 4, 3, 2, 1, 3, 2);
        let x: Vec<f64> = (0..ch * h * w).map(|i| (i as f64 * 0.37).sin()).collect();
        let cols = Array2::from_shape_fn((gh * gw, ch * k * k), |(i, j)| ((i * 7 + j) as f64 * 0.11).cos());
        let lhs: f64 = (&im2col(&x, ch, h, w, k, s, p, gh, gw) * &cols).sum();
        let mut back = vec![0.0; x.len()];
        col2im(&cols, ch, h, w, k, s, p, gh, gw, &mut back);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn conv_matches_direct_sum() {
        let g = ConvShape {
            in_channels: 2,
            out_channels: 3,
            kernel: 3,
            stride: 2,
            in_h: 4,
            in_w: 4,
            out_h: 2,
            out_w: 2,
        };
        let mut store = ParamStore::default();
        let wdata: Vec<f64> = (0..3 * 2 * 9).map(|i| (i as f64 * 0.3).sin()).collect();
        let weight = store.add("w".into(), vec![3, 2, 3, 3], wdata.clone(), true);
        let bias = store.add("b".into(), vec![3], vec![0.1, -0.2, 0.3], true);
        let layer = Layer::Conv { shape: g, weight, bias };
        let x = Array2::from_shape_fn((1, 32), |(_, j)| (j as f64 * 0.7).cos());
        let (y, _) = layer.forward(&x, &store, Mode::Train);
        for co in 0..3 {
            for oy in 0..2 {
                for ox in 0..2 {
                    let mut acc = store.data(bias)[co];
                    for ci in 0..2 {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let iy = (oy * 2 + ky) as isize - 1;
                                let ix = (ox * 2 + kx) as isize - 1;
                                if (0..4).contains(&iy) && (0..4).contains(&ix) {
                                    acc += wdata[((co * 2 + ci) * 3 + ky) * 3 + kx]
                                        * x[[0, (ci * 4 + iy as usize) * 4 + ix as usize]];
                                }
                            }
                        }
                    }
                    assert!((y[[0, co * 4 + oy * 2 + ox]] - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn batchnorm_inference_uses_running_stats() {
        let mut store = ParamStore::default();
        let gamma = store.add("g".into(), vec![1], vec![2.0], true);
        let beta = store.add("b".into(), vec![1], vec![1.0], true);
        let running_mean = store.add("m".into(), vec![1], vec![3.0], false);
        let running_var = store.add("v".into(), vec![1], vec![4.0 - BN_EPSILON], false);
        let bn = Layer::BatchNorm {
            channels: 1,
            spatial: 1,
            gamma,
            beta,
            running_mean,
            running_var,
        };
        let x = Array2::from_shape_vec((2, 1), vec![5.0, 1.0]).unwrap();
        let (y, _) = bn.forward(&x, &store, Mode::Infer);
        assert!((y[[0, 0]] - 3.0).abs() < 1e-12);
        assert!((y[[1, 0]] + 1.0).abs() < 1e-12);
        let (t, cache) = bn.forward(&x, &store, Mode::Train);
        assert!((t[[0, 0]] - (2.0 * 2.0 / (4.0 + BN_EPSILON).sqrt() + 1.0)).abs() < 1e-12);
        bn.update_running(&cache, &mut store);
        // batch mean 3, unbiased batch variance 8
        assert!((store.data(running_mean)[0] - 3.0).abs() < 1e-12);
        assert!((store.data(running_var)[0] - (0.9 * (4.0 - BN_EPSILON) + 0.8)).abs() < 1e-12);
    }
}
