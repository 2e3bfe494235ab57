use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::layers::{Cache, Layer, Mode, ParamStore};
use super::spec::{LayerShape, NetworkSpec, OutputKind, Variant};
use crate::embedding::EmbeddedSegment;
use crate::error::{Error, Result};
use crate::seed::rng_for;

pub const LOGVAR_CLAMP: f64 = 10.0;

/// Reconstruction term of the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ReconLoss {
    #[serde(rename = "MSE")]
    Mse,
    #[serde(rename = "CrossEntropy")]
    CrossEntropy,
}

impl ReconLoss {
    /// The loss that pairs with a decoder output activation.
    pub fn for_output(output: OutputKind) -> Self {
        match output {
            OutputKind::Linear => ReconLoss::Mse,
            OutputKind::TileSoftmax => ReconLoss::CrossEntropy,
        }
    }
}

/// A hidden block: affine layer, batch normalization, ReLU.
#[derive(Debug, Clone)]
struct Block {
    affine: Layer,
    norm: Layer,
}

#[derive(Debug, Clone)]
pub struct VaeModel {
    spec: NetworkSpec,
    pub(crate) store: ParamStore,
    encoder: Vec<Block>,
    mu_head: Layer,
    logvar_head: Layer,
    decoder: Vec<Block>,
    output: Layer,
}

/// Per-batch loss terms, averaged over the batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLoss {
    pub recon: f64,
    pub kl: f64,
    pub total: f64,
}

/// Everything needed to compute one training objective on a batch.
#[derive(Debug, Clone)]
pub struct BatchInput<'a> {
    /// `(batch, input_len)` inputs in `[row][col][dim]` layout; also the
    /// reconstruction targets.
    pub x: &'a Array2<f64>,
    /// Reconstruction weight of each row (scale times game weight).
    pub recon_weights: &'a [f64],
    /// Standard-normal noise for the reparameterization, `(batch, latent)`.
    pub eps: &'a Array2<f64>,
    pub beta: f64,
    pub recon_loss: ReconLoss,
}

pub(crate) struct StepResult {
    pub loss: BatchLoss,
    pub grads: Vec<Vec<f64>>,
    norm_caches: Vec<(Layer, Cache)>,
}

fn uniform_init(rng: &mut impl Rng, n: usize, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-a..=a)).collect()
}

fn add_affine(store: &mut ParamStore, rng: &mut impl Rng, prefix: &str, shape: &LayerShape) -> Layer {
    match *shape {
        LayerShape::Dense { input, output } => {
            let weight = store.add(
                format!("{prefix}.weight"),
                vec![input, output],
                uniform_init(rng, input * output, input, output),
                true,
            );
            let bias = store.add(format!("{prefix}.bias"), vec![output], vec![0.0; output], true);
            Layer::Dense {
                input,
                output,
                weight,
                bias,
            }
        }
        LayerShape::Conv(g) => {
            let kk = g.kernel * g.kernel;
            let weight = store.add(
                format!("{prefix}.weight"),
                vec![g.out_channels, g.in_channels, g.kernel, g.kernel],
                uniform_init(
                    rng,
                    g.out_channels * g.in_channels * kk,
                    g.in_channels * kk,
                    g.out_channels * kk,
                ),
                true,
            );
            let bias = store.add(
                format!("{prefix}.bias"),
                vec![g.out_channels],
                vec![0.0; g.out_channels],
                true,
            );
            Layer::Conv { shape: g, weight, bias }
        }
        LayerShape::ConvTranspose(g) => {
            let kk = g.kernel * g.kernel;
            let weight = store.add(
                format!("{prefix}.weight"),
                vec![g.in_channels, g.out_channels, g.kernel, g.kernel],
                uniform_init(
                    rng,
                    g.out_channels * g.in_channels * kk,
                    g.in_channels * kk,
                    g.out_channels * kk,
                ),
                true,
            );
            let bias = store.add(
                format!("{prefix}.bias"),
                vec![g.out_channels],
                vec![0.0; g.out_channels],
                true,
            );
            Layer::ConvTranspose { shape: g, weight, bias }
        }
    }
}

fn add_block(store: &mut ParamStore, rng: &mut impl Rng, prefix: &str, shape: &LayerShape) -> Block {
    let affine = add_affine(store, rng, prefix, shape);
    let (channels, spatial) = shape.norm_layout();
    let norm = Layer::BatchNorm {
        channels,
        spatial,
        gamma: store.add(format!("{prefix}.gamma"), vec![channels], vec![1.0; channels], true),
        beta: store.add(format!("{prefix}.beta"), vec![channels], vec![0.0; channels], true),
        running_mean: store.add(
            format!("{prefix}.running_mean"),
            vec![channels],
            vec![0.0; channels],
            false,
        ),
        running_var: store.add(
            format!("{prefix}.running_var"),
            vec![channels],
            vec![1.0; channels],
            false,
        ),
    };
    Block { affine, norm }
}

/// Builds a model with deterministic uniform fan-in/fan-out initialization.
pub fn build_model(spec: &NetworkSpec, seed: u64) -> Result<VaeModel> {
    let plan = spec.layer_plan()?;
    let mut rng = rng_for(seed, "init");
    let mut store = ParamStore::default();
    let encoder = plan
        .encoder
        .iter()
        .enumerate()
        .map(|(i, s)| add_block(&mut store, &mut rng, &format!("enc.{i}"), s))
        .collect();
    let head = LayerShape::Dense {
        input: plan.hidden,
        output: plan.latent,
    };
    let mu_head = add_affine(&mut store, &mut rng, "mu", &head);
    let logvar_head = add_affine(&mut store, &mut rng, "logvar", &head);
    let (last, hidden) = plan.decoder.split_last().expect("decoder has an output layer");
    let decoder = hidden
        .iter()
        .enumerate()
        .map(|(i, s)| add_block(&mut store, &mut rng, &format!("dec.{i}"), s))
        .collect();
    let output = add_affine(&mut store, &mut rng, "out", last);
    store.round_to_f32();
    Ok(VaeModel {
        spec: spec.clone(),
        store,
        encoder,
        mu_head,
        logvar_head,
        decoder,
        output,
    })
}

fn softmax_cells(y: &mut Array2<f64>, dim: usize) {
    for mut row in y.outer_iter_mut() {
        for cell in row.as_slice_mut().unwrap().chunks_mut(dim) {
            let m = cell.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in cell.iter_mut() {
                *v = (*v - m).exp();
                sum += *v;
            }
            for v in cell.iter_mut() {
                *v /= sum;
            }
        }
    }
}

/// Mean squared error between two equal-length slices.
pub fn mse(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64
}

/// Cross-entropy per cell, averaged over cells, for probability vectors of
/// width `dim`.
pub fn tile_cross_entropy(pred: &[f64], target: &[f64], dim: usize) -> f64 {
    let cells = pred.len() / dim;
    let mut acc = 0.0;
    for (p, t) in pred.chunks(dim).zip(target.chunks(dim)) {
        for (pi, ti) in p.iter().zip(t) {
            if *ti != 0.0 {
                acc -= ti * pi.max(1e-12).ln();
            }
        }
    }
    acc / cells as f64
}

/// `-1/2 * sum(1 + logvar - mu^2 - exp(logvar))` with `logvar` clamped.
pub fn kl_divergence(mu: &[f64], logvar: &[f64]) -> f64 {
    -0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| {
            let lv = lv.clamp(-LOGVAR_CLAMP, LOGVAR_CLAMP);
            1.0 + lv - m * m - lv.exp()
        })
        .sum::<f64>()
}

impl VaeModel {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn latent_dim(&self) -> usize {
        self.spec.latent_dim
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub(crate) fn from_parts(spec: NetworkSpec, loaded: ParamStore) -> Result<Self> {
        let mut model = build_model(&spec, 0)?;
        if model.store.len() != loaded.len() {
            return Err(Error::CorruptPayload(format!(
                "expected {} arrays, found {}",
                model.store.len(),
                loaded.len()
            )));
        }
        for (dst, src) in model.store.params.iter_mut().zip(loaded.params) {
            if dst.name != src.name || dst.shape != src.shape {
                return Err(Error::CorruptPayload(format!(
                    "array {} {:?} does not match {} {:?}",
                    src.name, src.shape, dst.name, dst.shape
                )));
            }
            dst.data = src.data;
        }
        Ok(model)
    }

    fn hwc_to_net(&self, x: &Array2<f64>) -> Array2<f64> {
        if self.spec.variant == Variant::Fc {
            return x.clone();
        }
        let (h, w, d) = (self.spec.grid_height, self.spec.grid_width, self.spec.tile_dim);
        let mut out = Array2::zeros(x.raw_dim());
        for (src, mut dst) in x.outer_iter().zip(out.outer_iter_mut()) {
            for p in 0..h * w {
                for c in 0..d {
                    dst[c * h * w + p] = src[p * d + c];
                }
            }
        }
        out
    }

    fn net_to_hwc(&self, y: &Array2<f64>) -> Array2<f64> {
        if self.spec.variant == Variant::Fc {
            return y.clone();
        }
        let (h, w, d) = (self.spec.grid_height, self.spec.grid_width, self.spec.tile_dim);
        let mut out = Array2::zeros(y.raw_dim());
        for (src, mut dst) in y.outer_iter().zip(out.outer_iter_mut()) {
            for p in 0..h * w {
                for c in 0..d {
                    dst[p * d + c] = src[c * h * w + p];
                }
            }
        }
        out
    }

    fn check_len(&self, found: usize, expected: usize) -> Result<()> {
        if found != expected {
            return Err(Error::ShapeMismatch { expected, found });
        }
        Ok(())
    }

    fn run_blocks(
        &self,
        blocks: &[Block],
        mut h: Array2<f64>,
        mode: Mode,
        caches: &mut Vec<[Cache; 3]>,
    ) -> Array2<f64> {
        for b in blocks {
            let (a, c0) = b.affine.forward(&h, &self.store, mode);
            let (n, c1) = b.norm.forward(&a, &self.store, mode);
            let (r, c2) = Layer::Relu.forward(&n, &self.store, mode);
            caches.push([c0, c1, c2]);
            h = r;
        }
        h
    }

    fn back_blocks(
        &self,
        blocks: &[Block],
        caches: &[[Cache; 3]],
        mut d: Array2<f64>,
        grads: &mut [Vec<f64>],
    ) -> Array2<f64> {
        for (b, c) in blocks.iter().zip(caches).rev() {
            d = Layer::Relu.backward(&d, &c[2], &self.store, grads);
            d = b.norm.backward(&d, &c[1], &self.store, grads);
            d = b.affine.backward(&d, &c[0], &self.store, grads);
        }
        d
    }

    /// Batched inference-mode encoding of `(batch, input_len)` rows.
    pub fn encode_batch(&self, x: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        self.check_len(x.ncols(), self.spec.input_len())?;
        let mut caches = Vec::new();
        let h = self.run_blocks(&self.encoder, self.hwc_to_net(x), Mode::Infer, &mut caches);
        let (mu, _) = self.mu_head.forward(&h, &self.store, Mode::Infer);
        let (lv, _) = self.logvar_head.forward(&h, &self.store, Mode::Infer);
        Ok((mu, lv))
    }

    /// Batched inference-mode decoding; softmax outputs are probabilities.
    pub fn decode_batch(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_len(z.ncols(), self.spec.latent_dim)?;
        let mut caches = Vec::new();
        let h = self.run_blocks(&self.decoder, z.clone(), Mode::Infer, &mut caches);
        let (y, _) = self.output.forward(&h, &self.store, Mode::Infer);
        let mut y = self.net_to_hwc(&y);
        if self.spec.output == OutputKind::TileSoftmax {
            softmax_cells(&mut y, self.spec.tile_dim);
        }
        Ok(y)
    }

    /// Latent mean and log-variance of one embedded segment.
    pub fn encode(&self, x: &EmbeddedSegment) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.dim != self.spec.tile_dim {
            return Err(Error::ShapeMismatch {
                expected: self.spec.tile_dim,
                found: x.dim,
            });
        }
        if let Some(i) = x.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let row = Array2::from_shape_vec((1, x.values.len()), x.values.clone()).map_err(|_| Error::ShapeMismatch {
            expected: self.spec.input_len(),
            found: x.values.len(),
        })?;
        let (mu, lv) = self.encode_batch(&row)?;
        Ok((mu.into_raw_vec_and_offset().0, lv.into_raw_vec_and_offset().0))
    }

    /// Decodes one latent vector to a `[row][col][dim]` tensor.
    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z.len(), self.spec.latent_dim)?;
        let row = Array2::from_shape_vec((1, z.len()), z.to_vec()).unwrap();
        Ok(self.decode_batch(&row)?.into_raw_vec_and_offset().0)
    }

    /// Training-mode forward and backward pass over one batch. Gradients
    /// are of the batch-mean objective.
    pub(crate) fn step(&self, input: &BatchInput<'_>) -> Result<StepResult> {
        let x = input.x;
        let n = x.nrows();
        self.check_len(x.ncols(), self.spec.input_len())?;
        self.check_len(input.recon_weights.len(), n)?;
        self.check_len(input.eps.ncols(), self.spec.latent_dim)?;
        self.check_len(input.eps.nrows(), n)?;
        let softmax = self.spec.output == OutputKind::TileSoftmax;
        if softmax != (input.recon_loss == ReconLoss::CrossEntropy) {
            return Err(Error::InvalidArgument(
                "cross-entropy requires a tile-softmax output and MSE a linear one".into(),
            ));
        }
        let dim = self.spec.tile_dim;
        let mut grads = self.store.zeros_like();

        let mut enc_caches = Vec::new();
        let h = self.run_blocks(&self.encoder, self.hwc_to_net(x), Mode::Train, &mut enc_caches);
        let (mu, mu_cache) = self.mu_head.forward(&h, &self.store, Mode::Train);
        let (lv_raw, lv_cache) = self.logvar_head.forward(&h, &self.store, Mode::Train);
        let lv = lv_raw.mapv(|v| v.clamp(-LOGVAR_CLAMP, LOGVAR_CLAMP));
        let std = lv.mapv(|v| (v / 2.0).exp());
        let z = &mu + &(&std * input.eps);

        let mut dec_caches = Vec::new();
        let hd = self.run_blocks(&self.decoder, z, Mode::Train, &mut dec_caches);
        let (y_net, out_cache) = self.output.forward(&hd, &self.store, Mode::Train);
        let mut pred = self.net_to_hwc(&y_net);
        if softmax {
            softmax_cells(&mut pred, dim);
        }

        let bn = n as f64;
        let elems = x.ncols() as f64;
        let cells = (x.ncols() / dim) as f64;
        let mut recon_sum = 0.0;
        let mut kl_sum = 0.0;
        let mut dpred = Array2::zeros(pred.raw_dim());
        for b in 0..n {
            let p = pred.row(b);
            let t = x.row(b);
            let w = input.recon_weights[b];
            let (ps, ts) = (p.as_slice().unwrap(), t.as_slice().unwrap());
            let r = match input.recon_loss {
                ReconLoss::Mse => mse(ps, ts),
                ReconLoss::CrossEntropy => tile_cross_entropy(ps, ts, dim),
            };
            recon_sum += w * r;
            kl_sum += kl_divergence(mu.row(b).as_slice().unwrap(), lv.row(b).as_slice().unwrap());
            let mut d = dpred.row_mut(b);
            match input.recon_loss {
                ReconLoss::Mse => {
                    for i in 0..ps.len() {
                        d[i] = w * 2.0 * (ps[i] - ts[i]) / elems / bn;
                    }
                }
                ReconLoss::CrossEntropy => {
                    // gradient with respect to the pre-softmax logits
                    for c in 0..ps.len() / dim {
                        let cell = c * dim..(c + 1) * dim;
                        let tsum: f64 = ts[cell.clone()].iter().sum();
                        for i in cell {
                            d[i] = w * (ps[i] * tsum - ts[i]) / cells / bn;
                        }
                    }
                }
            }
        }
        let recon = recon_sum / bn;
        let kl = kl_sum / bn;
        let loss = BatchLoss {
            recon,
            kl,
            total: recon + input.beta * kl,
        };

        let dy_net = if self.spec.variant == Variant::Cnn {
            self.hwc_to_net(&dpred)
        } else {
            dpred
        };
        let dhd = self.output.backward(&dy_net, &out_cache, &self.store, &mut grads);
        let dz = self.back_blocks(&self.decoder, &dec_caches, dhd, &mut grads);

        let beta = input.beta;
        let dmu = &dz + &mu.mapv(|m| beta * m / bn);
        let mut dlv = Array2::zeros(lv.raw_dim());
        for ((i, j), v) in dlv.indexed_iter_mut() {
            if lv_raw[[i, j]].abs() > LOGVAR_CLAMP {
                continue;
            }
            let e = lv[[i, j]].exp();
            *v = dz[[i, j]] * 0.5 * std[[i, j]] * input.eps[[i, j]] + beta * 0.5 * (e - 1.0) / bn;
        }
        let mut dh = self.mu_head.backward(&dmu, &mu_cache, &self.store, &mut grads);
        dh += &self.logvar_head.backward(&dlv, &lv_cache, &self.store, &mut grads);
        self.back_blocks(&self.encoder, &enc_caches, dh, &mut grads);

        let mut norm_caches = Vec::new();
        for (b, c) in self
            .encoder
            .iter()
            .zip(enc_caches)
            .chain(self.decoder.iter().zip(dec_caches))
        {
            let [_, nc, _] = c;
            norm_caches.push((b.norm.clone(), nc));
        }
        Ok(StepResult {
            loss,
            grads,
            norm_caches,
        })
    }

    /// Batch-mean loss and its gradient with respect to every parameter
    /// array (zero for running statistics). Running statistics are not
    /// updated.
    pub fn loss_and_gradients(&self, input: &BatchInput<'_>) -> Result<(BatchLoss, Vec<Vec<f64>>)> {
        let r = self.step(input)?;
        Ok((r.loss, r.grads))
    }

    pub(crate) fn apply_norm_updates(&mut self, caches: Vec<(Layer, Cache)>) {
        for (layer, cache) in caches {
            layer.update_running(&cache, &mut self.store);
        }
    }
}

impl StepResult {
    pub(crate) fn take_norm_caches(&mut self) -> Vec<(Layer, Cache)> {
        std::mem::take(&mut self.norm_caches)
    }
}

/// Reparameterized sample `mu + exp(logvar / 2) * eps`, `eps ~ N(0, I)`.
pub fn sample_latent(mu: &[f64], logvar: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    assert_eq!(mu.len(), logvar.len(), "mu and logvar lengths differ");
    mu.iter()
        .zip(logvar)
        .map(|(m, lv)| {
            let e: f64 = StandardNormal.sample(rng);
            m + (lv.clamp(-LOGVAR_CLAMP, LOGVAR_CLAMP) / 2.0).exp() * e
        })
        .collect()
}

/// Draws a `(rows, cols)` matrix of standard-normal values.
pub fn normal_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

pub(crate) fn stack_rows(rows: &[&[f64]]) -> Array2<f64> {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut out = Array2::zeros((rows.len(), cols));
    for (mut dst, src) in out.axis_iter_mut(Axis(0)).zip(rows) {
        dst.as_slice_mut().unwrap().copy_from_slice(src);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vae::spec::NetworkSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(variant: Variant, output: OutputKind) -> NetworkSpec {
        let mut spec = match variant {
            Variant::Fc => NetworkSpec::fc_scaled(3, vec![8, 4], 2, output),
            Variant::Cnn => NetworkSpec {
                conv_filters: vec![4, 3],
                conv_strides: vec![2, 1],
                flatten: None,
                dense_widths: vec![5],
                latent_dim: 2,
                ..NetworkSpec::cnn_default(3, output)
            },
        };
        spec.grid_height = if variant == Variant::Cnn { 4 } else { 2 };
        spec.grid_width = spec.grid_height;
        spec
    }

    fn rel_err(a: f64, n: f64) -> f64 {
        (a - n).abs() / a.abs().max(n.abs()).max(1e-5)
    }

    fn grad_check(spec: &NetworkSpec, loss: ReconLoss) {
        let mut model = build_model(spec, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let batch = 4;
        let dim = spec.tile_dim;
        let x = Array2::from_shape_fn((batch, spec.input_len()), |(b, i)| match loss {
            ReconLoss::Mse => ((b * 31 + i * 7) as f64 * 0.37).sin(),
            ReconLoss::CrossEntropy => ((i / dim + b) % dim == i % dim) as u8 as f64,
        });
        let eps = normal_matrix(batch, spec.latent_dim, &mut rng);
        let weights = [2.28, 1.72, 2.28, 1.72];
        let input = BatchInput {
            x: &x,
            recon_weights: &weights,
            eps: &eps,
            beta: 0.3,
            recon_loss: loss,
        };
        let (_, grads) = model.loss_and_gradients(&input).unwrap();
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        for p in 0..model.store.len() {
            if !model.store.params[p].trainable {
                continue;
            }
            for i in 0..model.store.params[p].data.len() {
                let orig = model.store.params[p].data[i];
                model.store.params[p].data[i] = orig + h;
                let up = model.loss_and_gradients(&input).unwrap().0.total;
                model.store.params[p].data[i] = orig - h;
                let down = model.loss_and_gradients(&input).unwrap().0.total;
                model.store.params[p].data[i] = orig;
                worst = worst.max(rel_err(grads[p][i], (up - down) / (2.0 * h)));
            }
        }
        assert!(worst < 1e-3, "worst relative error {worst}");
    }

    #[test]
    fn fc_gradients_match_finite_differences() {
        grad_check(&tiny(Variant::Fc, OutputKind::Linear), ReconLoss::Mse);
    }

    #[test]
    fn softmax_gradients_match_finite_differences() {
        grad_check(&tiny(Variant::Fc, OutputKind::TileSoftmax), ReconLoss::CrossEntropy);
    }

    #[test]
    fn cnn_gradients_match_finite_differences() {
        grad_check(&tiny(Variant::Cnn, OutputKind::Linear), ReconLoss::Mse);
    }

    #[test]
    fn same_seed_same_parameters() {
        let spec = tiny(Variant::Fc, OutputKind::Linear);
        assert_eq!(
            build_model(&spec, 5).unwrap().store,
            build_model(&spec, 5).unwrap().store
        );
        assert_ne!(
            build_model(&spec, 5).unwrap().store,
            build_model(&spec, 6).unwrap().store
        );
    }

    #[test]
    fn kl_closed_form() {
        assert_eq!(kl_divergence(&[1.0], &[0.0]), 0.5);
        assert_eq!(kl_divergence(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert!(kl_divergence(&[0.0], &[0.5]) > 0.0);
    }

    #[test]
    fn sample_latent_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_latent(&[0.0], &[0.0], &mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.05);
        assert!((var - 1.0).abs() < 0.1);
        let z = sample_latent(&[0.7], &[-1e9], &mut rng)[0];
        assert!((z - 0.7).abs() < 0.05);
    }

    #[test]
    fn wrong_latent_length_is_rejected() {
        let model = build_model(&tiny(Variant::Fc, OutputKind::Linear), 0).unwrap();
        assert!(matches!(
            model.decode(&[0.0; 3]),
            Err(Error::ShapeMismatch { expected: 2, found: 3 })
        ));
    }
}
