//! Random generation from the latent prior and latent interpolation between
//! two segments.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Provenance, Segment};
use crate::embedding::{decode_tensor, embed_segment, EmbeddingTable};
use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::vae::{normal_matrix, VaeModel};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Linear,
    Spherical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlendStep {
    pub t: f64,
    pub latent: Vec<f64>,
    pub segment: Segment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlendResult {
    pub steps: Vec<BlendStep>,
    pub a: Provenance,
    pub b: Provenance,
}

/// Decodes latent vectors to tile segments.
pub fn decode_latents(model: &VaeModel, table: &EmbeddingTable, latents: &[Vec<f64>]) -> Result<Vec<Segment>> {
    latents
        .iter()
        .map(|z| decode_tensor(&model.decode(z)?, table))
        .collect()
}

/// Draws `n` latent vectors from the standard normal prior and decodes them.
pub fn random_generate(model: &VaeModel, table: &EmbeddingTable, n: usize, rng: &mut impl Rng) -> Result<Vec<Segment>> {
    Ok(random_generate_with_latents(model, table, n, rng)?
        .into_iter()
        .map(|(_, s)| s)
        .collect())
}

pub fn random_generate_with_latents(
    model: &VaeModel,
    table: &EmbeddingTable,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(Vec<f64>, Segment)>> {
    if n == 0 {
        return Err(Error::InvalidArgument("generation count must be at least 1".into()));
    }
    check_table(model, table)?;
    let z = normal_matrix(n, model.latent_dim(), rng);
    let decoded = model.decode_batch(&z)?;
    decoded
        .outer_iter()
        .zip(z.outer_iter())
        .map(|(y, z)| Ok((z.to_vec(), decode_tensor(y.as_slice().unwrap(), table)?)))
        .collect()
}

/// Random generation seeded from a top-level seed.
pub fn random_generate_seeded(model: &VaeModel, table: &EmbeddingTable, n: usize, seed: u64) -> Result<Vec<Segment>> {
    random_generate(model, table, n, &mut rng_for(seed, "generate"))
}

fn check_table(model: &VaeModel, table: &EmbeddingTable) -> Result<()> {
    if table.dim() != model.spec().tile_dim {
        return Err(Error::ShapeMismatch {
            expected: model.spec().tile_dim,
            found: table.dim(),
        });
    }
    Ok(())
}

/// Latent point at `t` between `a` and `b`.
pub fn interpolate(a: &[f64], b: &[f64], t: f64, mode: Interpolation) -> Vec<f64> {
    match mode {
        Interpolation::Linear => lerp(a, b, t),
        Interpolation::Spherical => {
            let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                return lerp(a, b, t);
            }
            let cos = (a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)).clamp(-1.0, 1.0);
            let omega = cos.acos();
            let so = omega.sin();
            if so.abs() < 1e-9 {
                return lerp(a, b, t);
            }
            let (wa, wb) = (((1.0 - t) * omega).sin() / so, (t * omega).sin() / so);
            a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect()
        }
    }
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
}

/// `steps` evenly spaced values from 0 to 1 inclusive.
pub fn linspace(steps: usize) -> Vec<f64> {
    (0..steps).map(|i| i as f64 / (steps - 1) as f64).collect()
}

/// Encoder mean of a segment.
pub fn latent_mean(model: &VaeModel, table: &EmbeddingTable, segment: &Segment) -> Result<Vec<f64>> {
    check_table(model, table)?;
    Ok(model.encode(&embed_segment(segment, table)?)?.0)
}

/// Interpolates between the encoder means of `a` and `b`.
pub fn blend_pair(
    model: &VaeModel,
    table: &EmbeddingTable,
    a: &Segment,
    b: &Segment,
    steps: usize,
) -> Result<BlendResult> {
    blend_pair_with(model, table, a, b, steps, Interpolation::Linear)
}

pub fn blend_pair_with(
    model: &VaeModel,
    table: &EmbeddingTable,
    a: &Segment,
    b: &Segment,
    steps: usize,
    mode: Interpolation,
) -> Result<BlendResult> {
    if steps < 2 {
        return Err(Error::InvalidArgument("blend needs at least 2 steps".into()));
    }
    let mu_a = latent_mean(model, table, a)?;
    let mu_b = latent_mean(model, table, b)?;
    let steps = linspace(steps)
        .into_iter()
        .map(|t| {
            let latent = interpolate(&mu_a, &mu_b, t, mode);
            let segment = decode_tensor(&model.decode(&latent)?, table)?;
            Ok(BlendStep { t, latent, segment })
        })
        .collect::<Result<_>>()?;
    Ok(BlendResult {
        steps,
        a: a.provenance.clone(),
        b: b.provenance.clone(),
    })
}

/// Decoded reconstruction of a segment through its encoder mean.
pub fn reconstruct(model: &VaeModel, table: &EmbeddingTable, segment: &Segment) -> Result<Segment> {
    decode_tensor(&model.decode(&latent_mean(model, table, segment)?)?, table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_interpolation_is_affine() {
        let a = [1.0, -2.0, 0.5];
        let b = [3.0, 2.0, -0.5];
        assert_eq!(interpolate(&a, &b, 0.0, Interpolation::Linear), a.to_vec());
        assert_eq!(interpolate(&a, &b, 1.0, Interpolation::Linear), b.to_vec());
        assert_eq!(interpolate(&a, &b, 0.5, Interpolation::Linear), vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn spherical_endpoints_and_norm() {
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let m = interpolate(&a, &b, 0.5, Interpolation::Spherical);
        assert!((m[0] - m[1]).abs() < 1e-12);
        assert!(((m[0] * m[0] + m[1] * m[1]).sqrt() - 1.0).abs() < 1e-12);
        let e = interpolate(&a, &b, 1.0, Interpolation::Spherical);
        assert!((e[1] - 1.0).abs() < 1e-12 && e[0].abs() < 1e-12);
    }

    #[test]
    fn linspace_eleven() {
        let t = linspace(11);
        assert_eq!(t.len(), 11);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[10], 1.0);
        assert!((t[3] - 0.3).abs() < 1e-15);
    }
}
