use serde::{Deserialize, Serialize};

use crate::corpus::SEGMENT_SIZE;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "FC")]
    Fc,
    #[serde(rename = "CNN")]
    Cnn,
}

/// Activation applied to the decoder's final layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputKind {
    /// Raw values, paired with mean-squared-error reconstruction.
    Linear,
    /// Softmax over the tile axis of every cell, paired with cross-entropy.
    TileSoftmax,
}

/// Architecture of an FC or CNN variational autoencoder.
///
/// Every hidden layer is followed by batch normalization and ReLU; the two
/// latent heads and the decoder output layer are plain affine maps. The
/// decoder mirrors the encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub variant: Variant,
    pub grid_height: usize,
    pub grid_width: usize,
    pub tile_dim: usize,
    /// Convolution filter counts (CNN only), encoder order.
    #[serde(default)]
    pub conv_filters: Vec<usize>,
    #[serde(default)]
    pub conv_strides: Vec<usize>,
    #[serde(default = "default_kernel")]
    pub kernel: usize,
    /// Expected width after flattening the last convolution, if declared.
    #[serde(default)]
    pub flatten: Option<usize>,
    /// Dense hidden widths, encoder order (after the flatten for CNN).
    pub dense_widths: Vec<usize>,
    pub latent_dim: usize,
    pub output: OutputKind,
}

fn default_kernel() -> usize {
    3
}

impl NetworkSpec {
    /// Dense encoder 1024-512-256-128 with a 128-wide latent space.
    pub fn fc_default(tile_dim: usize, output: OutputKind) -> Self {
        Self {
            variant: Variant::Fc,
            grid_height: SEGMENT_SIZE,
            grid_width: SEGMENT_SIZE,
            tile_dim,
            conv_filters: Vec::new(),
            conv_strides: Vec::new(),
            kernel: 3,
            flatten: None,
            dense_widths: vec![1024, 512, 256, 128],
            latent_dim: 128,
            output,
        }
    }

    /// Convolutions of 256, 256 and 128 3x3 filters with strides 2, 2, 1,
    /// flattening to 2048, then a 1024 dense layer and a 512 latent space.
    pub fn cnn_default(tile_dim: usize, output: OutputKind) -> Self {
        Self {
            variant: Variant::Cnn,
            grid_height: SEGMENT_SIZE,
            grid_width: SEGMENT_SIZE,
            tile_dim,
            conv_filters: vec![256, 256, 128],
            conv_strides: vec![2, 2, 1],
            kernel: 3,
            flatten: Some(2048),
            dense_widths: vec![1024],
            latent_dim: 512,
            output,
        }
    }

    /// Small FC network over full-size segments.
    pub fn fc_scaled(tile_dim: usize, widths: Vec<usize>, latent_dim: usize, output: OutputKind) -> Self {
        Self {
            dense_widths: widths,
            latent_dim,
            ..Self::fc_default(tile_dim, output)
        }
    }

    pub fn input_len(&self) -> usize {
        self.grid_height * self.grid_width * self.tile_dim
    }

    pub fn validate(&self) -> Result<()> {
        self.layer_plan().map(|_| ())
    }

    /// Resolves the spec into concrete encoder and decoder layer shapes.
    pub fn layer_plan(&self) -> Result<LayerPlan> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.grid_height == 0 || self.grid_width == 0 || self.tile_dim == 0 {
            return bad("grid and tile dimensions must be positive".into());
        }
        if self.latent_dim == 0 || self.dense_widths.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        let mut encoder = Vec::new();
        let mut decoder = Vec::new();
        let mut convs = Vec::new();
        let flat = match self.variant {
            Variant::Fc => {
                if !self.conv_filters.is_empty() {
                    return bad("FC networks take no convolution filters".into());
                }
                self.input_len()
            }
            Variant::Cnn => {
                if self.conv_filters.is_empty() || self.conv_filters.len() != self.conv_strides.len() {
                    return bad("CNN needs one stride per convolution filter count".into());
                }
                if self.kernel.is_multiple_of(2) {
                    return bad("kernel size must be odd".into());
                }
                let (mut c, mut h, mut w) = (self.tile_dim, self.grid_height, self.grid_width);
                for (&f, &s) in self.conv_filters.iter().zip(&self.conv_strides) {
                    if f == 0 || s == 0 || h % s != 0 || w % s != 0 {
                        return bad(format!("stride {s} does not divide feature map {h}x{w}"));
                    }
                    let g = ConvShape {
                        in_channels: c,
                        out_channels: f,
                        kernel: self.kernel,
                        stride: s,
                        in_h: h,
                        in_w: w,
                        out_h: h / s,
                        out_w: w / s,
                    };
                    encoder.push(LayerShape::Conv(g));
                    convs.push(g);
                    c = f;
                    h /= s;
                    w /= s;
                }
                let flat = c * h * w;
                if let Some(declared) = self.flatten {
                    if declared != flat {
                        return bad(format!(
                            "declared flatten {declared} but convolutions give {c}x{h}x{w} = {flat}"
                        ));
                    }
                }
                flat
            }
        };
        let mut prev = flat;
        for &wd in &self.dense_widths {
            encoder.push(LayerShape::Dense {
                input: prev,
                output: wd,
            });
            prev = wd;
        }
        let hidden = prev;

        prev = self.latent_dim;
        for &wd in self.dense_widths.iter().rev() {
            decoder.push(LayerShape::Dense {
                input: prev,
                output: wd,
            });
            prev = wd;
        }
        match self.variant {
            Variant::Fc => {
                decoder.push(LayerShape::Dense {
                    input: prev,
                    output: self.input_len(),
                });
            }
            Variant::Cnn => {
                decoder.push(LayerShape::Dense {
                    input: prev,
                    output: flat,
                });
                for g in convs.iter().rev() {
                    decoder.push(LayerShape::ConvTranspose(ConvShape {
                        in_channels: g.out_channels,
                        out_channels: g.in_channels,
                        kernel: g.kernel,
                        stride: g.stride,
                        in_h: g.out_h,
                        in_w: g.out_w,
                        out_h: g.in_h,
                        out_w: g.in_w,
                    }));
                }
            }
        }
        Ok(LayerPlan {
            encoder,
            hidden,
            latent: self.latent_dim,
            decoder,
        })
    }
}

/// Geometry of a 2-D (transposed) convolution with "same"-style padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvShape {
    pub fn pad(&self) -> usize {
        self.kernel / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerShape {
    Dense { input: usize, output: usize },
    Conv(ConvShape),
    ConvTranspose(ConvShape),
}

impl LayerShape {
    pub fn output_len(&self) -> usize {
        match self {
            LayerShape::Dense { output, .. } => *output,
            LayerShape::Conv(g) | LayerShape::ConvTranspose(g) => g.out_channels * g.out_h * g.out_w,
        }
    }

    /// (channels, spatial size) seen by the following batch normalization.
    pub fn norm_layout(&self) -> (usize, usize) {
        match self {
            LayerShape::Dense { output, .. } => (*output, 1),
            LayerShape::Conv(g) | LayerShape::ConvTranspose(g) => (g.out_channels, g.out_h * g.out_w),
        }
    }
}

/// Learned layers of a network; the last decoder entry is the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerPlan {
    pub encoder: Vec<LayerShape>,
    pub hidden: usize,
    pub latent: usize,
    pub decoder: Vec<LayerShape>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fc_default_first_layer_flattens_segment() {
        let plan = NetworkSpec::fc_default(256, OutputKind::Linear).layer_plan().unwrap();
        assert_eq!(
            plan.encoder[0],
            LayerShape::Dense {
                input: 65536,
                output: 1024
            }
        );
        assert_eq!(plan.hidden, 128);
        assert_eq!(plan.latent, 128);
        assert_eq!(
            plan.decoder.last(),
            Some(&LayerShape::Dense {
                input: 1024,
                output: 65536
            })
        );
        assert_eq!(plan.decoder.len(), 5);
    }

    #[test]
    fn cnn_default_flattens_to_2048() {
        let spec = NetworkSpec::cnn_default(256, OutputKind::Linear);
        let plan = spec.layer_plan().unwrap();
        assert_eq!(
            plan.encoder[3],
            LayerShape::Dense {
                input: 2048,
                output: 1024
            }
        );
        assert_eq!(plan.latent, 512);
        match plan.decoder[2] {
            LayerShape::ConvTranspose(g) => {
                assert_eq!((g.in_channels, g.in_h, g.out_channels, g.out_h), (128, 4, 256, 4));
            }
            other => panic!("unexpected {other:?}"),
        }
        match plan.decoder.last().unwrap() {
            LayerShape::ConvTranspose(g) => assert_eq!((g.out_channels, g.out_h, g.out_w), (256, 16, 16)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn all_stride_two_contradicts_flatten() {
        let mut spec = NetworkSpec::cnn_default(16, OutputKind::Linear);
        spec.conv_strides = vec![2, 2, 2];
        assert!(matches!(spec.validate(), Err(Error::InvalidSpec(_))));
        spec.flatten = Some(512);
        spec.validate().unwrap();
    }

    #[test]
    fn rejects_indivisible_strides() {
        let mut spec = NetworkSpec::cnn_default(4, OutputKind::Linear);
        spec.grid_height = 6;
        spec.flatten = None;
        assert!(matches!(spec.validate(), Err(Error::InvalidSpec(_))));
    }
}
