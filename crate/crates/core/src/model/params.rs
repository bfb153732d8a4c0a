use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::config::{Ablation, IConvConfig, InitScheme};
use crate::numerics::{BnParams, Matrix, Rng};

/// One residual trend-encoder block: project T -> d_model, ReLU, project back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderBlock {
    pub w_p: Matrix, // T x d_model
    pub b_p: Vec<f64>,
    pub w_r: Matrix, // d_model x T
    pub b_r: Vec<f64>,
}

/// Inter-channel mixer weights: compress C*M rows to C, expand back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcmParams {
    pub w_cr: Matrix, // C x (C*M)
    pub b_cr: Vec<f64>,
    pub w_ce: Matrix, // (C*M) x C
    pub b_ce: Vec<f64>,
}

/// Parameters of one IConv layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IConvLayerParams {
    /// Compressor kernels, one row of length P per (channel, filter) pair.
    pub conv_kernels: Matrix, // (C*M) x P
    pub conv_biases: Vec<f64>, // C*M
    pub bn: BnParams,          // per-channel
    /// Present unless the mixer is ablated away.
    pub icm: Option<IcmParams>,
    /// Expander kernels; each channel's M rows act jointly.
    pub deconv_kernels: Matrix, // (C*M) x P
    pub deconv_biases: Vec<f64>, // C
}

/// All learnable parameters plus batch-norm running state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub encoder: Vec<EncoderBlock>,
    pub w_reg: Matrix, // T x L
    pub b_reg: Vec<f64>,
    pub layers: Vec<IConvLayerParams>,
}

fn draw_matrix(rows: usize, cols: usize, rng: &mut Rng, scheme: InitScheme, fan_in: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    match scheme {
        InitScheme::Normal001 => {
            for v in m.data_mut() {
                *v = rng.normal(0.0, 0.01);
            }
        }
        InitScheme::FanInUniform => {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            for v in m.data_mut() {
                *v = (2.0 * rng.uniform() - 1.0) * bound;
            }
        }
    }
    m
}

/// Draw fresh parameters for `config`. Weights follow `scheme`, biases start
/// at zero, batch-norm scale/shift at 1/0. The draw order is fixed, so a
/// given seed always produces the same parameters.
pub fn init_params(config: &IConvConfig, rng: &mut Rng, scheme: InitScheme) -> Result<ModelParams> {
    config.validate()?;
    let (c, t, l) = (config.channels, config.input_len, config.horizon);
    let d = config.d_model;
    let mut encoder = Vec::with_capacity(config.enc_blocks);
    for _ in 0..config.enc_blocks {
        encoder.push(EncoderBlock {
            w_p: draw_matrix(t, d, rng, scheme, t),
            b_p: vec![0.0; d],
            w_r: draw_matrix(d, t, rng, scheme, d),
            b_r: vec![0.0; t],
        });
    }
    let w_reg = draw_matrix(t, l, rng, scheme, t);
    let b_reg = vec![0.0; l];
    let mut layers = Vec::new();
    if config.ablation != Ablation::NoIconv {
        let m = config.multiplier;
        for &p in &config.kernel_sizes {
            let icm = match config.ablation {
                Ablation::Full => Some(IcmParams {
                    w_cr: draw_matrix(c, c * m, rng, scheme, c * m),
                    b_cr: vec![0.0; c],
                    w_ce: draw_matrix(c * m, c, rng, scheme, c),
                    b_ce: vec![0.0; c * m],
                }),
                _ => None,
            };
            layers.push(IConvLayerParams {
                conv_kernels: draw_matrix(c * m, p, rng, scheme, p),
                conv_biases: vec![0.0; c * m],
                bn: BnParams::new(c),
                icm,
                deconv_kernels: draw_matrix(c * m, p, rng, scheme, m * p),
                deconv_biases: vec![0.0; c],
            });
        }
    }
    Ok(ModelParams { encoder, w_reg, b_reg, layers })
}

impl ModelParams {
    /// Same structure, every trainable value zeroed. Used for gradient
    /// accumulators.
    pub fn zeros_like(&self) -> ModelParams {
        let mut out = self.clone();
        out.visit_trainable_mut(|_, slice| slice.fill(0.0));
        out
    }

    /// Elementwise add of another parameter set (gradient accumulation).
    pub fn accumulate(&mut self, other: &ModelParams) {
        let flat = other.flatten();
        let mut i = 0;
        self.visit_trainable_mut(|_, slice| {
            for v in slice.iter_mut() {
                *v += flat[i];
                i += 1;
            }
        });
        assert_eq!(i, flat.len());
    }

    /// Visit every trainable tensor in a fixed order. Batch-norm running
    /// statistics are state, not parameters, and are skipped.
    pub fn visit_trainable<'a>(&'a self, mut f: impl FnMut(String, &'a [f64])) {
        for (i, blk) in self.encoder.iter().enumerate() {
            f(format!("enc{i}.w_p"), blk.w_p.data());
            f(format!("enc{i}.b_p"), &blk.b_p);
            f(format!("enc{i}.w_r"), blk.w_r.data());
            f(format!("enc{i}.b_r"), &blk.b_r);
        }
        f("w_reg".into(), self.w_reg.data());
        f("b_reg".into(), &self.b_reg);
        for (i, layer) in self.layers.iter().enumerate() {
            f(format!("layer{i}.conv_kernels"), layer.conv_kernels.data());
            f(format!("layer{i}.conv_biases"), &layer.conv_biases);
            f(format!("layer{i}.bn.gamma"), &layer.bn.gamma);
            f(format!("layer{i}.bn.beta"), &layer.bn.beta);
            if let Some(icm) = &layer.icm {
                f(format!("layer{i}.icm.w_cr"), icm.w_cr.data());
                f(format!("layer{i}.icm.b_cr"), &icm.b_cr);
                f(format!("layer{i}.icm.w_ce"), icm.w_ce.data());
                f(format!("layer{i}.icm.b_ce"), &icm.b_ce);
            }
            f(format!("layer{i}.deconv_kernels"), layer.deconv_kernels.data());
            f(format!("layer{i}.deconv_biases"), &layer.deconv_biases);
        }
    }

    /// Mutable variant of [`visit_trainable`], same order.
    pub fn visit_trainable_mut(&mut self, mut f: impl FnMut(&str, &mut [f64])) {
        for (i, blk) in self.encoder.iter_mut().enumerate() {
            f(&format!("enc{i}.w_p"), blk.w_p.data_mut());
            f(&format!("enc{i}.b_p"), &mut blk.b_p);
            f(&format!("enc{i}.w_r"), blk.w_r.data_mut());
            f(&format!("enc{i}.b_r"), &mut blk.b_r);
        }
        f("w_reg", self.w_reg.data_mut());
        f("b_reg", &mut self.b_reg);
        for (i, layer) in self.layers.iter_mut().enumerate() {
            f(&format!("layer{i}.conv_kernels"), layer.conv_kernels.data_mut());
            f(&format!("layer{i}.conv_biases"), &mut layer.conv_biases);
            f(&format!("layer{i}.bn.gamma"), &mut layer.bn.gamma);
            f(&format!("layer{i}.bn.beta"), &mut layer.bn.beta);
            if let Some(icm) = &mut layer.icm {
                f(&format!("layer{i}.icm.w_cr"), icm.w_cr.data_mut());
                f(&format!("layer{i}.icm.b_cr"), &mut icm.b_cr);
                f(&format!("layer{i}.icm.w_ce"), icm.w_ce.data_mut());
                f(&format!("layer{i}.icm.b_ce"), &mut icm.b_ce);
            }
            f(&format!("layer{i}.deconv_kernels"), layer.deconv_kernels.data_mut());
            f(&format!("layer{i}.deconv_biases"), &mut layer.deconv_biases);
        }
    }

    /// All trainable values as one flat vector (fixed order).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_trainable());
        self.visit_trainable(|_, slice| out.extend_from_slice(slice));
        out
    }

    /// Overwrite all trainable values from a flat vector produced by
    /// [`flatten`].
    pub fn unflatten(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_trainable() {
            return Err(Error::Shape(format!(
                "flat vector has {} values, model has {} trainable parameters",
                flat.len(),
                self.n_trainable()
            )));
        }
        let mut i = 0;
        self.visit_trainable_mut(|_, slice| {
            slice.copy_from_slice(&flat[i..i + slice.len()]);
            i += slice.len();
        });
        Ok(())
    }

    pub fn n_trainable(&self) -> usize {
        let mut n = 0;
        self.visit_trainable(|_, slice| n += slice.len());
        n
    }

    /// Named ranges into the flat vector, one per tensor. Used by the
    /// per-group gradient checks.
    pub fn param_groups(&self) -> Vec<(String, Range<usize>)> {
        let mut groups = Vec::new();
        let mut offset = 0;
        self.visit_trainable(|name, slice| {
            groups.push((name, offset..offset + slice.len()));
            offset += slice.len();
        });
        groups
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit_trainable(|_, slice| {
            if slice.iter().any(|v| !v.is_finite()) {
                ok = false;
            }
        });
        ok
    }

    /// Number of values in the IConv stack (zero for the no_iconv ablation).
    pub fn n_iconv_params(&self) -> usize {
        let mut n = 0;
        self.visit_trainable(|name, slice| {
            if name.starts_with("layer") {
                n += slice.len();
            }
        });
        n
    }
}
