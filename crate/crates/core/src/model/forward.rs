use crate::error::{Error, Result};
use crate::model::config::IConvConfig;
use crate::model::params::{EncoderBlock, IConvLayerParams, IcmParams, ModelParams};
use crate::model::revin::{revin_denormalize, revin_normalize, RevinState};
use crate::numerics::{
    add_bias_per_col, add_bias_per_row, batch_norm_forward, grouped_conv1d,
    grouped_transposed_conv1d, matmul, mean_per_channel, relu, variance_per_channel, BnForward,
    Matrix, Mode,
};

/// Saved activations of one encoder block across the batch.
#[derive(Clone, Debug)]
pub struct EncBlockTrace {
    pub input: Vec<Matrix>,
    /// Pre-ReLU projection, C x d_model.
    pub pre: Vec<Matrix>,
    pub hidden: Vec<Matrix>,
}

/// Saved activations of the inter-channel mixer.
#[derive(Clone, Debug)]
pub struct IcmTrace {
    pub z1: Vec<Matrix>,
    pub hbar: Vec<Matrix>,
    pub z2: Vec<Matrix>,
}

/// Saved activations of one IConv layer across the batch.
#[derive(Clone, Debug)]
pub struct LayerTrace {
    /// Trend entering the layer.
    pub y_in: Vec<Matrix>,
    pub y_mean: Vec<Vec<f64>>,
    pub y_var: Vec<Vec<f64>>,
    pub bn: BnForward,
    /// Pre-ReLU compressor output.
    pub conv_pre: Vec<Matrix>,
    pub h: Vec<Matrix>,
    pub icm: Option<IcmTrace>,
    pub h_hat: Vec<Matrix>,
    /// Expander output (the local-variation correction before scaling).
    pub v: Vec<Matrix>,
}

/// Everything the backward pass needs from one batched forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub mode: Mode,
    pub x_norm: Vec<Matrix>,
    pub revin: Vec<RevinState>,
    pub enc_blocks: Vec<EncBlockTrace>,
    pub x_enc: Vec<Matrix>,
    /// Regression-head output (the initial trend).
    pub trend: Vec<Matrix>,
    pub layers: Vec<LayerTrace>,
    /// Final prediction before denormalization.
    pub y_norm: Vec<Matrix>,
    pub y_hat: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn batch_len(&self) -> usize {
        self.y_hat.len()
    }
}

/// Residual MLP encoder: `x + ReLU(x W_p + b_p) W_r + b_r` per block, applied
/// identically to every channel row.
pub fn mlp_encode(x: &Matrix, encoder: &[EncoderBlock]) -> Result<Matrix> {
    let mut cur = x.clone();
    for blk in encoder {
        let mut pre = matmul(&cur, &blk.w_p)?;
        add_bias_per_col(&mut pre, &blk.b_p);
        let hidden = relu(&pre);
        let mut enc = matmul(&hidden, &blk.w_r)?;
        add_bias_per_col(&mut enc, &blk.b_r);
        enc.add_assign(&cur);
        cur = enc;
    }
    Ok(cur)
}

/// Linear regression head mapping the encoded window to the horizon.
pub fn trend_regress(x_enc: &Matrix, w_reg: &Matrix, b_reg: &[f64]) -> Result<Matrix> {
    let mut y = matmul(x_enc, w_reg)?;
    add_bias_per_col(&mut y, b_reg);
    Ok(y)
}

/// Channel-independent patch compressor: batch norm, grouped strided
/// convolution, ReLU. Single-instance convenience (train mode normalizes
/// with this instance's own statistics).
pub fn cipc_forward(
    y: &Matrix,
    layer: &IConvLayerParams,
    multiplier: usize,
    stride: usize,
    mode: Mode,
    bn_eps: f64,
) -> Result<Matrix> {
    let bn = batch_norm_forward(std::slice::from_ref(y), &layer.bn, mode, bn_eps)?;
    let z = grouped_conv1d(&bn.output[0], &layer.conv_kernels, &layer.conv_biases, multiplier, stride)?;
    Ok(relu(&z))
}

/// Inter-channel mixer: compress the C*M hidden rows to C, expand back, and
/// add the input as a residual. Each time column is mixed independently.
pub fn icm_forward(h: &Matrix, icm: &IcmParams) -> Result<Matrix> {
    let mut z1 = matmul(&icm.w_cr, h)?;
    add_bias_per_row(&mut z1, &icm.b_cr);
    let hbar = relu(&z1);
    let mut z2 = matmul(&icm.w_ce, &hbar)?;
    add_bias_per_row(&mut z2, &icm.b_ce);
    let mut out = relu(&z2);
    out.add_assign(h);
    Ok(out)
}

/// Reference formulation of the mixer built from explicit 1x1 convolutions
/// instead of matrix products. Used to check that both routes agree.
pub fn icm_forward_conv1x1(h: &Matrix, icm: &IcmParams) -> Result<Matrix> {
    let z1 = conv1x1(h, &icm.w_cr, &icm.b_cr)?;
    let hbar = relu(&z1);
    let z2 = conv1x1(&hbar, &icm.w_ce, &icm.b_ce)?;
    let mut out = relu(&z2);
    out.add_assign(h);
    Ok(out)
}

/// 1-D convolution with kernel size one: `weights` is out_channels x
/// in_channels, applied position by position along the time axis.
fn conv1x1(x: &Matrix, weights: &Matrix, biases: &[f64]) -> Result<Matrix> {
    if weights.cols() != x.rows() {
        return Err(Error::Shape(format!(
            "1x1 conv weights {}x{} applied to {} input channels",
            weights.rows(),
            weights.cols(),
            x.rows()
        )));
    }
    let mut out = Matrix::zeros(weights.rows(), x.cols());
    for n in 0..x.cols() {
        for r in 0..weights.rows() {
            let mut acc = biases[r];
            for (k, &w) in weights.row(r).iter().enumerate() {
                acc += w * x.get(k, n);
            }
            out.set(r, n, acc);
        }
    }
    Ok(out)
}

/// Channel-independent patch expander: grouped transposed convolution
/// restoring the horizon length.
pub fn cipe_forward(
    h_hat: &Matrix,
    layer: &IConvLayerParams,
    multiplier: usize,
    stride: usize,
) -> Result<Matrix> {
    grouped_transposed_conv1d(h_hat, &layer.deconv_kernels, &layer.deconv_biases, multiplier, stride)
}

/// Per-channel gate applied to the correction: `y + v * Var(y)` (or std when
/// `use_std` is set), variance broadcast across the horizon.
pub fn variance_gate(y: &Matrix, v: &Matrix, use_std: bool) -> Matrix {
    let var = variance_per_channel(y);
    let mut out = y.clone();
    for c in 0..y.rows() {
        let gate = if use_std { var[c].sqrt() } else { var[c] };
        for (o, &corr) in out.row_mut(c).iter_mut().zip(v.row(c)) {
            *o += corr * gate;
        }
    }
    out
}

/// One full IConv layer on a single instance: CIPC, ICM (identity when
/// ablated), CIPE, variance-scaled residual.
pub fn iconv_layer(
    y: &Matrix,
    layer: &IConvLayerParams,
    config: &IConvConfig,
    mode: Mode,
) -> Result<Matrix> {
    let h = cipc_forward(y, layer, config.multiplier, config.stride, mode, config.bn_epsilon)?;
    let h_hat = match &layer.icm {
        Some(icm) => icm_forward(&h, icm)?,
        None => h,
    };
    let expected = (h_hat.cols() - 1) * config.stride + layer.deconv_kernels.cols();
    if expected != y.cols() {
        return Err(Error::Config(format!(
            "expander restores length {expected}, layer input has length {}",
            y.cols()
        )));
    }
    let v = cipe_forward(&h_hat, layer, config.multiplier, config.stride)?;
    Ok(variance_gate(y, &v, config.scale_by_std))
}

fn check_input_shape(x: &Matrix, config: &IConvConfig) -> Result<()> {
    if x.shape() != (config.channels, config.input_len) {
        return Err(Error::Shape(format!(
            "input is {}x{}, config expects {}x{}",
            x.rows(),
            x.cols(),
            config.channels,
            config.input_len
        )));
    }
    Ok(())
}

/// Batched forward pass recording every intermediate needed by the backward
/// pass. Train mode normalizes batch-norm groups with batch statistics but
/// does not touch the running statistics; the training loop applies that
/// update explicitly from the returned trace.
pub fn forward_batch(
    xs: &[Matrix],
    params: &ModelParams,
    config: &IConvConfig,
    mode: Mode,
) -> Result<ForwardTrace> {
    if xs.is_empty() {
        return Err(Error::Config("forward pass on an empty batch".into()));
    }
    for x in xs {
        check_input_shape(x, config)?;
    }
    let batch = xs.len();

    let mut x_norm = Vec::with_capacity(batch);
    let mut revin = Vec::with_capacity(batch);
    for x in xs {
        let (n, st) = revin_normalize(x, config.revin_epsilon);
        x_norm.push(n);
        revin.push(st);
    }

    let mut enc_blocks = Vec::with_capacity(params.encoder.len());
    let mut cur: Vec<Matrix> = x_norm.clone();
    for blk in &params.encoder {
        let mut pre = Vec::with_capacity(batch);
        let mut hidden = Vec::with_capacity(batch);
        let mut next = Vec::with_capacity(batch);
        for x in &cur {
            let mut p = matmul(x, &blk.w_p)?;
            add_bias_per_col(&mut p, &blk.b_p);
            let h = relu(&p);
            let mut out = matmul(&h, &blk.w_r)?;
            add_bias_per_col(&mut out, &blk.b_r);
            out.add_assign(x);
            pre.push(p);
            hidden.push(h);
            next.push(out);
        }
        enc_blocks.push(EncBlockTrace { input: cur, pre, hidden });
        cur = next;
    }
    let x_enc = cur;

    let mut trend = Vec::with_capacity(batch);
    for x in &x_enc {
        trend.push(trend_regress(x, &params.w_reg, &params.b_reg)?);
    }

    let mut layers = Vec::with_capacity(params.layers.len());
    let mut y_cur = trend.clone();
    for layer in &params.layers {
        let y_in = y_cur;
        let y_mean: Vec<Vec<f64>> = y_in.iter().map(mean_per_channel).collect();
        let y_var: Vec<Vec<f64>> = y_in.iter().map(variance_per_channel).collect();

        let bn = batch_norm_forward(&y_in, &layer.bn, mode, config.bn_epsilon)?;

        let mut conv_pre = Vec::with_capacity(batch);
        let mut h = Vec::with_capacity(batch);
        for normed in &bn.output {
            let z = grouped_conv1d(
                normed,
                &layer.conv_kernels,
                &layer.conv_biases,
                config.multiplier,
                config.stride,
            )?;
            h.push(relu(&z));
            conv_pre.push(z);
        }

        let (icm_trace, h_hat) = match &layer.icm {
            Some(icm) => {
                let mut z1s = Vec::with_capacity(batch);
                let mut hbars = Vec::with_capacity(batch);
                let mut z2s = Vec::with_capacity(batch);
                let mut outs = Vec::with_capacity(batch);
                for hb in &h {
                    let mut z1 = matmul(&icm.w_cr, hb)?;
                    add_bias_per_row(&mut z1, &icm.b_cr);
                    let hbar = relu(&z1);
                    let mut z2 = matmul(&icm.w_ce, &hbar)?;
                    add_bias_per_row(&mut z2, &icm.b_ce);
                    let mut out = relu(&z2);
                    out.add_assign(hb);
                    z1s.push(z1);
                    hbars.push(hbar);
                    z2s.push(z2);
                    outs.push(out);
                }
                (Some(IcmTrace { z1: z1s, hbar: hbars, z2: z2s }), outs)
            }
            None => (None, h.clone()),
        };

        let mut v = Vec::with_capacity(batch);
        let mut y_next = Vec::with_capacity(batch);
        for (b, hh) in h_hat.iter().enumerate() {
            let corr = grouped_transposed_conv1d(
                hh,
                &layer.deconv_kernels,
                &layer.deconv_biases,
                config.multiplier,
                config.stride,
            )?;
            if corr.cols() != y_in[b].cols() {
                return Err(Error::Config(format!(
                    "expander produced length {}, expected horizon {}",
                    corr.cols(),
                    y_in[b].cols()
                )));
            }
            let mut out = y_in[b].clone();
            for c in 0..out.rows() {
                let gate = if config.scale_by_std {
                    y_var[b][c].sqrt()
                } else {
                    y_var[b][c]
                };
                for (o, &cv) in out.row_mut(c).iter_mut().zip(corr.row(c)) {
                    *o += cv * gate;
                }
            }
            v.push(corr);
            y_next.push(out);
        }

        layers.push(LayerTrace { y_in, y_mean, y_var, bn, conv_pre, h, icm: icm_trace, h_hat, v });
        y_cur = y_next;
    }

    let y_norm = y_cur;
    let mut y_hat = Vec::with_capacity(batch);
    for (y, st) in y_norm.iter().zip(&revin) {
        y_hat.push(revin_denormalize(y, st)?);
    }

    Ok(ForwardTrace { mode, x_norm, revin, enc_blocks, x_enc, trend, layers, y_norm, y_hat })
}

/// Forecast a single window. A pure function of `(x, params)`: eval mode uses
/// the frozen running statistics, train mode uses the instance's own batch
/// statistics, and neither mutates anything.
pub fn model_forward(
    x: &Matrix,
    params: &ModelParams,
    config: &IConvConfig,
    mode: Mode,
) -> Result<Matrix> {
    let trace = forward_batch(std::slice::from_ref(x), params, config, mode)?;
    Ok(trace.y_hat.into_iter().next().unwrap())
}
