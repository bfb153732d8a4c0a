use crate::error::{Error, Result};
use crate::model::config::IConvConfig;
use crate::model::forward::ForwardTrace;
use crate::model::params::ModelParams;
use crate::numerics::{
    batch_norm_backward, grouped_conv1d_backward, grouped_transposed_conv1d_backward, matmul,
    relu_backward, Matrix,
};

/// Gradients from one batched backward pass: parameter gradients in the slots
/// of a [`ModelParams`] mirror, plus the gradient with respect to every input
/// window (used by the receptive-field analysis).
#[derive(Clone, Debug)]
pub struct BatchGradients {
    pub params: ModelParams,
    pub input: Vec<Matrix>,
}

fn add_col_sums(into: &mut [f64], m: &Matrix) {
    assert_eq!(into.len(), m.cols());
    for r in 0..m.rows() {
        for (acc, &v) in into.iter_mut().zip(m.row(r)) {
            *acc += v;
        }
    }
}

fn add_row_sums(into: &mut [f64], m: &Matrix) {
    assert_eq!(into.len(), m.rows());
    for (acc, r) in into.iter_mut().zip(0..m.rows()) {
        *acc += m.row(r).iter().sum::<f64>();
    }
}

/// Backpropagate `d_yhat` (gradient of the loss w.r.t. the denormalized
/// predictions) through the trace recorded by
/// [`forward_batch`](crate::model::forward_batch).
///
/// Gradients flow through everything the forward pass computed from the
/// inputs: the RevIN statistics, the batch-norm batch statistics (train
/// mode), and the per-channel variance gates.
pub fn backward_batch(
    params: &ModelParams,
    config: &IConvConfig,
    trace: &ForwardTrace,
    d_yhat: &[Matrix],
) -> Result<BatchGradients> {
    let batch = trace.batch_len();
    if d_yhat.len() != batch {
        return Err(Error::State(format!(
            "backward called with {} upstream gradients for a forward trace of batch {batch}",
            d_yhat.len()
        )));
    }
    let horizon = config.horizon;
    let mut grads = params.zeros_like();

    // Denormalization: y_hat = y_norm * s_c + mean_c. The statistics are
    // functions of the input, so their direct contributions are kept for the
    // RevIN backward at the very end.
    let mut d_y: Vec<Matrix> = Vec::with_capacity(batch);
    let mut d_mean_direct = vec![vec![0.0; config.channels]; batch];
    let mut d_scale_direct = vec![vec![0.0; config.channels]; batch];
    for b in 0..batch {
        let st = &trace.revin[b];
        let mut dyn_b = Matrix::zeros(config.channels, horizon);
        for c in 0..config.channels {
            let s = st.scale(c);
            let up = d_yhat[b].row(c);
            let y_norm = trace.y_norm[b].row(c);
            let dst = dyn_b.row_mut(c);
            for ((d, &g), &yn) in dst.iter_mut().zip(up).zip(y_norm) {
                *d = g * s;
                d_mean_direct[b][c] += g;
                d_scale_direct[b][c] += g * yn;
            }
        }
        d_y.push(dyn_b);
    }

    // IConv layers, deepest first.
    for (layer_idx, lt) in trace.layers.iter().enumerate().rev() {
        let lp = &params.layers[layer_idx];
        let mut d_bn_out: Vec<Matrix> = Vec::with_capacity(batch);
        let mut d_y_partial: Vec<Matrix> = Vec::with_capacity(batch);
        for b in 0..batch {
            let y_in = &lt.y_in[b];
            let v = &lt.v[b];
            let cols = y_in.cols() as f64;

            // y_next = y_in + v * gate(var(y_in)).
            let mut d_v = Matrix::zeros(y_in.rows(), y_in.cols());
            let mut d_part = d_y[b].clone();
            for c in 0..y_in.rows() {
                let var = lt.y_var[b][c];
                let gate = if config.scale_by_std { var.sqrt() } else { var };
                let mut d_gate = 0.0;
                for ((dv, &up), &corr) in
                    d_v.row_mut(c).iter_mut().zip(d_y[b].row(c)).zip(v.row(c))
                {
                    *dv = up * gate;
                    d_gate += up * corr;
                }
                let d_var = if config.scale_by_std {
                    if var > 0.0 {
                        d_gate / (2.0 * var.sqrt())
                    } else {
                        0.0
                    }
                } else {
                    d_gate
                };
                let mean = lt.y_mean[b][c];
                for (dp, &yv) in d_part.row_mut(c).iter_mut().zip(y_in.row(c)) {
                    *dp += d_var * 2.0 * (yv - mean) / cols;
                }
            }

            // Expander.
            let (d_h_hat, d_dk, d_db) = grouped_transposed_conv1d_backward(
                &lt.h_hat[b],
                &lp.deconv_kernels,
                config.multiplier,
                config.stride,
                &d_v,
            );
            grads.layers[layer_idx].deconv_kernels.add_assign(&d_dk);
            for (acc, d) in grads.layers[layer_idx].deconv_biases.iter_mut().zip(&d_db) {
                *acc += d;
            }

            // Mixer (identity when ablated).
            let d_h = match (&lp.icm, &lt.icm) {
                (Some(icm), Some(it)) => {
                    let d_z2 = relu_backward(&it.z2[b], &d_h_hat);
                    let g_icm = grads.layers[layer_idx].icm.as_mut().unwrap();
                    g_icm.w_ce.add_assign(&matmul(&d_z2, &it.hbar[b].transpose())?);
                    add_row_sums(&mut g_icm.b_ce, &d_z2);
                    let d_hbar = matmul(&icm.w_ce.transpose(), &d_z2)?;
                    let d_z1 = relu_backward(&it.z1[b], &d_hbar);
                    g_icm.w_cr.add_assign(&matmul(&d_z1, &lt.h[b].transpose())?);
                    add_row_sums(&mut g_icm.b_cr, &d_z1);
                    let mut d_h = matmul(&icm.w_cr.transpose(), &d_z1)?;
                    d_h.add_assign(&d_h_hat);
                    d_h
                }
                _ => d_h_hat,
            };

            // Compressor.
            let d_conv_pre = relu_backward(&lt.conv_pre[b], &d_h);
            let (d_bn_b, d_ck, d_cb) = grouped_conv1d_backward(
                &lt.bn.output[b],
                &lp.conv_kernels,
                config.multiplier,
                config.stride,
                &d_conv_pre,
            );
            grads.layers[layer_idx].conv_kernels.add_assign(&d_ck);
            for (acc, d) in grads.layers[layer_idx].conv_biases.iter_mut().zip(&d_cb) {
                *acc += d;
            }
            d_bn_out.push(d_bn_b);
            d_y_partial.push(d_part);
        }

        let (d_bn_in, d_gamma, d_beta) = batch_norm_backward(&lt.bn, &lp.bn, &d_bn_out);
        for (acc, d) in grads.layers[layer_idx].bn.gamma.iter_mut().zip(&d_gamma) {
            *acc += d;
        }
        for (acc, d) in grads.layers[layer_idx].bn.beta.iter_mut().zip(&d_beta) {
            *acc += d;
        }
        for b in 0..batch {
            let mut combined = d_y_partial[b].clone();
            combined.add_assign(&d_bn_in[b]);
            d_y[b] = combined;
        }
    }

    // Regression head.
    let mut d_x_enc: Vec<Matrix> = Vec::with_capacity(batch);
    let w_reg_t = params.w_reg.transpose();
    for b in 0..batch {
        grads.w_reg.add_assign(&matmul(&trace.x_enc[b].transpose(), &d_y[b])?);
        add_col_sums(&mut grads.b_reg, &d_y[b]);
        d_x_enc.push(matmul(&d_y[b], &w_reg_t)?);
    }

    // Encoder blocks, last first.
    let mut d_cur = d_x_enc;
    for (blk_idx, bt) in trace.enc_blocks.iter().enumerate().rev() {
        let bp = &params.encoder[blk_idx];
        let w_r_t = bp.w_r.transpose();
        let w_p_t = bp.w_p.transpose();
        let mut d_in: Vec<Matrix> = Vec::with_capacity(batch);
        for b in 0..batch {
            let d_out = &d_cur[b];
            let d_hidden = matmul(d_out, &w_r_t)?;
            grads.encoder[blk_idx].w_r.add_assign(&matmul(&bt.hidden[b].transpose(), d_out)?);
            add_col_sums(&mut grads.encoder[blk_idx].b_r, d_out);
            let d_pre = relu_backward(&bt.pre[b], &d_hidden);
            grads.encoder[blk_idx].w_p.add_assign(&matmul(&bt.input[b].transpose(), &d_pre)?);
            add_col_sums(&mut grads.encoder[blk_idx].b_p, &d_pre);
            let mut d = matmul(&d_pre, &w_p_t)?;
            d.add_assign(d_out);
            d_in.push(d);
        }
        d_cur = d_in;
    }

    // RevIN: x_norm = (x - mean) / s with s = sqrt(var + eps); both
    // statistics depend on x, as do the mean/scale used at denormalization.
    let t_len = config.input_len as f64;
    let mut d_input: Vec<Matrix> = Vec::with_capacity(batch);
    for b in 0..batch {
        let st = &trace.revin[b];
        let mut d_x = Matrix::zeros(config.channels, config.input_len);
        for c in 0..config.channels {
            let s = st.scale(c);
            let xn = trace.x_norm[b].row(c);
            let d_xn = d_cur[b].row(c);
            let mean_dxn = d_xn.iter().sum::<f64>() / t_len;
            let mean_dxn_xhat =
                d_xn.iter().zip(xn).map(|(&g, &x)| g * x).sum::<f64>() / t_len;
            let dm = d_mean_direct[b][c];
            let ds = d_scale_direct[b][c];
            for ((d, &g), &x) in d_x.row_mut(c).iter_mut().zip(d_xn).zip(xn) {
                *d = (g - mean_dxn - x * mean_dxn_xhat) / s + dm / t_len + ds * x / t_len;
            }
        }
        d_input.push(d_x);
    }

    Ok(BatchGradients { params: grads, input: d_input })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::{Ablation, InitScheme};
    use crate::model::forward::forward_batch;
    use crate::model::params::init_params;
    use crate::numerics::{finite_diff_gradient, max_relative_error, Mode, Rng};
    use crate::train::l1_loss_and_grad;

    fn small_config(ablation: Ablation) -> IConvConfig {
        let mut cfg = IConvConfig::new(2, 24, 12);
        cfg.kernel_sizes = vec![6, 4, 2];
        cfg.stride = 2;
        cfg.multiplier = 2;
        cfg.d_model = 8;
        cfg.ablation = ablation;
        cfg
    }

    fn random_batch(cfg: &IConvConfig, batch: usize, rng: &mut Rng) -> (Vec<Matrix>, Vec<Matrix>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..batch {
            let mut x = Matrix::zeros(cfg.channels, cfg.input_len);
            for v in x.data_mut() {
                *v = rng.normal(0.0, 1.0) + 0.5 * rng.uniform();
            }
            let mut y = Matrix::zeros(cfg.channels, cfg.horizon);
            for v in y.data_mut() {
                *v = rng.normal(0.0, 1.0);
            }
            xs.push(x);
            ys.push(y);
        }
        (xs, ys)
    }

    fn loss_for(params: &ModelParams, cfg: &IConvConfig, xs: &[Matrix], ys: &[Matrix], mode: Mode) -> f64 {
        let trace = forward_batch(xs, params, cfg, mode).unwrap();
        l1_loss_and_grad(&trace.y_hat, ys).unwrap().0
    }

    fn check_param_gradients(cfg: &IConvConfig, mode: Mode, seed: u64) {
        let mut rng = Rng::new(seed);
        let mut params = init_params(cfg, &mut rng, InitScheme::Normal001).unwrap();
        // Nudge biases off zero so no ReLU sits near its kink (finite
        // differences straddle kinks within eps of zero).
        params.visit_trainable_mut(|name, slice| {
            if name.contains("b_") || name.contains("biases") {
                for (i, v) in slice.iter_mut().enumerate() {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    *v = sign * (0.01 + 0.002 * (i % 5) as f64);
                }
            }
        });
        let (xs, ys) = random_batch(cfg, 3, &mut rng);

        let trace = forward_batch(&xs, &params, cfg, mode).unwrap();
        let (_, d_yhat) = l1_loss_and_grad(&trace.y_hat, &ys).unwrap();
        let grads = backward_batch(&params, cfg, &trace, &d_yhat).unwrap();
        let analytic = grads.params.flatten();

        let theta = params.flatten();
        let mut probe = params.clone();
        let numeric = finite_diff_gradient(
            |t| {
                probe.unflatten(t).unwrap();
                loss_for(&probe, cfg, &xs, &ys, mode)
            },
            &theta,
            1e-5,
        );
        for (name, range) in params.param_groups() {
            let err = max_relative_error(&analytic[range.clone()], &numeric[range], 1e-6);
            assert!(err <= 1e-4, "group {name} rel err {err} (mode {mode:?})");
        }
    }

    #[test]
    fn full_model_gradients_match_finite_differences_train() {
        check_param_gradients(&small_config(Ablation::Full), Mode::Train, 21);
    }

    #[test]
    fn full_model_gradients_match_finite_differences_eval() {
        check_param_gradients(&small_config(Ablation::Full), Mode::Eval, 22);
    }

    #[test]
    fn no_icm_gradients_match_finite_differences() {
        check_param_gradients(&small_config(Ablation::NoIcm), Mode::Train, 23);
    }

    #[test]
    fn no_iconv_gradients_match_finite_differences() {
        check_param_gradients(&small_config(Ablation::NoIconv), Mode::Train, 24);
    }

    #[test]
    fn input_gradients_match_finite_differences() {
        let cfg = small_config(Ablation::Full);
        let mut rng = Rng::new(31);
        let params = init_params(&cfg, &mut rng, InitScheme::Normal001).unwrap();
        let (xs, ys) = random_batch(&cfg, 2, &mut rng);

        let trace = forward_batch(&xs, &params, &cfg, Mode::Eval).unwrap();
        let (_, d_yhat) = l1_loss_and_grad(&trace.y_hat, &ys).unwrap();
        let grads = backward_batch(&params, &cfg, &trace, &d_yhat).unwrap();

        // Perturb the first input window coordinate-wise.
        let flat0: Vec<f64> = xs[0].data().to_vec();
        let numeric = finite_diff_gradient(
            |t| {
                let mut xs2 = xs.clone();
                xs2[0] = Matrix::from_vec(cfg.channels, cfg.input_len, t.to_vec()).unwrap();
                loss_for(&params, &cfg, &xs2, &ys, Mode::Eval)
            },
            &flat0,
            1e-5,
        );
        let err = max_relative_error(grads.input[0].data(), &numeric, 1e-6);
        assert!(err <= 1e-4, "input grad rel err {err}");
    }

    #[test]
    fn backward_rejects_mismatched_batch() {
        let cfg = small_config(Ablation::Full);
        let mut rng = Rng::new(41);
        let params = init_params(&cfg, &mut rng, InitScheme::Normal001).unwrap();
        let (xs, _) = random_batch(&cfg, 2, &mut rng);
        let trace = forward_batch(&xs, &params, &cfg, Mode::Eval).unwrap();
        let bad = vec![Matrix::zeros(cfg.channels, cfg.horizon)];
        let err = backward_batch(&params, &cfg, &trace, &bad).unwrap_err();
        assert!(matches!(err, Error::State(_)));
    }
}
