//! Property tests over the numeric core and data pipeline.

mod common;

use common::{dot, naive_grouped_conv, naive_grouped_trconv, random_matrix};
use iconv_core::analysis::min_max_scale;
use iconv_core::data::{chronological_split, synth_generate, windows, SplitRatios, SynthRecipe, WindowSpec};
use iconv_core::model::{revin_denormalize, revin_normalize};
use iconv_core::numerics::{
    batch_norm_forward, grouped_conv1d, grouped_transposed_conv1d, BnParams, Matrix, Mode, Rng,
    Tensor3,
};
use iconv_core::train::l1_loss;
use proptest::prelude::*;

/// Random valid grouped-conv geometry: stride, kernel, output positions.
fn conv_geometry() -> impl Strategy<Value = (usize, usize, usize, usize, usize)> {
    // (channels, multiplier, kernel, stride, n_out)
    (1usize..=4, 1usize..=3, 1usize..=8, 1usize..=4, 1usize..=6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_matches_naive_loop_exactly(
        (c, m, p, s, n_out) in conv_geometry(),
        seed in any::<u64>(),
    ) {
        let l = (n_out - 1) * s + p;
        let mut rng = Rng::new(seed);
        let x = random_matrix(c, l, &mut rng);
        let kernels = random_matrix(c * m, p, &mut rng);
        let biases: Vec<f64> = (0..c * m).map(|_| rng.normal(0.0, 1.0)).collect();
        let fast = grouped_conv1d(&x, &kernels, &biases, m, s).unwrap();
        let naive = naive_grouped_conv(&x, &kernels, &biases, m, s);
        prop_assert_eq!(fast.data(), naive.data());
    }

    #[test]
    fn transposed_conv_matches_naive_loop_exactly(
        (c, m, p, s, n) in conv_geometry(),
        seed in any::<u64>(),
    ) {
        let mut rng = Rng::new(seed);
        let h = random_matrix(c * m, n, &mut rng);
        let kernels = random_matrix(c * m, p, &mut rng);
        let biases: Vec<f64> = (0..c).map(|_| rng.normal(0.0, 1.0)).collect();
        let fast = grouped_transposed_conv1d(&h, &kernels, &biases, m, s).unwrap();
        let naive = naive_grouped_trconv(&h, &kernels, &biases, m, s);
        prop_assert_eq!(fast.data(), naive.data());
    }

    #[test]
    fn shape_law_round_trip(
        (c, m, p, s, n_out) in conv_geometry(),
        seed in any::<u64>(),
    ) {
        let l = (n_out - 1) * s + p;
        let mut rng = Rng::new(seed);
        let x = random_matrix(c, l, &mut rng);
        let kernels = random_matrix(c * m, p, &mut rng);
        let h = grouped_conv1d(&x, &kernels, &vec![0.0; c * m], m, s).unwrap();
        prop_assert_eq!(h.shape(), (c * m, (l - p) / s + 1));
        let back = grouped_transposed_conv1d(&h, &kernels, &vec![0.0; c], m, s).unwrap();
        prop_assert_eq!(back.shape(), (c, l));
    }

    #[test]
    fn transposed_conv_is_adjoint_of_conv(
        (c, m, p, s, n_out) in conv_geometry(),
        seed in any::<u64>(),
    ) {
        // <conv(x), h> == <x, trconv(h)> for shared, bias-free kernels.
        let l = (n_out - 1) * s + p;
        let mut rng = Rng::new(seed);
        let x = random_matrix(c, l, &mut rng);
        let kernels = random_matrix(c * m, p, &mut rng);
        let h = random_matrix(c * m, n_out, &mut rng);
        let cx = grouped_conv1d(&x, &kernels, &vec![0.0; c * m], m, s).unwrap();
        let th = grouped_transposed_conv1d(&h, &kernels, &vec![0.0; c], m, s).unwrap();
        let lhs = dot(&cx, &h);
        let rhs = dot(&x, &th);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1.0));
    }

    #[test]
    fn bn_train_mode_normalizes(groups in 1usize..=4, cols in 2usize..=16, batch in 1usize..=4, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let xs: Vec<Matrix> = (0..batch).map(|_| random_matrix(groups, cols, &mut rng)).collect();
        let bn = BnParams::new(groups);
        let eps = 1e-12;
        let fwd = batch_norm_forward(&xs, &bn, Mode::Train, eps).unwrap();
        for g in 0..groups {
            prop_assume!(fwd.stats.var[g] > eps);
            let vals: Vec<f64> = fwd.output.iter().flat_map(|m| m.row(g).to_vec()).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-8, "group {} mean {}", g, mean);
            prop_assert!((var - 1.0).abs() < 1e-8, "group {} var {}", g, var);
        }
    }

    #[test]
    fn revin_round_trip_property(c in 1usize..=5, t in 1usize..=32, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let mut x = random_matrix(c, t, &mut rng);
        if c > 1 {
            // Force one zero-variance channel into the mix.
            let v = rng.normal(0.0, 3.0);
            x.row_mut(0).fill(v);
        }
        let (n, st) = revin_normalize(&x, 1e-5);
        let back = revin_denormalize(&n, &st).unwrap();
        for (&a, &b) in x.data().iter().zip(back.data()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn l1_symmetry_and_triangle(len in 1usize..=24, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let a = Tensor3::from_matrices(&[random_matrix(2, len, &mut rng)]).unwrap();
        let b = Tensor3::from_matrices(&[random_matrix(2, len, &mut rng)]).unwrap();
        let c = Tensor3::from_matrices(&[random_matrix(2, len, &mut rng)]).unwrap();
        let ab = l1_loss(&a, &b).unwrap();
        let ba = l1_loss(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        let ac = l1_loss(&a, &c).unwrap();
        let cb = l1_loss(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn window_count_formula(range_len in 2usize..200, t in 1usize..64, l in 1usize..64) {
        let ds = synth_generate(1, range_len, 0, &SynthRecipe::trend_only());
        let spec = WindowSpec::new(t, l).unwrap();
        let ws = windows(&ds, 0..range_len, spec);
        let expected = if range_len >= t + l { range_len - (t + l) + 1 } else { 0 };
        prop_assert_eq!(ws.len(), expected);
    }

    #[test]
    fn splits_never_share_target_timesteps(
        rows in 400usize..3000,
        t in 1usize..64,
        l in 1usize..48,
    ) {
        let ratios = SplitRatios::SIX_TWO_TWO;
        if let Ok(r) = chronological_split(rows, ratios, t, l, None) {
            // Forecast targets live in [start + T, end) of each range.
            let train_targets = (r.train.start + t)..r.train.end;
            let val_targets = (r.val.start + t)..r.val.end;
            let test_targets = (r.test.start + t)..r.test.end;
            prop_assert!(train_targets.end <= val_targets.start);
            prop_assert!(val_targets.end <= test_targets.start);
            prop_assert_eq!(test_targets.end, r.test.end);
        }
    }

    #[test]
    fn min_max_scaling_idempotent(vals in prop::collection::vec(-1e3f64..1e3, 2..40)) {
        let scaled = min_max_scale(&vals);
        prop_assert!(scaled.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let rescaled = min_max_scale(&scaled);
        for (a, b) in scaled.iter().zip(&rescaled) {
            prop_assert!((a - b).abs() < 1e-15);
        }
    }
}
