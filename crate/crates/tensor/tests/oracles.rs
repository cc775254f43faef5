//! Forward passes against the naive reference implementations.

mod common;

use common::{assert_close, random_tensor, rng};
use ltsp_tensor::{reference, BatchNormState, Graph, Tensor};
use rand::Rng;

const TOL: f64 = 1e-6;

#[test]
fn conv3d_matches_nested_loops_on_random_shapes() {
    let mut r = rng(11);
    for case in 0..24 {
        let k = if case % 3 == 0 { 1 } else { 3 };
        let pad = if case % 4 == 1 { 0 } else { (k - 1) / 2 };
        let dims = [
            r.gen_range(1..3),
            r.gen_range(1..4),
            r.gen_range(k..6),
            r.gen_range(k..6),
            r.gen_range(k..6),
        ];
        let cout = r.gen_range(1..5);
        let x = random_tensor(&mut r, &dims);
        let w = random_tensor(&mut r, &[cout, dims[1], k, k, k]);
        let b = random_tensor(&mut r, &[cout]);
        let g = Graph::new();
        let out = g
            .conv3d(g.constant(x.clone()), g.constant(w.clone()), g.constant(b.clone()), pad)
            .unwrap();
        let (expected, edims) =
            reference::conv3d(x.data(), dims, w.data(), [cout, dims[1], k, k, k], b.data(), pad);
        assert_eq!(g.dims(out), edims.to_vec());
        assert_close(g.value(out).data(), &expected, TOL);
    }
}

#[test]
fn conv3d_fixed_example_three_output_channels() {
    let mut r = rng(3);
    let x = random_tensor(&mut r, &[1, 2, 4, 4, 4]);
    let w = random_tensor(&mut r, &[3, 2, 3, 3, 3]);
    let b = random_tensor(&mut r, &[3]);
    let g = Graph::new();
    let out = g
        .conv3d(g.constant(x.clone()), g.constant(w.clone()), g.constant(b.clone()), 1)
        .unwrap();
    let (expected, _) = reference::conv3d(x.data(), [1, 2, 4, 4, 4], w.data(), [3, 2, 3, 3, 3], b.data(), 1);
    assert_eq!(g.dims(out), vec![1, 3, 4, 4, 4]);
    assert_close(g.value(out).data(), &expected, TOL);
}

#[test]
fn conv3d_trivial_cases() {
    let mut r = rng(5);
    let g = Graph::new();
    let x = g.constant(random_tensor(&mut r, &[1, 2, 3, 3, 3]));
    let w = g.constant(Tensor::zeros(&[4, 2, 3, 3, 3]).unwrap());
    let b = g.constant(Tensor::zeros(&[4]).unwrap());
    let out = g.conv3d(x, w, b, 1).unwrap();
    assert!(g.value(out).data().iter().all(|&v| v == 0.0));

    let x = g.constant(Tensor::full(&[1, 1, 1, 1, 1], 1.5).unwrap());
    let w = g.constant(Tensor::full(&[1, 1, 1, 1, 1], -2.0).unwrap());
    let b = g.constant(Tensor::full(&[1], 0.25).unwrap());
    let out = g.conv3d(x, w, b, 0).unwrap();
    assert_eq!(g.value(out).data(), &[1.5 * -2.0 + 0.25]);
}

#[test]
fn conv3d_rejects_channel_mismatch() {
    let g = Graph::<f64>::new();
    let x = g.constant(Tensor::zeros(&[1, 2, 4, 4, 4]).unwrap());
    let w = g.constant(Tensor::zeros(&[3, 5, 3, 3, 3]).unwrap());
    let b = g.constant(Tensor::zeros(&[3]).unwrap());
    let err = g.conv3d(x, w, b, 1).unwrap_err();
    assert!(err.to_string().contains("input channels"), "{err}");
}

#[test]
fn conv2d_matches_nested_loops_on_random_shapes() {
    let mut r = rng(12);
    for case in 0..24 {
        let k = [1, 3, 3, 5][case % 4];
        let pad = if case % 5 == 2 { 0 } else { (k - 1) / 2 };
        let dims = [r.gen_range(1..5), r.gen_range(k..8), r.gen_range(k..8)];
        let cout = r.gen_range(1..9);
        let x = random_tensor(&mut r, &dims);
        let w = random_tensor(&mut r, &[cout, dims[0], k, k]);
        let b = random_tensor(&mut r, &[cout]);
        let g = Graph::new();
        let out = g
            .conv2d(g.constant(x.clone()), g.constant(w.clone()), g.constant(b.clone()), pad)
            .unwrap();
        let (expected, edims) = reference::conv2d(x.data(), dims, w.data(), [cout, dims[0], k, k], b.data(), pad);
        assert_eq!(g.dims(out), edims.to_vec());
        assert_close(g.value(out).data(), &expected, TOL);
    }
}

#[test]
fn conv2d_examples() {
    let mut r = rng(4);
    let x = random_tensor(&mut r, &[2, 5, 5]);
    let w = random_tensor(&mut r, &[8, 2, 3, 3]);
    let b = random_tensor(&mut r, &[8]);
    let g = Graph::new();
    let xv = g.constant(x.clone());
    let out = g.conv2d(xv, g.constant(w.clone()), g.constant(b.clone()), 1).unwrap();
    let (expected, _) = reference::conv2d(x.data(), [2, 5, 5], w.data(), [8, 2, 3, 3], b.data(), 1);
    assert_close(g.value(out).data(), &expected, TOL);

    let zero = g
        .conv2d(xv, g.constant(Tensor::zeros(&[8, 2, 3, 3]).unwrap()), g.constant(Tensor::zeros(&[8]).unwrap()), 1)
        .unwrap();
    assert!(g.value(zero).data().iter().all(|&v| v == 0.0));

    let single = g.constant(random_tensor(&mut r, &[1, 4, 6]));
    let id = g
        .conv2d(single, g.constant(Tensor::full(&[1, 1, 1, 1], 1.0).unwrap()), g.constant(Tensor::zeros(&[1]).unwrap()), 0)
        .unwrap();
    assert_eq!(g.value(id).data(), g.value(single).data());
}

#[test]
fn conv2d_batched_layout_matches_per_item() {
    let mut r = rng(8);
    let x = random_tensor(&mut r, &[3, 2, 5, 4]);
    let w = random_tensor(&mut r, &[4, 2, 3, 3]);
    let b = random_tensor(&mut r, &[4]);
    let g = Graph::new();
    let (wv, bv) = (g.constant(w), g.constant(b));
    let out = g.conv2d(g.constant(x.clone()), wv, bv, 1).unwrap();
    assert_eq!(g.dims(out), vec![3, 4, 5, 4]);
    for item in 0..3 {
        let xi = Tensor::from_vec(&[2, 5, 4], x.data()[item * 40..(item + 1) * 40].to_vec()).unwrap();
        let oi = g.conv2d(g.constant(xi), wv, bv, 1).unwrap();
        assert_eq!(g.value(oi).data(), &g.value(out).data()[item * 80..(item + 1) * 80]);
    }
}

#[test]
fn maxpool3d_matches_window_scan_on_random_shapes() {
    let mut r = rng(13);
    for case in 0..24 {
        let dims = [
            r.gen_range(1..3),
            r.gen_range(1..4),
            2 * r.gen_range(1..4),
            2 * r.gen_range(1..4),
            2 * r.gen_range(1..4),
        ];
        let dims = if case == 0 { [1, 3, 4, 4, 4] } else { dims };
        let x = random_tensor(&mut r, &dims);
        let g = Graph::new();
        let out = g.maxpool3d(g.constant(x.clone())).unwrap();
        assert_eq!(g.value(out).data(), reference::maxpool3d(x.data(), dims).as_slice());
    }
}

#[test]
fn maxpool3d_trivial_cases_and_odd_extent() {
    let g = Graph::<f64>::new();
    let c = g.maxpool3d(g.constant(Tensor::full(&[1, 2, 4, 2, 6], 0.7).unwrap())).unwrap();
    assert!(g.value(c).data().iter().all(|&v| v == 0.7));
    let seq: Vec<f64> = (1..=8).map(f64::from).collect();
    let one = g.maxpool3d(g.constant(Tensor::from_vec(&[1, 1, 2, 2, 2], seq).unwrap())).unwrap();
    assert_eq!(g.value(one).data(), &[8.0]);
    assert!(g.maxpool3d(g.constant(Tensor::zeros(&[1, 1, 3, 2, 2]).unwrap())).is_err());
}

#[test]
fn maxpool3d_ties_route_gradient_to_first_in_scan_order() {
    let g = Graph::<f64>::new();
    let x = g.leaf(Tensor::full(&[1, 1, 2, 2, 2], 1.0).unwrap().with_grad());
    let loss = g.sum(g.maxpool3d(x).unwrap());
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get(x).unwrap(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn batchnorm_matches_direct_statistics_on_random_shapes() {
    let mut r = rng(14);
    for case in 0..24 {
        let rank = 2 + case % 4;
        let mut dims = vec![r.gen_range(1..3), r.gen_range(1..4)];
        while dims.len() < rank {
            dims.push(r.gen_range(1..5));
        }
        if case == 0 {
            dims = vec![2, 3, 4, 4, 4];
        }
        if dims.iter().product::<usize>() / dims[1] < 2 {
            dims[0] = 2;
        }
        let x = random_tensor(&mut r, &dims);
        let scale = random_tensor(&mut r, &[dims[1]]);
        let shift = random_tensor(&mut r, &[dims[1]]);
        let mut state = BatchNormState::new(dims[1]);
        let g = Graph::new();
        let out = g
            .batchnorm(g.constant(x.clone()), g.constant(scale.clone()), g.constant(shift.clone()), &mut state)
            .unwrap();
        let expected = reference::batchnorm(x.data(), dims[0], dims[1], scale.data(), shift.data(), state.eps);
        assert_close(g.value(out).data(), &expected, TOL);
    }
}

#[test]
fn batchnorm_fixed_point_affine_and_errors() {
    // per-channel zero mean, unit (biased) variance
    let x = Tensor::from_vec(&[1, 2, 4], vec![1.0, -1.0, 1.0, -1.0, 2.0, -2.0, 0.0, 0.0]).unwrap();
    let x = {
        let mut d = x.data().to_vec();
        let s = (2.0f64).sqrt();
        d[4] = s;
        d[5] = -s;
        Tensor::from_vec(&[1, 2, 4], d).unwrap()
    };
    let g = Graph::<f64>::new();
    let mut state = BatchNormState::new(2);
    let ones = g.constant(Tensor::full(&[2], 1.0).unwrap());
    let zeros = g.constant(Tensor::zeros(&[2]).unwrap());
    let out = g.batchnorm(g.constant(x.clone()), ones, zeros, &mut state).unwrap();
    assert_close(g.value(out).data(), x.data(), 1e-5);

    let mut r = rng(2);
    let y = random_tensor(&mut r, &[2, 3, 5]);
    let beta = g.constant(Tensor::from_vec(&[3], vec![0.5, -1.5, 3.0]).unwrap());
    let mut state = BatchNormState::new(3);
    let out = g.batchnorm(g.constant(y), g.constant(Tensor::full(&[3], 2.0).unwrap()), beta, &mut state).unwrap();
    let v = g.value(out);
    for (c, want) in [0.5, -1.5, 3.0].into_iter().enumerate() {
        let mean: f64 = (0..2).flat_map(|b| (0..5).map(move |i| (b * 3 + c) * 5 + i)).map(|k| v.data()[k]).sum::<f64>() / 10.0;
        assert!((mean - want).abs() < 1e-12);
    }
    drop(v);

    let mut state = BatchNormState::new(1);
    let single = g.constant(Tensor::zeros(&[1, 1, 1]).unwrap());
    let one = g.constant(Tensor::full(&[1], 1.0).unwrap());
    assert!(g.batchnorm(single, one, one, &mut state).is_err());
    state.training = false;
    assert!(g.batchnorm(single, one, one, &mut state).is_ok());
}

#[test]
fn batchnorm_updates_running_statistics() {
    let x = Tensor::from_vec(&[1, 1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let g = Graph::<f64>::new();
    let mut state = BatchNormState::new(1);
    let one = g.constant(Tensor::full(&[1], 1.0).unwrap());
    let zero = g.constant(Tensor::zeros(&[1]).unwrap());
    g.batchnorm(g.constant(x.clone()), one, zero, &mut state).unwrap();
    // mean 2.5, unbiased variance 5/3
    assert!((state.running_mean[0] - 0.25).abs() < 1e-12);
    assert!((state.running_var[0] - (0.9 + 0.1 * 5.0 / 3.0)).abs() < 1e-12);

    state.training = false;
    let out = g.batchnorm(g.constant(x), one, zero, &mut state).unwrap();
    let istd = 1.0 / (state.running_var[0] + state.eps).sqrt();
    assert!((g.value(out).data()[0] - (1.0 - 0.25) * istd).abs() < 1e-12);
}

#[test]
fn upsample_matches_interpolation_weights_on_random_shapes() {
    let mut r = rng(15);
    for case in 0..24 {
        let dims = [
            r.gen_range(1..3),
            r.gen_range(1..3),
            r.gen_range(1..5),
            r.gen_range(1..5),
            r.gen_range(1..5),
        ];
        let dims = if case == 0 { [1, 2, 2, 2, 2] } else { dims };
        let x = random_tensor(&mut r, &dims);
        let g = Graph::new();
        let out = g.upsample_trilinear(g.constant(x.clone())).unwrap();
        assert_close(g.value(out).data(), &reference::upsample_trilinear(x.data(), dims), TOL);
    }
}

#[test]
fn upsample_of_constants_stays_constant() {
    let g = Graph::<f64>::new();
    let c = g.upsample_trilinear(g.constant(Tensor::full(&[1, 3, 3, 2, 5], -4.0).unwrap())).unwrap();
    assert_eq!(g.dims(c), vec![1, 3, 6, 4, 10]);
    assert!(g.value(c).data().iter().all(|&v| (v + 4.0).abs() < 1e-12));
    let one = g.upsample_trilinear(g.constant(Tensor::full(&[1, 1, 1, 1, 1], 2.5).unwrap())).unwrap();
    assert_eq!(g.value(one).data(), &[2.5; 8]);
}

#[test]
fn activation_origin_and_range() {
    let g = Graph::<f64>::new();
    let zero = g.constant(Tensor::zeros(&[1]).unwrap());
    assert_eq!(g.value(g.sigmoid(zero)).data(), &[0.5]);
    assert_eq!(g.value(g.tanh(zero)).data(), &[0.0]);
    assert_eq!(g.value(g.relu(zero)).data(), &[0.0]);
    let wide = g.constant(Tensor::from_vec(&[5], vec![-800.0, -3.0, 0.1, 3.0, 800.0]).unwrap());
    assert_eq!(g.value(g.relu(wide)).data(), &[0.0, 0.0, 0.1, 3.0, 800.0]);
    for &v in g.value(g.sigmoid(wide)).data() {
        assert!((0.0..=1.0).contains(&v) && v.is_finite());
    }
    for &v in g.value(g.tanh(wide)).data() {
        assert!((-1.0..=1.0).contains(&v));
    }
}

#[test]
fn forward_results_are_bit_identical_across_runs() {
    let run = || {
        let mut r = rng(99);
        let x = random_tensor(&mut r, &[1, 3, 6, 6, 6]).cast::<f32>();
        let w = random_tensor(&mut r, &[5, 3, 3, 3, 3]).cast::<f32>();
        let b = random_tensor(&mut r, &[5]).cast::<f32>();
        let g = Graph::<f32>::new();
        let y = g.conv3d(g.constant(x), g.constant(w), g.constant(b), 1).unwrap();
        let p = g.maxpool3d(y).unwrap();
        let u = g.upsample_trilinear(p).unwrap();
        let mut state = BatchNormState::new(5);
        let one = g.constant(Tensor::full(&[5], 1.0f32).unwrap());
        let zero = g.constant(Tensor::zeros(&[5]).unwrap());
        let n = g.batchnorm(u, one, zero, &mut state).unwrap();
        let v = g.value(n).data().to_vec();
        v
    };
    let (a, b) = (run(), run());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}
