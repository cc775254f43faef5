//! Backward-pass contract and the Adam optimizer.

mod common;

use common::{random_tensor, rng};
use ltsp_tensor::{Adam, AdamConfig, Graph, OpKind, Tensor, TensorError};
use proptest::prelude::*;

#[test]
fn gradient_of_sum_is_ones() {
    let mut r = rng(1);
    let g = Graph::<f64>::new();
    let x = g.leaf(random_tensor(&mut r, &[2, 3, 4]).with_grad());
    let grads = g.backward(g.sum(x)).unwrap();
    assert!(grads.get(x).unwrap().iter().all(|&v| v == 1.0));
}

#[test]
fn gradient_of_half_square_is_identity() {
    let mut r = rng(2);
    let t = random_tensor(&mut r, &[5, 2]);
    let g = Graph::<f64>::new();
    let x = g.leaf(t.clone().with_grad());
    let loss = g.affine(g.sum(g.mul(x, x).unwrap()), 0.5, 0.0);
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get(x).unwrap(), t.data());
}

#[test]
fn backward_rejects_non_scalar() {
    let g = Graph::<f32>::new();
    let x = g.leaf(Tensor::zeros(&[3]).unwrap().with_grad());
    assert_eq!(g.backward(x).unwrap_err(), TensorError::NotScalar(vec![3]));
}

#[test]
fn repeated_backward_overwrites_instead_of_accumulating() {
    let g = Graph::<f64>::new();
    let mut param = Tensor::from_vec(&[2], vec![1.0, -2.0]).unwrap().with_grad();
    let x = g.leaf(param.clone());
    let loss = g.sum(g.mul(x, x).unwrap());
    for _ in 0..3 {
        g.backward(loss).unwrap().write_to(x, &mut param).unwrap();
        assert_eq!(param.grad().unwrap(), &[2.0, -4.0]);
    }
}

#[test]
fn untouched_leaf_gets_zero_gradient_and_constants_none() {
    let g = Graph::<f64>::new();
    let used = g.leaf(Tensor::full(&[2], 3.0).unwrap().with_grad());
    let unused = g.leaf(Tensor::full(&[4], 3.0).unwrap().with_grad());
    let c = g.constant(Tensor::full(&[2], 2.0).unwrap());
    let grads = g.backward(g.sum(g.mul(used, c).unwrap())).unwrap();
    assert_eq!(grads.get(used).unwrap(), &[2.0, 2.0]);
    assert_eq!(grads.get(unused).unwrap(), &[0.0; 4]);
    assert!(grads.get(c).is_none());
}

#[test]
fn fault_injection_doubles_the_named_rule() {
    let g = Graph::<f64>::new();
    let x = g.leaf(Tensor::zeros(&[1]).unwrap().with_grad());
    let loss = g.sum(g.sigmoid(x));
    assert_eq!(g.backward(loss).unwrap().get(x).unwrap(), &[0.25]);
    g.inject_backward_fault(Some(OpKind::Sigmoid));
    assert_eq!(g.backward(loss).unwrap().get(x).unwrap(), &[0.5]);
}

#[test]
fn chunk_rejects_indivisible_channels() {
    let g = Graph::<f32>::new();
    let x = g.constant(Tensor::zeros(&[1, 6, 2, 2]).unwrap());
    assert!(matches!(
        g.chunk_channels(x, 4),
        Err(TensorError::Indivisible { extent: 6, divisor: 4, .. })
    ));
    let pieces = g.chunk_channels(g.constant(Tensor::zeros(&[8, 3, 3]).unwrap()), 4).unwrap();
    assert!(pieces.iter().all(|p| g.dims(*p) == vec![2, 3, 3]));
    let a = g.constant(Tensor::zeros(&[2, 3, 3]).unwrap());
    assert_eq!(g.dims(g.concat_channels(a, a).unwrap()), vec![4, 3, 3]);
}

proptest! {
    #[test]
    fn concat_then_chunk_is_identity(ca in 1usize..4, h in 1usize..4, w in 1usize..4, seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = Graph::<f64>::new();
        let a = random_tensor(&mut r, &[1, ca, h, w]);
        let b = random_tensor(&mut r, &[1, ca, h, w]);
        let cat = g.concat_channels(g.constant(a.clone()), g.constant(b.clone())).unwrap();
        let pieces = g.chunk_channels(cat, 2).unwrap();
        prop_assert_eq!(g.value(pieces[0]).data().to_vec(), a.data().to_vec());
        prop_assert_eq!(g.value(pieces[1]).data().to_vec(), b.data().to_vec());
    }

    #[test]
    fn activations_stay_in_range(values in proptest::collection::vec(-50.0f64..50.0, 1..40)) {
        let g = Graph::<f64>::new();
        let x = g.constant(Tensor::from_vec(&[values.len()], values).unwrap());
        for &v in g.value(g.sigmoid(x)).data() { prop_assert!(v >= 0.0 && v <= 1.0); }
        for &v in g.value(g.tanh(x)).data() { prop_assert!(v >= -1.0 && v <= 1.0); }
        for &v in g.value(g.relu(x)).data() { prop_assert!(v >= 0.0); }
    }
}

#[test]
fn adam_zero_gradient_is_a_fixed_point() {
    let mut params = vec![Tensor::from_vec(&[3], vec![1.0f64, -2.0, 0.5]).unwrap().with_grad()];
    params[0].set_grad(vec![0.0; 3]).unwrap();
    let mut adam = Adam::new(AdamConfig::default(), &params).unwrap();
    adam.step(&mut params).unwrap();
    assert_eq!(params[0].data(), &[1.0, -2.0, 0.5]);
    assert_eq!(adam.step_count(), 1);
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let mut params = vec![Tensor::from_vec(&[4], vec![0.0f64; 4]).unwrap().with_grad()];
    params[0].set_grad(vec![3.0, -0.01, 250.0, 0.0]).unwrap();
    let config = AdamConfig::default();
    let mut adam = Adam::new(config, &params).unwrap();
    adam.step(&mut params).unwrap();
    let lr = config.learning_rate;
    let want = [-lr, lr, -lr, 0.0];
    for (got, want) in params[0].data().iter().zip(want) {
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }
}

#[test]
fn adam_minimises_a_quadratic() {
    let mut params = vec![Tensor::scalar(0.0f64).with_grad()];
    let config = AdamConfig {
        learning_rate: 0.05,
        ..AdamConfig::default()
    };
    let mut adam = Adam::new(config, &params).unwrap();
    for _ in 0..100 {
        let g = Graph::new();
        let w = g.leaf(params[0].clone());
        let d = g.affine(w, 1.0, -3.0);
        let loss = g.sum(g.mul(d, d).unwrap());
        g.backward(loss).unwrap().write_to(w, &mut params[0]).unwrap();
        adam.step(&mut params).unwrap();
    }
    assert!((params[0].data()[0] - 3.0).abs() < 0.1, "{}", params[0].data()[0]);
}

#[test]
fn adam_rejects_missing_gradient_and_bad_config() {
    let mut params = vec![Tensor::<f32>::zeros(&[2]).unwrap().with_grad()];
    let mut adam = Adam::new(AdamConfig::default(), &params).unwrap();
    assert_eq!(adam.step(&mut params), Err(TensorError::MissingGrad(0)));
    assert_eq!(adam.step_count(), 0);
    let bad = AdamConfig {
        beta1: 1.0f32,
        ..AdamConfig::default()
    };
    assert!(Adam::new(bad, &params).is_err());
}
