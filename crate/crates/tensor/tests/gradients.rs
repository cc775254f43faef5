//! Backward rules against central finite differences in f64.

mod common;

use common::{check_gradients, random_tensor, rng};
use ltsp_tensor::{BatchNormState, Tensor};

const TOL: f64 = 1e-4;

#[test]
fn conv3d_gradients() {
    let mut r = rng(21);
    let inputs = [
        random_tensor(&mut r, &[2, 2, 3, 4, 3]),
        random_tensor(&mut r, &[3, 2, 3, 3, 3]),
        random_tensor(&mut r, &[3]),
    ];
    check_gradients(&inputs, 1, TOL, |g, v| g.conv3d(v[0], v[1], v[2], 1).unwrap());
    check_gradients(&inputs, 2, TOL, |g, v| g.conv3d(v[0], v[1], v[2], 0).unwrap());
    check_gradients(&inputs, 3, TOL, |g, v| g.conv3d(v[0], v[1], v[2], 2).unwrap());
}

#[test]
fn conv2d_gradients() {
    let mut r = rng(22);
    let inputs = [
        random_tensor(&mut r, &[2, 5, 4]),
        random_tensor(&mut r, &[4, 2, 3, 3]),
        random_tensor(&mut r, &[4]),
    ];
    check_gradients(&inputs, 4, TOL, |g, v| g.conv2d(v[0], v[1], v[2], 1).unwrap());
}

#[test]
fn maxpool3d_gradient() {
    let mut r = rng(23);
    let inputs = [random_tensor(&mut r, &[1, 2, 4, 2, 4])];
    check_gradients(&inputs, 5, TOL, |g, v| g.maxpool3d(v[0]).unwrap());
}

#[test]
fn batchnorm_gradients_training_and_eval() {
    let mut r = rng(24);
    let inputs = [
        random_tensor(&mut r, &[2, 3, 2, 3]),
        random_tensor(&mut r, &[3]),
        random_tensor(&mut r, &[3]),
    ];
    check_gradients(&inputs, 6, TOL, |g, v| {
        let mut state = BatchNormState::new(3);
        g.batchnorm(v[0], v[1], v[2], &mut state).unwrap()
    });
    check_gradients(&inputs, 7, TOL, |g, v| {
        let mut state = BatchNormState::new(3);
        state.running_mean = vec![0.1, -0.2, 0.3];
        state.running_var = vec![0.5, 1.5, 2.0];
        state.training = false;
        g.batchnorm(v[0], v[1], v[2], &mut state).unwrap()
    });
}

#[test]
fn activation_gradients() {
    let mut r = rng(25);
    let inputs = [random_tensor(&mut r, &[3, 7]).cast::<f64>()];
    check_gradients(&inputs, 8, TOL, |g, v| g.sigmoid(v[0]));
    check_gradients(&inputs, 9, TOL, |g, v| g.tanh(v[0]));
    check_gradients(&inputs, 10, TOL, |g, v| g.relu(v[0]));
}

#[test]
fn softmax_gradient() {
    let mut r = rng(26);
    let inputs = [random_tensor(&mut r, &[1, 3, 2, 2, 2])];
    check_gradients(&inputs, 11, TOL, |g, v| g.softmax_channels(v[0]).unwrap());
}

#[test]
fn concat_and_chunk_route_gradients() {
    let mut r = rng(27);
    let inputs = [random_tensor(&mut r, &[2, 3, 3]), random_tensor(&mut r, &[2, 3, 3])];
    for piece in 0..4 {
        check_gradients(&inputs, 12 + piece as u64, TOL, |g, v| {
            let cat = g.concat_channels(v[0], v[1]).unwrap();
            g.chunk_channels(cat, 4).unwrap()[piece]
        });
    }
    // chunk piece k only writes its own channels
    let g = ltsp_tensor::Graph::<f64>::new();
    let x = g.leaf(random_tensor(&mut r, &[4, 1, 2]).with_grad());
    let pieces = g.chunk_channels(x, 2).unwrap();
    let loss = g.sum(pieces[1]);
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get(x).unwrap(), &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
}

#[test]
fn upsample_gradient() {
    let mut r = rng(28);
    let inputs = [random_tensor(&mut r, &[1, 2, 2, 3, 2])];
    check_gradients(&inputs, 20, TOL, |g, v| g.upsample_trilinear(v[0]).unwrap());
}

#[test]
fn elementwise_and_layout_gradients() {
    let mut r = rng(29);
    let a = random_tensor(&mut r, &[2, 4]);
    let b = Tensor::from_vec(&[2, 4], a.data().iter().map(|v| 1.5 + v.abs()).collect()).unwrap();
    let inputs = [a, b];
    check_gradients(&inputs, 21, TOL, |g, v| g.mul(v[0], v[1]).unwrap());
    check_gradients(&inputs, 22, TOL, |g, v| g.div(v[0], v[1]).unwrap());
    check_gradients(&inputs, 23, TOL, |g, v| g.add(v[0], v[1]).unwrap());
    check_gradients(&inputs, 24, TOL, |g, v| g.affine(v[0], -3.0, 0.5));
    check_gradients(&inputs, 25, TOL, |g, v| g.sum(v[0]));
    check_gradients(&inputs, 26, TOL, |g, v| {
        let r = g.reshape(v[1], &[4, 2]).unwrap();
        g.narrow(r, 0, 1, 2).unwrap()
    });
}
