#![allow(dead_code)]

use ltsp_tensor::{Graph, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> Tensor<f64> {
    let n = dims.iter().product();
    Tensor::from_vec(dims, random_vec(rng, n)).unwrap()
}

pub fn assert_close(actual: &[f64], expected: &[f64], tol: f64) {
    assert_eq!(actual.len(), expected.len(), "length mismatch");
    for (i, (a, e)) in actual.iter().zip(expected).enumerate() {
        assert!((a - e).abs() <= tol, "element {i}: {a} vs {e} (tol {tol})");
    }
}

/// Projects the output of `build` onto fixed random weights so any op becomes
/// a scalar function, then compares backward against central differences for
/// every element of every input.
pub fn check_gradients<F>(inputs: &[Tensor<f64>], seed: u64, tol: f64, build: F)
where
    F: Fn(&Graph<f64>, &[ltsp_tensor::Var]) -> ltsp_tensor::Var,
{
    let mut r = rng(seed);
    let probe_len = {
        let g = Graph::new();
        let vars: Vec<_> = inputs.iter().map(|t| g.constant(t.clone())).collect();
        let out = build(&g, &vars);
        let n = g.value(out).numel();
        n
    };
    let probe = random_vec(&mut r, probe_len);
    let eval = |values: &[Tensor<f64>], track: bool| {
        let g = Graph::new();
        let vars: Vec<_> = values
            .iter()
            .map(|t| g.leaf(if track { t.clone().with_grad() } else { t.clone() }))
            .collect();
        let out = build(&g, &vars);
        let dims = g.dims(out);
        let w = g.constant(Tensor::from_vec(&dims, probe.clone()).unwrap());
        let loss = g.sum(g.mul(out, w).unwrap());
        (g, vars, loss)
    };

    let (g, vars, loss) = eval(inputs, true);
    let grads = g.backward(loss).unwrap();
    for (which, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[which]).unwrap().to_vec();
        for k in 0..input.numel() {
            let mut values = input.data().to_vec();
            let numeric = ltsp_tensor::gradcheck::central_difference(&mut values, k, 1e-3, |v| {
                let mut perturbed = inputs.to_vec();
                perturbed[which] = Tensor::from_vec(input.dims(), v.to_vec()).unwrap();
                let (g, _, loss) = eval(&perturbed, false);
                let value = g.value(loss).item().unwrap();
                value
            });
            let err = ltsp_tensor::gradcheck::relative_error(analytic[k], numeric, 1e-8);
            assert!(
                err < tol,
                "input {which} element {k}: analytic {} numeric {numeric} rel err {err}",
                analytic[k]
            );
        }
    }
}
