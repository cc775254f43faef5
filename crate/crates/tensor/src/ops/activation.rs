use crate::error::Result;
use crate::graph::{Graph, Op, Var};
use crate::ops::channel_axis;
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn derivative<T: Real>(self, y: T) -> T {
        match self {
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => y * (T::one() - y),
            Activation::Tanh => T::one() - y * y,
        }
    }
}

fn sigmoid<T: Real>(x: T) -> T {
    // split on sign so exp never overflows
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn backward<T: Real>(kind: Activation, output: &[T], grad: &[T]) -> Vec<T> {
    output
        .iter()
        .zip(grad)
        .map(|(&y, &g)| g * kind.derivative(y))
        .collect()
}

pub(crate) fn softmax_backward<T: Real>(output: &Tensor<T>, grad: &[T]) -> Vec<T> {
    let axis = channel_axis("softmax", output.shape()).expect("validated at forward");
    let (outer, channels, inner) = output.shape().around(axis);
    let y = output.data();
    let mut dx = vec![T::zero(); y.len()];
    for o in 0..outer {
        let base = o * channels * inner;
        for i in 0..inner {
            let mut dot = T::zero();
            for c in 0..channels {
                let k = base + c * inner + i;
                dot += y[k] * grad[k];
            }
            for c in 0..channels {
                let k = base + c * inner + i;
                dx[k] = y[k] * (grad[k] - dot);
            }
        }
    }
    dx
}

impl<T: Real> Graph<T> {
    pub fn activation(&self, input: Var, kind: Activation) -> Var {
        let (value, tracked) = {
            let x = self.value(input);
            let data = x.data().iter().map(|&v| kind.apply(v)).collect();
            (Tensor::from_shape(x.shape().clone(), data), self.tracked(&[input]))
        };
        self.push(value, Op::Activation { input: input.0, kind }, tracked)
    }

    pub fn relu(&self, input: Var) -> Var {
        self.activation(input, Activation::Relu)
    }

    pub fn sigmoid(&self, input: Var) -> Var {
        self.activation(input, Activation::Sigmoid)
    }

    pub fn tanh(&self, input: Var) -> Var {
        self.activation(input, Activation::Tanh)
    }

    /// Softmax across the channel axis.
    pub fn softmax_channels(&self, input: Var) -> Result<Var> {
        let (value, tracked) = {
            let x = self.value(input);
            let axis = channel_axis("softmax", x.shape())?;
            let (outer, channels, inner) = x.shape().around(axis);
            let src = x.data();
            let mut out = vec![T::zero(); src.len()];
            for o in 0..outer {
                let base = o * channels * inner;
                for i in 0..inner {
                    let mut peak = T::neg_infinity();
                    for c in 0..channels {
                        peak = peak.max(src[base + c * inner + i]);
                    }
                    let mut total = T::zero();
                    for c in 0..channels {
                        let k = base + c * inner + i;
                        out[k] = (src[k] - peak).exp();
                        total += out[k];
                    }
                    for c in 0..channels {
                        out[base + c * inner + i] /= total;
                    }
                }
            }
            (Tensor::from_shape(x.shape().clone(), out), self.tracked(&[input]))
        };
        Ok(self.push(value, Op::Softmax { input: input.0 }, tracked))
    }
}
