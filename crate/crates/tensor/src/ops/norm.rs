use crate::error::{Result, TensorError};
use crate::graph::{Contributions, Graph, Node, Op, Var};
use crate::ops::expect_rank;
use crate::real::Real;
use crate::tensor::Tensor;

/// Running statistics and mode of one batch-normalization layer.
///
/// The learnable per-channel scale and shift are ordinary parameter tensors
/// passed to [`Graph::batchnorm`] alongside this state.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormState<T> {
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub eps: T,
    pub training: bool,
}

impl<T: Real> BatchNormState<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: T::from_f64_lossy(0.1),
            eps: T::from_f64_lossy(1e-5),
            training: true,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }
}

pub(crate) struct NormSaved<T> {
    input: usize,
    scale: usize,
    shift: usize,
    xhat: Vec<T>,
    inv_std: Vec<T>,
    batch_stats: bool,
}

impl<T: Real> Graph<T> {
    /// Batch normalization over every axis except the channel axis 1.
    ///
    /// In training mode the batch statistics are used and the running
    /// statistics updated with `momentum` (unbiased variance); in eval mode
    /// the running statistics are used.
    pub fn batchnorm(
        &self,
        input: Var,
        scale: Var,
        shift: Var,
        state: &mut BatchNormState<T>,
    ) -> Result<Var> {
        let shape = self.shape(input);
        expect_rank("batchnorm", &shape, &[2, 3, 4, 5])?;
        let (outer, channels, inner) = shape.around(1);
        for (name, v) in [("scale", scale), ("shift", shift)] {
            let s = self.shape(v);
            if s.dims() != [channels] {
                return Err(TensorError::ShapeMismatch {
                    op: "batchnorm",
                    expected: format!("{name} [{channels}]"),
                    found: s.to_string(),
                });
            }
        }
        if state.channels() != channels {
            return Err(TensorError::ShapeMismatch {
                op: "batchnorm",
                expected: format!("state for {channels} channels"),
                found: format!("{} channels", state.channels()),
            });
        }
        let count = outer * inner;
        if state.training && count < 2 {
            return Err(TensorError::SingleElementStatistics);
        }

        let (value, saved) = {
            let x = self.value(input);
            let src = x.data();
            let gamma = self.value(scale);
            let beta = self.value(shift);
            let n = T::from_usize_lossy(count);
            let mut xhat = vec![T::zero(); src.len()];
            let mut out = vec![T::zero(); src.len()];
            let mut inv_std = vec![T::zero(); channels];
            for c in 0..channels {
                let blocks = || (0..outer).map(move |o| (o * channels + c) * inner);
                let (mean, var) = if state.training {
                    let mut sum = T::zero();
                    for b in blocks() {
                        sum += src[b..b + inner].iter().copied().sum::<T>();
                    }
                    let mean = sum / n;
                    let mut sq = T::zero();
                    for b in blocks() {
                        sq += src[b..b + inner].iter().map(|&v| (v - mean) * (v - mean)).sum::<T>();
                    }
                    let biased = sq / n;
                    let unbiased = sq / (n - T::one());
                    let m = state.momentum;
                    state.running_mean[c] = (T::one() - m) * state.running_mean[c] + m * mean;
                    state.running_var[c] = (T::one() - m) * state.running_var[c] + m * unbiased;
                    (mean, biased)
                } else {
                    (state.running_mean[c], state.running_var[c])
                };
                let istd = T::one() / (var + state.eps).sqrt();
                inv_std[c] = istd;
                let (g, sh) = (gamma.data()[c], beta.data()[c]);
                for b in blocks() {
                    for k in b..b + inner {
                        let h = (src[k] - mean) * istd;
                        xhat[k] = h;
                        out[k] = g * h + sh;
                    }
                }
            }
            let saved = NormSaved {
                input: input.0,
                scale: scale.0,
                shift: shift.0,
                xhat,
                inv_std,
                batch_stats: state.training,
            };
            (Tensor::from_shape(shape.clone(), out), saved)
        };
        let tracked = self.tracked(&[input, scale, shift]);
        Ok(self.push(value, Op::BatchNorm(saved), tracked))
    }
}

pub(crate) fn backward<T: Real>(nodes: &[Node<T>], s: &NormSaved<T>, grad: &[T]) -> Contributions<T> {
    let shape = nodes[s.input].value.shape();
    let (outer, channels, inner) = shape.around(1);
    let gamma = nodes[s.scale].value.data();
    let n = T::from_usize_lossy(outer * inner);
    let mut dscale = vec![T::zero(); channels];
    let mut dshift = vec![T::zero(); channels];
    let mut dx = vec![T::zero(); grad.len()];
    for c in 0..channels {
        let blocks = || (0..outer).map(move |o| (o * channels + c) * inner);
        let (mut sum_g, mut sum_gx) = (T::zero(), T::zero());
        for b in blocks() {
            for k in b..b + inner {
                sum_g += grad[k];
                sum_gx += grad[k] * s.xhat[k];
            }
        }
        dscale[c] = sum_gx;
        dshift[c] = sum_g;
        let k0 = gamma[c] * s.inv_std[c];
        for b in blocks() {
            for k in b..b + inner {
                dx[k] = if s.batch_stats {
                    k0 * (grad[k] - sum_g / n - s.xhat[k] * sum_gx / n)
                } else {
                    k0 * grad[k]
                };
            }
        }
    }
    vec![(s.input, dx), (s.scale, dscale), (s.shift, dshift)]
}
