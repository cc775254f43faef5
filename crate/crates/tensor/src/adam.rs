use crate::error::{Result, TensorError};
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Real> Default for AdamConfig<T> {
    fn default() -> Self {
        Self {
            learning_rate: T::from_f64_lossy(0.002),
            beta1: T::from_f64_lossy(0.9),
            beta2: T::from_f64_lossy(0.999),
            eps: T::from_f64_lossy(1e-8),
        }
    }
}

/// Bias-corrected Adam with one pair of moment buffers per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    config: AdamConfig<T>,
    step_count: u64,
    first_moment: Vec<Vec<T>>,
    second_moment: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig<T>, params: &[Tensor<T>]) -> Result<Self> {
        let unit = |b: T| b > T::zero() && b < T::one();
        if !(config.learning_rate > T::zero()) || !unit(config.beta1) || !unit(config.beta2) {
            return Err(TensorError::InvalidConfig(format!(
                "need learning_rate > 0 and betas in (0, 1), got {:?}",
                config
            )));
        }
        if !(config.eps > T::zero()) {
            return Err(TensorError::InvalidConfig("eps must be positive".into()));
        }
        let zeros = || params.iter().map(|p| vec![T::zero(); p.numel()]).collect();
        Ok(Self {
            config,
            step_count: 0,
            first_moment: zeros(),
            second_moment: zeros(),
        })
    }

    pub fn config(&self) -> &AdamConfig<T> {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[Vec<T>] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Vec<T>] {
        &self.second_moment
    }

    /// Applies one update in place. Every parameter must carry a gradient;
    /// nothing is modified if one is missing.
    pub fn step(&mut self, params: &mut [Tensor<T>]) -> Result<()> {
        if params.len() != self.first_moment.len() {
            return Err(TensorError::ShapeMismatch {
                op: "adam",
                expected: format!("{} parameters", self.first_moment.len()),
                found: format!("{} parameters", params.len()),
            });
        }
        for (i, (p, m)) in params.iter().zip(&self.first_moment).enumerate() {
            if p.numel() != m.len() {
                return Err(TensorError::ShapeMismatch {
                    op: "adam",
                    expected: format!("parameter {i} with {} values", m.len()),
                    found: p.shape().to_string(),
                });
            }
            if p.grad().is_none() {
                return Err(TensorError::MissingGrad(i));
            }
        }

        self.step_count += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step_count as i32;
        let correction1 = T::one() - beta1.powi(t);
        let correction2 = T::one() - beta2.powi(t);
        for ((p, m), v) in params
            .iter_mut()
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            let (data, grad) = p.parts_mut();
            let grad = grad.expect("checked above");
            for k in 0..data.len() {
                let g = grad[k];
                m[k] = beta1 * m[k] + (T::one() - beta1) * g;
                v[k] = beta2 * v[k] + (T::one() - beta2) * g * g;
                let m_hat = m[k] / correction1;
                let v_hat = v[k] / correction2;
                data[k] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
