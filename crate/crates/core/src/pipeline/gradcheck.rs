use std::fmt;

use ltsp_tensor::gradcheck::{relative_error, DEFAULT_FLOOR};
use ltsp_tensor::{Graph, OpKind, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::model::{dice_loss, foreground, Ablation, DiceLossConfig, LtspNet, LtspNetConfig, ParamGroup};

/// Finite-difference check of the full network in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckConfig {
    pub seed: u64,
    pub net: LtspNetConfig,
    pub samples_per_group: usize,
    /// Relative steps tried in order; see [`kink_aware_difference`].
    pub steps: Vec<f64>,
    pub floor: f64,
    pub tolerance: f64,
    /// Backward op kind whose contributions are deliberately corrupted.
    pub fault: Option<OpKind>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            net: LtspNetConfig { cube: 16, ..LtspNetConfig::default() },
            samples_per_group: 5,
            steps: vec![1e-4, 1e-5, 1e-6, 1e-7],
            floor: DEFAULT_FLOOR,
            tolerance: 1e-4,
            fault: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub error: f64,
    /// Absolute step of the accepted difference.
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupCheck {
    pub group: ParamGroup,
    pub samples: Vec<Sample>,
}

impl GroupCheck {
    pub fn max_error(&self) -> f64 {
        self.samples.iter().map(|s| s.error).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub groups: Vec<GroupCheck>,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn failing(&self) -> Vec<ParamGroup> {
        self.groups.iter().filter(|g| !(g.max_error() < self.tolerance)).map(|g| g.group).collect()
    }

    pub fn passed(&self) -> bool {
        self.failing().is_empty()
    }
}

/// One row per group: name, worst relative error, verdict.
impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<16} {:>12} {:>8}  status", "group", "max_rel_err", "samples")?;
        for g in &self.groups {
            let status = if g.max_error() < self.tolerance { "pass" } else { "FAIL" };
            writeln!(f, "{:<16} {:>12.3e} {:>8}  {status}", g.group.name(), g.max_error(), g.samples.len())?;
        }
        Ok(())
    }
}

/// A 16³-style training pair: a tube along S, darker than its surround,
/// with uniform noise.
fn tube(n: usize, rng: &mut ChaCha8Rng) -> (Tensor<f64>, Tensor<f64>) {
    let c = (n as f64 - 1.0) / 2.0;
    let r2 = (n as f64 / 5.0).powi(2);
    let mut x = Vec::with_capacity(n * n * n);
    let mut y = Vec::with_capacity(n * n * n);
    for _ in 0..n {
        for h in 0..n {
            for w in 0..n {
                let inside = (h as f64 - c).powi(2) + (w as f64 - c).powi(2) <= r2;
                y.push(f64::from(u8::from(inside)));
                x.push(if inside { 0.1 } else { 0.4 } + rng.gen_range(-0.05..0.05));
            }
        }
    }
    let dims = [1, 1, n, n, n];
    (Tensor::from_vec(&dims, x).expect("dims match"), Tensor::from_vec(&dims, y).expect("dims match"))
}

fn loss_of(
    net: &mut LtspNet<f64>,
    x: &Tensor<f64>,
    y: &Tensor<f64>,
    fault: Option<OpKind>,
) -> Result<(f64, u64, Vec<Vec<f64>>)> {
    let g = Graph::new();
    g.inject_backward_fault(fault);
    let xv = g.constant(x.clone());
    let pass = net.forward(&g, xv)?;
    let fg = foreground(&g, pass.prob)?;
    let yv = g.constant(y.clone());
    let loss = dice_loss(&g, fg, yv, DiceLossConfig::default())?;
    let value = g.value(loss).item()?;
    let pattern = g.branch_pattern();
    let grads = g.backward(loss)?;
    let per_param = pass
        .params
        .iter()
        .map(|v| grads.get(*v).map(<[f64]>::to_vec).ok_or(CoreError::Numeric("missing parameter gradient".into())))
        .collect::<Result<_>>()?;
    Ok((value, pattern, per_param))
}

fn loss_only(net: &LtspNet<f64>, x: &Tensor<f64>, y: &Tensor<f64>) -> Result<(f64, u64)> {
    let mut net = net.clone();
    let g = Graph::new();
    let xv = g.constant(x.clone());
    let pass = net.forward(&g, xv)?;
    let fg = foreground(&g, pass.prob)?;
    let yv = g.constant(y.clone());
    let loss = dice_loss(&g, fg, yv, DiceLossConfig::default())?;
    let value = g.value(loss).item()?;
    Ok((value, g.branch_pattern()))
}

/// Central difference of `f` at `w0` taken across no relu or max-pool kink.
///
/// `f` returns the loss and the graph's branch pattern. Relative steps are
/// tried in decreasing order; the first whose two stencil points share the
/// branch pattern of `w0` is used, since the loss is smooth between them.
/// The last step is used if every stencil straddles a kink.
pub fn kink_aware_difference(
    mut f: impl FnMut(f64) -> Result<(f64, u64)>,
    w0: f64,
    pattern: u64,
    steps: &[f64],
) -> Result<(f64, f64)> {
    let mut last = (f64::NAN, 0.0);
    for &rel in steps {
        let h = rel * w0.abs().max(1.0);
        let (plus, p_plus) = f(w0 + h)?;
        let (minus, p_minus) = f(w0 - h)?;
        last = ((plus - minus) / (2.0 * h), h);
        if p_plus == pattern && p_minus == pattern {
            break;
        }
    }
    Ok(last)
}

/// Compares backpropagated gradients of the dice loss with central
/// differences on randomly sampled parameters of every group.
pub fn run_gradcheck(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = LtspNet::<f64>::new(cfg.net.clone(), Ablation::TwoSlicesCells, cfg.seed)?;
    net.set_training(true);
    let (x, y) = tube(cfg.net.cube, &mut rng);
    let (loss, pattern, grads) = loss_of(&mut net, &x, &y, cfg.fault)?;
    if !loss.is_finite() {
        return Err(CoreError::Numeric(format!("gradcheck loss is {loss}")));
    }

    let mut groups = Vec::new();
    for group in ParamGroup::ALL {
        let members: Vec<usize> = (0..net.params().len()).filter(|&i| net.params()[i].group == group).collect();
        let total: usize = members.iter().map(|&i| net.params()[i].tensor.numel()).sum();
        let mut samples = Vec::with_capacity(cfg.samples_per_group);
        for _ in 0..cfg.samples_per_group {
            let mut flat = rng.gen_range(0..total);
            let mut pi = members[0];
            for &i in &members {
                let n = net.params()[i].tensor.numel();
                if flat < n {
                    pi = i;
                    break;
                }
                flat -= n;
            }
            let analytic = grads[pi][flat];
            let w0 = net.params()[pi].tensor.data()[flat];
            let eval = |w: f64| {
                let mut probe = net.clone();
                probe.params_mut()[pi].tensor.data_mut()[flat] = w;
                loss_only(&probe, &x, &y)
            };
            let (numeric, step) = kink_aware_difference(eval, w0, pattern, &cfg.steps)?;
            if !analytic.is_finite() || !numeric.is_finite() {
                return Err(CoreError::Numeric(format!(
                    "gradcheck produced NaN for {} [{flat}]: analytic {analytic}, numeric {numeric}",
                    net.params()[pi].name
                )));
            }
            samples.push(Sample {
                param: net.params()[pi].name.clone(),
                index: flat,
                analytic,
                numeric,
                error: relative_error(analytic, numeric, cfg.floor),
                step,
            });
        }
        groups.push(GroupCheck { group, samples });
    }
    Ok(GradcheckReport { groups, tolerance: cfg.tolerance })
}
