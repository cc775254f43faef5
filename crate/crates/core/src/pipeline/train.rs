use std::fmt;

use ltsp_tensor::{Adam, AdamConfig, Graph, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use crate::error::{CoreError, Result};
use crate::model::{dice_loss, foreground, DiceLossConfig, LtspNet};
use crate::volio::{augment, normalize_hu, CenterCropSampler, CropSpec, Volume};

/// A training case: intensity (raw HU or already normalized) and its mask.
#[derive(Clone, Debug)]
pub struct Case {
    pub intensity: Volume,
    pub mask: Volume,
}

/// One line of the step log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLog {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
}

impl fmt::Display for StepLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "epoch={} step={} loss={:.6}", self.epoch, self.step, self.loss)
    }
}

impl StepLog {
    pub fn parse(line: &str) -> Option<Self> {
        let mut epoch = None;
        let mut step = None;
        let mut loss = None;
        for field in line.split_whitespace() {
            match field.split_once('=')? {
                ("epoch", v) => epoch = v.parse().ok(),
                ("step", v) => step = v.parse().ok(),
                ("loss", v) => loss = v.parse().ok(),
                _ => return None,
            }
        }
        Some(Self { epoch: epoch?, step: step?, loss: loss? })
    }
}

/// Mean loss of each epoch, in epoch order.
pub fn epoch_means(log: &[StepLog]) -> Vec<f64> {
    let epochs = log.iter().map(|l| l.epoch).max().unwrap_or(0);
    (1..=epochs)
        .map(|e| {
            let losses: Vec<f64> = log.iter().filter(|l| l.epoch == e).map(|l| l.loss).collect();
            losses.iter().sum::<f64>() / losses.len().max(1) as f64
        })
        .collect()
}

/// Hooks called during training; errors abort the run.
pub trait TrainObserver {
    fn on_step(&mut self, _log: &StepLog) -> Result<()> {
        Ok(())
    }

    fn on_epoch(&mut self, _epoch: usize, _net: &LtspNet<f32>) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

pub struct TrainOutcome {
    pub net: LtspNet<f32>,
    pub log: Vec<StepLog>,
}

/// Seeds for the independent random streams of a run.
fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Normalizes intensities that are still in HU.
pub fn prepare(case: &Case) -> Result<Case> {
    let intensity = if case.intensity.is_normalized() { case.intensity.clone() } else { normalize_hu(&case.intensity)? };
    Ok(Case { intensity, mask: case.mask.clone() })
}

/// Trains from scratch. Each step draws a foreground-centred crop, augments
/// it, and takes one Adam step on the soft dice loss of the foreground
/// channel. Runs are deterministic for a fixed config.
pub fn train(cases: &[Case], cfg: &TrainConfig, observer: &mut dyn TrainObserver) -> Result<TrainOutcome> {
    let net = LtspNet::new(cfg.net.clone(), cfg.ablation, cfg.seed)?;
    train_from(net, cases, cfg, observer)
}

/// Continues training an existing network.
pub fn train_from(
    mut net: LtspNet<f32>,
    cases: &[Case],
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cases.is_empty() {
        return Err(CoreError::Config("training needs at least one case".into()));
    }
    let cases = cases.iter().map(prepare).collect::<Result<Vec<_>>>()?;
    let cube = [cfg.net.cube; 3];
    let mut sampler = CenterCropSampler::new(CropSpec { cube, seed: cfg.seed.wrapping_add(1) });
    let mut order_rng = stream(cfg.seed, 2);
    let mut aug_rng = stream(cfg.seed, 3);
    let mut params: Vec<Tensor<f32>> = net.params().iter().map(|p| p.tensor.clone()).collect();
    let adam_cfg = AdamConfig {
        learning_rate: cfg.learning_rate as f32,
        beta1: cfg.beta1 as f32,
        beta2: cfg.beta2 as f32,
        eps: cfg.adam_eps as f32,
    };
    let mut adam = Adam::new(adam_cfg, &params)?;
    let dice = DiceLossConfig { epsilon: cfg.dice_eps };
    net.set_training(true);

    let steps = cfg.steps_for(cases.len());
    let mut log = Vec::with_capacity(cfg.epochs * steps);
    let mut order: Vec<usize> = (0..cases.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        for k in 0..steps {
            let index = order[k % order.len()];
            let case = &cases[index];
            let crop = sampler.sample(&case.intensity, &case.mask)?;
            let (x, y) = if cfg.augment {
                augment(&crop.cube, &crop.label, &mut aug_rng)?
            } else {
                (crop.cube, crop.label)
            };
            let dims = [1, 1, cube[0], cube[1], cube[2]];
            let g = Graph::new();
            let xv = g.constant(Tensor::from_vec(&dims, x.as_scalar()?.to_vec())?);
            let yv = g.constant(Tensor::from_vec(&dims, y.as_labels()?.iter().map(|&l| f32::from(l)).collect())?);
            let pass = net.forward(&g, xv)?;
            let fg = foreground(&g, pass.prob)?;
            let loss_var = dice_loss(&g, fg, yv, dice)?;
            let loss = g.value(loss_var).item()? as f64;
            let step = log.len() + 1;
            if !loss.is_finite() {
                let data = x.as_scalar()?;
                let (lo, hi) = data.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                return Err(CoreError::Numeric(format!(
                    "non-finite loss {loss} at epoch {epoch} step {step}: case {index}, crop origin {:?}, input range [{lo}, {hi}], {} foreground voxels",
                    crop.origin,
                    y.count_foreground()?
                )));
            }
            let grads = g.backward(loss_var)?;
            for (tensor, var) in params.iter_mut().zip(&pass.params) {
                grads.write_to(*var, tensor)?;
            }
            adam.step(&mut params)?;
            for (p, t) in net.params_mut().iter_mut().zip(&params) {
                p.tensor.data_mut().copy_from_slice(t.data());
            }
            let entry = StepLog { epoch, step, loss };
            observer.on_step(&entry)?;
            log.push(entry);
        }
        observer.on_epoch(epoch, &net)?;
    }
    Ok(TrainOutcome { net, log })
}
