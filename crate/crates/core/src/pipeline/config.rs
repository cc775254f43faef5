use crate::error::{CoreError, Result};
use crate::kv::{KvReader, KvWriter};
use crate::model::{Ablation, LtspNetConfig};

/// Training hyperparameters. `steps_per_epoch = None` means two crops per
/// training case.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub steps_per_epoch: Option<usize>,
    pub seed: u64,
    pub ablation: Ablation,
    pub net: LtspNetConfig,
    pub dice_eps: f64,
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            steps_per_epoch: None,
            seed: 0,
            ablation: Ablation::TwoSlicesCells,
            net: LtspNetConfig::default(),
            dice_eps: 1e-5,
            augment: true,
        }
    }
}

impl TrainConfig {
    pub fn steps_for(&self, cases: usize) -> usize {
        self.steps_per_epoch.unwrap_or(2 * cases)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CoreError::Config(m.to_string()));
        if self.epochs == 0 || self.steps_per_epoch == Some(0) {
            return bad("epochs and steps_per_epoch must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.adam_eps > 0.0) || !(self.dice_eps > 0.0) {
            return bad("learning rate and epsilons must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        self.net.validate()
    }

    pub fn write_kv(&self, w: &mut KvWriter) {
        w.put("epochs", self.epochs)
            .put("learning_rate", self.learning_rate)
            .put("beta1", self.beta1)
            .put("beta2", self.beta2)
            .put("adam_eps", self.adam_eps);
        if let Some(s) = self.steps_per_epoch {
            w.put("steps_per_epoch", s);
        }
        w.put("seed", self.seed)
            .put("ablation", self.ablation)
            .put("dice_eps", self.dice_eps)
            .put("augment", self.augment);
        self.net.write_kv(w);
    }

    /// Takes the training and network keys from `kv`.
    pub fn read_kv(kv: &mut KvReader) -> Result<Self> {
        let d = Self::default();
        let ablation = match kv.take_str("ablation") {
            Some(a) => a.parse()?,
            None => d.ablation,
        };
        let cfg = Self {
            epochs: kv.take_or("epochs", d.epochs)?,
            learning_rate: kv.take_or("learning_rate", d.learning_rate)?,
            beta1: kv.take_or("beta1", d.beta1)?,
            beta2: kv.take_or("beta2", d.beta2)?,
            adam_eps: kv.take_or("adam_eps", d.adam_eps)?,
            steps_per_epoch: kv.take("steps_per_epoch")?,
            seed: kv.take_or("seed", d.seed)?,
            ablation,
            dice_eps: kv.take_or("dice_eps", d.dice_eps)?,
            augment: kv.take_or("augment", d.augment)?,
            net: LtspNetConfig::read_kv(kv)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut kv = KvReader::parse(text)?;
        let cfg = Self::read_kv(&mut kv)?;
        kv.finish()?;
        Ok(cfg)
    }

    pub fn to_kv(&self) -> String {
        let mut w = KvWriter::new();
        self.write_kv(&mut w);
        w.finish()
    }
}
