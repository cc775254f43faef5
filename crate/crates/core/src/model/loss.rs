use ltsp_tensor::{Graph, Real, Tensor, Var};

use super::config::DiceLossConfig;
use crate::error::{CoreError, Result};
use crate::volio::Volume;

/// Soft dice loss `1 - (2 Σ p y + ε) / (Σ (p + y) + ε)`.
pub fn dice_loss<T: Real>(g: &Graph<T>, p: Var, y: Var, cfg: DiceLossConfig) -> Result<Var> {
    let (dp, dy) = (g.dims(p), g.dims(y));
    if dp != dy {
        return Err(CoreError::Shape(format!("dice loss: prediction {dp:?} and labels {dy:?} differ")));
    }
    if !(cfg.epsilon > 0.0) {
        return Err(CoreError::Config(format!("dice epsilon {} must be positive", cfg.epsilon)));
    }
    let eps = T::from_f64_lossy(cfg.epsilon);
    let overlap = g.mul(p, y)?;
    let overlap = g.sum(overlap);
    let numerator = g.affine(overlap, T::from_f64_lossy(2.0), eps);
    let total = g.add(p, y)?;
    let total = g.sum(total);
    let denominator = g.affine(total, T::one(), eps);
    let ratio = g.div(numerator, denominator)?;
    Ok(g.affine(ratio, -T::one(), T::one()))
}

/// Foreground channel `[1, 1, S, H, W]` of a `[1, 2, S, H, W]` map.
pub fn foreground<T: Real>(g: &Graph<T>, prob: Var) -> Result<Var> {
    let d = g.dims(prob);
    if d.len() != 5 || d[1] != 2 {
        return Err(CoreError::Shape(format!("expected [1, 2, S, H, W] probabilities, got {d:?}")));
    }
    Ok(g.narrow(prob, 1, 1, 1)?)
}

/// Per-voxel argmax of a `[1, 2, S, H, W]` map; ties go to background.
pub fn predict<T: Real>(prob: &Tensor<T>, spacing: [f64; 3]) -> Result<Volume> {
    let d = prob.dims();
    if d.len() != 5 || d[0] != 1 || d[1] != 2 {
        return Err(CoreError::Shape(format!("expected [1, 2, S, H, W] probabilities, got {d:?}")));
    }
    let n = d[2] * d[3] * d[4];
    let (bg, fg) = prob.data().split_at(n);
    let labels = bg.iter().zip(fg).map(|(b, f)| u8::from(f > b)).collect();
    Volume::labels([d[2], d[3], d[4]], spacing, labels)
}
