use std::fmt;
use std::str::FromStr;

use crate::error::{CoreError, Result};
use crate::kv::{KvReader, KvWriter};

/// Which parts of the second stage are active. Every mode owns the same
/// parameters; unused ones simply receive zero gradients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ablation {
    /// Stage 2 bypassed: the fine decoder sees the coarse map.
    None,
    /// `X'_i = X_i + relu(X_{i-1} * W1)` on raw slices.
    OneSlice,
    /// `X'_i = X_i + relu(H_{i-1} * W1)` with cell outputs.
    OneSliceCells,
    /// `X'_i = X_i + relu(X_{i-1} * W1 + X_{i-2} * W2)` on raw slices.
    TwoSlices,
    /// `X'_i = X_i + relu(H_{i-1} * W1 + H_{i-2} * W2)`, the full model.
    TwoSlicesCells,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::None,
        Ablation::OneSlice,
        Ablation::OneSliceCells,
        Ablation::TwoSlices,
        Ablation::TwoSlicesCells,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::None => "none",
            Ablation::OneSlice => "one_slice",
            Ablation::OneSliceCells => "one_slice_cells",
            Ablation::TwoSlices => "two_slices",
            Ablation::TwoSlicesCells => "two_slices_cells",
        }
    }

    pub fn uses_cells(self) -> bool {
        matches!(self, Ablation::OneSliceCells | Ablation::TwoSlicesCells)
    }

    /// How many previous slices feed each refined slice (0, 1 or 2).
    pub fn reach(self) -> usize {
        match self {
            Ablation::None => 0,
            Ablation::OneSlice | Ablation::OneSliceCells => 1,
            Ablation::TwoSlices | Ablation::TwoSlicesCells => 2,
        }
    }
}

impl Default for Ablation {
    fn default() -> Self {
        Ablation::TwoSlicesCells
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| CoreError::Config(format!("unknown ablation mode {s:?}")))
    }
}

/// Network shape. The input cube must be divisible by 8 for the three
/// poolings; the coarse map comes out at half the input resolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LtspNetConfig {
    pub cube: usize,
    /// Channels of the stem and the three down-sampled levels.
    pub channels: [usize; 4],
    pub coarse_channels: usize,
    pub propagation_kernel: usize,
    pub class_count: usize,
}

impl Default for LtspNetConfig {
    fn default() -> Self {
        Self {
            cube: 64,
            channels: [16, 32, 64, 128],
            coarse_channels: 32,
            propagation_kernel: 3,
            class_count: 2,
        }
    }
}

impl LtspNetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CoreError::Config(m));
        if self.cube == 0 || self.cube % 8 != 0 {
            return bad(format!("cube extent {} is not a positive multiple of 8", self.cube));
        }
        if self.channels.contains(&0) || self.coarse_channels == 0 {
            return bad("channel counts must be positive".into());
        }
        if self.propagation_kernel % 2 == 0 {
            return bad(format!("propagation kernel {} must be odd", self.propagation_kernel));
        }
        if self.class_count != 2 {
            return bad(format!("class count {} unsupported, the head is binary", self.class_count));
        }
        Ok(())
    }

    /// Checks that an input extent can pass through the network.
    pub fn check_extent(extent: [usize; 3]) -> Result<()> {
        if extent.iter().any(|&e| e == 0 || e % 8 != 0) {
            return Err(CoreError::Shape(format!("input extent {extent:?} is not a multiple of 8")));
        }
        Ok(())
    }

    pub fn write_kv(&self, w: &mut KvWriter) {
        let [a, b, c, d] = self.channels;
        w.put("cube", self.cube)
            .put("channels", format!("{a} {b} {c} {d}"))
            .put("coarse_channels", self.coarse_channels)
            .put("propagation_kernel", self.propagation_kernel)
            .put("class_count", self.class_count);
    }

    /// Takes the network keys from `kv`, keeping defaults for absent ones.
    pub fn read_kv(kv: &mut KvReader) -> Result<Self> {
        let d = Self::default();
        let channels = match kv.take_str("channels") {
            None => d.channels,
            Some(v) => {
                let parts: Vec<usize> = v
                    .split_whitespace()
                    .map(|p| p.parse().map_err(|_| CoreError::Config(format!("bad channels {v:?}"))))
                    .collect::<Result<_>>()?;
                parts
                    .try_into()
                    .map_err(|_| CoreError::Config(format!("channels needs four numbers, got {v:?}")))?
            }
        };
        let cfg = Self {
            cube: kv.take_or("cube", d.cube)?,
            channels,
            coarse_channels: kv.take_or("coarse_channels", d.coarse_channels)?,
            propagation_kernel: kv.take_or("propagation_kernel", d.propagation_kernel)?,
            class_count: kv.take_or("class_count", d.class_count)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Smoothing term of the soft dice loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiceLossConfig {
    pub epsilon: f64,
}

impl Default for DiceLossConfig {
    fn default() -> Self {
        Self { epsilon: 1e-5 }
    }
}
