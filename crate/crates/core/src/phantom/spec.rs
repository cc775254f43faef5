use crate::error::{CoreError, Result};
use crate::kv::{KvReader, KvWriter};

/// Parameters of one synthetic airway tree.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeSpec {
    pub seed: u64,
    /// Number of generations, the root segment being generation 0.
    pub depth: usize,
    pub root_radius: f64,
    pub radius_decay: f64,
    pub segment_length: f64,
    pub length_decay: f64,
    /// Bifurcation angle range in degrees, sampled uniformly per child.
    pub branch_angle_range: (f64, f64),
    pub volume_extent: [usize; 3],
    pub spacing_mm: f64,
    pub parenchyma_hu: f64,
    pub lumen_hu: f64,
    pub wall_hu: f64,
    pub noise_sigma_hu: f64,
}

impl Default for TreeSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            depth: 5,
            root_radius: 4.0,
            radius_decay: 0.75,
            segment_length: 14.0,
            length_decay: 0.85,
            branch_angle_range: (20.0, 40.0),
            volume_extent: [96, 96, 96],
            spacing_mm: 0.7,
            parenchyma_hu: -850.0,
            lumen_hu: -1000.0,
            wall_hu: -150.0,
            noise_sigma_hu: 50.0,
        }
    }
}

impl TreeSpec {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn radius(&self, generation: usize) -> f64 {
        self.root_radius * self.radius_decay.powi(generation as i32)
    }

    pub fn length(&self, generation: usize) -> f64 {
        self.segment_length * self.length_decay.powi(generation as i32)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CoreError::Config(m));
        if self.depth == 0 {
            return bad("depth must be at least 1".into());
        }
        let tip = self.radius(self.depth - 1) * (1.0 - super::TAPER);
        if tip < 1.0 {
            return bad(format!("terminal radius {tip:.3} is below one voxel"));
        }
        if !(self.radius_decay > 0.0 && self.radius_decay <= 1.0) || !(self.length_decay > 0.0) {
            return bad("decay factors must lie in (0, 1]".into());
        }
        let (lo, hi) = self.branch_angle_range;
        if !(0.0..=90.0).contains(&lo) || !(lo..=90.0).contains(&hi) {
            return bad(format!("branch angle range {lo}..{hi} must lie within 0..90 degrees"));
        }
        if self.segment_length <= 0.0 || self.spacing_mm <= 0.0 || self.noise_sigma_hu < 0.0 {
            return bad("lengths, spacing and noise must be positive".into());
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let mut w = KvWriter::new();
        let [s, h, x] = self.volume_extent;
        w.put("seed", self.seed)
            .put("depth", self.depth)
            .put("root_radius", self.root_radius)
            .put("radius_decay", self.radius_decay)
            .put("segment_length", self.segment_length)
            .put("length_decay", self.length_decay)
            .put("branch_angle_min", self.branch_angle_range.0)
            .put("branch_angle_max", self.branch_angle_range.1)
            .put("volume_extent", format!("{s} {h} {x}"))
            .put("spacing_mm", self.spacing_mm)
            .put("parenchyma_hu", self.parenchyma_hu)
            .put("lumen_hu", self.lumen_hu)
            .put("wall_hu", self.wall_hu)
            .put("noise_sigma_hu", self.noise_sigma_hu);
        w.finish()
    }

    /// Parses a key-value spec; absent keys keep their defaults.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut kv = KvReader::parse(text)?;
        let d = Self::default();
        let extent = match kv.take_str("volume_extent") {
            None => d.volume_extent,
            Some(v) => parse_extent(&v)?,
        };
        let spec = Self {
            seed: kv.take_or("seed", d.seed)?,
            depth: kv.take_or("depth", d.depth)?,
            root_radius: kv.take_or("root_radius", d.root_radius)?,
            radius_decay: kv.take_or("radius_decay", d.radius_decay)?,
            segment_length: kv.take_or("segment_length", d.segment_length)?,
            length_decay: kv.take_or("length_decay", d.length_decay)?,
            branch_angle_range: (
                kv.take_or("branch_angle_min", d.branch_angle_range.0)?,
                kv.take_or("branch_angle_max", d.branch_angle_range.1)?,
            ),
            volume_extent: extent,
            spacing_mm: kv.take_or("spacing_mm", d.spacing_mm)?,
            parenchyma_hu: kv.take_or("parenchyma_hu", d.parenchyma_hu)?,
            lumen_hu: kv.take_or("lumen_hu", d.lumen_hu)?,
            wall_hu: kv.take_or("wall_hu", d.wall_hu)?,
            noise_sigma_hu: kv.take_or("noise_sigma_hu", d.noise_sigma_hu)?,
        };
        kv.finish()?;
        spec.validate()?;
        Ok(spec)
    }
}

/// `"96"` or `"96 96 96"`.
pub(crate) fn parse_extent(v: &str) -> Result<[usize; 3]> {
    let parts: Vec<usize> = v
        .split_whitespace()
        .map(|p| p.parse().map_err(|_| CoreError::Config(format!("bad extent {v:?}"))))
        .collect::<Result<_>>()?;
    match parts[..] {
        [n] => Ok([n; 3]),
        [a, b, c] => Ok([a, b, c]),
        _ => Err(CoreError::Config(format!("extent needs one or three numbers, got {v:?}"))),
    }
}
