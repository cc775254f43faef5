use crate::error::{CoreError, Result};

/// Lower and upper HU clamp of the intensity normalization.
pub const HU_MIN: f32 = -1000.0;
pub const HU_MAX: f32 = 600.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementKind {
    ScalarF32,
    LabelU8,
}

impl ElementKind {
    pub fn name(self) -> &'static str {
        match self {
            ElementKind::ScalarF32 => "scalar-f32",
            ElementKind::LabelU8 => "label-u8",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "scalar-f32" => Some(ElementKind::ScalarF32),
            "label-u8" => Some(ElementKind::LabelU8),
            _ => None,
        }
    }

    pub fn byte_width(self) -> usize {
        match self {
            ElementKind::ScalarF32 => 4,
            ElementKind::LabelU8 => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum VoxelData {
    Scalar(Vec<f32>),
    Label(Vec<u8>),
}

/// A 3D grid indexed `[s, h, w]` in row-major order, `s` outermost.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    extents: [usize; 3],
    spacing: [f64; 3],
    data: VoxelData,
    normalized: bool,
}

impl Volume {
    pub fn new(extents: [usize; 3], spacing: [f64; 3], data: VoxelData) -> Result<Self> {
        let n: usize = extents.iter().product();
        let len = match &data {
            VoxelData::Scalar(v) => v.len(),
            VoxelData::Label(v) => v.len(),
        };
        if n == 0 || n != len {
            return Err(CoreError::Shape(format!(
                "volume extents {extents:?} hold {n} voxels but data has {len}"
            )));
        }
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(CoreError::Shape(format!("spacing must be positive, got {spacing:?}")));
        }
        Ok(Self {
            extents,
            spacing,
            data,
            normalized: false,
        })
    }

    pub fn scalar(extents: [usize; 3], spacing: [f64; 3], data: Vec<f32>) -> Result<Self> {
        Self::new(extents, spacing, VoxelData::Scalar(data))
    }

    pub fn labels(extents: [usize; 3], spacing: [f64; 3], data: Vec<u8>) -> Result<Self> {
        Self::new(extents, spacing, VoxelData::Label(data))
    }

    pub fn extents(&self) -> [usize; 3] {
        self.extents
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn kind(&self) -> ElementKind {
        match self.data {
            VoxelData::Scalar(_) => ElementKind::ScalarF32,
            VoxelData::Label(_) => ElementKind::LabelU8,
        }
    }

    pub fn data(&self) -> &VoxelData {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether intensities were already mapped from HU into [0, 1].
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub(crate) fn set_normalized(&mut self, on: bool) {
        self.normalized = on;
    }

    pub fn index(&self, s: usize, h: usize, w: usize) -> usize {
        (s * self.extents[1] + h) * self.extents[2] + w
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| p[a] < self.extents[a])
    }

    pub fn as_scalar(&self) -> Result<&[f32]> {
        match &self.data {
            VoxelData::Scalar(v) => Ok(v),
            VoxelData::Label(_) => Err(CoreError::Shape("expected a scalar volume".into())),
        }
    }

    pub fn as_labels(&self) -> Result<&[u8]> {
        match &self.data {
            VoxelData::Label(v) => Ok(v),
            VoxelData::Scalar(_) => Err(CoreError::Shape("expected a label volume".into())),
        }
    }

    pub fn labels_mut(&mut self) -> Result<&mut [u8]> {
        match &mut self.data {
            VoxelData::Label(v) => Ok(v),
            VoxelData::Scalar(_) => Err(CoreError::Shape("expected a label volume".into())),
        }
    }

    pub fn scalars_mut(&mut self) -> Result<&mut [f32]> {
        match &mut self.data {
            VoxelData::Scalar(v) => Ok(v),
            VoxelData::Label(_) => Err(CoreError::Shape("expected a scalar volume".into())),
        }
    }

    /// Number of nonzero labels.
    pub fn count_foreground(&self) -> Result<usize> {
        Ok(self.as_labels()?.iter().filter(|&&v| v != 0).count())
    }

    /// Copies the box `origin .. origin + size`.
    pub fn crop(&self, origin: [usize; 3], size: [usize; 3]) -> Result<Volume> {
        if (0..3).any(|a| size[a] == 0 || origin[a] + size[a] > self.extents[a]) {
            return Err(CoreError::Shape(format!(
                "crop {origin:?}+{size:?} exceeds extents {:?}",
                self.extents
            )));
        }
        fn gather<E: Copy>(src: &[E], ext: [usize; 3], origin: [usize; 3], size: [usize; 3]) -> Vec<E> {
            let mut out = Vec::with_capacity(size.iter().product());
            for s in origin[0]..origin[0] + size[0] {
                for h in origin[1]..origin[1] + size[1] {
                    let row = (s * ext[1] + h) * ext[2];
                    out.extend_from_slice(&src[row + origin[2]..row + origin[2] + size[2]]);
                }
            }
            out
        }
        let data = match &self.data {
            VoxelData::Scalar(v) => VoxelData::Scalar(gather(v, self.extents, origin, size)),
            VoxelData::Label(v) => VoxelData::Label(gather(v, self.extents, origin, size)),
        };
        Ok(Volume {
            extents: size,
            spacing: self.spacing,
            data,
            normalized: self.normalized,
        })
    }

    pub(crate) fn with_data(&self, data: VoxelData) -> Volume {
        Volume {
            extents: self.extents,
            spacing: self.spacing,
            data,
            normalized: self.normalized,
        }
    }
}

/// Clamps HU to [-1000, 600] and maps linearly onto [0, 1].
///
/// Label volumes and volumes that were already normalized are rejected.
pub fn normalize_hu(v: &Volume) -> Result<Volume> {
    if v.is_normalized() {
        return Err(CoreError::Shape("volume is already normalized".into()));
    }
    let hu = v
        .as_scalar()
        .map_err(|_| CoreError::Shape("cannot normalize a label volume".into()))?;
    let span = HU_MAX - HU_MIN;
    let data = hu
        .iter()
        .map(|&x| ((x - HU_MIN) / span).clamp(0.0, 1.0))
        .collect();
    let mut out = v.with_data(VoxelData::Scalar(data));
    out.set_normalized(true);
    Ok(out)
}
