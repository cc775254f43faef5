use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::error::{CoreError, Result};
use crate::volio::volume::Volume;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CropSpec {
    pub cube: [usize; 3],
    pub seed: u64,
}

/// A cube cut from an intensity volume and its label volume.
#[derive(Clone, Debug, PartialEq)]
pub struct Crop {
    pub cube: Volume,
    pub label: Volume,
    /// Corner of the cube in source coordinates.
    pub origin: [usize; 3],
    /// The sampled centre voxel `P`.
    pub center: [usize; 3],
}

/// Inclusive per-axis `(min, max)` indices of nonzero labels.
pub fn foreground_bounds(mask: &Volume) -> Result<Option<[(usize, usize); 3]>> {
    let labels = mask.as_labels()?;
    let [_, h, w] = mask.extents();
    let mut bounds: Option<[(usize, usize); 3]> = None;
    for (k, _) in labels.iter().enumerate().filter(|(_, &v)| v != 0) {
        let p = [k / (h * w), (k / w) % h, k % w];
        let b = bounds.get_or_insert([(p[0], p[0]), (p[1], p[1]), (p[2], p[2])]);
        for a in 0..3 {
            b[a].0 = b[a].0.min(p[a]);
            b[a].1 = b[a].1.max(p[a]);
        }
    }
    Ok(bounds)
}

/// Samples cube centres uniformly inside the foreground bounding box.
///
/// A cube whose centre sits closer to a border than half its extent is
/// shifted inward so it always lies inside the volume.
#[derive(Debug, Clone)]
pub struct CenterCropSampler {
    cube: [usize; 3],
    rng: ChaCha8Rng,
}

impl CenterCropSampler {
    pub fn new(spec: CropSpec) -> Self {
        Self {
            cube: spec.cube,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
        }
    }

    pub fn sample(&mut self, intensity: &Volume, mask: &Volume) -> Result<Crop> {
        let ext = mask.extents();
        if intensity.extents() != ext {
            return Err(CoreError::Shape(format!(
                "intensity {:?} and mask {:?} differ",
                intensity.extents(),
                ext
            )));
        }
        if (0..3).any(|a| self.cube[a] == 0 || self.cube[a] > ext[a]) {
            return Err(CoreError::Shape(format!(
                "cube {:?} does not fit volume {ext:?}",
                self.cube
            )));
        }
        let bounds = foreground_bounds(mask)?
            .ok_or_else(|| CoreError::Shape("mask has no foreground voxel".into()))?;
        let mut center = [0; 3];
        let mut origin = [0; 3];
        for a in 0..3 {
            let (lo, hi) = bounds[a];
            center[a] = self.rng.gen_range(lo..=hi);
            origin[a] = center[a]
                .saturating_sub(self.cube[a] / 2)
                .min(ext[a] - self.cube[a]);
        }
        Ok(Crop {
            cube: intensity.crop(origin, self.cube)?,
            label: mask.crop(origin, self.cube)?,
            origin,
            center,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_voxel_mask(ext: [usize; 3], p: [usize; 3]) -> Volume {
        let mut m = Volume::labels(ext, [1.0; 3], vec![0; ext.iter().product()]).unwrap();
        let k = m.index(p[0], p[1], p[2]);
        m.labels_mut().unwrap()[k] = 1;
        m
    }

    #[test]
    fn single_voxel_mask_pins_the_centre() {
        let ext = [20, 16, 12];
        let mask = single_voxel_mask(ext, [18, 2, 6]);
        let img = Volume::scalar(ext, [1.0; 3], vec![0.0; ext.iter().product()]).unwrap();
        let mut sampler = CenterCropSampler::new(CropSpec { cube: [8, 8, 8], seed: 3 });
        let crop = sampler.sample(&img, &mask).unwrap();
        assert_eq!(crop.center, [18, 2, 6]);
        // shifted inward on the s and h axes
        assert_eq!(crop.origin, [12, 0, 2]);
        assert_eq!(crop.label.count_foreground().unwrap(), 1);
    }

    #[test]
    fn centres_stay_inside_the_foreground_span() {
        let ext = [24, 24, 24];
        let mut mask = Volume::labels(ext, [1.0; 3], vec![0; 24 * 24 * 24]).unwrap();
        for p in [[3, 10, 7], [15, 20, 9], [9, 4, 18]] {
            let k = mask.index(p[0], p[1], p[2]);
            mask.labels_mut().unwrap()[k] = 1;
        }
        let img = Volume::scalar(ext, [1.0; 3], vec![0.0; 24 * 24 * 24]).unwrap();
        let bounds = foreground_bounds(&mask).unwrap().unwrap();
        assert_eq!(bounds, [(3, 15), (4, 20), (7, 18)]);
        let mut sampler = CenterCropSampler::new(CropSpec { cube: [8, 8, 8], seed: 9 });
        for _ in 0..1000 {
            let c = sampler.sample(&img, &mask).unwrap();
            for a in 0..3 {
                assert!(bounds[a].0 <= c.center[a] && c.center[a] <= bounds[a].1);
                assert!(c.origin[a] + 8 <= 24);
            }
        }
    }

    #[test]
    fn rejects_empty_masks_and_oversized_cubes() {
        let ext = [4, 4, 4];
        let empty = Volume::labels(ext, [1.0; 3], vec![0; 64]).unwrap();
        let img = Volume::scalar(ext, [1.0; 3], vec![0.0; 64]).unwrap();
        let mut sampler = CenterCropSampler::new(CropSpec { cube: [2, 2, 2], seed: 0 });
        assert!(sampler.sample(&img, &empty).is_err());
        let mask = single_voxel_mask(ext, [1, 1, 1]);
        let mut big = CenterCropSampler::new(CropSpec { cube: [5, 2, 2], seed: 0 });
        assert!(big.sample(&img, &mask).is_err());
    }
}
