use rand::Rng;

use crate::error::{CoreError, Result};
use crate::volio::volume::{Volume, VoxelData};

/// Largest absolute rotation angle applied by [`augment`], in degrees.
pub const MAX_ROTATION_DEG: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolation {
    Linear,
    Nearest,
}

/// Mirrors the volume along the W axis.
pub fn flip_w(v: &Volume) -> Volume {
    fn flip<E: Copy>(src: &[E], w: usize) -> Vec<E> {
        src.chunks_exact(w).flat_map(|row| row.iter().rev().copied()).collect()
    }
    let w = v.extents()[2];
    match v.data() {
        VoxelData::Scalar(d) => v.with_data(VoxelData::Scalar(flip(d, w))),
        VoxelData::Label(d) => v.with_data(VoxelData::Label(flip(d, w))),
    }
}

/// Rotates every S-slice about its centre by `degrees`.
///
/// The S coordinate of a voxel never changes, so trilinear sampling reduces
/// to bilinear within the slice. Samples outside the slice read the nearest
/// border voxel. Labels use nearest-neighbour sampling and stay binary.
pub fn rotate_about_s(v: &Volume, degrees: f64, interp: Interpolation) -> Volume {
    if degrees == 0.0 {
        return v.clone();
    }
    let [s, h, w] = v.extents();
    let (sin, cos) = degrees.to_radians().sin_cos();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    // source position of every in-slice output voxel
    let sources: Vec<(f64, f64)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (y as f64 - cy, x as f64 - cx)))
        .map(|(dy, dx)| {
            let sy = (cy + cos * dy + sin * dx).clamp(0.0, h as f64 - 1.0);
            let sx = (cx - sin * dy + cos * dx).clamp(0.0, w as f64 - 1.0);
            (sy, sx)
        })
        .collect();
    let plane = h * w;
    match (v.data(), interp) {
        (VoxelData::Scalar(d), Interpolation::Linear) => {
            let mut out = Vec::with_capacity(d.len());
            for slab in d.chunks_exact(plane) {
                for &(sy, sx) in &sources {
                    let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
                    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
                    let (fy, fx) = ((sy - y0 as f64) as f32, (sx - x0 as f64) as f32);
                    let at = |y: usize, x: usize| slab[y * w + x];
                    let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                    let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                    out.push(top * (1.0 - fy) + bottom * fy);
                }
            }
            v.with_data(VoxelData::Scalar(out))
        }
        (data, _) => {
            let pick = |slab_index: usize, k: usize| {
                let (sy, sx) = sources[k];
                slab_index * plane + sy.round() as usize * w + sx.round() as usize
            };
            let idx = (0..s).flat_map(|z| (0..plane).map(move |k| (z, k)));
            match data {
                VoxelData::Scalar(d) => v.with_data(VoxelData::Scalar(idx.map(|(z, k)| d[pick(z, k)]).collect())),
                VoxelData::Label(d) => v.with_data(VoxelData::Label(idx.map(|(z, k)| d[pick(z, k)]).collect())),
            }
        }
    }
}

/// Random horizontal flip and slight rotation applied identically to an
/// intensity cube and its labels: each with probability 0.5, the rotation
/// angle uniform in `±MAX_ROTATION_DEG`.
pub fn augment(cube: &Volume, label: &Volume, rng: &mut impl Rng) -> Result<(Volume, Volume)> {
    if cube.extents() != label.extents() {
        return Err(CoreError::Shape(format!(
            "augment: cube {:?} and label {:?} differ",
            cube.extents(),
            label.extents()
        )));
    }
    let flip = rng.gen_bool(0.5);
    let rotate = rng.gen_bool(0.5);
    let angle = rng.gen_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG);
    let (mut c, mut l) = (cube.clone(), label.clone());
    if flip {
        c = flip_w(&c);
        l = flip_w(&l);
    }
    if rotate {
        c = rotate_about_s(&c, angle, Interpolation::Linear);
        l = rotate_about_s(&l, angle, Interpolation::Nearest);
    }
    Ok((c, l))
}
