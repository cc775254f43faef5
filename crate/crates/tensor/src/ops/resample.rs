use crate::error::Result;
use crate::graph::{Graph, Op, Var};
use crate::ops::expect_rank;
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

/// Source taps for one output coordinate of a x2 upsample with
/// half-pixel centres (corners not aligned).
#[derive(Clone, Copy)]
struct Tap<T> {
    lo: usize,
    hi: usize,
    w_lo: T,
    w_hi: T,
}

fn taps<T: Real>(extent: usize) -> Vec<Tap<T>> {
    (0..2 * extent)
        .map(|o| {
            let src = ((o as f64 + 0.5) / 2.0 - 0.5).max(0.0);
            let lo = (src.floor() as usize).min(extent - 1);
            let hi = (lo + 1).min(extent - 1);
            let frac = src - lo as f64;
            Tap {
                lo,
                hi,
                w_lo: T::from_f64_lossy(1.0 - frac),
                w_hi: T::from_f64_lossy(frac),
            }
        })
        .collect()
}

impl<T: Real> Graph<T> {
    /// Trilinear x2 upsampling of `[B, C, S, H, W]`.
    pub fn upsample_trilinear(&self, input: Var) -> Result<Var> {
        let shape = self.shape(input);
        expect_rank("upsample_trilinear", &shape, &[5])?;
        let d = shape.dims().to_vec();
        let (s, h, w) = (d[2], d[3], d[4]);
        let (tz, ty, tx) = (taps::<T>(s), taps::<T>(h), taps::<T>(w));
        let planes = d[0] * d[1];
        let out_vol = 8 * s * h * w;
        let mut out = vec![T::zero(); planes * out_vol];
        {
            let x = self.value(input);
            let src = x.data();
            for p in 0..planes {
                let plane = &src[p * s * h * w..(p + 1) * s * h * w];
                let dst = &mut out[p * out_vol..(p + 1) * out_vol];
                let mut k = 0;
                for a in &tz {
                    for b in &ty {
                        for c in &tx {
                            let at = |z: usize, y: usize, xx: usize| plane[(z * h + y) * w + xx];
                            let lo = b.w_lo * (c.w_lo * at(a.lo, b.lo, c.lo) + c.w_hi * at(a.lo, b.lo, c.hi))
                                + b.w_hi * (c.w_lo * at(a.lo, b.hi, c.lo) + c.w_hi * at(a.lo, b.hi, c.hi));
                            let hi = b.w_lo * (c.w_lo * at(a.hi, b.lo, c.lo) + c.w_hi * at(a.hi, b.lo, c.hi))
                                + b.w_hi * (c.w_lo * at(a.hi, b.hi, c.lo) + c.w_hi * at(a.hi, b.hi, c.hi));
                            dst[k] = a.w_lo * lo + a.w_hi * hi;
                            k += 1;
                        }
                    }
                }
            }
        }
        let value = Tensor::from_shape(Shape::new(&[d[0], d[1], 2 * s, 2 * h, 2 * w])?, out);
        Ok(self.push(value, Op::Upsample { input: input.0 }, self.tracked(&[input])))
    }
}

pub(crate) fn upsample_backward<T: Real>(input: &Tensor<T>, grad: &[T]) -> Vec<T> {
    let d = input.dims();
    let (s, h, w) = (d[2], d[3], d[4]);
    let (tz, ty, tx) = (taps::<T>(s), taps::<T>(h), taps::<T>(w));
    let planes = d[0] * d[1];
    let vol = s * h * w;
    let mut dx = vec![T::zero(); planes * vol];
    for p in 0..planes {
        let g = &grad[p * 8 * vol..(p + 1) * 8 * vol];
        let dst = &mut dx[p * vol..(p + 1) * vol];
        let mut k = 0;
        for a in &tz {
            for b in &ty {
                for c in &tx {
                    let v = g[k];
                    k += 1;
                    for (z, wz) in [(a.lo, a.w_lo), (a.hi, a.w_hi)] {
                        for (y, wy) in [(b.lo, b.w_lo), (b.hi, b.w_hi)] {
                            for (xx, wx) in [(c.lo, c.w_lo), (c.hi, c.w_hi)] {
                                dst[(z * h + y) * w + xx] += v * wz * wy * wx;
                            }
                        }
                    }
                }
            }
        }
    }
    dx
}
