//! Stride-1 convolution via im2col and GEMM.
//!
//! Output depth slices are processed in groups whose size depends only on the
//! geometry, never on the thread count, so results are bit-reproducible.

use rayon::prelude::*;

use crate::real::Real;

/// Target column count of one GEMM call.
const TARGET_COLUMNS: usize = 4096;
/// Upper bound on elements of one im2col buffer.
const MAX_COLUMN_BUFFER: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    pub batch: usize,
    pub cin: usize,
    pub cout: usize,
    pub input: [usize; 3],
    pub kernel: [usize; 3],
    pub pad: [usize; 3],
}

impl ConvGeometry {
    pub fn output(&self) -> [usize; 3] {
        let mut out = [0; 3];
        for a in 0..3 {
            out[a] = self.input[a] + 2 * self.pad[a] + 1 - self.kernel[a];
        }
        out
    }

    /// Rows of the im2col matrix: one per (input channel, kernel offset).
    pub fn patch(&self) -> usize {
        self.cin * self.kernel.iter().product::<usize>()
    }

    fn in_volume(&self) -> usize {
        self.input.iter().product()
    }

    fn out_plane(&self) -> usize {
        let o = self.output();
        o[1] * o[2]
    }

    fn out_volume(&self) -> usize {
        self.output().iter().product()
    }

    /// Geometry of the convolution that maps output gradients back onto the input.
    fn transposed(&self) -> ConvGeometry {
        let mut pad = [0; 3];
        for a in 0..3 {
            pad[a] = self.kernel[a] - 1 - self.pad[a];
        }
        ConvGeometry {
            batch: self.batch,
            cin: self.cout,
            cout: self.cin,
            input: self.output(),
            kernel: self.kernel,
            pad,
        }
    }

    /// Number of output depth slices per GEMM call.
    fn group(&self) -> usize {
        let plane = self.out_plane();
        let depth = self.output()[0];
        let wanted = TARGET_COLUMNS.div_ceil(plane);
        let affordable = (MAX_COLUMN_BUFFER / (self.patch() * plane)).max(1);
        wanted.min(affordable).clamp(1, depth)
    }

    /// (batch index, first depth slice, slice count) for every GEMM call.
    fn tiles(&self) -> Vec<(usize, usize, usize)> {
        let depth = self.output()[0];
        let group = self.group();
        let mut tiles = Vec::new();
        for b in 0..self.batch {
            let mut d0 = 0;
            while d0 < depth {
                let len = group.min(depth - d0);
                tiles.push((b, d0, len));
                d0 += len;
            }
        }
        tiles
    }
}

/// Fills `col` (`patch x (depth_len * plane)`) from one batch item.
fn im2col<T: Real>(g: &ConvGeometry, input: &[T], d0: usize, depth_len: usize, col: &mut [T]) {
    let [id, ih, iw] = g.input;
    let [kd, kh, kw] = g.kernel;
    let [pd, ph, pw] = g.pad;
    let [_, oh, ow] = g.output();
    let plane = oh * ow;
    let width = depth_len * plane;
    let mut row = 0;
    for ci in 0..g.cin {
        let chan = &input[ci * id * ih * iw..(ci + 1) * id * ih * iw];
        for dz in 0..kd {
            for dy in 0..kh {
                for dx in 0..kw {
                    let dst_row = &mut col[row * width..(row + 1) * width];
                    // valid output columns: 0 <= x + dx - pw < iw
                    let x_lo = pw.saturating_sub(dx).min(ow);
                    let x_hi = (iw + pw).saturating_sub(dx).min(ow).max(x_lo);
                    for (local, dst_slab) in dst_row.chunks_exact_mut(plane).enumerate() {
                        let z = d0 + local + dz;
                        if z < pd || z - pd >= id {
                            dst_slab.fill(T::zero());
                            continue;
                        }
                        let src_slab = &chan[(z - pd) * ih * iw..(z - pd + 1) * ih * iw];
                        for (y, dst) in dst_slab.chunks_exact_mut(ow).enumerate() {
                            let yy = y + dy;
                            if yy < ph || yy - ph >= ih {
                                dst.fill(T::zero());
                                continue;
                            }
                            let src_row = &src_slab[(yy - ph) * iw..(yy - ph + 1) * iw];
                            dst[..x_lo].fill(T::zero());
                            dst[x_hi..].fill(T::zero());
                            if x_hi > x_lo {
                                let s0 = x_lo + dx - pw;
                                dst[x_lo..x_hi].copy_from_slice(&src_row[s0..s0 + (x_hi - x_lo)]);
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Cross-correlation `out[b,co] = bias[co] + sum_ci w[co,ci] * in[b,ci]`.
///
/// `input` is `[batch, cin, D, H, W]`, `weight` is `[cout, cin, kd, kh, kw]`.
pub(crate) fn forward<T: Real>(
    g: &ConvGeometry,
    input: &[T],
    weight: &[T],
    bias: Option<&[T]>,
) -> Vec<T> {
    let patch = g.patch();
    let plane = g.out_plane();
    let out_vol = g.out_volume();
    let in_stride = g.cin * g.in_volume();
    let tiles = g.tiles();

    let blocks: Vec<Vec<T>> = tiles
        .par_iter()
        .map(|&(b, d0, len)| {
            let width = len * plane;
            let mut col = vec![T::zero(); patch * width];
            im2col(g, &input[b * in_stride..(b + 1) * in_stride], d0, len, &mut col);
            let mut block = vec![T::zero(); g.cout * width];
            T::gemm(
                g.cout,
                patch,
                width,
                T::one(),
                (weight, patch as isize, 1),
                (&col, width as isize, 1),
                T::zero(),
                (&mut block, width as isize, 1),
            );
            block
        })
        .collect();

    let mut out = vec![T::zero(); g.batch * g.cout * out_vol];
    for (&(b, d0, len), block) in tiles.iter().zip(&blocks) {
        let width = len * plane;
        for co in 0..g.cout {
            let start = (b * g.cout + co) * out_vol + d0 * plane;
            let dst = &mut out[start..start + width];
            dst.copy_from_slice(&block[co * width..(co + 1) * width]);
            if let Some(bias) = bias {
                let bv = bias[co];
                dst.iter_mut().for_each(|v| *v += bv);
            }
        }
    }
    out
}

/// Gradient with respect to the weight, `[cout, cin, kd, kh, kw]`.
pub(crate) fn weight_grad<T: Real>(g: &ConvGeometry, input: &[T], grad_out: &[T]) -> Vec<T> {
    let patch = g.patch();
    let plane = g.out_plane();
    let out_vol = g.out_volume();
    let in_stride = g.cin * g.in_volume();
    let out_stride = g.cout * out_vol;

    let partials: Vec<Vec<T>> = g
        .tiles()
        .par_iter()
        .map(|&(b, d0, len)| {
            let width = len * plane;
            let mut col = vec![T::zero(); patch * width];
            im2col(g, &input[b * in_stride..(b + 1) * in_stride], d0, len, &mut col);
            let gout = &grad_out[b * out_stride + d0 * plane..(b + 1) * out_stride];
            let mut partial = vec![T::zero(); g.cout * patch];
            // [cout, width] x [width, patch]; gout rows are strided by the output volume.
            T::gemm(
                g.cout,
                width,
                patch,
                T::one(),
                (gout, out_vol as isize, 1),
                (&col, 1, width as isize),
                T::zero(),
                (&mut partial, patch as isize, 1),
            );
            partial
        })
        .collect();

    let mut total = vec![T::zero(); g.cout * patch];
    for partial in &partials {
        for (t, p) in total.iter_mut().zip(partial) {
            *t += *p;
        }
    }
    total
}

/// Gradient with respect to the input, computed as a correlation of the
/// output gradient with the spatially flipped, channel-transposed kernel.
pub(crate) fn input_grad<T: Real>(g: &ConvGeometry, weight: &[T], grad_out: &[T]) -> Vec<T> {
    let kvol: usize = g.kernel.iter().product();
    let [kd, kh, kw] = g.kernel;
    let mut flipped = vec![T::zero(); weight.len()];
    for co in 0..g.cout {
        for ci in 0..g.cin {
            let src = &weight[(co * g.cin + ci) * kvol..(co * g.cin + ci + 1) * kvol];
            let dst = &mut flipped[(ci * g.cout + co) * kvol..(ci * g.cout + co + 1) * kvol];
            for z in 0..kd {
                for y in 0..kh {
                    for x in 0..kw {
                        dst[(z * kh + y) * kw + x] =
                            src[((kd - 1 - z) * kh + (kh - 1 - y)) * kw + (kw - 1 - x)];
                    }
                }
            }
        }
    }
    forward(&g.transposed(), grad_out, &flipped, None)
}

/// Per-output-channel sum of the output gradient.
pub(crate) fn bias_grad<T: Real>(g: &ConvGeometry, grad_out: &[T]) -> Vec<T> {
    let out_vol = g.out_volume();
    let mut total = vec![T::zero(); g.cout];
    for b in 0..g.batch {
        for (co, t) in total.iter_mut().enumerate() {
            let start = (b * g.cout + co) * out_vol;
            *t += grad_out[start..start + out_vol].iter().copied().sum::<T>();
        }
    }
    total
}
