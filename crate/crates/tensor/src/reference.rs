//! Naive nested-loop implementations used as independent test oracles.
//!
//! Written for clarity, not speed: every output element is computed straight
//! from its definition in `f64`.

/// Direct 3D cross-correlation, stride 1, zero padding `pad` on every axis.
pub fn conv3d(
    input: &[f64],
    in_dims: [usize; 5],
    weight: &[f64],
    w_dims: [usize; 5],
    bias: &[f64],
    pad: usize,
) -> (Vec<f64>, [usize; 5]) {
    let [b, cin, s, h, w] = in_dims;
    let [cout, _, kd, kh, kw] = w_dims;
    let (os, oh, ow) = (s + 2 * pad + 1 - kd, h + 2 * pad + 1 - kh, w + 2 * pad + 1 - kw);
    let mut out = Vec::with_capacity(b * cout * os * oh * ow);
    for n in 0..b {
        for co in 0..cout {
            for z in 0..os {
                for y in 0..oh {
                    for x in 0..ow {
                        let mut acc = bias[co];
                        for ci in 0..cin {
                            for dz in 0..kd {
                                for dy in 0..kh {
                                    for dx in 0..kw {
                                        let iz = z as isize + dz as isize - pad as isize;
                                        let iy = y as isize + dy as isize - pad as isize;
                                        let ix = x as isize + dx as isize - pad as isize;
                                        if iz < 0 || iy < 0 || ix < 0 {
                                            continue;
                                        }
                                        let (iz, iy, ix) = (iz as usize, iy as usize, ix as usize);
                                        if iz >= s || iy >= h || ix >= w {
                                            continue;
                                        }
                                        let xi = (((n * cin + ci) * s + iz) * h + iy) * w + ix;
                                        let wi = (((co * cin + ci) * kd + dz) * kh + dy) * kw + dx;
                                        acc += input[xi] * weight[wi];
                                    }
                                }
                            }
                        }
                        out.push(acc);
                    }
                }
            }
        }
    }
    (out, [b, cout, os, oh, ow])
}

/// Direct 2D cross-correlation of one `[C, H, W]` image.
pub fn conv2d(
    input: &[f64],
    in_dims: [usize; 3],
    weight: &[f64],
    w_dims: [usize; 4],
    bias: &[f64],
    pad: usize,
) -> (Vec<f64>, [usize; 3]) {
    let [cin, h, w] = in_dims;
    let [cout, _, kh, kw] = w_dims;
    let (oh, ow) = (h + 2 * pad + 1 - kh, w + 2 * pad + 1 - kw);
    let mut out = vec![0.0; cout * oh * ow];
    for co in 0..cout {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = bias[co];
                for ci in 0..cin {
                    for dy in 0..kh {
                        for dx in 0..kw {
                            let iy = (y + dy) as isize - pad as isize;
                            let ix = (x + dx) as isize - pad as isize;
                            if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                acc += input[(ci * h + iy as usize) * w + ix as usize]
                                    * weight[((co * cin + ci) * kh + dy) * kw + dx];
                            }
                        }
                    }
                }
                out[(co * oh + y) * ow + x] = acc;
            }
        }
    }
    (out, [cout, oh, ow])
}

/// Exhaustive 2x2x2 window maximum.
pub fn maxpool3d(input: &[f64], dims: [usize; 5]) -> Vec<f64> {
    let [b, c, s, h, w] = dims;
    let mut out = Vec::new();
    for p in 0..b * c {
        for z in 0..s / 2 {
            for y in 0..h / 2 {
                for x in 0..w / 2 {
                    let mut best = f64::NEG_INFINITY;
                    for dz in 0..2 {
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let k = ((p * s + 2 * z + dz) * h + 2 * y + dy) * w + 2 * x + dx;
                                best = best.max(input[k]);
                            }
                        }
                    }
                    out.push(best);
                }
            }
        }
    }
    out
}

/// Per-channel normalisation with the (biased) batch statistics of `[B, C, ...]`.
pub fn batchnorm(input: &[f64], batch: usize, channels: usize, scale: &[f64], shift: &[f64], eps: f64) -> Vec<f64> {
    let inner = input.len() / (batch * channels);
    let mut out = vec![0.0; input.len()];
    for c in 0..channels {
        let idx: Vec<usize> = (0..batch)
            .flat_map(|b| (0..inner).map(move |i| (b * channels + c) * inner + i))
            .collect();
        let n = idx.len() as f64;
        let mean = idx.iter().map(|&k| input[k]).sum::<f64>() / n;
        let var = idx.iter().map(|&k| (input[k] - mean).powi(2)).sum::<f64>() / n;
        for &k in &idx {
            out[k] = scale[c] * (input[k] - mean) / (var + eps).sqrt() + shift[c];
        }
    }
    out
}

/// Linear interpolation weight of input index `i` for output index `o` of a
/// x2 upsample: tent function around the clamped half-pixel source position.
fn tent(o: usize, i: usize, extent: usize) -> f64 {
    let src = ((o as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (extent - 1) as f64);
    (1.0 - (src - i as f64).abs()).max(0.0)
}

/// Trilinear x2 upsample evaluated as an explicit weighted sum over all inputs.
pub fn upsample_trilinear(input: &[f64], dims: [usize; 5]) -> Vec<f64> {
    let [b, c, s, h, w] = dims;
    let mut out = Vec::with_capacity(input.len() * 8);
    for p in 0..b * c {
        for z in 0..2 * s {
            for y in 0..2 * h {
                for x in 0..2 * w {
                    let mut acc = 0.0;
                    for iz in 0..s {
                        for iy in 0..h {
                            for ix in 0..w {
                                let weight = tent(z, iz, s) * tent(y, iy, h) * tent(x, ix, w);
                                if weight != 0.0 {
                                    acc += weight * input[((p * s + iz) * h + iy) * w + ix];
                                }
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    out
}
