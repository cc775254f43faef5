use crate::error::{Result, TensorError};
use crate::graph::{Contributions, Graph, Node, Op, Var};
use crate::ops::expect_rank;
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

impl<T: Real> Graph<T> {
    /// 2x2x2 max pooling of `[B, C, S, H, W]`.
    ///
    /// Ties resolve to the first maximum in row-major window order, which is
    /// also where the backward pass routes the gradient.
    pub fn maxpool3d(&self, input: Var) -> Result<Var> {
        let shape = self.shape(input);
        expect_rank("maxpool3d", &shape, &[5])?;
        let d = shape.dims();
        for axis in 2..5 {
            if d[axis] % 2 != 0 {
                return Err(TensorError::Indivisible {
                    op: "maxpool3d",
                    axis,
                    extent: d[axis],
                    divisor: 2,
                });
            }
        }
        let (s, h, w) = (d[2], d[3], d[4]);
        let (os, oh, ow) = (s / 2, h / 2, w / 2);
        let planes = d[0] * d[1];
        let out_len = planes * os * oh * ow;
        let mut out = Vec::with_capacity(out_len);
        let mut argmax = Vec::with_capacity(out_len);
        {
            let x = self.value(input);
            let src = x.data();
            for p in 0..planes {
                let base = p * s * h * w;
                for z in 0..os {
                    for y in 0..oh {
                        for xw in 0..ow {
                            let mut best = base + (2 * z * h + 2 * y) * w + 2 * xw;
                            for dz in 0..2 {
                                for dy in 0..2 {
                                    for dx in 0..2 {
                                        let k = base + ((2 * z + dz) * h + 2 * y + dy) * w + 2 * xw + dx;
                                        if src[k] > src[best] {
                                            best = k;
                                        }
                                    }
                                }
                            }
                            out.push(src[best]);
                            argmax.push(best);
                        }
                    }
                }
            }
        }
        let value = Tensor::from_shape(Shape::new(&[d[0], d[1], os, oh, ow])?, out);
        Ok(self.push(value, Op::MaxPool { input: input.0, argmax }, self.tracked(&[input])))
    }
}

pub(crate) fn backward<T: Real>(
    nodes: &[Node<T>],
    input: usize,
    argmax: &[usize],
    grad: &[T],
) -> Contributions<T> {
    let mut g = vec![T::zero(); nodes[input].value.numel()];
    for (&k, &v) in argmax.iter().zip(grad) {
        g[k] += v;
    }
    vec![(input, g)]
}
