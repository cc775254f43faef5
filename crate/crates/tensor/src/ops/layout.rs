use crate::error::{Result, TensorError};
use crate::graph::{Contributions, Graph, Node, Op, Var};
use crate::ops::channel_axis;
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

impl<T: Real> Graph<T> {
    /// Concatenates along `axis`; all other extents must agree.
    pub fn cat(&self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs.first().ok_or(TensorError::Empty("cat"))?;
        let base = self.shape(*first);
        if axis >= base.rank() {
            return Err(TensorError::InvalidShape {
                shape: base.dims().to_vec(),
                reason: format!("cat axis {axis} out of range"),
            });
        }
        let mut total = 0;
        for v in inputs {
            let s = self.shape(*v);
            if s.rank() != base.rank() || (0..base.rank()).any(|a| a != axis && s.dims()[a] != base.dims()[a]) {
                return Err(TensorError::ShapeMismatch {
                    op: "cat",
                    expected: format!("{base} apart from axis {axis}"),
                    found: s.to_string(),
                });
            }
            total += s.dims()[axis];
        }
        let out_shape = base.with_axis(axis, total);
        let (outer, _, inner) = out_shape.around(axis);
        let value = {
            let nodes = self.nodes();
            let mut data = Vec::with_capacity(out_shape.numel());
            for o in 0..outer {
                for v in inputs {
                    let x = &nodes[v.0].value;
                    let block = x.dims()[axis] * inner;
                    data.extend_from_slice(&x.data()[o * block..(o + 1) * block]);
                }
            }
            Tensor::from_shape(out_shape, data)
        };
        let op = Op::Cat {
            inputs: inputs.iter().map(|v| v.0).collect(),
            axis,
        };
        Ok(self.push(value, op, self.tracked(inputs)))
    }

    /// The sub-range `start..start + len` of `axis`.
    pub fn narrow(&self, input: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(input);
        if axis >= shape.rank() || len == 0 || start + len > shape.dims()[axis] {
            return Err(TensorError::InvalidShape {
                shape: shape.dims().to_vec(),
                reason: format!("narrow axis {axis} range {start}..{}", start + len),
            });
        }
        let (outer, extent, inner) = shape.around(axis);
        let value = {
            let x = self.value(input);
            let mut data = Vec::with_capacity(outer * len * inner);
            for o in 0..outer {
                let from = (o * extent + start) * inner;
                data.extend_from_slice(&x.data()[from..from + len * inner]);
            }
            Tensor::from_shape(shape.with_axis(axis, len), data)
        };
        let op = Op::Narrow {
            input: input.0,
            axis,
            start,
        };
        Ok(self.push(value, op, self.tracked(&[input])))
    }

    pub fn reshape(&self, input: Var, dims: &[usize]) -> Result<Var> {
        let value = self.value(input).reshape(dims)?;
        Ok(self.push(value, Op::Reshape { input: input.0 }, self.tracked(&[input])))
    }

    /// Concatenation along the channel axis (axis 1 when batched, else 0).
    pub fn concat_channels(&self, a: Var, b: Var) -> Result<Var> {
        let axis = channel_axis("concat_channels", &self.shape(a))?;
        self.cat(&[a, b], axis)
    }

    /// Splits the channel axis into `n` equal consecutive pieces.
    pub fn chunk_channels(&self, input: Var, n: usize) -> Result<Vec<Var>> {
        let shape = self.shape(input);
        let axis = channel_axis("chunk_channels", &shape)?;
        let channels = shape.dims()[axis];
        if n == 0 || channels % n != 0 {
            return Err(TensorError::Indivisible {
                op: "chunk_channels",
                axis,
                extent: channels,
                divisor: n,
            });
        }
        let piece = channels / n;
        (0..n).map(|k| self.narrow(input, axis, k * piece, piece)).collect()
    }
}

pub(crate) fn cat_backward<T: Real>(
    nodes: &[Node<T>],
    inputs: &[usize],
    axis: usize,
    grad: &[T],
) -> Contributions<T> {
    let total: usize = inputs.iter().map(|&i| nodes[i].value.dims()[axis]).sum();
    let (outer, _, inner) = nodes[inputs[0]].value.shape().with_axis(axis, total).around(axis);
    let mut offset = 0;
    let mut out = Vec::with_capacity(inputs.len());
    for &i in inputs {
        let block = nodes[i].value.dims()[axis] * inner;
        let mut g = Vec::with_capacity(outer * block);
        for o in 0..outer {
            let from = o * total * inner + offset;
            g.extend_from_slice(&grad[from..from + block]);
        }
        offset += block;
        out.push((i, g));
    }
    out
}

pub(crate) fn narrow_backward<T: Real>(
    nodes: &[Node<T>],
    input: usize,
    axis: usize,
    start: usize,
    output: &Tensor<T>,
    grad: &[T],
) -> Contributions<T> {
    let full: &Shape = nodes[input].value.shape();
    let (outer, extent, inner) = full.around(axis);
    let len = output.dims()[axis];
    let mut g = vec![T::zero(); full.numel()];
    for o in 0..outer {
        let to = (o * extent + start) * inner;
        g[to..to + len * inner].copy_from_slice(&grad[o * len * inner..(o + 1) * len * inner]);
    }
    vec![(input, g)]
}
