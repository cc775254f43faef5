//! Differentiable operations recorded on a [`Graph`](crate::Graph).

pub(crate) mod activation;
pub(crate) mod conv;
pub(crate) mod elementwise;
pub(crate) mod layout;
pub(crate) mod norm;
pub(crate) mod pool;
pub(crate) mod resample;

use crate::error::{Result, TensorError};
use crate::graph::{Contributions, Node, Op};
use crate::real::Real;
use crate::tensor::Shape;

pub(crate) fn backward<T: Real>(nodes: &[Node<T>], id: usize, grad: &[T]) -> Contributions<T> {
    let node = &nodes[id];
    match &node.op {
        Op::Leaf => Vec::new(),
        Op::Conv(saved) => conv::backward(nodes, saved, grad),
        Op::MaxPool { input, argmax } => pool::backward(nodes, *input, argmax, grad),
        Op::BatchNorm(saved) => norm::backward(nodes, saved, grad),
        Op::Activation { input, kind } => {
            vec![(*input, activation::backward(*kind, node.value.data(), grad))]
        }
        Op::Softmax { input } => vec![(*input, activation::softmax_backward(&node.value, grad))],
        Op::Add(a, b) => vec![(*a, grad.to_vec()), (*b, grad.to_vec())],
        Op::Mul(a, b) => elementwise::mul_backward(nodes, *a, *b, grad),
        Op::Div(a, b) => elementwise::div_backward(nodes, *a, *b, grad),
        Op::Affine { input, scale } => {
            vec![(*input, grad.iter().map(|g| *g * *scale).collect())]
        }
        Op::Sum { input } => vec![(*input, vec![grad[0]; nodes[*input].value.numel()])],
        Op::Cat { inputs, axis } => layout::cat_backward(nodes, inputs, *axis, grad),
        Op::Narrow { input, axis, start } => {
            layout::narrow_backward(nodes, *input, *axis, *start, &node.value, grad)
        }
        Op::Reshape { input } => vec![(*input, grad.to_vec())],
        Op::Upsample { input } => vec![(*input, resample::upsample_backward(&nodes[*input].value, grad))],
    }
}

pub(crate) fn same_shape(op: &'static str, a: &Shape, b: &Shape) -> Result<()> {
    if a != b {
        return Err(TensorError::ShapeMismatch {
            op,
            expected: a.to_string(),
            found: b.to_string(),
        });
    }
    Ok(())
}

pub(crate) fn expect_rank(op: &'static str, shape: &Shape, ranks: &[usize]) -> Result<()> {
    if !ranks.contains(&shape.rank()) {
        return Err(TensorError::ShapeMismatch {
            op,
            expected: format!("rank {ranks:?}"),
            found: shape.to_string(),
        });
    }
    Ok(())
}

/// Channel axis convention: axis 1 for batched tensors (rank >= 4), axis 0
/// for unbatched `[C, H, W]` images.
pub(crate) fn channel_axis(op: &'static str, shape: &Shape) -> Result<usize> {
    match shape.rank() {
        3 => Ok(0),
        4 | 5 => Ok(1),
        _ => Err(TensorError::ShapeMismatch {
            op,
            expected: "rank 3, 4 or 5".into(),
            found: shape.to_string(),
        }),
    }
}
