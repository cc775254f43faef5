//! Tape recording differentiable operations and the reverse sweep over it.

use std::cell::{Cell, Ref, RefCell};
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::error::{Result, TensorError};
use crate::ops::activation::Activation;
use crate::ops::conv::ConvSaved;
use crate::ops::norm::NormSaved;
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation families, used to name ops in diagnostics and fault injection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Leaf,
    Conv,
    MaxPool,
    BatchNorm,
    Relu,
    Sigmoid,
    Tanh,
    Softmax,
    Add,
    Mul,
    Div,
    Affine,
    Sum,
    Cat,
    Narrow,
    Reshape,
    Upsample,
}

pub(crate) enum Op<T> {
    Leaf,
    Conv(ConvSaved),
    MaxPool { input: usize, argmax: Vec<usize> },
    BatchNorm(NormSaved<T>),
    Activation { input: usize, kind: Activation },
    Softmax { input: usize },
    Add(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Affine { input: usize, scale: T },
    Sum { input: usize },
    Cat { inputs: Vec<usize>, axis: usize },
    Narrow { input: usize, axis: usize, start: usize },
    Reshape { input: usize },
    Upsample { input: usize },
}

impl<T> Op<T> {
    pub(crate) fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::Conv(_) => OpKind::Conv,
            Op::MaxPool { .. } => OpKind::MaxPool,
            Op::BatchNorm(_) => OpKind::BatchNorm,
            Op::Activation { kind, .. } => match kind {
                Activation::Relu => OpKind::Relu,
                Activation::Sigmoid => OpKind::Sigmoid,
                Activation::Tanh => OpKind::Tanh,
            },
            Op::Softmax { .. } => OpKind::Softmax,
            Op::Add(..) => OpKind::Add,
            Op::Mul(..) => OpKind::Mul,
            Op::Div(..) => OpKind::Div,
            Op::Affine { .. } => OpKind::Affine,
            Op::Sum { .. } => OpKind::Sum,
            Op::Cat { .. } => OpKind::Cat,
            Op::Narrow { .. } => OpKind::Narrow,
            Op::Reshape { .. } => OpKind::Reshape,
            Op::Upsample { .. } => OpKind::Upsample,
        }
    }
}

pub(crate) struct Node<T> {
    pub value: Tensor<T>,
    pub op: Op<T>,
    /// Whether any gradient-requiring leaf feeds this node.
    pub tracked: bool,
}

/// Gradient contributions of one node to its inputs.
pub(crate) type Contributions<T> = Vec<(usize, Vec<T>)>;

/// A tape of differentiable operations.
///
/// Values are recorded eagerly; [`Graph::backward`] sweeps the tape in reverse.
/// A graph is single-threaded and meant to live for one forward/backward pass.
pub struct Graph<T: Real> {
    nodes: RefCell<Vec<Node<T>>>,
    fault: Cell<Option<OpKind>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            fault: Cell::new(None),
        }
    }

    /// Fingerprint of the side of every kink the recorded values lie on: the
    /// sign of each relu output and the winner of each max-pool window. Two
    /// passes of the same graph structure with equal fingerprints are joined
    /// by a smooth path, which finite-difference checks rely on.
    pub fn branch_pattern(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for node in self.nodes.borrow().iter() {
            match &node.op {
                Op::Activation { kind: Activation::Relu, .. } => {
                    for chunk in node.value.data().chunks(64) {
                        let bits = chunk
                            .iter()
                            .enumerate()
                            .fold(0u64, |b, (i, &v)| b | (u64::from(v > T::zero()) << i));
                        h.write_u64(bits);
                    }
                }
                Op::MaxPool { argmax, .. } => argmax.hash(&mut h),
                _ => {}
            }
        }
        h.finish()
    }

    /// Records a leaf; it is differentiated iff `tensor.requires_grad()`.
    pub fn leaf(&self, mut tensor: Tensor<T>) -> Var {
        tensor.clear_grad();
        let tracked = tensor.requires_grad();
        self.push(tensor, Op::Leaf, tracked)
    }

    /// Records a value that never receives a gradient.
    pub fn constant(&self, mut tensor: Tensor<T>) -> Var {
        tensor.set_requires_grad(false);
        self.push(tensor, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> Ref<'_, Tensor<T>> {
        Ref::map(self.nodes.borrow(), |nodes| &nodes[v.0].value)
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes.borrow()[v.0].value.shape().clone()
    }

    pub fn dims(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.dims().to_vec()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Test hook: doubles the backward contribution of every op of `kind`.
    #[doc(hidden)]
    pub fn inject_backward_fault(&self, kind: Option<OpKind>) {
        self.fault.set(kind);
    }

    pub(crate) fn push(&self, value: Tensor<T>, op: Op<T>, tracked: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op, tracked });
        Var(nodes.len() - 1)
    }

    pub(crate) fn nodes(&self) -> Ref<'_, Vec<Node<T>>> {
        self.nodes.borrow()
    }

    pub(crate) fn tracked(&self, vars: &[Var]) -> bool {
        let nodes = self.nodes.borrow();
        vars.iter().any(|v| nodes[v.0].tracked)
    }

    /// Reverse sweep from a scalar `loss`.
    ///
    /// Returns a fresh gradient for every tracked leaf (zeros if the leaf does
    /// not influence the loss). Nothing accumulates between calls.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.0];
        if !root.value.shape().is_scalar() {
            return Err(TensorError::NotScalar(root.value.dims().to_vec()));
        }
        let fault = self.fault.get();
        let mut pending: Vec<Option<Vec<T>>> = (0..nodes.len()).map(|_| None).collect();
        let mut leaves: Vec<Option<Vec<T>>> = (0..nodes.len()).map(|_| None).collect();
        pending[loss.0] = Some(vec![T::one()]);

        for id in (0..=loss.0).rev() {
            let node = &nodes[id];
            if !node.tracked {
                continue;
            }
            let Some(grad) = pending[id].take() else {
                if matches!(node.op, Op::Leaf) {
                    leaves[id] = Some(vec![T::zero(); node.value.numel()]);
                }
                continue;
            };
            if matches!(node.op, Op::Leaf) {
                leaves[id] = Some(grad);
                continue;
            }
            let mut contributions = crate::ops::backward(&nodes, id, &grad);
            if fault == Some(node.op.kind()) {
                let two = T::one() + T::one();
                for (_, g) in contributions.iter_mut() {
                    g.iter_mut().for_each(|v| *v *= two);
                }
            }
            for (input, g) in contributions {
                if !nodes[input].tracked {
                    continue;
                }
                match &mut pending[input] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += *b),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        // tracked leaves recorded after the loss never reach it
        for id in loss.0 + 1..nodes.len() {
            if nodes[id].tracked && matches!(nodes[id].op, Op::Leaf) {
                leaves[id] = Some(vec![T::zero(); nodes[id].value.numel()]);
            }
        }
        Ok(Gradients { grads: leaves })
    }
}

/// Leaf gradients produced by one backward sweep.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of a tracked leaf; `None` for constants and interior nodes.
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Overwrites the gradient buffer of `tensor` with the gradient of `v`.
    pub fn write_to(&self, v: Var, tensor: &mut Tensor<T>) -> Result<()> {
        let grad = self.get(v).ok_or(TensorError::MissingGrad(v.0))?;
        tensor.set_grad(grad.to_vec())
    }
}
