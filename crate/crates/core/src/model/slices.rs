//! The second stage: per-slice recurrent cells and dense forward
//! propagation along the first spatial axis.

use ltsp_tensor::{Graph, Real, Tensor, Var};

use super::config::Ablation;
use crate::error::{CoreError, Result};

/// Output and memory of the cell after one slice, both `[C, H, W]`.
#[derive(Clone, Copy, Debug)]
pub struct CellState {
    pub h: Var,
    pub c: Var,
}

impl CellState {
    pub fn zeros<T: Real>(g: &Graph<T>, dims: &[usize]) -> Result<Self> {
        Ok(Self {
            h: g.constant(Tensor::zeros(dims)?),
            c: g.constant(Tensor::zeros(dims)?),
        })
    }
}

/// Gate convolution mapping `2C` to `4C` channels.
#[derive(Clone, Copy, Debug)]
pub struct CellParams {
    pub weight: Var,
    pub bias: Var,
}

/// Convolutions applied to the one- and two-slice-distance features.
#[derive(Clone, Copy, Debug)]
pub struct PropagationParams {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

/// Sections `[1, C, S, H, W]` into `S` slices of `[C, H, W]`.
pub fn split_slices<T: Real>(g: &Graph<T>, x: Var) -> Result<Vec<Var>> {
    let d = g.dims(x);
    if d.len() != 5 || d[0] != 1 {
        return Err(CoreError::Shape(format!("split_slices expects [1, C, S, H, W], got {d:?}")));
    }
    let (c, s, h, w) = (d[1], d[2], d[3], d[4]);
    (0..s)
        .map(|i| {
            let slab = g.narrow(x, 2, i, 1)?;
            Ok(g.reshape(slab, &[c, h, w])?)
        })
        .collect()
}

/// Inverse of [`split_slices`].
pub fn stack_slices<T: Real>(g: &Graph<T>, slices: &[Var]) -> Result<Var> {
    let first = slices
        .first()
        .ok_or_else(|| CoreError::Shape("stack_slices needs at least one slice".into()))?;
    let d = g.dims(*first);
    if d.len() != 3 {
        return Err(CoreError::Shape(format!("slices must be [C, H, W], got {d:?}")));
    }
    let mut parts = Vec::with_capacity(slices.len());
    for &s in slices {
        let ds = g.dims(s);
        if ds != d {
            return Err(CoreError::Shape(format!("slice {ds:?} differs from {d:?}")));
        }
        parts.push(g.reshape(s, &[1, d[0], 1, d[1], d[2]])?);
    }
    Ok(g.cat(&parts, 2)?)
}

/// One step of the cell:
/// `G = conv(cat(x, h))`, forget/candidate/input/output gates from the four
/// channel quarters of `G`, `c = f*c_prev + i*cand`, `h = o*tanh(c)`.
pub fn ltsp_cell_step<T: Real>(g: &Graph<T>, x: Var, prev: CellState, cell: CellParams) -> Result<CellState> {
    let (dx, dh) = (g.dims(x), g.dims(prev.h));
    if dx != dh || g.dims(prev.c) != dh {
        return Err(CoreError::Shape(format!("cell input {dx:?} and state {dh:?} differ")));
    }
    let k = g.dims(cell.weight).get(2).copied().unwrap_or(1);
    let joined = g.concat_channels(x, prev.h)?;
    let gates = g.conv2d(joined, cell.weight, cell.bias, k / 2)?;
    let q = g.chunk_channels(gates, 4)?;
    let forget = g.sigmoid(q[0]);
    let candidate = g.tanh(q[1]);
    let input = g.sigmoid(q[2]);
    let output = g.sigmoid(q[3]);
    let kept = g.mul(forget, prev.c)?;
    let written = g.mul(input, candidate)?;
    let c = g.add(kept, written)?;
    let squashed = g.tanh(c);
    let h = g.mul(output, squashed)?;
    Ok(CellState { h, c })
}

/// Dense forward propagation. Slice 1 passes through; slice `i` gains
/// `relu(P_{i-1} * W1 + P_{i-2} * W2)` where `P` are cell outputs or raw
/// slices depending on the ablation mode, and the W2 term is present only
/// in the two-slice modes.
pub fn propagate_slices<T: Real>(
    g: &Graph<T>,
    slices: &[Var],
    cell: CellParams,
    prop: PropagationParams,
    mode: Ablation,
) -> Result<Vec<Var>> {
    let first = *slices
        .first()
        .ok_or_else(|| CoreError::Shape("propagate_slices needs at least one slice".into()))?;
    if mode == Ablation::None {
        return Ok(slices.to_vec());
    }
    let sources: Vec<Var> = if mode.uses_cells() {
        let mut state = CellState::zeros(g, &g.dims(first))?;
        let mut hs = Vec::with_capacity(slices.len());
        for &x in slices {
            state = ltsp_cell_step(g, x, state, cell)?;
            hs.push(state.h);
        }
        hs
    } else {
        slices.to_vec()
    };
    let pad = g.dims(prop.w1).get(2).copied().unwrap_or(1) / 2;
    let mut out = Vec::with_capacity(slices.len());
    for (i, &x) in slices.iter().enumerate() {
        if i == 0 {
            out.push(x);
            continue;
        }
        let mut msg = g.conv2d(sources[i - 1], prop.w1, prop.b1, pad)?;
        if mode.reach() == 2 && i >= 2 {
            let far = g.conv2d(sources[i - 2], prop.w2, prop.b2, pad)?;
            msg = g.add(msg, far)?;
        }
        let msg = g.relu(msg);
        out.push(g.add(x, msg)?);
    }
    Ok(out)
}
