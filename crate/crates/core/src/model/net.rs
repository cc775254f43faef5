use ltsp_tensor::{BatchNormState, Graph, Real, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Ablation, LtspNetConfig};
use super::slices::{propagate_slices, split_slices, stack_slices, CellParams, PropagationParams};
use crate::error::{CoreError, Result};

/// Parameter families, used to sample parameters for gradient checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamGroup {
    Encoder,
    Coarse,
    Cell,
    W1,
    W2,
    Fine,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 6] = [
        ParamGroup::Encoder,
        ParamGroup::Coarse,
        ParamGroup::Cell,
        ParamGroup::W1,
        ParamGroup::W2,
        ParamGroup::Fine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Encoder => "encoder",
            ParamGroup::Coarse => "coarse_decoder",
            ParamGroup::Cell => "cell",
            ParamGroup::W1 => "w1",
            ParamGroup::W2 => "w2",
            ParamGroup::Fine => "fine_decoder",
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Conv {
    weight: usize,
    bias: usize,
}

/// Convolution without bias, batch normalization, relu.
#[derive(Clone, Copy, Debug)]
struct ConvBn {
    weight: usize,
    scale: usize,
    shift: usize,
    norm: usize,
}

#[derive(Clone, Debug)]
struct Layout {
    encoder: [[ConvBn; 2]; 4],
    coarse: [ConvBn; 2],
    cell: Conv,
    w1: Conv,
    w2: Conv,
    fine: [ConvBn; 2],
    head: Conv,
}

/// A named parameter tensor and its group.
#[derive(Clone, Debug)]
pub struct Param<T> {
    pub name: String,
    pub group: ParamGroup,
    pub tensor: Tensor<T>,
}

/// Encoder features kept for the decoders: full, half and quarter resolution.
#[derive(Clone, Copy, Debug)]
pub struct Skips {
    pub full: Var,
    pub half: Var,
    pub quarter: Var,
}

/// Graph handles for one forward pass.
#[derive(Clone, Debug)]
pub struct Pass {
    /// Parameter leaves in [`LtspNet::params`] order.
    pub params: Vec<Var>,
    pub coarse: Var,
    pub fine: Var,
    /// `[1, 2, S0, H0, W0]` channel probabilities.
    pub prob: Var,
}

/// The two-stage network: a 3D encoder with a two-step coarse decoder, slice
/// propagation at half resolution, and a one-step fine decoder.
#[derive(Clone, Debug)]
pub struct LtspNet<T: Real> {
    config: LtspNetConfig,
    ablation: Ablation,
    params: Vec<Param<T>>,
    norms: Vec<(String, BatchNormState<T>)>,
    layout: Layout,
}

struct Builder<T: Real> {
    rng: ChaCha8Rng,
    params: Vec<Param<T>>,
    norms: Vec<(String, BatchNormState<T>)>,
}

impl<T: Real> Builder<T> {
    fn tensor(&mut self, name: String, group: ParamGroup, tensor: Tensor<T>) -> usize {
        self.params.push(Param { name, group, tensor: tensor.with_grad() });
        self.params.len() - 1
    }

    /// Uniform in `±1/sqrt(fan_in)`.
    fn weight(&mut self, name: String, group: ParamGroup, dims: &[usize]) -> Result<usize> {
        let fan_in: usize = dims[1..].iter().product();
        let bound = 1.0 / (fan_in as f64).sqrt();
        let n: usize = dims.iter().product();
        let data = (0..n).map(|_| T::from_f64_lossy(self.rng.gen_range(-bound..bound))).collect();
        Ok(self.tensor(name, group, Tensor::from_vec(dims, data)?))
    }

    fn conv(&mut self, name: &str, group: ParamGroup, dims: &[usize]) -> Result<Conv> {
        Ok(Conv {
            weight: self.weight(format!("{name}.weight"), group, dims)?,
            bias: self.tensor(format!("{name}.bias"), group, Tensor::zeros(&[dims[0]])?),
        })
    }

    fn conv_bn(&mut self, name: &str, group: ParamGroup, cout: usize, cin: usize) -> Result<ConvBn> {
        let weight = self.weight(format!("{name}.weight"), group, &[cout, cin, 3, 3, 3])?;
        let scale = self.tensor(format!("{name}.bn.scale"), group, Tensor::full(&[cout], T::one())?);
        let shift = self.tensor(format!("{name}.bn.shift"), group, Tensor::zeros(&[cout])?);
        self.norms.push((format!("{name}.bn"), BatchNormState::new(cout)));
        Ok(ConvBn { weight, scale, shift, norm: self.norms.len() - 1 })
    }
}

impl<T: Real> LtspNet<T> {
    /// Builds the network with fan-in uniform weights drawn from `seed`,
    /// zero biases and identity batch normalization.
    pub fn new(config: LtspNetConfig, ablation: Ablation, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut b = Builder { rng: ChaCha8Rng::seed_from_u64(seed), params: Vec::new(), norms: Vec::new() };
        let [c0, c1, c2, c3] = config.channels;
        let cc = config.coarse_channels;
        let k = config.propagation_kernel;
        let widths = [(1, c0), (c0, c1), (c1, c2), (c2, c3)];
        let mut encoder = Vec::new();
        for (level, &(cin, cout)) in widths.iter().enumerate() {
            encoder.push([
                b.conv_bn(&format!("enc{level}.conv1"), ParamGroup::Encoder, cout, cin)?,
                b.conv_bn(&format!("enc{level}.conv2"), ParamGroup::Encoder, cout, cout)?,
            ]);
        }
        let coarse = [
            b.conv_bn("coarse.up1", ParamGroup::Coarse, c2, c3 + c2)?,
            b.conv_bn("coarse.up2", ParamGroup::Coarse, cc, c2 + c1)?,
        ];
        let cell = b.conv("cell.gates", ParamGroup::Cell, &[4 * cc, 2 * cc, 3, 3])?;
        let w1 = b.conv("prop.w1", ParamGroup::W1, &[cc, cc, k, k])?;
        let w2 = b.conv("prop.w2", ParamGroup::W2, &[cc, cc, k, k])?;
        let fine = [
            b.conv_bn("fine.conv1", ParamGroup::Fine, c0, cc + c0)?,
            b.conv_bn("fine.conv2", ParamGroup::Fine, c0, c0)?,
        ];
        let head = b.conv("fine.head", ParamGroup::Fine, &[config.class_count, c0, 1, 1, 1])?;
        let layout = Layout {
            encoder: encoder.try_into().expect("four encoder levels"),
            coarse,
            cell,
            w1,
            w2,
            fine,
            head,
        };
        Ok(Self { config, ablation, params: b.params, norms: b.norms, layout })
    }

    pub fn config(&self) -> &LtspNetConfig {
        &self.config
    }

    pub fn ablation(&self) -> Ablation {
        self.ablation
    }

    pub fn set_ablation(&mut self, ablation: Ablation) {
        self.ablation = ablation;
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    pub fn norms(&self) -> &[(String, BatchNormState<T>)] {
        &self.norms
    }

    pub fn norms_mut(&mut self) -> &mut [(String, BatchNormState<T>)] {
        &mut self.norms
    }

    /// Switches batch normalization between batch and running statistics.
    pub fn set_training(&mut self, training: bool) {
        for (_, n) in &mut self.norms {
            n.training = training;
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.tensor.numel()).sum()
    }

    /// Same network in another precision.
    pub fn cast<U: Real>(&self) -> LtspNet<U> {
        let cast = |v: &[T]| v.iter().map(|x| U::from_f64_lossy(x.to_f64().unwrap_or(f64::NAN))).collect();
        LtspNet {
            config: self.config.clone(),
            ablation: self.ablation,
            params: self
                .params
                .iter()
                .map(|p| Param { name: p.name.clone(), group: p.group, tensor: p.tensor.cast() })
                .collect(),
            norms: self
                .norms
                .iter()
                .map(|(name, n)| {
                    (
                        name.clone(),
                        BatchNormState {
                            running_mean: cast(&n.running_mean),
                            running_var: cast(&n.running_var),
                            momentum: U::from_f64_lossy(n.momentum.to_f64().unwrap_or(0.1)),
                            eps: U::from_f64_lossy(n.eps.to_f64().unwrap_or(1e-5)),
                            training: n.training,
                        },
                    )
                })
                .collect(),
            layout: self.layout.clone(),
        }
    }

    /// Records every parameter as a differentiable leaf.
    pub fn bind(&self, g: &Graph<T>) -> Vec<Var> {
        self.params.iter().map(|p| g.leaf(p.tensor.clone())).collect()
    }

    fn block(&mut self, g: &Graph<T>, p: &[Var], layer: ConvBn, x: Var) -> Result<Var> {
        let cout = g.dims(p[layer.weight])[0];
        let zero = g.constant(Tensor::zeros(&[cout])?);
        let y = g.conv3d(x, p[layer.weight], zero, 1)?;
        let y = g.batchnorm(y, p[layer.scale], p[layer.shift], &mut self.norms[layer.norm].1)?;
        Ok(g.relu(y))
    }

    /// First stage: the encoder and coarse decoder. Returns the coarse map
    /// at half resolution with `C` channels plus the encoder skips.
    pub fn encode_coarse(&mut self, g: &Graph<T>, p: &[Var], x0: Var) -> Result<(Var, Skips)> {
        let d = g.dims(x0);
        if d.len() != 5 || d[0] != 1 || d[1] != 1 {
            return Err(CoreError::Shape(format!("network input must be [1, 1, S, H, W], got {d:?}")));
        }
        LtspNetConfig::check_extent([d[2], d[3], d[4]])?;
        let enc = self.layout.encoder;
        let mut x = x0;
        let mut levels = Vec::with_capacity(4);
        for (i, [a, b]) in enc.into_iter().enumerate() {
            if i > 0 {
                x = g.maxpool3d(x)?;
            }
            x = self.block(g, p, a, x)?;
            x = self.block(g, p, b, x)?;
            levels.push(x);
        }
        let skips = Skips { full: levels[0], half: levels[1], quarter: levels[2] };
        let [up1, up2] = self.layout.coarse;
        let up = g.upsample_trilinear(levels[3])?;
        let joined = g.concat_channels(up, skips.quarter)?;
        let x = self.block(g, p, up1, joined)?;
        let up = g.upsample_trilinear(x)?;
        let joined = g.concat_channels(up, skips.half)?;
        let coarse = self.block(g, p, up2, joined)?;
        Ok((coarse, skips))
    }

    /// Second stage per the ablation mode: split along S, propagate, stack.
    pub fn refine(&self, g: &Graph<T>, p: &[Var], coarse: Var) -> Result<Var> {
        if self.ablation == Ablation::None {
            return Ok(coarse);
        }
        let l = &self.layout;
        let cell = CellParams { weight: p[l.cell.weight], bias: p[l.cell.bias] };
        let prop = PropagationParams { w1: p[l.w1.weight], b1: p[l.w1.bias], w2: p[l.w2.weight], b2: p[l.w2.bias] };
        let slices = split_slices(g, coarse)?;
        let refined = propagate_slices(g, &slices, cell, prop, self.ablation)?;
        stack_slices(g, &refined)
    }

    /// Upsample to full resolution, join the stem features, two conv blocks,
    /// a 1×1×1 head and a channel softmax.
    pub fn decode_fine(&mut self, g: &Graph<T>, p: &[Var], fine: Var, skips: &Skips) -> Result<Var> {
        let up = g.upsample_trilinear(fine)?;
        let (du, ds) = (g.dims(up), g.dims(skips.full));
        if du[2..] != ds[2..] {
            return Err(CoreError::Shape(format!("fine features {du:?} do not match skip {ds:?}")));
        }
        let joined = g.concat_channels(up, skips.full)?;
        let [a, b] = self.layout.fine;
        let x = self.block(g, p, a, joined)?;
        let x = self.block(g, p, b, x)?;
        let head = self.layout.head;
        let logits = g.conv3d(x, p[head.weight], p[head.bias], 0)?;
        Ok(g.softmax_channels(logits)?)
    }

    /// Full forward pass on `[1, 1, S, H, W]`.
    pub fn forward(&mut self, g: &Graph<T>, x0: Var) -> Result<Pass> {
        let params = self.bind(g);
        let (coarse, skips) = self.encode_coarse(g, &params, x0)?;
        let fine = self.refine(g, &params, coarse)?;
        let prob = self.decode_fine(g, &params, fine, &skips)?;
        Ok(Pass { params, coarse, fine, prob })
    }

    /// Probabilities for one normalized cube `[S, H, W]`, without recording
    /// gradients.
    pub fn infer(&mut self, cube: &[T], extent: [usize; 3]) -> Result<Tensor<T>> {
        let g = Graph::new();
        let x = g.constant(Tensor::from_vec(&[1, 1, extent[0], extent[1], extent[2]], cube.to_vec())?);
        let pass = self.forward(&g, x)?;
        let prob = g.value(pass.prob).clone();
        Ok(prob)
    }
}
