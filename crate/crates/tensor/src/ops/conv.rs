use crate::error::{Result, TensorError};
use crate::graph::{Contributions, Graph, Node, Op, Var};
use crate::kernels::conv::{self, ConvGeometry};
use crate::ops::expect_rank;
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

pub(crate) struct ConvSaved {
    pub input: usize,
    pub weight: usize,
    pub bias: usize,
    pub geom: ConvGeometry,
}

impl<T: Real> Graph<T> {
    /// Stride-1 3D convolution of `[B, Cin, S, H, W]` with `[Cout, Cin, k, k, k]`.
    pub fn conv3d(&self, input: Var, weight: Var, bias: Var, padding: usize) -> Result<Var> {
        let (x, w, b) = (self.shape(input), self.shape(weight), self.shape(bias));
        expect_rank("conv3d", &x, &[5])?;
        expect_rank("conv3d", &w, &[5])?;
        let (xd, wd) = (x.dims(), w.dims());
        let geom = ConvGeometry {
            batch: xd[0],
            cin: xd[1],
            cout: wd[0],
            input: [xd[2], xd[3], xd[4]],
            kernel: [wd[2], wd[3], wd[4]],
            pad: [padding; 3],
        };
        check("conv3d", &geom, wd[1], &b)?;
        let o = geom.output();
        self.conv(input, weight, bias, geom, vec![xd[0], wd[0], o[0], o[1], o[2]])
    }

    /// Stride-1 2D convolution of `[C, H, W]` or `[B, C, H, W]` with
    /// `[Cout, Cin, k, k]`. The output keeps the input's batching.
    pub fn conv2d(&self, input: Var, weight: Var, bias: Var, padding: usize) -> Result<Var> {
        let (x, w, b) = (self.shape(input), self.shape(weight), self.shape(bias));
        expect_rank("conv2d", &x, &[3, 4])?;
        expect_rank("conv2d", &w, &[4])?;
        let (batch, xd) = match x.rank() {
            3 => (1, x.dims()),
            _ => (x.dims()[0], &x.dims()[1..]),
        };
        let wd = w.dims();
        let geom = ConvGeometry {
            batch,
            cin: xd[0],
            cout: wd[0],
            input: [1, xd[1], xd[2]],
            kernel: [1, wd[2], wd[3]],
            pad: [0, padding, padding],
        };
        check("conv2d", &geom, wd[1], &b)?;
        let o = geom.output();
        let out_dims = match x.rank() {
            3 => vec![wd[0], o[1], o[2]],
            _ => vec![batch, wd[0], o[1], o[2]],
        };
        self.conv(input, weight, bias, geom, out_dims)
    }

    fn conv(
        &self,
        input: Var,
        weight: Var,
        bias: Var,
        geom: ConvGeometry,
        out_dims: Vec<usize>,
    ) -> Result<Var> {
        let data = {
            let nodes = self.nodes();
            conv::forward(
                &geom,
                nodes[input.0].value.data(),
                nodes[weight.0].value.data(),
                Some(nodes[bias.0].value.data()),
            )
        };
        let value = Tensor::from_shape(Shape::new(&out_dims)?, data);
        let tracked = self.tracked(&[input, weight, bias]);
        let saved = ConvSaved {
            input: input.0,
            weight: weight.0,
            bias: bias.0,
            geom,
        };
        Ok(self.push(value, Op::Conv(saved), tracked))
    }
}

fn check(op: &'static str, g: &ConvGeometry, weight_cin: usize, bias: &Shape) -> Result<()> {
    if weight_cin != g.cin {
        return Err(TensorError::ShapeMismatch {
            op,
            expected: format!("weight with {} input channels", g.cin),
            found: format!("{weight_cin} input channels"),
        });
    }
    if bias.dims() != [g.cout] {
        return Err(TensorError::ShapeMismatch {
            op,
            expected: format!("bias [{}]", g.cout),
            found: bias.to_string(),
        });
    }
    for a in 0..3 {
        if g.pad[a] >= g.kernel[a] || g.input[a] + 2 * g.pad[a] < g.kernel[a] {
            return Err(TensorError::ShapeMismatch {
                op,
                expected: format!(
                    "kernel {:?} fitting input {:?} with padding below kernel extent",
                    g.kernel, g.input
                ),
                found: format!("padding {:?}", g.pad),
            });
        }
    }
    Ok(())
}

pub(crate) fn backward<T: Real>(nodes: &[Node<T>], s: &ConvSaved, grad: &[T]) -> Contributions<T> {
    let mut out = Vec::with_capacity(3);
    if nodes[s.input].tracked {
        let w = nodes[s.weight].value.data();
        out.push((s.input, conv::input_grad(&s.geom, w, grad)));
    }
    if nodes[s.weight].tracked {
        let x = nodes[s.input].value.data();
        out.push((s.weight, conv::weight_grad(&s.geom, x, grad)));
    }
    if nodes[s.bias].tracked {
        out.push((s.bias, conv::bias_grad(&s.geom, grad)));
    }
    out
}
