use crate::error::Result;
use crate::graph::{Contributions, Graph, Node, Op, Var};
use crate::ops::same_shape;
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

impl<T: Real> Graph<T> {
    fn binary(&self, op: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape(op, x.shape(), y.shape())?;
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        Ok(Tensor::from_shape(x.shape().clone(), data))
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary("add", a, b, |p, q| p + q)?;
        Ok(self.push(value, Op::Add(a.0, b.0), self.tracked(&[a, b])))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary("mul", a, b, |p, q| p * q)?;
        Ok(self.push(value, Op::Mul(a.0, b.0), self.tracked(&[a, b])))
    }

    pub fn div(&self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary("div", a, b, |p, q| p / q)?;
        Ok(self.push(value, Op::Div(a.0, b.0), self.tracked(&[a, b])))
    }

    /// `scale * x + offset`, elementwise.
    pub fn affine(&self, input: Var, scale: T, offset: T) -> Var {
        let value = {
            let x = self.value(input);
            let data = x.data().iter().map(|&v| scale * v + offset).collect();
            Tensor::from_shape(x.shape().clone(), data)
        };
        self.push(value, Op::Affine { input: input.0, scale }, self.tracked(&[input]))
    }

    /// Sum of all elements into a `[1]` tensor, accumulated in index order.
    pub fn sum(&self, input: Var) -> Var {
        let total = self.value(input).data().iter().copied().sum::<T>();
        let value = Tensor::from_shape(Shape::new(&[1]).expect("static shape"), vec![total]);
        self.push(value, Op::Sum { input: input.0 }, self.tracked(&[input]))
    }
}

pub(crate) fn mul_backward<T: Real>(nodes: &[Node<T>], a: usize, b: usize, grad: &[T]) -> Contributions<T> {
    let (x, y) = (nodes[a].value.data(), nodes[b].value.data());
    vec![
        (a, grad.iter().zip(y).map(|(&g, &q)| g * q).collect()),
        (b, grad.iter().zip(x).map(|(&g, &p)| g * p).collect()),
    ]
}

pub(crate) fn div_backward<T: Real>(nodes: &[Node<T>], a: usize, b: usize, grad: &[T]) -> Contributions<T> {
    let (x, y) = (nodes[a].value.data(), nodes[b].value.data());
    vec![
        (a, grad.iter().zip(y).map(|(&g, &q)| g / q).collect()),
        (
            b,
            grad.iter()
                .zip(x.iter().zip(y))
                .map(|(&g, (&p, &q))| -g * p / (q * q))
                .collect(),
        ),
    ]
}
