use super::{Scalar, Shape, Tensor};
use crate::error::{Error, Result};

fn same_shape<T: Scalar>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::contract(
            op,
            format!("shapes {} and {} differ", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes `grad_out` where `x > 0`; the subgradient at exactly zero is zero.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape("relu_backward", x, grad_out)?;
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(x.shape(), data)
}

pub fn add<T: Scalar>(x: &Tensor<T>, y: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape("add", x, y)?;
    let data = x.data().iter().zip(y.data()).map(|(&a, &b)| a + b).collect();
    Tensor::new(x.shape(), data)
}

/// Stacks tensors along the channel axis in argument order.
pub fn concat_channels<T: Scalar>(xs: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = xs
        .first()
        .ok_or_else(|| Error::contract("concat_channels", "no inputs"))?
        .shape();
    let mut channels = 0;
    for x in xs {
        let s = x.shape();
        if (s.height, s.width) != (first.height, first.width) {
            return Err(Error::contract(
                "concat_channels",
                format!("spatial size of {s} differs from {first}"),
            ));
        }
        channels += s.channels;
    }
    let mut data = Vec::with_capacity(channels * first.plane());
    for x in xs {
        data.extend_from_slice(x.data());
    }
    Tensor::new(Shape::new(channels, first.height, first.width), data)
}

/// Fully-connected layer on the flattened input: `out = W x + b`, `W` is `[out, in]`.
pub fn linear<T: Scalar>(x: &Tensor<T>, weights: &[T], bias: &[T]) -> Result<Tensor<T>> {
    let n_in = x.shape().len();
    let n_out = bias.len();
    if weights.len() != n_in * n_out {
        return Err(Error::contract(
            "linear",
            format!(
                "input of {n_in} values incompatible with weight matrix of {} for {n_out} outputs",
                weights.len()
            ),
        ));
    }
    let xs = x.data();
    let out = bias
        .iter()
        .zip(weights.chunks_exact(n_in))
        .map(|(&b, row)| row.iter().zip(xs).fold(b, |acc, (&w, &v)| acc + w * v))
        .collect();
    Tensor::vector(out)
}

#[derive(Clone, Debug)]
pub struct LinearGrad<T = f32> {
    pub grad_input: Tensor<T>,
    pub grad_weights: Vec<T>,
    pub grad_bias: Vec<T>,
}

pub fn linear_backward<T: Scalar>(
    x: &Tensor<T>,
    weights: &[T],
    grad_out: &Tensor<T>,
) -> Result<LinearGrad<T>> {
    let n_in = x.shape().len();
    let n_out = grad_out.shape().len();
    if weights.len() != n_in * n_out {
        return Err(Error::contract(
            "linear_backward",
            format!("weights hold {} values, expected {n_in}x{n_out}", weights.len()),
        ));
    }
    let xs = x.data();
    let g = grad_out.data();
    let mut grad_in = vec![T::zero(); n_in];
    let mut grad_weights = Vec::with_capacity(weights.len());
    for (&go, row) in g.iter().zip(weights.chunks_exact(n_in)) {
        grad_weights.extend(xs.iter().map(|&v| go * v));
        for (gi, &w) in grad_in.iter_mut().zip(row) {
            *gi = *gi + go * w;
        }
    }
    Ok(LinearGrad {
        grad_input: Tensor::new(x.shape(), grad_in)?,
        grad_weights,
        grad_bias: g.to_vec(),
    })
}
