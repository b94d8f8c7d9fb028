use crate::error::{Error, Result};
use crate::nn::WeightStore;
use crate::tensor::{Scalar, Tensor};

/// Mean squared error `(1/len) * sum (out - target)^2` and its gradient
/// `(2/len) * (out - target)`.
pub fn mse_loss<T: Scalar>(output: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    if output.shape() != target.shape() {
        return Err(Error::contract(
            "mse_loss",
            format!("output {} vs target {}", output.shape(), target.shape()),
        ));
    }
    let len = output.data().len() as f64;
    let scale = T::from_f64(2.0 / len);
    let mut loss = 0.0;
    let grad: Vec<T> = output
        .data()
        .iter()
        .zip(target.data())
        .map(|(&o, &t)| {
            let d = o - t;
            loss += d.as_f64() * d.as_f64();
            scale * d
        })
        .collect();
    Ok((loss / len, Tensor::new(output.shape(), grad)?))
}

/// Adam with bias-corrected moments.
#[derive(Clone, Debug)]
pub struct Adam<T: Scalar = f32> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: WeightStore<T>,
    v: WeightStore<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64, like: &WeightStore<T>) -> Self {
        let zeros = zeros_like(like);
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    pub fn first_moment(&self) -> &WeightStore<T> {
        &self.m
    }

    pub fn second_moment(&self) -> &WeightStore<T> {
        &self.v
    }

    pub fn step(&mut self, params: &mut WeightStore<T>, grads: &WeightStore<T>) -> Result<()> {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let (b1t, b2t) = (T::from_f64(b1), T::from_f64(b2));
        let (ib1, ib2) = (T::from_f64(1.0 - b1), T::from_f64(1.0 - b2));
        let (lr, eps) = (T::from_f64(self.lr), T::from_f64(self.eps));
        let (c1, c2) = (T::from_f64(c1), T::from_f64(c2));
        for ((id, p), ((_, m), (_, v))) in params.iter_mut().zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let g = grads
                .get(id)
                .ok_or_else(|| Error::MissingWeights(format!("gradient for {id}")))?;
            let pairs = p.weights.iter_mut().chain(p.bias.iter_mut());
            let gs = g.weights.iter().chain(&g.bias);
            let ms = m.weights.iter_mut().chain(m.bias.iter_mut());
            let vs = v.weights.iter_mut().chain(v.bias.iter_mut());
            for (((w, &gi), mi), vi) in pairs.zip(gs).zip(ms).zip(vs) {
                *mi = b1t * *mi + ib1 * gi;
                *vi = b2t * *vi + ib2 * gi * gi;
                let mh = *mi / c1;
                let vh = *vi / c2;
                *w = *w - lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }
}

pub fn zeros_like<T: Scalar>(store: &WeightStore<T>) -> WeightStore<T> {
    let mut out = store.clone();
    for (_, p) in out.iter_mut() {
        p.weights.iter_mut().chain(p.bias.iter_mut()).for_each(|v| *v = T::zero());
    }
    out
}

/// `acc += g`, entry by entry.
pub fn accumulate<T: Scalar>(acc: &mut WeightStore<T>, g: &WeightStore<T>) {
    for ((_, a), (_, b)) in acc.iter_mut().zip(g.iter()) {
        for (x, &y) in a.weights.iter_mut().chain(a.bias.iter_mut()).zip(b.weights.iter().chain(&b.bias)) {
            *x = *x + y;
        }
    }
}

pub fn scale<T: Scalar>(store: &mut WeightStore<T>, s: f64) {
    let s = T::from_f64(s);
    for (_, p) in store.iter_mut() {
        p.weights.iter_mut().chain(p.bias.iter_mut()).for_each(|v| *v = *v * s);
    }
}
