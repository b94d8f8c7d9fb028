use super::graph::{NetworkGraph, Op, Port};
use super::weights::{Param, WeightStore};
use crate::error::{Error, Result};
use crate::tensor::{
    add, concat_channels, conv2d_backward, conv2d_same, linear, linear_backward, relu, relu_backward, ConvKernel,
    Scalar, Shape, Tensor,
};

/// A graph bound to validated weights, with convolution kernels unpacked once.
#[derive(Clone, Debug)]
pub struct Model<T: Scalar = f32> {
    graph: NetworkGraph,
    store: WeightStore<T>,
    kernels: Vec<Option<ConvKernel<T>>>,
}

/// Every node's output from one forward pass, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct Trace<T = f32> {
    input: Tensor<T>,
    values: Vec<Tensor<T>>,
}

impl<T> Trace<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.values.last().unwrap()
    }

    pub fn value(&self, port: Port) -> &Tensor<T> {
        match port {
            Port::Input => &self.input,
            Port::Node(i) => &self.values[i],
        }
    }
}

impl<T: Scalar> Model<T> {
    pub fn new(graph: NetworkGraph, store: WeightStore<T>) -> Result<Self> {
        store.validate(&graph)?;
        let mut model = Self {
            kernels: Vec::new(),
            graph,
            store,
        };
        model.rebuild_kernels()?;
        Ok(model)
    }

    fn rebuild_kernels(&mut self) -> Result<()> {
        self.kernels = self
            .graph
            .nodes()
            .iter()
            .map(|n| match n.op {
                Op::Conv { in_ch, out_ch, kh, kw } => {
                    let p = self.store.get(&n.id).unwrap();
                    ConvKernel::new(out_ch, in_ch, kh, kw, p.weights.clone(), p.bias.clone()).map(Some)
                }
                _ => Ok(None),
            })
            .collect::<Result<_>>()?;
        Ok(())
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn weights(&self) -> &WeightStore<T> {
        &self.store
    }

    /// Replaces the weights (same graph), e.g. after an optimizer step.
    pub fn set_weights(&mut self, store: WeightStore<T>) -> Result<()> {
        store.validate(&self.graph)?;
        self.store = store;
        self.rebuild_kernels()
    }

    pub fn into_weights(self) -> WeightStore<T> {
        self.store
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let want = self.graph.input_shape();
        let s = x.shape();
        let ok = match want.spatial {
            None => s.channels == want.channels,
            Some((h, w)) => s.len() == want.channels * h * w,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::contract(
                "forward",
                format!("input shape {s} does not match `{}` input {want}", self.graph.arch()),
            ))
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut trace = self.trace(x)?;
        Ok(trace.values.pop().unwrap())
    }

    /// Forward pass keeping every intermediate value.
    pub fn trace(&self, x: &Tensor<T>) -> Result<Trace<T>> {
        self.check_input(x)?;
        let mut trace = Trace {
            input: x.clone(),
            values: Vec::with_capacity(self.graph.nodes().len()),
        };
        for (idx, node) in self.graph.nodes().iter().enumerate() {
            let arg = |k: usize| trace.value(node.inputs[k]);
            let y = match node.op {
                Op::Conv { .. } => conv2d_same(arg(0), self.kernels[idx].as_ref().unwrap())?,
                Op::Relu => relu(arg(0)),
                Op::Concat => {
                    let xs: Vec<&Tensor<T>> = node.inputs.iter().map(|&p| trace.value(p)).collect();
                    concat_channels(&xs)?
                }
                Op::ResidualAddInput => add(arg(0), &trace.input)?,
                Op::FullyConnected { .. } => {
                    let p = self.store.get(&node.id).unwrap();
                    linear(arg(0), &p.weights, &p.bias)?
                }
            };
            trace.values.push(y);
        }
        Ok(trace)
    }

    /// Backpropagates `grad_output` (gradient of the loss with respect to the
    /// network output) through a trace. Returns parameter gradients keyed like
    /// the weight store, and the gradient with respect to the network input.
    pub fn backward(&self, trace: &Trace<T>, grad_output: &Tensor<T>) -> Result<(WeightStore<T>, Tensor<T>)> {
        let nodes = self.graph.nodes();
        if grad_output.shape() != trace.output().shape() {
            return Err(Error::contract(
                "backward",
                format!(
                    "gradient shape {} but output shape {}",
                    grad_output.shape(),
                    trace.output().shape()
                ),
            ));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; nodes.len()];
        let mut grad_input: Option<Tensor<T>> = None;
        *grads.last_mut().unwrap() = Some(grad_output.clone());
        let mut pgrads = WeightStore::zeros(&self.graph);

        fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) -> Result<()> {
            *slot = Some(match slot.take() {
                None => g,
                Some(prev) => add(&prev, &g)?,
            });
            Ok(())
        }

        for idx in (0..nodes.len()).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &nodes[idx];
            let mut send = |port: Port, t: Tensor<T>| -> Result<()> {
                match port {
                    Port::Input => accumulate(&mut grad_input, t),
                    Port::Node(j) => accumulate(&mut grads[j], t),
                }
            };
            match node.op {
                Op::Conv { .. } => {
                    let k = self.kernels[idx].as_ref().unwrap();
                    let b = conv2d_backward(trace.value(node.inputs[0]), k, &g)?;
                    let p = pgrads.get_mut(&node.id).unwrap();
                    p.weights = b.grad_weights;
                    p.bias = b.grad_bias;
                    send(node.inputs[0], b.grad_input)?;
                }
                Op::Relu => {
                    let gi = relu_backward(trace.value(node.inputs[0]), &g)?;
                    send(node.inputs[0], gi)?;
                }
                Op::Concat => {
                    let mut start = 0;
                    for &p in &node.inputs {
                        let c = trace.value(p).shape().channels;
                        send(p, g.slice_channels(start, start + c)?)?;
                        start += c;
                    }
                }
                Op::ResidualAddInput => {
                    send(node.inputs[0], g.clone())?;
                    send(Port::Input, g)?;
                }
                Op::FullyConnected { .. } => {
                    let p = self.store.get(&node.id).unwrap();
                    let lg = linear_backward(trace.value(node.inputs[0]), &p.weights, &g)?;
                    *pgrads.get_mut(&node.id).unwrap() = Param {
                        dims: p.dims.clone(),
                        weights: lg.grad_weights,
                        bias: lg.grad_bias,
                    };
                    send(node.inputs[0], lg.grad_input)?;
                }
            }
        }
        let gi = grad_input.unwrap_or_else(|| Tensor::zeros(trace.input.shape()));
        Ok((pgrads, gi))
    }
}

/// One-shot forward evaluation of `graph` with `weights`.
pub fn forward<T: Scalar>(graph: &NetworkGraph, weights: &WeightStore<T>, input: &Tensor<T>) -> Result<Tensor<T>> {
    Model::new(graph.clone(), weights.clone())?.forward(input)
}

/// Convenience for 1-channel planes given as `[0, 1]` floats.
pub fn plane_tensor(h: usize, w: usize, data: Vec<f32>) -> Result<Tensor<f32>> {
    Tensor::new(Shape::new(1, h, w), data)
}
