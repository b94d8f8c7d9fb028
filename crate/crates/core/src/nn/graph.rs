use std::fmt;

use crate::error::{Error, Result};

/// Where a node reads a value from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Port {
    Input,
    Node(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Conv {
        in_ch: usize,
        out_ch: usize,
        kh: usize,
        kw: usize,
    },
    Relu,
    Concat,
    /// Adds the graph input to the single producer (residual learning).
    ResidualAddInput,
    FullyConnected {
        in_len: usize,
        out_len: usize,
    },
}

impl Op {
    pub fn kind(&self) -> &'static str {
        match self {
            Op::Conv { .. } => "conv",
            Op::Relu => "relu",
            Op::Concat => "concat",
            Op::ResidualAddInput => "residual_add_input",
            Op::FullyConnected { .. } => "fully_connected",
        }
    }

    /// Weight dims (`[out, in, kh, kw]` or `[out, in]`) and bias length of
    /// parameterized ops.
    pub fn param_dims(&self) -> Option<(Vec<usize>, usize)> {
        match *self {
            Op::Conv {
                in_ch,
                out_ch,
                kh,
                kw,
            } => Some((vec![out_ch, in_ch, kh, kw], out_ch)),
            Op::FullyConnected { in_len, out_len } => Some((vec![out_len, in_len], out_len)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub id: String,
    pub op: Op,
    pub inputs: Vec<Port>,
    /// Channels (or vector length for fully-connected nodes) produced.
    pub channels: usize,
}

/// Declared tensor geometry of a graph input or output. `None` spatial size
/// means any `h x w` is accepted (fully convolutional).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IoShape {
    pub channels: usize,
    pub spatial: Option<(usize, usize)>,
}

impl fmt::Display for IoShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.spatial {
            Some((h, w)) => write!(f, "({}, {h}, {w})", self.channels),
            None => write!(f, "({}, h, w)", self.channels),
        }
    }
}

/// Acyclic op graph. Nodes are stored in evaluation order: every input of a
/// node is either the graph input or an earlier node. The last node is the
/// output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkGraph {
    arch: String,
    nodes: Vec<Node>,
    input: IoShape,
    output: IoShape,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamConvention {
    WithBias,
    WithoutBias,
}

impl NetworkGraph {
    pub fn arch(&self) -> &str {
        &self.arch
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn input_shape(&self) -> IoShape {
        self.input
    }

    pub fn output_shape(&self) -> IoShape {
        self.output
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Nodes that own weights, in evaluation order.
    pub fn param_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.op.param_dims().is_some())
    }

    pub fn count_parameters(&self, convention: ParamConvention) -> usize {
        self.param_nodes()
            .map(|n| {
                let (dims, bias) = n.op.param_dims().unwrap();
                let w: usize = dims.iter().product();
                match convention {
                    ParamConvention::WithBias => w + bias,
                    ParamConvention::WithoutBias => w,
                }
            })
            .sum()
    }

    pub fn bias_count(&self) -> usize {
        self.param_nodes().map(|n| n.op.param_dims().unwrap().1).sum()
    }

    pub fn residual_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.op == Op::ResidualAddInput)
            .count()
    }

    fn channels_of(&self, port: Port) -> usize {
        match port {
            Port::Input => self.input.channels,
            Port::Node(i) => self.nodes[i].channels,
        }
    }
}

/// Incremental graph construction with channel bookkeeping.
pub struct GraphBuilder {
    graph: NetworkGraph,
}

impl GraphBuilder {
    pub fn new(arch: impl Into<String>, input: IoShape) -> Self {
        Self {
            graph: NetworkGraph {
                arch: arch.into(),
                nodes: Vec::new(),
                input,
                output: input,
            },
        }
    }

    fn push(&mut self, id: String, op: Op, inputs: Vec<Port>, channels: usize) -> Port {
        debug_assert!(self.graph.node(&id).is_none(), "duplicate node id {id}");
        self.graph.nodes.push(Node {
            id,
            op,
            inputs,
            channels,
        });
        Port::Node(self.graph.nodes.len() - 1)
    }

    pub fn channels(&self, port: Port) -> usize {
        self.graph.channels_of(port)
    }

    pub fn conv(&mut self, id: impl Into<String>, from: Port, out_ch: usize, kh: usize, kw: usize) -> Port {
        let in_ch = self.channels(from);
        self.push(
            id.into(),
            Op::Conv {
                in_ch,
                out_ch,
                kh,
                kw,
            },
            vec![from],
            out_ch,
        )
    }

    pub fn relu(&mut self, id: impl Into<String>, from: Port) -> Port {
        let ch = self.channels(from);
        self.push(id.into(), Op::Relu, vec![from], ch)
    }

    /// Convolution followed by a ReLU node named `<id>.relu`.
    pub fn conv_relu(&mut self, id: &str, from: Port, out_ch: usize, kh: usize, kw: usize) -> Port {
        let c = self.conv(id, from, out_ch, kh, kw);
        self.relu(format!("{id}.relu"), c)
    }

    pub fn concat(&mut self, id: impl Into<String>, from: &[Port]) -> Port {
        let ch = from.iter().map(|&p| self.channels(p)).sum();
        self.push(id.into(), Op::Concat, from.to_vec(), ch)
    }

    pub fn residual(&mut self, id: impl Into<String>, from: Port) -> Port {
        let ch = self.channels(from);
        self.push(id.into(), Op::ResidualAddInput, vec![from], ch)
    }

    pub fn fully_connected(&mut self, id: impl Into<String>, from: Port, out_len: usize) -> Port {
        let in_len = self.channels(from);
        self.push(id.into(), Op::FullyConnected { in_len, out_len }, vec![from], out_len)
    }

    pub fn finish(mut self, output: IoShape) -> Result<NetworkGraph> {
        self.graph.output = output;
        validate(&self.graph)?;
        Ok(self.graph)
    }
}

/// Structural checks: topological order, channel agreement, residual shape.
pub fn validate(graph: &NetworkGraph) -> Result<()> {
    let bad = |msg: String| Err(Error::contract("network_graph", msg));
    if graph.nodes.is_empty() {
        return bad("graph has no nodes".into());
    }
    for (idx, node) in graph.nodes.iter().enumerate() {
        for &p in &node.inputs {
            if let Port::Node(j) = p {
                if j >= idx {
                    return bad(format!("node `{}` reads a later node (cycle)", node.id));
                }
            }
        }
        let in_ch: Vec<usize> = node.inputs.iter().map(|&p| graph.channels_of(p)).collect();
        let ok = match node.op {
            Op::Conv { in_ch: c, out_ch, .. } => in_ch == [c] && node.channels == out_ch,
            Op::Relu => in_ch.len() == 1 && node.channels == in_ch[0],
            Op::Concat => !in_ch.is_empty() && node.channels == in_ch.iter().sum::<usize>(),
            Op::ResidualAddInput => {
                in_ch.len() == 1
                    && in_ch[0] == graph.input.channels
                    && node.channels == in_ch[0]
            }
            Op::FullyConnected { in_len, out_len } => {
                // The producer's full tensor is flattened; its length is
                // checked at evaluation time when spatial size is known.
                in_ch.len() == 1 && node.channels == out_len && in_len > 0
            }
        };
        if !ok {
            return bad(format!(
                "node `{}` ({}) has inconsistent channels: inputs {in_ch:?}, produces {}",
                node.id,
                node.op.kind(),
                node.channels
            ));
        }
    }
    if graph.nodes.last().unwrap().channels != graph.output.channels {
        return bad("last node does not match the declared output".into());
    }
    Ok(())
}
