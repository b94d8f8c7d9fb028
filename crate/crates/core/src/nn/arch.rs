//! Concrete network architectures: the inception restoration filter, the
//! VR-CNN and AR-CNN baselines, and the fully-connected intra predictor.

use super::graph::{GraphBuilder, IoShape, NetworkGraph, Port};
use crate::error::{Error, Result};

const ANY_SIZE_LUMA: IoShape = IoShape {
    channels: 1,
    spatial: None,
};

/// Widths of the inception filter. The defaults are the published network;
/// narrower variants exist for quick experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InceptionConfig {
    pub blocks: usize,
    pub pre_maps: usize,
    pub branch_maps: usize,
}

impl InceptionConfig {
    pub const fn new(blocks: usize) -> Self {
        Self {
            blocks,
            pre_maps: 64,
            branch_maps: 32,
        }
    }

    pub fn tag(&self) -> String {
        if self.pre_maps == 64 && self.branch_maps == 32 {
            format!("inception{}", self.blocks)
        } else {
            format!("inception{}-{}-{}", self.blocks, self.pre_maps, self.branch_maps)
        }
    }
}

/// Restoration filter with the default widths.
pub fn build_inception_filter(num_blocks: usize) -> NetworkGraph {
    build_inception(InceptionConfig::new(num_blocks))
}

/// Two 3x3 pre-processing convolutions, `blocks` inception blocks, one 3x3
/// output convolution, and a residual connection to the input.
///
/// Each block has three branches opened by a 1x1 convolution:
/// A stops there; B forks into parallel 1x3 and 3x1 convolutions; C runs a
/// 3x3 convolution and then forks the same way. The block output is
/// `concat(A, B, C)`, i.e. `5 * branch_maps` channels.
pub fn build_inception(cfg: InceptionConfig) -> NetworkGraph {
    let m = cfg.branch_maps;
    let mut b = GraphBuilder::new(cfg.tag(), ANY_SIZE_LUMA);
    let x = b.conv_relu("pre1", Port::Input, cfg.pre_maps, 3, 3);
    let mut x = b.conv_relu("pre2", x, cfg.pre_maps, 3, 3);
    for i in 1..=cfg.blocks {
        let p = format!("block{i}");
        let a = b.conv_relu(&format!("{p}.a1x1"), x, m, 1, 1);

        let bb = b.conv_relu(&format!("{p}.b1x1"), x, m, 1, 1);
        let b13 = b.conv_relu(&format!("{p}.b1x3"), bb, m, 1, 3);
        let b31 = b.conv_relu(&format!("{p}.b3x1"), bb, m, 3, 1);
        let bcat = b.concat(format!("{p}.b"), &[b13, b31]);

        let c = b.conv_relu(&format!("{p}.c1x1"), x, m, 1, 1);
        let c = b.conv_relu(&format!("{p}.c3x3"), c, m, 3, 3);
        let c13 = b.conv_relu(&format!("{p}.c1x3"), c, m, 1, 3);
        let c31 = b.conv_relu(&format!("{p}.c3x1"), c, m, 3, 1);
        let ccat = b.concat(format!("{p}.c"), &[c13, c31]);

        x = b.concat(format!("{p}.out"), &[a, bcat, ccat]);
    }
    let y = b.conv("post", x, 1, 3, 3);
    b.residual("residual", y);
    b.finish(ANY_SIZE_LUMA).expect("inception graph is well formed")
}

pub fn build_vrcnn() -> NetworkGraph {
    let mut b = GraphBuilder::new("vrcnn", ANY_SIZE_LUMA);
    let l1 = b.conv_relu("layer1", Port::Input, 64, 5, 5);
    let l2a = b.conv_relu("layer2.5x5", l1, 16, 5, 5);
    let l2b = b.conv_relu("layer2.3x3", l1, 32, 3, 3);
    let l2 = b.concat("layer2", &[l2a, l2b]);
    let l3a = b.conv_relu("layer3.3x3", l2, 16, 3, 3);
    let l3b = b.conv_relu("layer3.1x1", l2, 32, 1, 1);
    let l3 = b.concat("layer3", &[l3a, l3b]);
    let l4 = b.conv("layer4", l3, 1, 3, 3);
    b.residual("residual", l4);
    b.finish(ANY_SIZE_LUMA).expect("vrcnn graph is well formed")
}

pub fn build_arcnn() -> NetworkGraph {
    let mut b = GraphBuilder::new("arcnn", ANY_SIZE_LUMA);
    let x = b.conv_relu("extract", Port::Input, 64, 9, 9);
    let x = b.conv_relu("enhance", x, 32, 7, 7);
    let x = b.conv_relu("map", x, 16, 1, 1);
    b.conv("reconstruct", x, 1, 5, 5);
    b.finish(ANY_SIZE_LUMA).expect("arcnn graph is well formed")
}

/// Number of samples in the L-shaped causal context of an `n x n` block:
/// the `(n + k)` square ending at the block's bottom-right corner, minus the block.
pub const fn context_len(n: usize, k: usize) -> usize {
    (n + k) * (n + k) - n * n
}

/// Fully-connected predictor from the flattened context to an `n x n` block.
pub fn build_fc_predictor(n: usize, k: usize, hidden: &[usize]) -> Result<NetworkGraph> {
    if ![4, 8, 16, 32].contains(&n) || k == 0 || hidden.contains(&0) {
        return Err(Error::Invalid(format!(
            "predictor needs block size in {{4, 8, 16, 32}}, context width >= 1 and nonzero hidden sizes (got n={n}, k={k}, hidden={hidden:?})"
        )));
    }
    let input = IoShape {
        channels: context_len(n, k),
        spatial: Some((1, 1)),
    };
    let tag = format!(
        "fc{n}k{k}h{}",
        hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join("-")
    );
    let mut b = GraphBuilder::new(tag, input);
    let mut x = Port::Input;
    for (i, &h) in hidden.iter().enumerate() {
        let fc = b.fully_connected(format!("fc{}", i + 1), x, h);
        x = b.relu(format!("fc{}.relu", i + 1), fc);
    }
    b.fully_connected("out", x, n * n);
    b.finish(IoShape {
        channels: n * n,
        spatial: Some((1, 1)),
    })
}

/// Rebuilds a graph from its architecture tag (as stored in weight files).
pub fn graph_from_tag(tag: &str) -> Result<NetworkGraph> {
    let unknown = || Error::UnknownArchitecture(tag.to_string());
    match tag {
        "vrcnn" => return Ok(build_vrcnn()),
        "arcnn" => return Ok(build_arcnn()),
        _ => {}
    }
    if let Some(rest) = tag.strip_prefix("inception") {
        let parts: Vec<&str> = rest.split('-').collect();
        let nums: Vec<usize> = parts
            .iter()
            .map(|p| p.parse().map_err(|_| unknown()))
            .collect::<Result<_>>()?;
        let cfg = match nums[..] {
            [blocks] => InceptionConfig::new(blocks),
            [blocks, pre_maps, branch_maps] if pre_maps > 0 && branch_maps > 0 => InceptionConfig {
                blocks,
                pre_maps,
                branch_maps,
            },
            _ => return Err(unknown()),
        };
        return Ok(build_inception(cfg));
    }
    if let Some(rest) = tag.strip_prefix("fc") {
        let (n, rest) = rest.split_once('k').ok_or_else(unknown)?;
        let (k, hidden) = rest.split_once('h').ok_or_else(unknown)?;
        let n: usize = n.parse().map_err(|_| unknown())?;
        let k: usize = k.parse().map_err(|_| unknown())?;
        let hidden: Vec<usize> = if hidden.is_empty() {
            Vec::new()
        } else {
            hidden
                .split('-')
                .map(|h| h.parse().map_err(|_| unknown()))
                .collect::<Result<_>>()?
        };
        return build_fc_predictor(n, k, &hidden);
    }
    Err(unknown())
}
