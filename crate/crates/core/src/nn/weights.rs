//! Per-node parameters and the `NNWT` weight file.
//!
//! File layout (little-endian, no padding):
//!
//! ```text
//! "NNWT" | version u32 = 1 | tag_len u16 | tag utf8 | node_count u32
//! per node: id_len u16 | id utf8 | rank u8 | dims u32 * rank
//!           | weights f32 * prod(dims) | bias_len u32 | bias f32 * bias_len
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;

use super::graph::NetworkGraph;
use crate::error::{Error, Result};
use crate::tensor::Scalar;

pub const WEIGHT_MAGIC: [u8; 4] = *b"NNWT";
pub const WEIGHT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T = f32> {
    pub dims: Vec<usize>,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Param<T> {
    pub fn zeros(dims: Vec<usize>, bias_len: usize) -> Self {
        let n = dims.iter().product();
        Self {
            dims,
            weights: vec![T::zero(); n],
            bias: vec![T::zero(); bias_len],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightStore<T = f32> {
    params: BTreeMap<String, Param<T>>,
}

impl<T> Default for WeightStore<T> {
    fn default() -> Self {
        Self {
            params: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> WeightStore<T> {
    pub fn zeros(graph: &NetworkGraph) -> Self {
        let params = graph
            .param_nodes()
            .map(|n| {
                let (dims, bias) = n.op.param_dims().unwrap();
                (n.id.clone(), Param::zeros(dims, bias))
            })
            .collect();
        Self { params }
    }

    /// Glorot-uniform weights, zero biases. Nodes are visited in graph order so
    /// a given RNG state always yields the same store.
    pub fn xavier<R: Rng>(graph: &NetworkGraph, rng: &mut R) -> Self {
        let mut store = Self::zeros(graph);
        for node in graph.param_nodes() {
            let (dims, _) = node.op.param_dims().unwrap();
            let receptive: usize = dims[2..].iter().product();
            let fan_in = dims[1] * receptive;
            let fan_out = dims[0] * receptive;
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let p = store.params.get_mut(&node.id).unwrap();
            for w in &mut p.weights {
                *w = T::from_f64(rng.gen_range(-a..a));
            }
        }
        store
    }

    pub fn get(&self, id: &str) -> Option<&Param<T>> {
        self.params.get(id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut Param<T>> {
        self.params.get_mut(id)
    }

    pub fn insert(&mut self, id: impl Into<String>, param: Param<T>) {
        self.params.insert(id.into(), param);
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Entries in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param<T>)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn param_count(&self) -> usize {
        self.params.values().map(Param::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> WeightStore<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from_f64(x.as_f64())).collect();
        WeightStore {
            params: self
                .params
                .iter()
                .map(|(k, p)| {
                    (
                        k.clone(),
                        Param {
                            dims: p.dims.clone(),
                            weights: conv(&p.weights),
                            bias: conv(&p.bias),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Every parameterized node has exactly one entry of matching shape.
    pub fn validate(&self, graph: &NetworkGraph) -> Result<()> {
        let mut expected = 0;
        for node in graph.param_nodes() {
            expected += 1;
            let (dims, bias) = node.op.param_dims().unwrap();
            let p = self
                .params
                .get(&node.id)
                .ok_or_else(|| Error::MissingWeights(node.id.clone()))?;
            let n: usize = dims.iter().product();
            if p.dims != dims || p.bias.len() != bias || p.weights.len() != n {
                let mut found = p.dims.clone();
                found.push(p.bias.len());
                let mut want = dims;
                want.push(bias);
                return Err(Error::WeightShape {
                    node: node.id.clone(),
                    expected: want,
                    found,
                });
            }
        }
        if expected != self.params.len() {
            let extra = self
                .params
                .keys()
                .find(|k| graph.node(k).is_none())
                .cloned()
                .unwrap_or_default();
            return Err(Error::contract(
                "weight_store",
                format!("entry `{extra}` does not belong to graph `{}`", graph.arch()),
            ));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params
            .values()
            .all(|p| p.weights.iter().chain(&p.bias).all(|v| v.is_finite()))
    }
}

/// A weight file's contents: architecture tag plus parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedWeights {
    pub arch: String,
    pub store: WeightStore<f32>,
}

pub fn encode_weights(store: &WeightStore<f32>, graph: &NetworkGraph) -> Result<Vec<u8>> {
    store.validate(graph)?;
    let mut out = Vec::new();
    out.extend_from_slice(&WEIGHT_MAGIC);
    out.extend_from_slice(&WEIGHT_VERSION.to_le_bytes());
    put_str(&mut out, graph.arch())?;
    let nodes: Vec<_> = graph.param_nodes().collect();
    out.extend_from_slice(&(nodes.len() as u32).to_le_bytes());
    for node in nodes {
        let p = store.get(&node.id).unwrap();
        put_str(&mut out, &node.id)?;
        out.push(p.dims.len() as u8);
        for &d in &p.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for w in &p.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&(p.bias.len() as u32).to_le_bytes());
        for b in &p.bias {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    Ok(out)
}

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u16::try_from(s.len()).map_err(|_| Error::Invalid(format!("string too long: {s}")))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: impl FnOnce() -> String) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated(what()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: impl FnOnce() -> String) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: impl FnOnce() -> String) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: impl FnOnce() -> String) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: impl Fn() -> String) -> Result<String> {
        let n = self.u16(&what)? as usize;
        let bytes = self.take(n, &what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::BadHeader(format!("{} is not UTF-8", what())))
    }

    fn floats(&mut self, n: usize, what: impl FnOnce() -> String) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::Truncated("float array".into()))?, what)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<LoadedWeights> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, || "magic".into())?.try_into().unwrap();
    if magic != WEIGHT_MAGIC {
        return Err(Error::BadMagic {
            expected: WEIGHT_MAGIC,
            found: magic,
        });
    }
    let version = r.u32(|| "version".into())?;
    if version != WEIGHT_VERSION {
        return Err(Error::Version(version));
    }
    let arch = r.string(|| "architecture tag".into())?;
    let count = r.u32(|| "node count".into())?;
    let mut store = WeightStore::default();
    for i in 0..count {
        let id = r.string(|| format!("id of node {i}"))?;
        let layer = |part: &str| {
            let id = id.clone();
            let part = part.to_string();
            move || format!("layer `{id}` {part}")
        };
        let rank = r.u8(layer("rank"))? as usize;
        let dims = (0..rank)
            .map(|_| r.u32(layer("dims")).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let n = n.ok_or_else(|| Error::BadHeader(format!("layer `{id}` dims overflow")))?;
        let weights = r.floats(n, layer("weights"))?;
        let bias_len = r.u32(layer("bias length"))? as usize;
        let bias = r.floats(bias_len, layer("bias"))?;
        store.insert(id, Param { dims, weights, bias });
    }
    if r.pos != bytes.len() {
        return Err(Error::BadHeader(format!(
            "{} trailing bytes after the last layer",
            bytes.len() - r.pos
        )));
    }
    Ok(LoadedWeights { arch, store })
}

pub fn save_weights(store: &WeightStore<f32>, graph: &NetworkGraph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_weights(store, graph)?)?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<LoadedWeights> {
    decode_weights(&fs::read(path)?)
}

/// Loads a file and checks it against `graph` (tag and every shape).
pub fn load_weights_for(path: impl AsRef<Path>, graph: &NetworkGraph) -> Result<WeightStore<f32>> {
    let loaded = load_weights(path)?;
    if loaded.arch != graph.arch() {
        return Err(Error::Architecture {
            expected: graph.arch().to_string(),
            found: loaded.arch,
        });
    }
    loaded.store.validate(graph)?;
    Ok(loaded.store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::arch::{build_inception_filter, build_vrcnn};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = build_inception_filter(1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = WeightStore::<f32>::xavier(&g, &mut rng);
        store.get_mut("post").unwrap().bias[0] = -0.0;
        store.get_mut("pre1").unwrap().bias[3] = f32::MIN_POSITIVE / 4.0;
        let bytes = encode_weights(&store, &g).unwrap();
        let back = decode_weights(&bytes).unwrap();
        assert_eq!(back.arch, "inception1");
        for (id, p) in store.iter() {
            let q = back.store.get(id).unwrap();
            assert_eq!(p.dims, q.dims);
            let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&p.weights), bits(&q.weights));
            assert_eq!(bits(&p.bias), bits(&q.bias));
        }
    }

    #[test]
    fn header_layout() {
        let g = build_vrcnn();
        let bytes = encode_weights(&WeightStore::zeros(&g), &g).unwrap();
        assert_eq!(&bytes[..4], b"NNWT");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u16::from_le_bytes(bytes[8..10].try_into().unwrap()), 5);
        assert_eq!(&bytes[10..15], b"vrcnn");
        assert_eq!(u32::from_le_bytes(bytes[15..19].try_into().unwrap()), 6);
        // 4 + 4 + 2 + 5 + 4 header, then per node: 2 + id + 1 + 16 + 4 * (w + b) + 4
        let ids: usize = g.param_nodes().map(|n| n.id.len()).sum();
        let floats = g.count_parameters(crate::nn::ParamConvention::WithBias);
        assert_eq!(bytes.len(), 19 + 6 * (2 + 1 + 16 + 4) + ids + 4 * floats);
    }

    #[test]
    fn distinct_errors() {
        let g = build_inception_filter(0);
        let bytes = encode_weights(&WeightStore::zeros(&g), &g).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_weights(&bad), Err(Error::BadMagic { .. })));

        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(decode_weights(&bad), Err(Error::Version(2))));

        // cut inside the second layer's weight data
        let cut = 4 + 4 + 2 + 10 + 4 + (2 + 4 + 1 + 16 + 4 * 576 + 4 + 4 * 64) + 30;
        match decode_weights(&bytes[..cut]) {
            Err(Error::Truncated(what)) => assert!(what.contains("pre2"), "{what}"),
            other => panic!("expected truncation, got {other:?}"),
        }

        let other = build_inception_filter(1);
        let mut wrong = WeightStore::<f32>::zeros(&other);
        wrong.get_mut("post").unwrap().dims = vec![1, 64, 3, 3];
        assert!(matches!(wrong.validate(&other), Err(Error::WeightShape { .. })));
        let mut missing = WeightStore::<f32>::zeros(&other);
        missing.params.remove("block1.c3x3");
        assert!(matches!(missing.validate(&other), Err(Error::MissingWeights(_))));
    }

    #[test]
    fn load_for_checks_shapes_against_graph() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.nnwt");
        let g = build_inception_filter(0);
        save_weights(&WeightStore::zeros(&g), &g, &path).unwrap();
        assert!(load_weights_for(&path, &g).is_ok());
        assert!(matches!(
            load_weights_for(&path, &build_inception_filter(1)),
            Err(Error::Architecture { .. })
        ));
    }
}
