//! Model sets shared by encoder and decoder, and their on-disk directory.
//!
//! A bank directory holds `bank.cfg` (a line `id=<0-255>`), one weight file
//! `qpNN.nnwt` per trained QP for the in-loop filter, and optionally
//! `intra.nnwt` with the neural intra predictor.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{context_len, graph_from_tag, load_weights, save_weights, Model, ModelBank, NetworkGraph, WeightStore};

/// Filter bank and intra predictor identified by a bank id written into
/// every bitstream header.
#[derive(Clone, Debug)]
pub struct ModelSet {
    pub id: u8,
    pub filter: Option<ModelBank>,
    pub predictor: Option<Model<f32>>,
}

impl ModelSet {
    pub fn empty(id: u8) -> Self {
        Self {
            id,
            filter: None,
            predictor: None,
        }
    }

    pub fn with_filter(mut self, bank: ModelBank) -> Self {
        self.filter = Some(bank);
        self
    }

    pub fn with_predictor(mut self, graph: NetworkGraph, weights: WeightStore<f32>) -> Result<Self> {
        self.predictor = Some(Model::new(graph, weights)?);
        Ok(self)
    }

    /// Filter model for `qp`, ready to run.
    pub fn filter_model(&self, qp: u8) -> Result<Model<f32>> {
        let bank = self.filter.as_ref().ok_or(Error::MissingModel {
            bank_id: self.id,
            what: "an in-loop filter bank",
        })?;
        Model::new(bank.graph().clone(), bank.select(qp).weights.clone())
    }

    /// Predictor and its context width for `n x n` blocks.
    pub fn predictor_for(&self, n: usize) -> Result<(&Model<f32>, usize)> {
        let model = self.predictor.as_ref().ok_or(Error::MissingModel {
            bank_id: self.id,
            what: "a neural intra predictor",
        })?;
        let g = model.graph();
        let len = g.input_shape().channels;
        let k = (1..=n).find(|&k| context_len(n, k) == len);
        match k {
            Some(k) if g.output_shape().channels == n * n => Ok((model, k)),
            _ => Err(Error::Invalid(format!(
                "predictor `{}` does not fit {n}x{n} blocks",
                g.arch()
            ))),
        }
    }

    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("bank.cfg"), format!("id={}\n", self.id))?;
        if let Some(bank) = &self.filter {
            for band in bank.bands() {
                save_weights(&band.weights, bank.graph(), dir.join(format!("qp{:02}.nnwt", band.trained_qp)))?;
            }
        }
        if let Some(p) = &self.predictor {
            save_weights(p.weights(), p.graph(), dir.join("intra.nnwt"))?;
        }
        Ok(())
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let cfg_path = dir.join("bank.cfg");
        let cfg = fs::read_to_string(&cfg_path)
            .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", cfg_path.display())))?;
        let mut id = None;
        for line in cfg.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            match line.split_once('=').map(|(k, v)| (k.trim(), v.trim())) {
                Some(("id", v)) => {
                    id = Some(
                        v.parse::<u8>()
                            .map_err(|_| Error::Invalid(format!("bank id `{v}` is not in 0..=255")))?,
                    )
                }
                _ => return Err(Error::Invalid(format!("unknown line in bank.cfg: `{line}`"))),
            }
        }
        let id = id.ok_or_else(|| Error::Invalid("bank.cfg has no id".into()))?;
        let mut set = ModelSet::empty(id);

        let mut entries: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        entries.sort();
        let mut filters = Vec::new();
        let mut graph: Option<NetworkGraph> = None;
        for name in entries {
            let Some(qp) = name
                .strip_prefix("qp")
                .and_then(|s| s.strip_suffix(".nnwt"))
                .and_then(|s| s.parse::<u8>().ok())
            else {
                continue;
            };
            let loaded = load_weights(dir.join(&name))?;
            let g = graph_from_tag(&loaded.arch)?;
            if let Some(prev) = &graph {
                if prev.arch() != g.arch() {
                    return Err(Error::Architecture {
                        expected: prev.arch().to_string(),
                        found: g.arch().to_string(),
                    });
                }
            }
            loaded.store.validate(&g)?;
            graph = Some(g);
            filters.push((qp, loaded.store));
        }
        if let Some(g) = graph {
            set.filter = Some(ModelBank::new(g, filters)?);
        }
        let intra = dir.join("intra.nnwt");
        if intra.exists() {
            let loaded = load_weights(&intra)?;
            let g = graph_from_tag(&loaded.arch)?;
            set = set.with_predictor(g, loaded.store)?;
        }
        Ok(set)
    }
}
