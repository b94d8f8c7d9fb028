use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{make_filter_dataset, sample_contexts, ContextPair, PatchPair};
use super::optim::{accumulate, mse_loss, scale, zeros_like, Adam};
use crate::codec::Plane;
use crate::error::{Error, Result};
use crate::nn::{build_fc_predictor, build_inception, InceptionConfig, Model, ModelBank, NetworkGraph, WeightStore};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    /// QP of the training data (filter training).
    pub qp: u8,
    pub arch: InceptionConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 16,
            steps: 500,
            seed: 0,
            qp: 37,
            arch: InceptionConfig::new(2),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) || self.batch_size == 0 {
            return Err(Error::Invalid(format!(
                "learning rate must be > 0 and batch size >= 1 (got {} and {})",
                self.learning_rate, self.batch_size
            )));
        }
        if self.arch.pre_maps == 0 || self.arch.branch_maps == 0 {
            return Err(Error::Invalid("channel widths must be positive".into()));
        }
        Ok(())
    }

    pub fn graph(&self) -> NetworkGraph {
        build_inception(self.arch)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub weights: WeightStore<f32>,
    /// Mean batch loss before each update.
    pub losses: Vec<f64>,
}

/// One optimizer step over `batch` (input, target) pairs. Returns the mean loss.
fn train_step(
    model: &mut Model<f32>,
    adam: &mut Adam<f32>,
    batch: &[(&Tensor<f32>, &Tensor<f32>)],
) -> Result<f64> {
    let mut grads = zeros_like(model.weights());
    let mut total = 0.0;
    for (x, t) in batch {
        let trace = model.trace(x)?;
        let (loss, g) = mse_loss(trace.output(), t)?;
        total += loss;
        let (pg, _) = model.backward(&trace, &g)?;
        accumulate(&mut grads, &pg);
    }
    scale(&mut grads, 1.0 / batch.len() as f64);
    let mut w = model.weights().clone();
    adam.step(&mut w, &grads)?;
    model.set_weights(w)?;
    Ok(total / batch.len() as f64)
}

fn check_finite(step: usize, loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { step, loss })
    }
}

/// Mini-batch Adam on `(degraded, target)` pairs from Glorot-uniform weights.
/// Batches walk seeded shuffles of the dataset.
pub fn train_filter(dataset: &[PatchPair], graph: &NetworkGraph, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_filter_with(dataset, graph, cfg, |_, _| {})
}

pub fn train_filter_with(
    dataset: &[PatchPair],
    graph: &NetworkGraph,
    cfg: &TrainConfig,
    mut on_step: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Invalid("empty training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = WeightStore::xavier(graph, &mut rng);
    let mut model = Model::new(graph.clone(), init)?;
    let mut adam = Adam::new(cfg.learning_rate, model.weights());
    let mut order: Vec<usize> = Vec::new();
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size {
            if order.is_empty() {
                order = (0..dataset.len()).collect();
                order.shuffle(&mut rng);
            }
            let p = &dataset[order.pop().unwrap()];
            batch.push((&p.degraded, &p.target));
        }
        let loss = train_step(&mut model, &mut adam, &batch)?;
        check_finite(step, loss)?;
        on_step(step, loss);
        losses.push(loss);
    }
    Ok(TrainOutcome {
        weights: model.into_weights(),
        losses,
    })
}

/// Mean per-patch MSE of the filter output against the targets.
pub fn patch_mse(model: &Model<f32>, pairs: &[PatchPair]) -> Result<f64> {
    let mut total = 0.0;
    for p in pairs {
        total += mse_loss(&model.forward(&p.degraded)?, &p.target)?.0;
    }
    Ok(total / pairs.len().max(1) as f64)
}

/// Mean per-patch MSE of the unfiltered reconstruction.
pub fn baseline_mse(pairs: &[PatchPair]) -> f64 {
    let total: f64 = pairs
        .iter()
        .map(|p| mse_loss(&p.degraded, &p.target).map(|r| r.0).unwrap_or(f64::NAN))
        .sum();
    total / pairs.len().max(1) as f64
}

/// Trains the FC intra predictor on freshly sampled `(context, block)` pairs
/// each step.
pub fn train_fc_predictor(
    images: &[Plane],
    n: usize,
    k: usize,
    hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<(NetworkGraph, TrainOutcome)> {
    train_fc_predictor_with(images, n, k, hidden, cfg, |_, _| {})
}

pub fn train_fc_predictor_with(
    images: &[Plane],
    n: usize,
    k: usize,
    hidden: &[usize],
    cfg: &TrainConfig,
    mut on_step: impl FnMut(usize, f64),
) -> Result<(NetworkGraph, TrainOutcome)> {
    cfg.validate()?;
    let graph = build_fc_predictor(n, k, hidden)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = WeightStore::xavier(&graph, &mut rng);
    let mut model = Model::new(graph.clone(), init)?;
    let mut adam = Adam::new(cfg.learning_rate, model.weights());
    let mut losses = Vec::with_capacity(cfg.steps);
    // fail early on unusable images even with zero steps
    sample_contexts(images, n, k, 1, &mut ChaCha8Rng::seed_from_u64(0))?;
    for step in 0..cfg.steps {
        let pairs = sample_contexts(images, n, k, cfg.batch_size, &mut rng)?;
        let batch: Vec<_> = pairs.iter().map(|p| (&p.context, &p.block)).collect();
        let loss = train_step(&mut model, &mut adam, &batch)?;
        check_finite(step, loss)?;
        on_step(step, loss);
        losses.push(loss);
    }
    Ok((
        graph,
        TrainOutcome {
            weights: model.into_weights(),
            losses,
        },
    ))
}

/// Mean MSE of a predictor over context pairs.
pub fn predictor_mse(model: &Model<f32>, pairs: &[ContextPair]) -> Result<f64> {
    let mut total = 0.0;
    for p in pairs {
        total += mse_loss(&model.forward(&p.context)?, &p.block)?.0;
    }
    Ok(total / pairs.len().max(1) as f64)
}

/// One filter per QP, each trained on data coded at that QP, assembled with
/// midpoint banding. Band `qp` uses seed `cfg.seed + qp`.
pub fn build_model_bank(images: &[Plane], qps: &[u8], cfg: &TrainConfig) -> Result<(ModelBank, Vec<Vec<f64>>)> {
    build_model_bank_with(images, qps, cfg, |_, _, _| {})
}

pub fn build_model_bank_with(
    images: &[Plane],
    qps: &[u8],
    cfg: &TrainConfig,
    mut on_step: impl FnMut(u8, usize, f64),
) -> Result<(ModelBank, Vec<Vec<f64>>)> {
    let graph = cfg.graph();
    let mut models = Vec::with_capacity(qps.len());
    let mut curves = Vec::with_capacity(qps.len());
    for &qp in qps {
        let data = make_filter_dataset(images, qp)?;
        let band_cfg = TrainConfig {
            qp,
            seed: cfg.seed.wrapping_add(qp as u64),
            ..cfg.clone()
        };
        let out = train_filter_with(&data, &graph, &band_cfg, |s, l| on_step(qp, s, l))?;
        models.push((qp, out.weights));
        curves.push(out.losses);
    }
    Ok((ModelBank::new(graph, models)?, curves))
}

/// Writes `step,loss` rows.
pub fn write_loss_csv(path: impl AsRef<Path>, losses: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "loss"])?;
    for (i, l) in losses.iter().enumerate() {
        w.write_record([i.to_string(), format!("{l:.9e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Progress line every `every` steps.
pub fn log_progress(out: &mut impl Write, label: &str, step: usize, loss: f64, every: usize) {
    if every > 0 && (step % every == 0) {
        let _ = writeln!(out, "{label} step {step} loss {loss:.6e}");
    }
}
