//! Dataset derivation and gradient-descent training of the filters and the
//! intra predictor.

pub mod dataset;
pub mod optim;
pub mod trainer;

pub use dataset::{
    context_at, make_filter_dataset, read_manifest, sample_contexts, to_unit, unit_vector, ContextPair, PatchPair,
};
pub use optim::{mse_loss, Adam};
pub use trainer::{
    baseline_mse, build_model_bank, build_model_bank_with, patch_mse, predictor_mse, train_fc_predictor,
    train_fc_predictor_with, train_filter, train_filter_with, write_loss_csv, TrainConfig, TrainOutcome,
};
