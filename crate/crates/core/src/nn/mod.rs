//! Network graphs, weights and inference.

pub mod arch;
pub mod bank;
pub mod forward;
pub mod graph;
pub mod vectors;
pub mod weights;

pub use arch::{
    build_arcnn, build_fc_predictor, build_inception, build_inception_filter, build_vrcnn, context_len,
    graph_from_tag, InceptionConfig,
};
pub use bank::{band_ranges, select_model, Band, ModelBank, MAX_QP};
pub use forward::{forward, Model, Trace};
pub use vectors::{decode_vectors, encode_vectors, load_vectors, max_vector_deviation, save_vectors, VectorCase};
pub use graph::{validate, GraphBuilder, IoShape, NetworkGraph, Node, Op, ParamConvention, Port};
pub use weights::{
    decode_weights, encode_weights, load_weights, load_weights_for, save_weights, LoadedWeights, Param,
    WeightStore,
};
