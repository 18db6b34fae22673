//! File formats, evaluation splits, scoring and rendering.

pub mod ingest;
pub mod metrics;
pub mod persist;
pub mod render;
pub mod split;

pub use ingest::{ingest, EdgeList, Ingested};
pub use metrics::{auc, evaluate, split_auc, AucReport};
pub use persist::{
    load_model, load_samples, save_model, save_samples, save_trace, NodeResolver, PosteriorSamples, SavedModel,
};
pub use render::{render_partition, RenderMode};
pub use split::{make_split, EvalSplit};
