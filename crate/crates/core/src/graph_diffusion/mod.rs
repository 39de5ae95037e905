//! Discrete denoising diffusion over graph structure: node types and binary
//! edges are noised toward their bucket marginals and recovered by a
//! graph-transformer denoiser. One model is trained per graph size.

mod extra;
mod model;
mod schedule;
mod state;
mod transformer;

pub use extra::{augment_extra_features, normalize_extra, EXTRA_FEATURES, SPECTRAL_FEATURES};
pub use model::{
    example_loss, forward_noise_graph, sample_graphs, train_graph_denoiser, GraphDenoiser,
    GraphDiffusionConfig, ModelBank, TransitionModel,
};
pub use schedule::{
    cosine_schedule, empirical_marginal, marginal_transition, CategoricalDiffusion, NoiseSchedule,
};
pub use state::DenseGraphState;
pub use transformer::{DenoiserOutput, GraphTransformer, TransformerCache};
