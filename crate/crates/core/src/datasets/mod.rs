//! Dataset descriptions, synthetic benchmarks, forest-fire corpora and
//! feature selection.

mod sampling;
mod select;
mod spec;
pub mod synthetic;

pub use sampling::{
    build_corpus, forest_fire_sample, CorpusSource, ForestFireConfig, SampledCorpus, SizeRange,
    DEFAULT_BURN_PROBABILITY, DEFAULT_MAX_ATTEMPTS,
};
pub use select::{feature_select, SelectionMethod};
pub use spec::{DatasetSpec, Task};
pub use synthetic::{gen_ba3motif, gen_ba_shapes, gen_tree_motif, Motif, BA3_BASE_NODES, BA3_MOTIFS, SYNTHETIC_TYPE};
