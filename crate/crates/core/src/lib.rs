//! Zero-shot classification with fused class-name and description semantics.
//!
//! The crate covers the whole pipeline: word-vector lookup ([`wordvec`]),
//! description fetching and caching ([`llm_client`]), semantic fusion
//! ([`fusion`]), an embedding-family model ([`embed_zsl`]), a conditional
//! WGAN-GP feature generator ([`gen_zsl`]), and GZSL evaluation including
//! Borda-count comparison ([`evaluation`]). Everything trains on a small
//! reverse-mode autodiff engine ([`autodiff`]) with seeded randomness.

pub mod autodiff;
pub mod datasets;
pub mod embed_zsl;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod gen_zsl;
pub mod llm_client;
pub mod rng;
pub mod types;
pub mod wordvec;

pub use autodiff::{Graph, ParamStore, Tensor, Var};
pub use datasets::{ClassTable, FeatureSet, SplitSpec};
pub use embed_zsl::{EmbedClassifier, EmbedConfig, EmbedModel};
pub use error::{Error, ErrorKind, Result};
pub use evaluation::{Averaging, EvalReport, Predictor};
pub use fusion::{FusionParams, SemanticBundle, SemanticSet};
pub use gen_zsl::{GanConfig, SoftmaxClassifier, TrainedGan};
pub use llm_client::{DescriptionCache, EndpointConfig};
pub use types::{ClassId, Mode, Role, Variation};
pub use wordvec::WordVectorTable;
