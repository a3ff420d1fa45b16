//! IR2vec-style module embeddings: symbolic and flow-aware halves of 256
//! coordinates each, plus the three row normalizations.

mod cache;
mod encode;
mod normalize;
mod vocab;

use serde::{Deserialize, Serialize};

use crate::ir::IrModule;

pub use cache::{read_cache, write_cache, CacheError, CacheMeta};
pub use encode::{
    encode_flow_aware, encode_flow_aware_with, encode_function_symbolic, encode_symbolic, encode_symbolic_with,
    function_flow, Convergence, FlowConfig, FlowEncoding, Weights,
};
pub use normalize::{normalize, IndexScaler, Normalization, NormalizationStrategy, NormalizeError};
pub use vocab::{seed_vocabulary, SeedVocab};

pub const HALF_DIM: usize = 256;
pub const EMBED_DIM: usize = 2 * HALF_DIM;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub source_id: String,
    /// Set when the flow-aware fixed point hit its iteration cap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<Convergence>,
}

/// Embedding settings echoed into caches and reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub seed: u64,
    pub weights: Weights,
    pub flow: FlowConfig,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self { seed: 0, weights: Weights::default(), flow: FlowConfig::default() }
    }
}

pub fn embed(module: &IrModule, vocab: &SeedVocab) -> EmbeddingVector {
    embed_with(module, vocab, &Weights::default(), &FlowConfig::default(), "")
}

pub fn embed_with(module: &IrModule, vocab: &SeedVocab, w: &Weights, flow: &FlowConfig, source_id: &str) -> EmbeddingVector {
    let mut values = encode_symbolic_with(module, vocab, w);
    let fa = encode_flow_aware_with(module, vocab, w, flow);
    values.extend_from_slice(&fa.vector);
    EmbeddingVector {
        values,
        source_id: source_id.to_string(),
        warning: (!fa.status.converged()).then_some(fa.status),
    }
}
