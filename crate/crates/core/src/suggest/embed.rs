use serde::{Deserialize, Serialize};

use super::SuggestError;
use crate::text::fold_tokens;
use crate::vector::EmbeddingVector;

pub const DEFAULT_EMBEDDING_DIM: usize = 64;

/// Text embedding used for thread labels and citation contexts.
/// Implementations must be deterministic for a fixed configuration.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> EmbeddingVector;
}

/// Hashed bag of words: token counts bucketed by a seeded FNV-1a hash, then
/// L2-normalized. Text with no tokens maps to the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HashingEmbedder {
    dim: usize,
    seed: u64,
}

impl HashingEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashingEmbedder { dim, seed }
    }

    fn bucket(&self, token: &str) -> usize {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.seed;
        for b in token.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        (h % self.dim as u64) as usize
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(DEFAULT_EMBEDDING_DIM, 0)
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn name(&self) -> &str {
        "hashing"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> EmbeddingVector {
        let mut v = vec![0.0; self.dim];
        for tok in fold_tokens(text) {
            v[self.bucket(&tok)] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        EmbeddingVector(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub provider: String,
    pub dim: usize,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig { provider: "hashing".into(), dim: DEFAULT_EMBEDDING_DIM, seed: 0 }
    }
}

impl EmbeddingConfig {
    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>, SuggestError> {
        match self.provider.as_str() {
            "hashing" if self.dim > 0 => Ok(Box::new(HashingEmbedder::new(self.dim, self.seed))),
            other => Err(SuggestError::UnknownProvider(format!("{other} (dim {})", self.dim))),
        }
    }
}
