//! Dense embedding vectors and cosine similarity.

use serde::{Deserialize, Serialize};

/// A fixed-dimension real vector. Serialized as a plain array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> EmbeddingVector {
        EmbeddingVector(self.0.iter().map(|v| v * factor).collect())
    }

    /// Cosine similarity clamped to [-1, 1]. `None` when either side has zero
    /// norm or the dimensions differ.
    pub fn cosine(&self, other: &EmbeddingVector) -> Option<f64> {
        if self.dim() != other.dim() {
            return None;
        }
        let (na, nb) = (self.norm(), other.norm());
        if na == 0.0 || nb == 0.0 {
            return None;
        }
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        Some((dot / (na * nb)).clamp(-1.0, 1.0))
    }

    /// Arithmetic mean of equally sized vectors; `None` for an empty input.
    pub fn mean<'a>(vectors: impl IntoIterator<Item = &'a EmbeddingVector>) -> Option<EmbeddingVector> {
        let mut iter = vectors.into_iter();
        let first = iter.next()?;
        let mut sum = first.0.clone();
        let mut n = 1usize;
        for v in iter {
            if v.dim() != sum.len() {
                return None;
            }
            for (s, x) in sum.iter_mut().zip(&v.0) {
                *s += x;
            }
            n += 1;
        }
        Some(EmbeddingVector(sum.into_iter().map(|s| s / n as f64).collect()))
    }
}

impl From<Vec<f64>> for EmbeddingVector {
    fn from(v: Vec<f64>) -> Self {
        EmbeddingVector(v)
    }
}

/// Similarity scores are ordered at this resolution so that values differing
/// only by floating-point rounding compare as ties.
pub const SCORE_RESOLUTION: f64 = 1e-12;

/// Integer sort key for a score in [-1, 1] (or a product of two such scores).
pub fn score_key(score: f64) -> i64 {
    (score / SCORE_RESOLUTION).round() as i64
}
