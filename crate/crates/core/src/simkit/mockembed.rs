//! Hash-based text embeddings for offline runs.
//!
//! Character trigrams are feature-hashed into a fixed-width vector, so texts
//! that share wording land near each other while unrelated texts spread out.
//! No vocabulary, no state, identical text always embeds identically.

use sha2::{Digest, Sha256};

use super::SimError;
use crate::predict::{EmbeddingClient, TransportError};

/// Feature-hashing embedder over lowercased character trigrams.
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<HashEmbedder, SimError> {
        if dim < 2 {
            return Err(SimError::BadEmbedDim(dim));
        }
        Ok(HashEmbedder { dim, seed })
    }

    fn slot(&self, trigram: &[char]) -> (usize, f64) {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        for ch in trigram {
            let mut buf = [0u8; 4];
            hasher.update(ch.encode_utf8(&mut buf).as_bytes());
        }
        let digest = hasher.finalize();
        let bits = u64::from_le_bytes(digest[..8].try_into().expect("8 byte prefix"));
        let index = (bits % self.dim as u64) as usize;
        let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
        (index, sign)
    }
}

impl EmbeddingClient for HashEmbedder {
    fn tag(&self) -> &str {
        "mock-hash-embedder"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, TransportError> {
        let chars: Vec<char> = text.to_lowercase().chars().collect();
        let mut v = vec![0.0; self.dim];
        if chars.len() < 3 {
            v[0] = 1.0;
            return Ok(v);
        }
        for window in chars.windows(3) {
            let (index, sign) = self.slot(window);
            v[index] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        } else {
            v[0] = 1.0;
        }
        Ok(v)
    }
}
