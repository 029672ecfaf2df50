//! Text embeddings and cosine similarity.
//!
//! [`Encoder`] is the backend abstraction. [`HashingEncoder`] is the built-in
//! offline reference backend, [`RemoteEncoder`] speaks the HTTP embedding
//! protocol and [`LookupEncoder`] pins exact vectors for fixtures.

mod lookup;
mod reference;
mod remote;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lookup::LookupEncoder;
pub use reference::{HashingEncoder, HASH_SEED};
pub use remote::RemoteEncoder;

/// A finite, non-zero vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding {
    values: Vec<f64>,
    norm: f64,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("embedding must have positive dimension"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("embedding entry {i} is not finite")));
        }
        let norm = l2_norm(&values);
        if norm == 0.0 {
            return Err(Error::invalid("zero embedding"));
        }
        Ok(Embedding { values, norm })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Embedding::new(values)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Self {
        e.values
    }
}

fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Cosine similarity clamped to `[-1, 1]`. Symmetric bit-for-bit.
pub fn cosine(u: &Embedding, v: &Embedding) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            u.dim(),
            v.dim()
        )));
    }
    Ok(cosine_unchecked(u, v))
}

pub(crate) fn cosine_unchecked(u: &Embedding, v: &Embedding) -> f64 {
    debug_assert_eq!(u.dim(), v.dim());
    let dot: f64 = u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
    // Adding zero folds -0.0 into 0.0 so orthogonal pairs tie by id.
    (dot / (u.norm * v.norm)).clamp(-1.0, 1.0) + 0.0
}

/// Text-to-vector backend. Implementations must be deterministic for a
/// fixed [`identity`](Encoder::identity) and safe to call concurrently.
pub trait Encoder: Send + Sync {
    fn dim(&self) -> usize;

    /// Backend name and version.
    fn identity(&self) -> &str;

    fn embed(&self, text: &str) -> Result<Embedding>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

pub(crate) fn check_text(text: &str) -> Result<()> {
    if text.trim().is_empty() {
        return Err(Error::invalid("cannot embed empty text"));
    }
    Ok(())
}
