use std::collections::HashMap;
use std::sync::Arc;

use super::{check_text, Embedding, Encoder};
use crate::error::{Error, Result};

/// Encoder with pinned vectors for exact texts, delegating everything else
/// to an optional fallback. Used to plant similarities in fixtures.
#[derive(Clone)]
pub struct LookupEncoder {
    dim: usize,
    identity: String,
    table: HashMap<String, Embedding>,
    fallback: Option<Arc<dyn Encoder>>,
}

impl LookupEncoder {
    pub fn new(dim: usize) -> Self {
        LookupEncoder {
            dim,
            identity: format!("lookup/1 dim={dim}"),
            table: HashMap::new(),
            fallback: None,
        }
    }

    pub fn with_fallback(mut self, fallback: Arc<dyn Encoder>) -> Result<Self> {
        if fallback.dim() != self.dim {
            return Err(Error::invalid("fallback encoder dimension differs"));
        }
        self.identity = format!("lookup/1 dim={} fallback={}", self.dim, fallback.identity());
        self.fallback = Some(fallback);
        Ok(self)
    }

    pub fn insert(&mut self, text: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let embedding = Embedding::new(values)?;
        if embedding.dim() != self.dim {
            return Err(Error::invalid(format!(
                "expected dimension {}, got {}",
                self.dim,
                embedding.dim()
            )));
        }
        self.table.insert(text.into(), embedding);
        Ok(())
    }

    pub fn with(mut self, text: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.insert(text, values)?;
        Ok(self)
    }
}

impl Encoder for LookupEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn identity(&self) -> &str {
        &self.identity
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        check_text(text)?;
        if let Some(e) = self.table.get(text) {
            return Ok(e.clone());
        }
        match &self.fallback {
            Some(f) => f.embed(text),
            None => Err(Error::invalid(format!("no pinned vector for `{text}`"))),
        }
    }
}
