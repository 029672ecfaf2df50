use super::{check_text, Embedding, Encoder};
use crate::error::{Error, Result};

/// Seed mixed into every trigram hash ("graphtag" as little-endian bytes).
pub const HASH_SEED: u64 = u64::from_le_bytes(*b"graphtag");

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Character-trigram feature hashing encoder.
///
/// The scheme, fixed for identity `trigram-hash/1`:
///
/// 1. Lowercase the text, collapse runs of whitespace into one space and
///    pad with a single space on both ends.
/// 2. Slide a window of three Unicode scalar values over the result.
/// 3. Hash each trigram with 64-bit FNV-1a over `HASH_SEED` (8 bytes,
///    little-endian) followed by the trigram's UTF-8 bytes.
/// 4. Bucket is `hash % dim`; the top bit of the hash picks the sign
///    (set = -1). Accumulate ±1 per trigram.
/// 5. If every bucket cancels to zero, fall back to unsigned counts.
/// 6. L2-normalize.
#[derive(Debug, Clone)]
pub struct HashingEncoder {
    dim: usize,
    identity: String,
}

impl HashingEncoder {
    pub const DEFAULT_DIM: usize = 256;

    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("encoder dimension must be positive"));
        }
        Ok(HashingEncoder {
            dim,
            identity: format!("trigram-hash/1 dim={dim}"),
        })
    }

    fn trigram_hash(gram: &[char]) -> u64 {
        let mut h = FNV_OFFSET;
        let mut feed = |b: u8| {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        };
        for b in HASH_SEED.to_le_bytes() {
            feed(b);
        }
        let mut buf = [0u8; 4];
        for ch in gram {
            for b in ch.encode_utf8(&mut buf).bytes() {
                feed(b);
            }
        }
        h
    }
}

impl Default for HashingEncoder {
    fn default() -> Self {
        HashingEncoder::new(Self::DEFAULT_DIM).expect("default dim is positive")
    }
}

impl Encoder for HashingEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn identity(&self) -> &str {
        &self.identity
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        check_text(text)?;
        let normalized = text
            .to_lowercase()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        let chars: Vec<char> = format!(" {normalized} ").chars().collect();

        let mut signed = vec![0.0f64; self.dim];
        let mut unsigned = vec![0.0f64; self.dim];
        for gram in chars.windows(3) {
            let h = Self::trigram_hash(gram);
            let bucket = (h % self.dim as u64) as usize;
            signed[bucket] += if h >> 63 == 1 { -1.0 } else { 1.0 };
            unsigned[bucket] += 1.0;
        }
        let mut values = if signed.iter().any(|v| *v != 0.0) {
            signed
        } else {
            unsigned
        };
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        values.iter_mut().for_each(|v| *v /= norm);
        Embedding::new(values)
    }
}
