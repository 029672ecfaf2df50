pub mod calibrate;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod genkit;
pub mod graph;
mod http;
pub mod jsonl;
pub mod limit;
pub mod pipeline;
pub mod synth;
pub mod types;

pub use error::{Error, Result, VertexKind};
