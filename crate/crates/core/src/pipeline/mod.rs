//! End-to-end orchestration: ingestion, batch tagging with graph feedback,
//! persistence and the HTTP service.

mod config;
mod engine;
mod report;
pub mod server;

pub use config::{
    Backends, CompletionConfig, EncoderConfig, GenerationConfig, KnowledgeConfig, PipelineConfig,
    RunConfig,
};
pub use engine::{Annotation, Engine, EngineBuilder, JsonlSink, ReportSink};
pub use report::{EntryStatus, ReportEntry, ReportLine, Summary, TaggingReport, Timings};
