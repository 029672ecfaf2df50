//! `graphtag` command-line front end.
//!
//! State lives in a directory (`--state`, default `.graphtag`) holding the
//! tag repository (`tags.jsonl`) and the graph snapshot (`graph.snapshot`).
//! Every mutating subcommand loads it, applies its change and writes it
//! back.

mod state;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use graphtag_core::calibrate::{export_confidence_dataset, ConfidenceExample};
use graphtag_core::eval::{add_relative_improvement, evaluate, EvalRecord, MetricSpec, RiPair};
use graphtag_core::genkit::{export_sft, SftExample};
use graphtag_core::jsonl;
use graphtag_core::pipeline::{server, Annotation, Engine, JsonlSink, PipelineConfig, ReportSink};
use graphtag_core::types::Content;
use graphtag_core::{Error, Result};
use log::info;

use state::State;

#[derive(Parser)]
#[command(
    name = "graphtag",
    version,
    about = "Graph-recall, LLM-generated and calibrated content tagging"
)]
struct Cli {
    /// Directory holding the tag repository and graph snapshot.
    #[arg(
        long,
        global = true,
        default_value = ".graphtag",
        env = "GRAPHTAG_STATE"
    )]
    state: PathBuf,

    /// Pipeline configuration (TOML).
    #[arg(long, global = true, env = "GRAPHTAG_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add tags from a JSONL file to the repository and graph.
    IngestTags { file: PathBuf },

    /// Add historical contents, optionally with confirmed tags.
    IngestContents {
        file: PathBuf,
        /// JSONL of `{"content": id, "tags": [ids]}`.
        #[arg(long)]
        annotations: Option<PathBuf>,
    },

    /// Tag new contents and write a JSONL report.
    Tag {
        contents: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        parallelism: Option<usize>,
        /// Record per-stage timings in the report.
        #[arg(long)]
        timings: bool,
    },

    /// Compute metrics over judged results.
    Eval {
        judged: PathBuf,
        /// Comma-separated, e.g. `acc@1,acc@3,coverage@1,prf,right,hr@3`.
        #[arg(long, default_value = "acc@1,acc@3,coverage@1")]
        metrics: String,
        /// JSONL of `{"metric", "baseline"}` for relative improvement.
        #[arg(long)]
        ri_pairs: Option<PathBuf>,
    },

    /// Export supervised fine-tuning records.
    ExportSft {
        examples: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },

    /// Export Yes/No confidence training records.
    ExportConfidence {
        examples: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },

    /// Copy the graph snapshot out of, or into, the state directory.
    Snapshot {
        #[command(subcommand)]
        action: SnapshotAction,
    },

    /// Serve the HTTP API until interrupted.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Subcommand)]
enum SnapshotAction {
    Save {
        file: PathBuf,
    },
    /// Validate a snapshot and adopt it as the current graph.
    Load {
        file: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let mut config = match path {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    config.apply_process_env();
    config.validate()?;
    Ok(config)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(cli.config.as_deref())?;
    let state = State::new(&cli.state);
    match cli.command {
        Command::IngestTags { file } => {
            let engine = state.open(&config)?;
            let n = engine.ingest_tags_file(&file)?;
            state.save(&engine)?;
            println!("ingested {n} tags ({} total)", engine.repository().len());
        }
        Command::IngestContents { file, annotations } => {
            let engine = state.open(&config)?;
            let contents: Vec<Content> = jsonl::read_file(&file)?;
            let annotations: Vec<Annotation> = match annotations {
                Some(p) => jsonl::read_file(p)?,
                None => Vec::new(),
            };
            let n = engine.ingest_contents(contents, &annotations)?;
            state.save(&engine)?;
            println!(
                "ingested {n} contents with {} annotations",
                annotations.len()
            );
        }
        Command::Tag {
            contents,
            out,
            parallelism,
            timings,
        } => {
            if let Some(p) = parallelism {
                config.pipeline.parallelism = p;
            }
            config.pipeline.timings |= timings;
            let engine = state.open(&config)?;
            let source = contents.display().to_string();
            let input = BufReader::new(File::open(&contents)?);
            let mut sink = CheckpointSink {
                inner: JsonlSink::new(create(&out)?),
                state: &state,
            };
            // Chunks already processed are checkpointed even if the run stops.
            let summary = engine.run_stream(read_contents(input, source), &mut sink)?;
            sink.inner.finish(&summary)?;
            state.save(&engine)?;
            eprintln!(
                "{} contents: {} tagged, {} without candidates, {} errors, {} edges committed",
                summary.contents,
                summary.tagged,
                summary.no_candidates,
                summary.errors,
                summary.committed_edges
            );
        }
        Command::Eval {
            judged,
            metrics,
            ri_pairs,
        } => {
            let records: Vec<EvalRecord> = jsonl::read_file(&judged)?;
            let specs = MetricSpec::parse_list(&metrics)?;
            let mut report = evaluate(&records, &specs)?;
            if let Some(p) = ri_pairs {
                let pairs: Vec<RiPair> = jsonl::read_file(p)?;
                add_relative_improvement(&mut report, &pairs)?;
            }
            let text = serde_json::to_string_pretty(&report).map_err(std::io::Error::from)?;
            println!("{text}");
        }
        Command::ExportSft { examples, out } => {
            let engine = state.open(&config)?;
            let examples: Vec<SftExample> = jsonl::read_file(&examples)?;
            let records = export_sft(&examples, engine.templates(), &engine.repository())?;
            jsonl::write(create(&out)?, &records)?;
            println!("wrote {} records to {}", records.len(), out.display());
        }
        Command::ExportConfidence { examples, out } => {
            let engine = state.open(&config)?;
            let examples: Vec<ConfidenceExample> = jsonl::read_file(&examples)?;
            let records =
                export_confidence_dataset(&examples, engine.templates(), &engine.repository())?;
            jsonl::write(create(&out)?, &records)?;
            println!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Snapshot { action } => {
            let engine = state.open(&config)?;
            match action {
                SnapshotAction::Save { file } => {
                    let mut w = create(&file)?;
                    w.write_all(&engine.snapshot_bytes())?;
                    w.flush()?;
                    println!(
                        "saved {} vertices to {}",
                        engine.graph().vertex_count(),
                        file.display()
                    );
                }
                SnapshotAction::Load { file } => {
                    engine.load_snapshot(BufReader::new(File::open(&file)?))?;
                    state.save(&engine)?;
                    println!(
                        "loaded {} vertices from {}",
                        engine.graph().vertex_count(),
                        file.display()
                    );
                }
            }
        }
        Command::Serve { port, host } => {
            let engine = Arc::new(state.open(&config)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                info!("listening on {}", listener.local_addr()?);
                eprintln!("listening on {}", listener.local_addr()?);
                let shutdown = async {
                    let _ = tokio::signal::ctrl_c().await;
                };
                server::serve(Arc::clone(&engine), listener, shutdown).await
            })?;
            state.save(&engine)?;
        }
    }
    Ok(())
}

/// Parses contents lazily so a bad line stops the run only when reached.
fn read_contents(input: impl BufRead, source: String) -> impl Iterator<Item = Result<Content>> {
    input
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(move |(i, line)| {
            let line = line?;
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                source_name: source.clone(),
                line: i + 1,
                message: e.to_string(),
            })
        })
}

/// Writes report lines and persists state after every chunk.
struct CheckpointSink<'a, W: Write> {
    inner: JsonlSink<W>,
    state: &'a State,
}

impl<W: Write> ReportSink for CheckpointSink<'_, W> {
    fn entry(&mut self, entry: &graphtag_core::pipeline::ReportEntry) -> Result<()> {
        self.inner.entry(entry)
    }

    fn checkpoint(&mut self, engine: &Engine) -> Result<()> {
        self.inner.checkpoint(engine)?;
        self.state.save(engine)
    }
}
