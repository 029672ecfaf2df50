//! On-disk engine state: `tags.jsonl` plus `graph.snapshot`.

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use graphtag_core::graph::TagGraph;
use graphtag_core::jsonl;
use graphtag_core::pipeline::{Engine, PipelineConfig};
use graphtag_core::types::{Tag, TagRepository};
use graphtag_core::{Error, Result};

pub struct State {
    dir: PathBuf,
}

impl State {
    pub fn new(dir: &Path) -> Self {
        State {
            dir: dir.to_path_buf(),
        }
    }

    fn tags_path(&self) -> PathBuf {
        self.dir.join("tags.jsonl")
    }

    fn snapshot_path(&self) -> PathBuf {
        self.dir.join("graph.snapshot")
    }

    /// Builds an engine from `config` and restores any saved state into it.
    pub fn open(&self, config: &PipelineConfig) -> Result<Engine> {
        let engine = Engine::from_config(config)?;
        let (tags, snapshot) = (self.tags_path(), self.snapshot_path());
        match (tags.exists(), snapshot.exists()) {
            (false, false) => {}
            (true, true) => {
                let repo = jsonl::read_file::<Tag>(&tags)?
                    .into_iter()
                    .collect::<Result<TagRepository>>()?;
                let graph = TagGraph::read_snapshot(BufReader::new(File::open(&snapshot)?))?;
                engine.restore(repo, graph)?;
            }
            _ => {
                return Err(Error::Config(format!(
                    "state directory {} has only one of tags.jsonl and graph.snapshot",
                    self.dir.display()
                )))
            }
        }
        Ok(engine)
    }

    /// Writes both files via temporary files and renames, so an interrupted
    /// save leaves the previous state readable.
    pub fn save(&self, engine: &Engine) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let tags = jsonl::to_string(engine.repository().iter());
        replace(&self.tags_path(), tags.as_bytes())?;
        replace(&self.snapshot_path(), &engine.snapshot_bytes())
    }
}

fn replace(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}
