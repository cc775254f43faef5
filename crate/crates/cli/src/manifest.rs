//! Run manifests: what a command was asked to do and which file formats it
//! wrote, enough to reproduce every artifact of the run.

use std::fs;
use std::path::{Path, PathBuf};

use ltsp_core::kv::KvWriter;
use ltsp_core::metrics::REPORT_VERSION;
use ltsp_core::model::CHECKPOINT_VERSION;
use ltsp_core::volio::{GRAPH_MAGIC, GRAPH_VERSION, VOLUME_MAGIC};
use ltsp_core::{CoreError, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Formats a command may write.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Volume,
    Graph,
    Checkpoint,
    Report,
    Kv,
    StepLog,
}

impl Format {
    fn key(self) -> &'static str {
        match self {
            Format::Volume => "format.volume",
            Format::Graph => "format.graph",
            Format::Checkpoint => "format.checkpoint",
            Format::Report => "format.report",
            Format::Kv => "format.kv",
            Format::StepLog => "format.step_log",
        }
    }

    fn version(self) -> String {
        match self {
            Format::Volume => VOLUME_MAGIC.to_string(),
            Format::Graph => format!("{GRAPH_MAGIC} {GRAPH_VERSION}"),
            Format::Checkpoint => format!("LTSPCKPT {CHECKPOINT_VERSION}"),
            Format::Report => format!("report {REPORT_VERSION}"),
            Format::Kv => "kv 1".into(),
            Format::StepLog => "step_log 1".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    /// Other inputs and overrides, in command-line order.
    pub inputs: Vec<(&'static str, String)>,
    pub formats: Vec<Format>,
}

impl RunManifest {
    pub fn new(subcommand: &'static str, out: &Path) -> Self {
        Self {
            subcommand,
            config: None,
            seed: None,
            out: out.to_path_buf(),
            inputs: Vec::new(),
            formats: Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        let mut w = KvWriter::new();
        w.put("subcommand", self.subcommand);
        let config = self.config.as_ref().map_or("-".to_string(), |p| p.display().to_string());
        w.put("config", config);
        if let Some(seed) = self.seed {
            w.put("seed", seed);
        }
        w.put("out", self.out.display());
        for (k, v) in &self.inputs {
            w.put(&format!("input.{k}"), v);
        }
        for f in &self.formats {
            w.put(f.key(), f.version());
        }
        w.finish()
    }

    /// Creates the output directory and writes the manifest into it.
    pub fn write(&self) -> Result<()> {
        fs::create_dir_all(&self.out).map_err(|e| CoreError::io(&self.out, e))?;
        let path = self.out.join(MANIFEST_FILE);
        fs::write(&path, self.render()).map_err(|e| CoreError::io(path, e))
    }
}
