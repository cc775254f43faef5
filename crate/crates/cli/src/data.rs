//! File layout of a phantom directory: four files per case sharing a stem.

use std::fs;
use std::path::{Path, PathBuf};

use ltsp_core::pipeline::Case;
use ltsp_core::volio::read_volume;
use ltsp_core::{CoreError, Result};

const INTENSITY: &str = ".intensity.vol";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseFiles {
    pub stem: String,
    pub intensity: PathBuf,
    pub mask: PathBuf,
    pub graph: PathBuf,
    pub spec: PathBuf,
}

impl CaseFiles {
    pub fn new(dir: &Path, stem: &str) -> Self {
        Self {
            stem: stem.to_string(),
            intensity: dir.join(format!("{stem}{INTENSITY}")),
            mask: dir.join(format!("{stem}.mask.vol")),
            graph: dir.join(format!("{stem}.graph")),
            spec: dir.join(format!("{stem}.spec")),
        }
    }

    pub fn for_index(dir: &Path, i: u64) -> Self {
        Self::new(dir, &format!("phantom_{i:03}"))
    }

    pub fn load(&self) -> Result<Case> {
        Ok(Case {
            intensity: read_volume(&self.intensity)?,
            mask: read_volume(&self.mask)?,
        })
    }
}

/// Every case in `dir`, sorted by stem.
pub fn list_cases(dir: &Path) -> Result<Vec<CaseFiles>> {
    let entries = fs::read_dir(dir).map_err(|e| CoreError::io(dir, e))?;
    let mut stems = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CoreError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(INTENSITY) {
            stems.push(stem.to_string());
        }
    }
    stems.sort();
    Ok(stems.iter().map(|s| CaseFiles::new(dir, s)).collect())
}
