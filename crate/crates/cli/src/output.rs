//! Atomic output files with embedded provenance.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Version tag of the CSV column layouts and JSON documents.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: String,
    pub version: String,
    pub format_version: u32,
    /// SHA-256 of the canonical JSON of the effective configuration.
    pub config_hash: String,
    pub seed: u64,
    pub grid: Option<[usize; 2]>,
}

impl Provenance {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: u64, grid: Option<[usize; 2]>) -> Result<Self> {
        let bytes = serde_json::to_vec(config)?;
        let digest = Sha256::digest(&bytes);
        let config_hash = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            format_version: FORMAT_VERSION,
            config_hash,
            seed,
            grid,
        })
    }

    /// `# key=value` lines placed above a CSV header.
    fn csv_preamble(&self) -> String {
        let grid = self.grid.map_or("none".to_string(), |[nx, ny]| format!("{nx}x{ny}"));
        format!(
            "# command={}\n# version={}\n# format_version={}\n# config_hash={}\n# seed={}\n# grid={}\n",
            self.command, self.version, self.format_version, self.config_hash, self.seed, grid
        )
    }
}

/// Files collected in memory and written only once the whole run succeeded.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn json<T: Serialize>(&mut self, name: &str, provenance: &Provenance, body: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            provenance: &'a Provenance,
            #[serde(flatten)]
            body: &'a T,
        }
        let mut bytes = serde_json::to_vec_pretty(&Doc { provenance, body })?;
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    /// CSV with a provenance preamble; `rows` are written with the csv crate.
    pub fn csv<R: Serialize>(&mut self, name: &str, provenance: &Provenance, rows: &[R]) -> Result<()> {
        let mut bytes = provenance.csv_preamble().into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut bytes);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    /// Writes every file through a temporary file in the target directory and
    /// a rename, so readers never observe partial contents.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let mut written = Vec::new();
        for (name, bytes) in self.files {
            let target = self.dir.join(&name);
            let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
            tmp.write_all(&bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(&target)
                .with_context(|| format!("renaming into {}", target.display()))?;
            written.push(target);
        }
        Ok(written)
    }
}
