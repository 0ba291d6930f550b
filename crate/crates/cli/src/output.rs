use std::path::{Path, PathBuf};

use qvdp_core::io::{write_atomic, write_json, CsvTable};

use crate::args::Format;
use crate::{CliError, CliResult};

/// One output file before it is written.
#[derive(Debug, Clone)]
pub enum Artifact {
    /// Written as `<name>.csv` or `<name>.json` depending on `--format`.
    Table { name: String, table: CsvTable },
    /// Always `<name>.json`.
    Json { name: String, value: serde_json::Value },
    /// Raw bytes under the given file name.
    Binary { file: String, bytes: Vec<u8> },
}

impl Artifact {
    pub fn table(name: &str, table: CsvTable) -> Self {
        Artifact::Table { name: name.into(), table }
    }

    pub fn json(name: &str, value: serde_json::Value) -> Self {
        Artifact::Json { name: name.into(), value }
    }

    pub fn kind(&self) -> String {
        match self {
            Artifact::Table { table, .. } => table.provenance.kind.clone(),
            Artifact::Json { value, .. } => value
                .get("kind")
                .and_then(|k| k.as_str())
                .unwrap_or("json")
                .to_string(),
            Artifact::Binary { .. } => "binary".into(),
        }
    }
}

pub struct Output {
    dir: PathBuf,
    format: Format,
}

impl Output {
    pub fn new(dir: &Path, format: Format) -> CliResult<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Core(qvdp_core::Error::Io(format!("cannot create {}: {e}", dir.display()))))?;
        Ok(Self { dir: dir.to_path_buf(), format })
    }

    pub fn file_name(&self, a: &Artifact) -> String {
        match a {
            Artifact::Table { name, .. } => match self.format {
                Format::Csv => format!("{name}.csv"),
                Format::Json => format!("{name}.json"),
            },
            Artifact::Json { name, .. } => format!("{name}.json"),
            Artifact::Binary { file, .. } => file.clone(),
        }
    }

    pub fn write(&self, a: &Artifact) -> CliResult<PathBuf> {
        let path = self.dir.join(self.file_name(a));
        match a {
            Artifact::Table { table, .. } => match self.format {
                Format::Csv => table.write(&path)?,
                Format::Json => write_json(&path, &table.to_json())?,
            },
            Artifact::Json { value, .. } => write_json(&path, value)?,
            Artifact::Binary { bytes, .. } => write_atomic(&path, bytes)?,
        }
        Ok(path)
    }

    pub fn write_all(&self, artifacts: &[Artifact]) -> CliResult<Vec<PathBuf>> {
        artifacts.iter().map(|a| self.write(a)).collect()
    }
}
