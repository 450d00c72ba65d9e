//! Run directory, manifests and delimiter-separated tables.
//!
//! Every table starts with `#` lines echoing the full configuration, then a
//! header row; floats are written with 17 significant digits.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;

pub const INCIDENT_DIRECTION: &str = "+z";

/// Float with 17 significant digits.
pub fn num(x: f64) -> String {
    qcloak::io::format_number(x)
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub command: String,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Manifest { command: command.to_string(), config: config.clone() }
    }

    /// The configuration as TOML, preceded by comment lines naming the run.
    pub fn to_toml(&self) -> String {
        format!(
            "# qcloak {}\n# command = {}\n# incident = {}\n{}",
            env!("CARGO_PKG_VERSION"),
            self.command,
            INCIDENT_DIRECTION,
            self.config.to_toml()
        )
    }

    /// The TOML manifest with every line commented out.
    pub fn header(&self) -> String {
        self.to_toml()
            .lines()
            .map(|l| if l.starts_with('#') { format!("{l}\n") } else { format!("# {l}\n") })
            .collect()
    }
}

pub struct RunDir {
    root: PathBuf,
    manifest: Manifest,
    written: Vec<PathBuf>,
}

impl RunDir {
    pub fn create(root: &Path, manifest: Manifest) -> anyhow::Result<Self> {
        fs::create_dir_all(root)?;
        let mut dir = RunDir { root: root.to_path_buf(), manifest, written: Vec::new() };
        let text = dir.manifest.to_toml();
        dir.write_text("manifest.toml", &text)?;
        Ok(dir)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> anyhow::Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, text)?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Text artifact prefixed with the commented manifest.
    pub fn write_artifact(&mut self, name: &str, body: &str) -> anyhow::Result<PathBuf> {
        let text = format!("{}{body}", self.manifest.header());
        self.write_text(name, &text)
    }

    pub fn write_table<I>(&mut self, name: &str, columns: &[&str], rows: I) -> anyhow::Result<PathBuf>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.root.join(name);
        let mut file = fs::File::create(&path)?;
        file.write_all(self.manifest.header().as_bytes())?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(columns)?;
        for row in rows {
            writer.write_record(&row)?;
        }
        writer.flush()?;
        self.written.push(path.clone());
        Ok(path)
    }
}
