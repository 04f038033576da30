//! Report assembly and atomic file output.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::CliError;

/// Name of the config copy written next to every report.
pub const CONFIG_FILE: &str = "run_config.conf";

/// `^[a-z0-9_]+=[^=]+$`.
pub fn is_summary_line(line: &str) -> bool {
    match line.split_once('=') {
        Some((k, v)) => {
            !k.is_empty()
                && k.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
                && !v.is_empty()
                && !v.contains('=')
                && !v.contains('\n')
        }
        None => false,
    }
}

/// Outcome of one subcommand: summary pairs, CSV files and the assertion result.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Directory below the output root, e.g. `verify/varadhan`.
    pub name: String,
    pub summary: Vec<(String, String)>,
    pub files: Vec<(String, String)>,
    pub passed: bool,
}

impl Report {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), summary: Vec::new(), files: Vec::new(), passed: true }
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.summary.push((key.into(), value.to_string()));
    }

    /// Appends the `key=value` lines of a core summary block.
    pub fn push_block(&mut self, block: &str) {
        for line in block.lines().filter(|l| !l.is_empty()) {
            if let Some((k, v)) = line.split_once('=') {
                self.push(k, v);
            }
        }
    }

    pub fn file(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    /// Summary text: command lines, `passed`, then the run config as `config_*` lines.
    pub fn summary_text(&self, cfg: &RunConfig) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: &str| {
            // one physical line per entry; empty lists are left out
            if !v.is_empty() {
                s.push_str(k);
                s.push('=');
                s.push_str(&v.replace('\n', " "));
                s.push('\n');
            }
        };
        line("report", &self.name);
        for (k, v) in &self.summary {
            line(k, v);
        }
        line("passed", if self.passed { "true" } else { "false" });
        for (k, v) in cfg.entries() {
            line(&format!("config_{}", k.replace('.', "_")), &v);
        }
        s
    }

    /// Writes `summary.txt`, the CSV files and the config copy under `root/name`.
    pub fn write(&self, root: &Path, cfg: &RunConfig) -> Result<PathBuf, CliError> {
        let dir = root.join(&self.name);
        fs::create_dir_all(&dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
        write_atomic(&dir.join("summary.txt"), &self.summary_text(cfg))?;
        write_atomic(&dir.join(CONFIG_FILE), &cfg.to_text())?;
        for (name, contents) in &self.files {
            write_atomic(&dir.join(name), contents)?;
        }
        Ok(dir)
    }
}

/// Writes through a temporary file in the same directory, then renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
