use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::{Command, GlobalArgs};

/// Collects the files written by one run and emits the manifest.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
    started: Instant,
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: String,
    argv: &'a [String],
    global: &'a GlobalArgs,
    params: &'a Command,
    seed: u64,
    version: &'static str,
    outputs: &'a [PathBuf],
    wall_time_seconds: f64,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            started: Instant::now(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let p = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }

    /// CSV with a header row; every record must have the header's length.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p).with_context(|| format!("writing {}", p.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(p)
    }

    pub fn serialize_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<PathBuf> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p).with_context(|| format!("writing {}", p.display()))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(p)
    }

    pub fn finish(mut self, argv: &[String], global: &GlobalArgs, command: &Command) -> Result<()> {
        let manifest_path = self.dir.join("manifest.json");
        let wall = self.started.elapsed().as_secs_f64();
        let outputs = std::mem::take(&mut self.written);
        let m = Manifest {
            subcommand: command.name(),
            argv,
            global,
            params: command,
            seed: global.seed,
            version: overlap_witness::VERSION,
            outputs: &outputs,
            wall_time_seconds: wall,
        };
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        fs::write(&manifest_path, text).with_context(|| format!("writing {}", manifest_path.display()))?;
        Ok(())
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
