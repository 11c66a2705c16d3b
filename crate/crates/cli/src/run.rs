use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ManifestEntry {
    pub command: String,
    pub config_sha256: String,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub wall_time_ms: u128,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// One run directory: `<out>/<run_id>/` holding `config.json`,
/// `manifest.jsonl` and one write-once directory per stage.
pub struct Run {
    pub config: RunConfig,
    pub dir: PathBuf,
    config_hash: String,
}

impl Run {
    /// Creates or reopens the run directory. A reopened run must carry the
    /// same configuration it was started with.
    pub fn open(config: RunConfig, run_id: &str) -> Result<Self, CliError> {
        config.validate()?;
        let dir = config.out_dir.join(run_id);
        let text = serde_json::to_string_pretty(&config).expect("config serializes") + "\n";
        let config_hash = hex::encode(Sha256::digest(text.as_bytes()));
        let path = dir.join("config.json");
        if path.exists() {
            let existing = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            if existing != text {
                return Err(CliError::Config(format!(
                    "{} was created with a different configuration",
                    dir.display()
                )));
            }
        } else {
            fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
        }
        Ok(Self {
            config,
            dir,
            config_hash,
        })
    }

    pub fn stage_path(&self, stage: &str, file: &str) -> PathBuf {
        self.dir.join(stage).join(file)
    }

    /// Path of an upstream artifact, or a dependency error naming its producer.
    pub fn require(&self, stage: &str, file: &str) -> Result<PathBuf, CliError> {
        let p = self.stage_path(stage, file);
        if p.is_file() {
            Ok(p)
        } else {
            Err(CliError::Dependency {
                path: p.display().to_string(),
                producer: stage.to_string(),
            })
        }
    }

    fn relative(&self, p: &Path) -> String {
        p.strip_prefix(&self.dir).unwrap_or(p).display().to_string()
    }

    /// Runs `body` against a fresh stage directory and appends a manifest
    /// entry. `inputs` are hashed before the stage runs.
    pub fn stage<F>(&self, command: &str, inputs: &[PathBuf], body: F) -> Result<(), CliError>
    where
        F: FnOnce(&StageDir) -> Result<(), CliError>,
    {
        let start = Instant::now();
        let input_hashes = inputs
            .iter()
            .map(|p| {
                Ok(FileHash {
                    path: self.relative(p),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let dir = self.dir.join(command);
        if dir.exists() {
            return Err(CliError::Config(format!(
                "{} already exists; stage outputs are write-once",
                dir.display()
            )));
        }
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let stage = StageDir {
            dir,
            written: Default::default(),
        };
        log::info!("{command}: started");
        if let Err(e) = body(&stage) {
            // A failed stage leaves nothing behind so it can be retried.
            let _ = fs::remove_dir_all(&stage.dir);
            return Err(e);
        }
        let outputs = stage
            .written
            .into_inner()
            .iter()
            .map(|p| {
                Ok(FileHash {
                    path: self.relative(p),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let entry = ManifestEntry {
            command: command.to_string(),
            config_sha256: self.config_hash.clone(),
            inputs: input_hashes,
            outputs,
            wall_time_ms: start.elapsed().as_millis(),
        };
        let path = self.dir.join("manifest.jsonl");
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| CliError::io(&path, e))?;
        let line = serde_json::to_string(&entry).expect("manifest entry serializes");
        writeln!(f, "{line}").map_err(|e| CliError::io(&path, e))?;
        log::info!("{command}: done in {} ms", entry.wall_time_ms);
        Ok(())
    }
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>, CliError> {
    let path = dir.join("manifest.jsonl");
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CliError::Data(format!("{}: {e}", path.display()))))
        .collect()
}

/// Output directory of one stage; every file created through it is hashed
/// into the manifest.
pub struct StageDir {
    pub dir: PathBuf,
    written: std::cell::RefCell<Vec<PathBuf>>,
}

impl StageDir {
    pub fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        self.written.borrow_mut().push(path.clone());
        Ok((path, BufWriter::new(f)))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let (path, mut w) = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Data(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| CliError::io(&path, e))?;
        w.flush().map_err(|e| CliError::io(&path, e))
    }

    /// Runs a writer callback on a new file and flushes it.
    pub fn write_with<E: std::fmt::Display>(
        &self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> Result<(), E>,
    ) -> Result<(), CliError> {
        let (path, mut w) = self.create(name)?;
        f(&mut w).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        w.flush().map_err(|e| CliError::io(&path, e))
    }
}
