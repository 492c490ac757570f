//! Per-run metadata: configuration, RNG seeds and input digests.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use newsrep::{Error, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// SHA-256 of a file's contents, hex encoded.
pub fn sha256_file(path: &Path) -> Result<String> {
    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut file = File::open(path).map_err(io)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(io)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub struct RunMeta {
    pub command: &'static str,
    pub config: Value,
    pub rng_seeds: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunMeta {
    pub fn new(command: &'static str) -> Self {
        RunMeta {
            command,
            config: Value::Null,
            rng_seeds: json!({}),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Writes `<command>.metadata.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let mut inputs = Vec::new();
        for path in &self.inputs {
            inputs.push(json!({
                "path": path.display().to_string(),
                "sha256": sha256_file(path)?,
            }));
        }
        let doc = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "argv": std::env::args().collect::<Vec<_>>(),
            "created_at": Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
            "config": self.config,
            "rng_seeds": self.rng_seeds,
            "inputs": inputs,
            "outputs": self.outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        });
        let path = dir.join(format!("{}.metadata.json", self.command));
        let io = |e| Error::Io {
            path: path.clone(),
            source: e,
        };
        let mut out = BufWriter::new(File::create(&path).map_err(io)?);
        serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| io(e.into()))?;
        out.write_all(b"\n").map_err(io)?;
        out.flush().map_err(io)?;
        Ok(path)
    }
}
