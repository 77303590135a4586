//! Content-addressed stage keys and the output-directory lock.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Stage, StageError};

/// Incrementally hashes stage inputs: file contents and settings.
pub struct KeyBuilder(Sha256);

impl KeyBuilder {
    pub fn new(stage: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"embtopic-stage-v1\0");
        h.update(stage.as_bytes());
        KeyBuilder(h)
    }

    pub fn file(mut self, name: &str, path: Option<&Path>) -> Result<Self, StageError> {
        self.0.update(name.as_bytes());
        match path {
            None => self.0.update(b"\0none"),
            Some(p) => {
                let mut f = File::open(p).map_err(|e| {
                    StageError::usage(Stage::EmbedIo, format!("cannot open {}: {e}", p.display()))
                })?;
                let mut buf = vec![0u8; 1 << 16];
                let mut h = Sha256::new();
                loop {
                    let n = f.read(&mut buf).map_err(|e| {
                        StageError::usage(
                            Stage::EmbedIo,
                            format!("cannot read {}: {e}", p.display()),
                        )
                    })?;
                    if n == 0 {
                        break;
                    }
                    h.update(&buf[..n]);
                }
                self.0.update(b"\0file");
                self.0.update(h.finalize());
            }
        }
        Ok(self)
    }

    pub fn value<S: Serialize>(mut self, name: &str, v: &S) -> Self {
        self.0.update(name.as_bytes());
        self.0.update(b"\0");
        self.0
            .update(serde_json::to_vec(v).expect("settings serialize"));
        self
    }

    pub fn text(mut self, name: &str, v: &str) -> Self {
        self.0.update(name.as_bytes());
        self.0.update(b"\0");
        self.0.update(v.as_bytes());
        self
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

/// Exclusive lock on an output directory, released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub const FILE: &'static str = ".embtopic.lock";

    pub fn acquire(dir: &Path) -> Result<Self, StageError> {
        fs::create_dir_all(dir).map_err(|e| {
            StageError::usage(
                Stage::Output,
                format!("cannot create {}: {e}", dir.display()),
            )
        })?;
        let path = dir.join(Self::FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(StageError::usage(
                Stage::Cache,
                format!(
                    "{} is locked by another run; delete {} if no run is active",
                    dir.display(),
                    path.display()
                ),
            )),
            Err(e) => Err(StageError::internal(Stage::Cache, e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
