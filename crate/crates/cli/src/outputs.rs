//! Output files that disappear again unless the command finishes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::failure::Failure;

pub struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    /// Output set rooted at `dir`, created if missing.
    pub fn in_dir(dir: &Path) -> Result<Self, Failure> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)
            .map_err(|e| Failure::other(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
            committed: false,
        })
    }

    /// Output set for loose files given by full path.
    pub fn loose() -> Self {
        Self {
            dir: PathBuf::new(),
            created_dir: false,
            written: Vec::new(),
            committed: false,
        }
    }

    pub fn write<F>(&mut self, name: impl AsRef<Path>, body: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), Failure>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path)
            .map_err(|e| Failure::other(format!("cannot create {}: {e}", path.display())))?;
        self.written.push(path.clone());
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush()
            .map_err(|e| Failure::other(format!("writing {}: {e}", path.display())))
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in &self.written {
            if let Err(e) = fs::remove_file(p) {
                log::warn!("could not remove partial output {}: {e}", p.display());
            }
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}
