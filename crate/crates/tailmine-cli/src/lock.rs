//! One command at a time per output directory.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

pub struct OutDirLock {
    path: PathBuf,
}

impl OutDirLock {
    pub fn acquire(out_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(out_dir)
            .with_context(|| format!("creating output directory {}", out_dir.display()))?;
        let path = out_dir.join(".tailmine.lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut file) => {
                writeln!(file, "{}", std::process::id()).ok();
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                let holder = std::fs::read_to_string(&path).unwrap_or_default();
                bail!(
                    "output directory {} is locked by another run (pid {}); \
                     remove {} if that run is gone",
                    out_dir.display(),
                    holder.trim(),
                    path.display()
                );
            }
            Err(e) => Err(e).with_context(|| format!("creating lock {}", path.display())),
        }
    }
}

impl Drop for OutDirLock {
    fn drop(&mut self) {
        std::fs::remove_file(&self.path).ok();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_acquire_fails_until_release() {
        let dir = tempfile::tempdir().unwrap();
        let lock = OutDirLock::acquire(dir.path()).unwrap();
        assert!(OutDirLock::acquire(dir.path()).is_err());
        drop(lock);
        assert!(OutDirLock::acquire(dir.path()).is_ok());
    }
}
