use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Output directory that remembers what it wrote so a failed run can be
/// rolled back.
pub struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path) -> CliResult<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|source| CliError::Output { path: dir.display().to_string(), source })?;
        Ok(Outputs { dir: dir.to_path_buf(), created_dir, written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| CliError::Output { path: path.display().to_string(), source })?;
        self.written.push(path);
        Ok(())
    }

    pub fn csv<F>(&mut self, name: &str, f: F) -> CliResult<()>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|source| CliError::Output { path: self.dir.join(name).display().to_string(), source })?;
        self.write(name, &buf)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Removes every file written so far (and the directory if this run
    /// created it and left it empty).
    pub fn rollback(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rollback_removes_files_and_new_dir() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        let mut o = Outputs::new(&dir).unwrap();
        o.write("a.csv", b"x\n").unwrap();
        o.json("b.json", &[1, 2]).unwrap();
        assert_eq!(o.written().len(), 2);
        assert_eq!(fs::read_to_string(dir.join("b.json")).unwrap(), "[\n  1,\n  2\n]\n");
        o.rollback();
        assert!(!dir.exists());
    }
}
