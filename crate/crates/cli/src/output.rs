//! Artifacts are written to temporary files next to their destination and
//! renamed into place only once every output of a command is complete.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::{CliError, CliResult};

pub struct Staged {
    pending: Vec<(NamedTempFile, PathBuf)>,
}

impl Staged {
    pub fn new() -> Self {
        Staged { pending: Vec::new() }
    }

    /// Writes one artifact into a temporary file.
    pub fn write<F>(&mut self, dest: &Path, fill: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<&mut File>) -> CliResult<()>,
    {
        let dir = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir)
            .map_err(|e| CliError::Data(format!("cannot write to {}: {e}", dir.display())))?;
        {
            let mut w = BufWriter::new(tmp.as_file_mut());
            fill(&mut w)?;
            w.flush().map_err(|e| io_err(dest, e))?;
        }
        self.pending.push((tmp, dest.to_path_buf()));
        Ok(())
    }

    /// Moves every staged file to its destination.
    pub fn commit(self) -> CliResult<()> {
        for (tmp, dest) in self.pending {
            tmp.persist(&dest).map_err(|e| io_err(&dest, e.error))?;
        }
        Ok(())
    }
}

pub fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}
