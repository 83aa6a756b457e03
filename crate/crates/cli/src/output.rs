use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ecorate::Diagnostic;
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::config::Resolved;
use crate::Failure;

/// Where command output goes: files in a directory, or stdout.
pub struct Sink {
    dir: Option<PathBuf>,
    pub no_meta: bool,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>, no_meta: bool) -> Result<Self, Failure> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| Failure::Input(format!("{}: {e}", d.display())))?;
        }
        Ok(Sink { dir, no_meta })
    }

    pub fn to_files(&self) -> bool {
        self.dir.is_some()
    }

    /// Writes `name` in the output directory through a temporary file that is
    /// renamed into place, or streams to stdout when no directory was given.
    pub fn write(
        &self,
        name: &str,
        body: impl FnOnce(&mut dyn Write) -> ecorate::Result<()>,
    ) -> Result<(), Failure> {
        match &self.dir {
            Some(dir) => write_atomic(&dir.join(name), body),
            None => {
                let stdout = io::stdout();
                let mut lock = stdout.lock();
                body(&mut lock).map_err(Failure::from)?;
                lock.flush().map_err(|e| Failure::Input(e.to_string()))
            }
        }
    }

    /// Writes `<stem>.json` holding the run settings and diagnostics. Skipped
    /// for stdout output and under `--no-meta`.
    pub fn metadata(
        &self,
        stem: &str,
        command: &str,
        cfg: &Resolved,
        diagnostics: &[Diagnostic],
    ) -> Result<(), Failure> {
        if self.no_meta || self.dir.is_none() {
            return Ok(());
        }
        let meta = Metadata {
            tool: "ecorate",
            version: env!("CARGO_PKG_VERSION"),
            command,
            generated_at_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config: cfg,
            diagnostics,
        };
        self.write(&format!("{stem}.json"), |w| {
            serde_json::to_writer_pretty(&mut *w, &meta)
                .map_err(|e| ecorate::Error::Io(e.to_string()))?;
            writeln!(w)?;
            Ok(())
        })
    }

    /// One-line JSON summary: stdout when reports went to files, stderr when
    /// the report itself is on stdout.
    pub fn summary<T: Serialize>(&self, summary: &T) -> Result<(), Failure> {
        let line = serde_json::to_string(summary).map_err(|e| Failure::Input(e.to_string()))?;
        if self.to_files() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    generated_at_unix: u64,
    config: &'a Resolved,
    diagnostics: &'a [Diagnostic],
}

pub fn write_atomic(
    path: &Path,
    body: impl FnOnce(&mut dyn Write) -> ecorate::Result<()>,
) -> Result<(), Failure> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let io_err = |e: io::Error| Failure::Input(format!("{}: {e}", path.display()));
    let tmp = NamedTempFile::new_in(dir).map_err(io_err)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        w.flush().map_err(io_err)?;
    }
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}
