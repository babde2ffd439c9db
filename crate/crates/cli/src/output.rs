use std::fmt::Display;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `# key = value` header lines shared by every file of one run. The worker
/// count is deliberately absent: it never changes the numbers.
#[derive(Debug, Clone)]
pub struct Metadata(Vec<(String, String)>);

impl Metadata {
    pub fn new(command: &str) -> Self {
        Metadata(vec![
            ("stein-drift".into(), VERSION.into()),
            ("command".into(), command.into()),
        ])
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.0.push((key.into(), value.to_string()));
        self
    }

    pub fn with(mut self, key: &str, value: impl Display) -> Self {
        self.set(key, value);
        self
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.0
    }
}

/// Creates `dir` and writes `name` inside it through `body`.
pub fn write_file(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(path)
}

/// Comment-only header for plot scripts.
pub fn write_comment_header<W: Write>(out: &mut W, meta: &Metadata) -> std::io::Result<()> {
    for (k, v) in meta.pairs() {
        writeln!(out, "# {k} = {v}")?;
    }
    Ok(())
}
