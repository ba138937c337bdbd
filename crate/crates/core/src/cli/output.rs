//! Bit-stable table emission and atomic file replacement.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::CliError;

pub const SCHEMA: u32 = 1;

/// A CSV cell.
pub enum Cell {
    Real(f64),
    Int(u64),
    Text(String),
}

/// 17 significant digits, enough to round-trip any double.
pub fn real(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

/// CSV with a header row and `\n` line endings.
pub fn csv(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Real(v) => real(*v),
                Cell::Int(v) => v.to_string(),
                Cell::Text(s) => s.clone(),
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    command: &'a str,
    #[serde(flatten)]
    body: T,
}

pub fn json<T: Serialize>(command: &str, body: T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(&Envelope {
        schema: SCHEMA,
        command,
        body,
    })
    .map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Destination reserved before any computation, so an unwritable path fails
/// fast. The target is replaced only on [`Sink::commit`]; dropping the sink
/// uncommitted removes the temporary file.
pub struct Sink {
    target: Option<(PathBuf, PathBuf, File)>,
}

impl Sink {
    pub fn open(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self { target: None });
        };
        let name = path
            .file_name()
            .ok_or_else(|| CliError::Usage(format!("invalid output path {}", path.display())))?;
        let mut tmp_name = std::ffi::OsString::from(".");
        tmp_name.push(name);
        tmp_name.push(format!(".{}.tmp", std::process::id()));
        let tmp = path.with_file_name(tmp_name);
        let file = File::create(&tmp)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        Ok(Self {
            target: Some((path.to_path_buf(), tmp, file)),
        })
    }

    pub fn commit(mut self, contents: &str) -> Result<(), CliError> {
        match self.target.take() {
            None => {
                let mut out = io::stdout().lock();
                out.write_all(contents.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|e| CliError::Usage(format!("cannot write to stdout: {e}")))
            }
            Some((path, tmp, mut file)) => {
                let res = file
                    .write_all(contents.as_bytes())
                    .and_then(|_| file.sync_all())
                    .and_then(|_| std::fs::rename(&tmp, &path));
                if let Err(e) = res {
                    let _ = std::fs::remove_file(&tmp);
                    return Err(CliError::Usage(format!(
                        "cannot write {}: {e}",
                        path.display()
                    )));
                }
                Ok(())
            }
        }
    }
}

impl Drop for Sink {
    fn drop(&mut self) {
        if let Some((_, tmp, _)) = self.target.take() {
            let _ = std::fs::remove_file(tmp);
        }
    }
}
