//! Audit sink backed by an append-only JSON-lines file.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use bigbird_core::observability::audit::{check_dense, AuditError, AuditEvent, AuditRecord, AuditSink};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AuditFileError {
    #[error("cannot access audit log {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("corrupt audit log {path} at line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Each event is written and flushed as one line before `append` returns.
#[derive(Debug)]
pub struct FileAuditSink {
    path: PathBuf,
    file: File,
    events: Vec<AuditEvent>,
}

impl FileAuditSink {
    /// Open (creating if needed) and replay the log at `path`.
    ///
    /// A final line without its newline was never acknowledged and is cut
    /// off; any other unreadable line, or a gap in sequence numbers, makes
    /// the log corrupt.
    pub fn open(path: &Path) -> Result<Self, AuditFileError> {
        let io = |source| AuditFileError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut events = Vec::new();
        let mut good_len = 0u64;
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io)?);
            let mut lines = reader.split(b'\n').peekable();
            let mut number = 0;
            let total = std::fs::metadata(path).map_err(io)?.len();
            while let Some(line) = lines.next() {
                let line = line.map_err(io)?;
                number += 1;
                let terminated = good_len + (line.len() as u64) < total;
                match serde_json::from_slice::<AuditEvent>(&line) {
                    Ok(e) if terminated => {
                        events.push(e);
                        good_len += line.len() as u64 + 1;
                    }
                    _ if !terminated && lines.peek().is_none() => break,
                    Ok(_) => unreachable!("only the last line can be unterminated"),
                    Err(e) => {
                        return Err(AuditFileError::Corrupt {
                            path: path.to_path_buf(),
                            line: number,
                            message: e.to_string(),
                        })
                    }
                }
            }
            check_dense(&events).map_err(|e| AuditFileError::Corrupt {
                path: path.to_path_buf(),
                line: 0,
                message: e.to_string(),
            })?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        if file.metadata().map_err(io)?.len() > good_len {
            file.set_len(good_len).map_err(io)?;
        }
        Ok(FileAuditSink {
            path: path.to_path_buf(),
            file,
            events,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Read the events at `path` without keeping the file open.
    pub fn read(path: &Path) -> Result<Vec<AuditEvent>, AuditFileError> {
        if !path.exists() {
            return Ok(Vec::new());
        }
        Ok(Self::open(path)?.events)
    }
}

impl AuditSink for FileAuditSink {
    fn append(&mut self, record: AuditRecord) -> Result<AuditEvent, AuditError> {
        let event = record.into_event(self.events.len() as u64 + 1);
        let mut line = serde_json::to_vec(&event).expect("event serializes");
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|()| self.file.flush())
            .map_err(|e| AuditError::SinkUnavailable(e.to_string()))?;
        self.events.push(event.clone());
        Ok(event)
    }

    fn events(&self) -> &[AuditEvent] {
        &self.events
    }
}
