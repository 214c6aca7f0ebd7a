//! Append-only store file: one JSON header line, then frames of a
//! little-endian `u32` length followed by that many bytes of JSON. Replaying
//! the frames in order (last write wins) rebuilds the store.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DocumentRecord, EmbeddingVector, StoreError};

pub const FORMAT: &str = "herdsense-store";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub dimension: usize,
    pub embedder: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Frame {
    Put {
        record: DocumentRecord,
        vector: EmbeddingVector,
    },
    Delete {
        doc_id: String,
        chunk_index: u32,
    },
}

pub struct StoreFile {
    out: BufWriter<File>,
}

impl StoreFile {
    /// Opens `path`, writing a header if the file is new, and returns the
    /// frames already in it.
    pub fn open(path: &Path, header: &Header) -> Result<(Self, Vec<Frame>), StoreError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let exists = path.exists() && std::fs::metadata(path)?.len() > 0;
        let frames = if exists {
            let (found, frames, good_len) = read(path)?;
            let file_len = std::fs::metadata(path)?.len();
            if good_len < file_len {
                OpenOptions::new().write(true).open(path)?.set_len(good_len)?;
            }
            if found.format != FORMAT || found.version != VERSION {
                return Err(StoreError::HeaderMismatch(format!(
                    "unsupported format {} v{}",
                    found.format, found.version
                )));
            }
            if found.dimension != header.dimension || found.embedder != header.embedder {
                return Err(StoreError::HeaderMismatch(format!(
                    "file has dimension {} / embedder {:?}, store wants {} / {:?}",
                    found.dimension, found.embedder, header.dimension, header.embedder
                )));
            }
            frames
        } else {
            let mut f = File::create(path)?;
            let mut line = serde_json::to_vec(header).map_err(StoreError::encode)?;
            line.push(b'\n');
            f.write_all(&line)?;
            f.sync_all()?;
            Vec::new()
        };
        let file = OpenOptions::new().append(true).open(path)?;
        Ok((
            Self {
                out: BufWriter::new(file),
            },
            frames,
        ))
    }

    pub fn append(&mut self, frames: &[Frame]) -> Result<(), StoreError> {
        for frame in frames {
            let bytes = serde_json::to_vec(frame).map_err(StoreError::encode)?;
            let len = u32::try_from(bytes.len())
                .map_err(|_| StoreError::Corrupt("record larger than 4 GiB".into()))?;
            self.out.write_all(&len.to_le_bytes())?;
            self.out.write_all(&bytes)?;
        }
        self.out.flush()?;
        Ok(())
    }
}

/// Reads a store file, returning the byte length of its intact prefix. A
/// truncated final frame (an interrupted append) is dropped with a warning;
/// anything else malformed is an error.
pub fn read(path: &Path) -> Result<(Header, Vec<Frame>, u64), StoreError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    let mut good = reader.read_line(&mut line)? as u64;
    let header: Header = serde_json::from_str(line.trim_end())
        .map_err(|e| StoreError::Corrupt(format!("bad header: {e}")))?;
    let mut frames = Vec::new();
    loop {
        let mut len = [0u8; 4];
        match read_full(&mut reader, &mut len)? {
            0 => break,
            4 => {}
            _ => {
                log::warn!("{}: dropping truncated frame length", path.display());
                break;
            }
        }
        let n = u32::from_le_bytes(len) as usize;
        let mut buf = vec![0u8; n];
        if read_full(&mut reader, &mut buf)? < n {
            log::warn!("{}: dropping truncated final frame", path.display());
            break;
        }
        let frame: Frame = serde_json::from_slice(&buf)
            .map_err(|e| StoreError::Corrupt(format!("frame {}: {e}", frames.len())))?;
        frames.push(frame);
        good += 4 + n as u64;
    }
    Ok((header, frames, good))
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..])? {
            0 => break,
            n => got += n,
        }
    }
    Ok(got)
}
