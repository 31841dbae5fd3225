//! The clip archive: a little-endian binary file of labeled clips.
//!
//! ```text
//! "A3DC" | u16 version | u32 clip count
//! u16 label count | { u16 byte length | UTF-8 name } per label
//! per record: u32 label | u32 T | u32 C | u32 H | u32 W | f64 fps | T*C*H*W f32
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const ARCHIVE_MAGIC: &[u8; 4] = b"A3DC";
pub const ARCHIVE_VERSION: u16 = 1;

/// One labeled clip: `frames` is `T x C x H x W`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchiveRecord {
    pub label: usize,
    pub frames: Tensor<f32>,
    pub fps: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClipArchive {
    pub labels: Vec<String>,
    pub records: Vec<ArchiveRecord>,
}

impl ClipArchive {
    pub fn new(labels: Vec<String>) -> Self {
        ClipArchive { labels, records: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, label: usize, frames: Tensor<f32>, fps: f64) -> Result<()> {
        if label >= self.labels.len() {
            return Err(Error::Index(format!("label {label} outside a table of {}", self.labels.len())));
        }
        if frames.rank() != 4 {
            return Err(Error::Dimension(format!("archive records are T x C x H x W, got {:?}", frames.shape())));
        }
        self.records.push(ArchiveRecord { label, frames, fps });
        Ok(())
    }

    pub fn record_labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Subset of records by index, keeping the label table.
    pub fn subset(&self, indices: &[usize]) -> ClipArchive {
        ClipArchive { labels: self.labels.clone(), records: indices.iter().map(|&i| self.records[i].clone()).collect() }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let payload: usize = self.records.iter().map(|r| 36 + 4 * r.frames.len()).sum();
        let mut out = Vec::with_capacity(16 + payload);
        out.extend_from_slice(ARCHIVE_MAGIC);
        out.extend_from_slice(&ARCHIVE_VERSION.to_le_bytes());
        out.extend_from_slice(&u32_of(self.records.len(), "clip count")?.to_le_bytes());
        let count = u16::try_from(self.labels.len()).map_err(|_| Error::Config("more than 65535 labels".into()))?;
        out.extend_from_slice(&count.to_le_bytes());
        for name in &self.labels {
            let len = u16::try_from(name.len()).map_err(|_| Error::Config(format!("label '{name}' is too long")))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
        }
        for r in &self.records {
            if r.label >= self.labels.len() {
                return Err(Error::Index(format!("record label {} outside the label table", r.label)));
            }
            out.extend_from_slice(&u32_of(r.label, "label")?.to_le_bytes());
            for &d in r.frames.shape() {
                out.extend_from_slice(&u32_of(d, "extent")?.to_le_bytes());
            }
            out.extend_from_slice(&r.fps.to_le_bytes());
            for v in r.frames.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Parses an archive; `origin` names the source in error messages.
    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != ARCHIVE_MAGIC {
            return Err(Error::format(origin, "not a clip archive (bad magic)"));
        }
        let mut r = Reader { bytes, pos: 4 };
        let header = |_| Error::Corrupt(format!("{}: truncated header", origin.display()));
        let version = r.u16().map_err(header)?;
        if version != ARCHIVE_VERSION {
            return Err(Error::format(origin, format!("unsupported archive version {version}")));
        }
        let count = r.u32().map_err(header)? as usize;
        let nlabels = r.u16().map_err(header)? as usize;
        let mut labels = Vec::with_capacity(nlabels);
        for _ in 0..nlabels {
            let len = r.u16().map_err(header)? as usize;
            let raw = r.take(len).map_err(header)?;
            let name = std::str::from_utf8(raw)
                .map_err(|_| Error::format(origin, "label name is not UTF-8"))?
                .to_string();
            labels.push(name);
        }
        let mut records = Vec::with_capacity(count.min(1 << 16));
        for i in 0..count {
            let corrupt = |what: &str| Error::Corrupt(format!("{}: record {i} {what}", origin.display()));
            let label = r.u32().map_err(|_| corrupt("is truncated"))? as usize;
            let mut shape = [0usize; 4];
            for d in &mut shape {
                *d = r.u32().map_err(|_| corrupt("is truncated"))? as usize;
            }
            let fps = r.f64().map_err(|_| corrupt("is truncated"))?;
            if label >= labels.len() {
                return Err(corrupt(&format!("has label {label} outside a table of {}", labels.len())));
            }
            let n = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).filter(|&n| n > 0);
            let n = n.ok_or_else(|| corrupt(&format!("has invalid extents {shape:?}")))?;
            let raw = r.take(n.checked_mul(4).ok_or_else(|| corrupt("is too large"))?).map_err(|_| corrupt("is truncated"))?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            records.push(ArchiveRecord { label, frames: Tensor::new(&shape, data)?, fps });
        }
        if r.pos != bytes.len() {
            return Err(Error::Corrupt(format!(
                "{}: {} trailing bytes after the last record",
                origin.display(),
                bytes.len() - r.pos
            )));
        }
        Ok(ClipArchive { labels, records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        ClipArchive::from_bytes(&bytes, path)
    }
}

fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Config(format!("{what} {v} does not fit in 32 bits")))
}

/// Bounds-checked little-endian cursor.
pub(crate) struct Reader<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Reader<'a> {
    pub fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], ()> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(())?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u16(&mut self) -> std::result::Result<u16, ()> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> std::result::Result<u32, ()> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> std::result::Result<u64, ()> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> std::result::Result<f64, ()> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
