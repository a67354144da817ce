//! Float32 matrix dumps: one line of JSON header, a newline, then
//! `rows * cols` little-endian f32 values in row-major order.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub rows: usize,
    pub cols: usize,
    /// `linear`, `log`, `mel`, `envelope` or `embedding`.
    pub kind: String,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDump {
    pub header: DumpHeader,
    pub data: Vec<f32>,
}

impl MatrixDump {
    pub fn new(rows: usize, cols: usize, kind: &str, data: Vec<f32>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} dump given {} values",
                data.len()
            )));
        }
        Ok(Self {
            header: DumpHeader {
                rows,
                cols,
                kind: kind.to_string(),
                extra: Default::default(),
            },
            data,
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.header.extra.insert(key.to_string(), value.into());
        self
    }

    pub fn row(&self, r: usize) -> &[f32] {
        let c = self.header.cols;
        &self.data[r * c..(r + 1) * c]
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        let header = serde_json::to_string(&self.header).map_err(std::io::Error::other)?;
        out.write_all(header.as_bytes())?;
        out.write_all(b"\n")?;
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_from(input: impl Read) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut line = String::new();
        reader
            .read_line(&mut line)
            .map_err(|e| Error::io("<dump>", e))?;
        let header: DumpHeader = serde_json::from_str(line.trim_end())?;
        let mut bytes = Vec::new();
        reader
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io("<dump>", e))?;
        let expected = header.rows * header.cols * 4;
        if bytes.len() != expected {
            return Err(Error::Shape(format!(
                "dump payload has {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { header, data })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_meta() {
        let d = MatrixDump::new(2, 3, "mel", vec![0.0, 1.0, 2.0, 3.0, 4.0, -5.5])
            .unwrap()
            .with_meta("sample_rate", 24000);
        let mut bytes = Vec::new();
        d.write_to(&mut bytes).unwrap();
        let first_line = bytes.split(|&b| b == b'\n').next().unwrap();
        let h: serde_json::Value = serde_json::from_slice(first_line).unwrap();
        assert_eq!(h["rows"], 2);
        assert_eq!(h["kind"], "mel");
        assert_eq!(h["sample_rate"], 24000);
        assert_eq!(bytes.len(), first_line.len() + 1 + 24);
        assert_eq!(MatrixDump::read_from(&bytes[..]).unwrap(), d);
        assert_eq!(d.row(1), &[3.0, 4.0, -5.5]);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(MatrixDump::new(2, 2, "log", vec![0.0; 3]).is_err());
        let d = MatrixDump::new(1, 2, "log", vec![1.0, 2.0]).unwrap();
        let mut bytes = Vec::new();
        d.write_to(&mut bytes).unwrap();
        bytes.pop();
        assert!(MatrixDump::read_from(&bytes[..]).is_err());
    }
}
