//! Little-endian binary helpers shared by the cache formats.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 8]) -> Self {
        Writer { buf: magic.to_vec() }
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        for &x in v {
            self.f64(x);
        }
    }

    pub fn finish(self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.buf).map_err(|e| Error::io(path, e))
    }
}

pub(crate) struct Reader<'p> {
    buf: Vec<u8>,
    pos: usize,
    path: &'p Path,
}

impl<'p> Reader<'p> {
    pub fn open(path: &'p Path, magic: &[u8; 8]) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        if buf.len() < 8 || &buf[..8] != magic {
            return Err(Error::Cache {
                path: path.to_path_buf(),
                msg: "bad magic".into(),
            });
        }
        Ok(Reader { buf, pos: 8, path })
    }

    fn take(&mut self) -> Result<[u8; 8]> {
        let end = self.pos + 8;
        if end > self.buf.len() {
            return Err(Error::Cache {
                path: self.path.to_path_buf(),
                msg: "truncated file".into(),
            });
        }
        let mut b = [0u8; 8];
        b.copy_from_slice(&self.buf[self.pos..end]);
        self.pos = end;
        Ok(b)
    }

    pub fn u64(&mut self) -> Result<u64> {
        self.take().map(u64::from_le_bytes)
    }

    pub fn usize(&mut self) -> Result<usize> {
        self.u64().map(|v| v as usize)
    }

    pub fn f64(&mut self) -> Result<f64> {
        self.take().map(f64::from_le_bytes)
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn invalid(&self, msg: impl Into<String>) -> Error {
        Error::Cache {
            path: self.path.to_path_buf(),
            msg: msg.into(),
        }
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.invalid("trailing bytes"));
        }
        Ok(())
    }
}
