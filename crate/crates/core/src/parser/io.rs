//! Binary model files.
//!
//! Layout, all integers little-endian:
//! magic `TBVECMDL`, `u32` format version, the configuration as key/value
//! strings, the treebank names, word, character and label vocabularies, and
//! the named tensors (name, rank, `u64` dims, `f32` data).
//! Strings are a `u32` byte length followed by UTF-8.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::parser::config::ParserConfig;
use crate::parser::model::{shapes, ParserModel, Params, Vocab};

pub const MAGIC: &[u8; 8] = b"TBVECMDL";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

fn put_strings(out: &mut Vec<u8>, items: &[String]) {
    put_u32(out, items.len() as u32);
    for s in items {
        put_str(out, s);
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| Error::ModelFormat(format!("truncated file at byte {}", self.pos)))?;
        let slice = &self.data[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::ModelFormat("invalid UTF-8 string".into()))
    }

    fn strings(&mut self) -> Result<Vec<String>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.string()).collect()
    }
}

impl ParserModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        let pairs = self.config.to_pairs();
        put_u32(&mut out, pairs.len() as u32);
        for (k, v) in &pairs {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        put_strings(&mut out, &self.treebanks);
        put_strings(&mut out, self.words.items());
        put_strings(&mut out, self.chars.items());
        put_strings(&mut out, self.labels.items());
        let shapes = shapes(
            &self.config,
            self.words.len(),
            self.chars.len(),
            self.m(),
            self.labels.len(),
        );
        let tensors = self.params.tensors();
        put_u32(&mut out, tensors.len() as u32);
        for ((name, shape), data) in Params::<f32>::NAMES.iter().zip(&shapes).zip(tensors) {
            put_str(&mut out, name);
            put_u32(&mut out, shape.len() as u32);
            for &d in shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for x in data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut c = Cursor { data, pos: 0 };
        if c.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
            return Err(Error::ModelFormat("not a model file (bad magic)".into()));
        }
        let version = c.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::ModelVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let n_pairs = c.u32()? as usize;
        let mut pairs = BTreeMap::new();
        for _ in 0..n_pairs {
            let k = c.string()?;
            let v = c.string()?;
            pairs.insert(k, v);
        }
        let config = ParserConfig::from_pairs(&pairs)?;
        let treebanks = c.strings()?;
        if treebanks.is_empty() {
            return Err(Error::ModelFormat("model lists no treebanks".into()));
        }
        let words = Vocab::new(c.strings()?)?;
        let chars = Vocab::new(c.strings()?)?;
        let labels = Vocab::new(c.strings()?)?;
        let expected = shapes(&config, words.len(), chars.len(), treebanks.len(), labels.len());

        let n_tensors = c.u32()? as usize;
        if n_tensors != expected.len() {
            return Err(Error::ModelFormat(format!(
                "expected {} tensors, found {n_tensors}",
                expected.len()
            )));
        }
        let mut tensors: Vec<Vec<f32>> = Vec::with_capacity(n_tensors);
        for (name, shape) in Params::<f32>::NAMES.iter().zip(&expected) {
            let found_name = c.string()?;
            if found_name != *name {
                return Err(Error::ModelFormat(format!("expected tensor {name}, found {found_name}")));
            }
            let rank = c.u32()? as usize;
            let dims = (0..rank).map(|_| c.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            if &dims != shape {
                return Err(Error::ModelFormat(format!(
                    "tensor {name}: shape {dims:?} does not match {shape:?}"
                )));
            }
            let len: usize = dims.iter().product();
            let raw = c.take(len.checked_mul(4).ok_or_else(|| Error::ModelFormat("tensor too large".into()))?)?;
            tensors.push(
                raw.chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                    .collect(),
            );
        }
        if c.pos != data.len() {
            return Err(Error::ModelFormat("trailing bytes after tensors".into()));
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("tensor count checked");
        let params = Params {
            word: next(),
            chars: next(),
            fwd_x: next(),
            fwd_h: next(),
            fwd_b: next(),
            bwd_x: next(),
            bwd_h: next(),
            bwd_b: next(),
            tb: next(),
            hidden_w: next(),
            hidden_b: next(),
            out_w: next(),
            out_b: next(),
        };
        Ok(ParserModel {
            config,
            treebanks,
            words,
            chars,
            labels,
            params,
        })
    }

    pub fn write_to<W: Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut reader: R) -> Result<Self> {
        let mut data = Vec::new();
        reader.read_to_end(&mut data)?;
        Self::from_bytes(&data)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
