//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! "AMN1"  u16 version
//! u32 n   n bytes of UTF-8 header: `key=value` lines, one `vocab=` line
//! repeated until EOF:
//!   u32 n  n bytes of array name
//!   u8 rank  rank × u32 dims  f32 payload
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Model, ModelConfig, ModelParams};
use crate::data::Vocabulary;
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tensor::{Scalar, Tensor};

pub const MAGIC: &[u8; 4] = b"AMN1";
pub const VERSION: u16 = 1;

pub fn save_checkpoint<T: Scalar>(path: &Path, model: &Model<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| with_path(e, path))?);
    write_checkpoint(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Model<T>> {
    let mut r = BufReader::new(File::open(path).map_err(|e| with_path(e, path))?);
    read_checkpoint(&mut r)
}

pub fn write_checkpoint<T: Scalar>(w: &mut impl Write, model: &Model<T>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let mut header = String::new();
    for (k, v) in model.config.to_pairs() {
        header.push_str(&format!("{k}={v}\n"));
    }
    header.push_str("vocab=");
    header.push_str(&model.vocab.corpus_tokens().join(" "));
    header.push('\n');
    write_block(w, header.as_bytes())?;
    for (name, t) in model.params.store.iter() {
        write_block(w, name.as_bytes())?;
        w.write_all(&[t.shape().len() as u8])?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(4 * t.len());
        for x in t.data() {
            buf.extend_from_slice(&x.to_f32().unwrap().to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

fn write_block(w: &mut impl Write, bytes: &[u8]) -> Result<()> {
    w.write_all(&(bytes.len() as u32).to_le_bytes())?;
    w.write_all(bytes)?;
    Ok(())
}

fn truncated() -> Error {
    Error::Format("checkpoint is truncated".into())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => truncated(),
        _ => Error::Io(e),
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<T: Scalar>(r: &mut impl Read) -> Result<Model<T>> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let mut v = [0u8; 2];
    read_exact(r, &mut v)?;
    let version = u16::from_le_bytes(v);
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let n = read_u32(r)? as usize;
    let mut header = vec![0u8; n];
    read_exact(r, &mut header)?;
    let header =
        String::from_utf8(header).map_err(|_| Error::Format("header is not UTF-8".into()))?;
    let mut pairs = BTreeMap::new();
    let mut vocab = None;
    for line in header.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header line {line:?}")))?;
        if k == "vocab" {
            vocab = Some(Vocabulary::from_tokens(v.split_whitespace())?);
        } else {
            pairs.insert(k.to_string(), v.to_string());
        }
    }
    let vocab = vocab.ok_or_else(|| Error::Format("header has no vocabulary".into()))?;
    let config = ModelConfig::from_pairs(&pairs)?;
    if config.vocab_size != vocab.len() {
        return Err(Error::Format(format!(
            "vocab_size {} but {} vocabulary entries",
            config.vocab_size,
            vocab.len()
        )));
    }

    let mut store = ParamStore::new();
    loop {
        let mut len = [0u8; 4];
        let got = read_partial(r, &mut len)?;
        if got == 0 {
            break;
        }
        if got < 4 {
            return Err(truncated());
        }
        let mut name = vec![0u8; u32::from_le_bytes(len) as usize];
        read_exact(r, &mut name)?;
        let name =
            String::from_utf8(name).map_err(|_| Error::Format("array name is not UTF-8".into()))?;
        let mut rank = [0u8; 1];
        read_exact(r, &mut rank)?;
        let mut shape = Vec::with_capacity(rank[0] as usize);
        for _ in 0..rank[0] {
            shape.push(read_u32(r)? as usize);
        }
        let count: usize = shape.iter().product();
        let mut raw = vec![0u8; 4 * count];
        read_exact(r, &mut raw)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();
        if store.find(&name).is_some() {
            return Err(Error::Format(format!("array {name} appears twice")));
        }
        store.add(name, Tensor::new(shape, data)?);
    }
    let params = ModelParams::from_store(store, &config)?;
    Ok(Model {
        config,
        vocab,
        params,
    })
}

/// Fill as much of `buf` as the reader provides; 0 means clean EOF.
fn read_partial(r: &mut impl Read, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::Io(e)),
        }
    }
    Ok(filled)
}
