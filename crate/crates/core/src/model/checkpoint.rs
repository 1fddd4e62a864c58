//! Checkpoint layout, little-endian throughout:
//!
//! ```text
//! "MVCK1"
//! u32 header length, UTF-8 JSON header {"dims": .., "frontend": ..}
//! per tensor, in layout order: u32 rank, rank × u32 dims, f64 payload
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{ModelDims, ModelParams, Tensor};
use crate::dataio::AudioFrontend;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"MVCK1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    /// How audio was featurized for training; needed to synthesize waveforms.
    pub frontend: Option<AudioFrontend>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    dims: ModelDims,
    frontend: Option<AudioFrontend>,
}

pub fn write_checkpoint<W: Write>(mut w: W, ckpt: &Checkpoint) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        dims: ckpt.params.dims.clone(),
        frontend: ckpt.frontend,
    })
    .expect("header serializes");
    let io = |e| Error::io("<checkpoint>", e);
    w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    w.write_all(&(header.len() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&header).map_err(io)?;
    for t in &ckpt.params.tensors {
        w.write_all(&(t.shape.len() as u32).to_le_bytes()).map_err(io)?;
        for &d in &t.shape {
            w.write_all(&(d as u32).to_le_bytes()).map_err(io)?;
        }
        for v in &t.data {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::MalformedHeader(format!("checkpoint truncated at {what}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)
        .map_err(|_| Error::MalformedHeader("checkpoint truncated at magic".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::MalformedHeader("not a checkpoint (bad magic)".into()));
    }
    let len = read_u32(&mut r, "header length")? as usize;
    let mut header = vec![0u8; len];
    r.read_exact(&mut header)
        .map_err(|_| Error::MalformedHeader("checkpoint truncated in header".into()))?;
    let header: Header = serde_json::from_slice(&header)
        .map_err(|e| Error::MalformedHeader(format!("checkpoint header: {e}")))?;
    let template = ModelParams::zeros(header.dims.clone())?;
    let mut tensors = Vec::with_capacity(template.tensors.len());
    for expected in &template.tensors {
        let rank = read_u32(&mut r, &expected.name)? as usize;
        if rank > 8 {
            return Err(Error::MalformedHeader(format!("{}: rank {rank}", expected.name)));
        }
        let shape = (0..rank)
            .map(|_| read_u32(&mut r, &expected.name).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        if shape != expected.shape {
            return Err(Error::DimensionMismatch(format!(
                "{}: stored shape {:?}, dimension record implies {:?}",
                expected.name, shape, expected.shape
            )));
        }
        let mut payload = vec![0u8; expected.len() * 8];
        r.read_exact(&mut payload)
            .map_err(|_| Error::MalformedHeader(format!("checkpoint truncated in {}", expected.name)))?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push(Tensor {
            name: expected.name.clone(),
            shape,
            data,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::io("<checkpoint>", e))? != 0 {
        return Err(Error::MalformedHeader("trailing bytes after last tensor".into()));
    }
    Ok(Checkpoint {
        params: ModelParams::from_tensors(header.dims, tensors)?,
        frontend: header.frontend,
    })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(BufWriter::new(f), ckpt).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(f))
}
