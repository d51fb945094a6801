//! Little-endian binary checkpoint of a trained detector.
//!
//! Layout:
//!
//! | field        | type     |
//! |--------------|----------|
//! | magic        | 8 bytes `DRVPLSTM` |
//! | version      | u32 (1)  |
//! | scalar bytes | u32 (4 = f32, 8 = f64) |
//! | input size   | u32      |
//! | hidden size  | u32      |
//! | layers       | u32      |
//! | output size  | u32      |
//! | head hidden  | u32 (0 = none) |
//! | window size  | u32      |
//! | param count  | u64      |
//! | parameters   | scalars, canonical tensor order |

use std::fs;
use std::path::Path;

use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::model::{LstmModel, ModelShape};
use crate::pipeline::Detector;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"DRVPLSTM";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 * 8 + 8;

fn push_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v =
        u32::try_from(v).map_err(|_| Error::Checkpoint(format!("dimension {v} exceeds u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn save_checkpoint<T: Scalar>(detector: &Detector<T>) -> Result<Vec<u8>> {
    let shape = detector.model.shape();
    let count = detector.model.param_count();
    let mut out = Vec::with_capacity(HEADER_LEN + count * T::BYTES);
    out.extend_from_slice(MAGIC);
    push_u32(&mut out, VERSION as usize)?;
    push_u32(&mut out, T::BYTES)?;
    push_u32(&mut out, shape.input_size)?;
    push_u32(&mut out, shape.hidden_size)?;
    push_u32(&mut out, shape.num_layers)?;
    push_u32(&mut out, shape.output_size)?;
    push_u32(&mut out, shape.head_hidden.unwrap_or(0))?;
    push_u32(&mut out, detector.window_size)?;
    out.extend_from_slice(&(count as u64).to_le_bytes());
    for t in detector.model.tensors() {
        for &v in t.data {
            v.write_le(&mut out);
        }
    }
    Ok(out)
}

struct Header {
    scalar_bytes: usize,
    shape: ModelShape,
    window_size: usize,
    count: usize,
}

fn read_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Checkpoint("truncated header".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let u32_at =
        |k: usize| u32::from_le_bytes(bytes[8 + 4 * k..12 + 4 * k].try_into().unwrap()) as usize;
    let version = u32_at(0);
    if version != VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let head_hidden = u32_at(6);
    let shape = ModelShape {
        input_size: u32_at(2),
        hidden_size: u32_at(3),
        num_layers: u32_at(4),
        output_size: u32_at(5),
        head_hidden: (head_hidden != 0).then_some(head_hidden),
    };
    shape
        .validate()
        .map_err(|e| Error::Checkpoint(format!("invalid shape: {e}")))?;
    let count = u64::from_le_bytes(bytes[40..48].try_into().unwrap()) as usize;
    if count != shape.param_count() {
        return Err(Error::Checkpoint(format!(
            "header declares {count} parameters, shape implies {}",
            shape.param_count()
        )));
    }
    Ok(Header {
        scalar_bytes: u32_at(1),
        shape,
        window_size: u32_at(7),
        count,
    })
}

fn read_params<S: Scalar>(bytes: &[u8], header: &Header) -> Result<Vec<S>> {
    let body = &bytes[HEADER_LEN..];
    if body.len() != header.count * S::BYTES {
        return Err(Error::Checkpoint(format!(
            "expected {} parameter bytes, found {}",
            header.count * S::BYTES,
            body.len()
        )));
    }
    Ok(body.chunks_exact(S::BYTES).map(S::read_le).collect())
}

/// Scalar type name (`f32` or `f64`) stored in a checkpoint header.
pub fn checkpoint_dtype(bytes: &[u8]) -> Result<&'static str> {
    match read_header(bytes)?.scalar_bytes {
        4 => Ok(f32::DTYPE),
        8 => Ok(f64::DTYPE),
        other => Err(Error::Checkpoint(format!(
            "unsupported scalar width {other}"
        ))),
    }
}

/// Loads a checkpoint written with the same scalar type.
pub fn load_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<Detector<T>> {
    let header = read_header(bytes)?;
    if header.scalar_bytes != T::BYTES {
        return Err(Error::Checkpoint(format!(
            "checkpoint stores {}-byte scalars, requested {}",
            header.scalar_bytes,
            T::DTYPE
        )));
    }
    let params = read_params::<T>(bytes, &header)?;
    let mut model = LstmModel::<T>::zeros(header.shape)?;
    model.load_flat(&params)?;
    Ok(Detector::new(model, header.window_size))
}

/// Loads either precision and converts to `T`.
pub fn load_checkpoint_as<T: Scalar>(bytes: &[u8]) -> Result<Detector<T>> {
    let header = read_header(bytes)?;
    match header.scalar_bytes {
        4 => load_checkpoint::<f32>(bytes).map(|d| d.cast()),
        8 => load_checkpoint::<f64>(bytes).map(|d| d.cast()),
        other => Err(Error::Checkpoint(format!(
            "unsupported scalar width {other}"
        ))),
    }
}

pub fn write_checkpoint<T: Scalar>(detector: &Detector<T>, path: &Path) -> Result<String> {
    let bytes = save_checkpoint(detector)?;
    fs::write(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

pub fn read_checkpoint<T: Scalar>(path: &Path) -> Result<Detector<T>> {
    load_checkpoint_as(&fs::read(path)?)
}
