//! The `ACT1` tensor container.
//!
//! Layout: magic `b"ACT1"`, one version byte, little-endian `u32` rank,
//! `rank` little-endian `u32` dims, then the row-major payload. Version 1
//! stores `f32` values; version 2 stores `f64` values and is used for
//! checkpoint sections where parameters must survive a round trip exactly.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"ACT1";
pub const VERSION_F32: u8 = 1;
pub const VERSION_F64: u8 = 2;

/// A dense row-major tensor as it lives on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::TensorFormat(format!("dims {dims:?} imply {n} values, got {}", data.len())));
        }
        Ok(Tensor { dims, data })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor { dims: vec![data.len()], data }
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }
}

/// Serializes `tensor` with the given payload precision.
pub fn encode(tensor: &Tensor, version: u8, out: &mut impl Write) -> std::io::Result<()> {
    out.write_all(&MAGIC)?;
    out.write_all(&[version])?;
    out.write_all(&(tensor.dims.len() as u32).to_le_bytes())?;
    for &d in &tensor.dims {
        out.write_all(&(d as u32).to_le_bytes())?;
    }
    match version {
        VERSION_F32 => {
            for &v in &tensor.data {
                out.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        _ => {
            for &v in &tensor.data {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn read_exact<const N: usize>(input: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf).map_err(|e| Error::TensorFormat(format!("truncated tensor: {e}")))?;
    Ok(buf)
}

/// Parses one tensor from `input`, leaving the reader positioned after it.
pub fn decode(input: &mut impl Read) -> Result<Tensor> {
    let magic: [u8; 4] = read_exact(input)?;
    if magic != MAGIC {
        return Err(Error::TensorFormat(format!("bad magic bytes {magic:02x?}")));
    }
    let [version] = read_exact::<1>(input)?;
    if version != VERSION_F32 && version != VERSION_F64 {
        return Err(Error::TensorFormat(format!("unsupported version {version}")));
    }
    let rank = u32::from_le_bytes(read_exact(input)?) as usize;
    if rank > 8 {
        return Err(Error::TensorFormat(format!("implausible rank {rank}")));
    }
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(u32::from_le_bytes(read_exact(input)?) as usize);
    }
    let n: usize = dims.iter().product();
    let mut data = Vec::with_capacity(n);
    if version == VERSION_F32 {
        for _ in 0..n {
            data.push(f32::from_le_bytes(read_exact(input)?) as f64);
        }
    } else {
        for _ in 0..n {
            data.push(f64::from_le_bytes(read_exact(input)?));
        }
    }
    Ok(Tensor { dims, data })
}

pub fn to_bytes(tensor: &Tensor, version: u8) -> Vec<u8> {
    let mut buf = Vec::new();
    encode(tensor, version, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

pub fn save(path: &Path, tensor: &Tensor) -> Result<()> {
    fs::write(path, to_bytes(tensor, VERSION_F32)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cursor = bytes.as_slice();
    let tensor = decode(&mut cursor)?;
    if !cursor.is_empty() {
        return Err(Error::TensorFormat(format!("{} trailing bytes after payload", cursor.len())));
    }
    Ok(tensor)
}
