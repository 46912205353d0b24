//! `TICN` binary tensor files.
//!
//! Layout (little-endian):
//! - magic: `b"TICN"`
//! - version: u8 = 1
//! - dtype: u8 (1 = f32, 2 = f64, 3 = u8)
//! - rank: u8
//! - reserved: u8 = 0
//! - dims: rank * u64
//! - payload: row-major values

use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"TICN";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TensorError {
    #[error("bad magic {0:02x?}, expected \"TICN\"")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),
    #[error("reserved header byte is {0}, expected 0")]
    Reserved(u8),
    #[error("truncated: need {expected} bytes, have {got}")]
    Truncated { expected: u64, got: u64 },
    #[error("{0} unexpected bytes after the payload")]
    TrailingBytes(u64),
    #[error("dims {0:?} overflow the addressable size")]
    DimOverflow(Vec<u64>),
    #[error("data holds {got} values but dims {dims:?} need {expected}")]
    LengthMismatch { dims: Vec<usize>, expected: usize, got: usize },
    #[error("rank {0} exceeds 255")]
    RankTooLarge(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32 = 1,
    F64 = 2,
    U8 = 3,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
            DType::U8 => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self, TensorError> {
        match code {
            1 => Ok(DType::F32),
            2 => Ok(DType::F64),
            3 => Ok(DType::U8),
            c => Err(TensorError::UnknownDtype(c)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
            TensorData::U8(_) => DType::U8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self, TensorError> {
        if dims.len() > u8::MAX as usize {
            return Err(TensorError::RankTooLarge(dims.len()));
        }
        let expected = checked_numel(dims.iter().map(|&d| d as u64))
            .ok_or_else(|| TensorError::DimOverflow(dims.iter().map(|&d| d as u64).collect()))?;
        if expected != data.len() {
            return Err(TensorError::LengthMismatch { dims, expected, got: data.len() });
        }
        Ok(Tensor { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    /// Rank-2 f32 tensor from an `f64` image (values are rounded to f32).
    pub fn from_array_f32(a: &Array2<f64>) -> Self {
        let (r, c) = a.dim();
        Tensor { dims: vec![r, c], data: TensorData::F32(a.iter().map(|&v| v as f32).collect()) }
    }

    pub fn from_array_f64(a: &Array2<f64>) -> Self {
        let (r, c) = a.dim();
        Tensor { dims: vec![r, c], data: TensorData::F64(a.iter().copied().collect()) }
    }

    pub fn from_array_u8(a: &Array2<u8>) -> Self {
        let (r, c) = a.dim();
        Tensor { dims: vec![r, c], data: TensorData::U8(a.iter().copied().collect()) }
    }

    /// Rank-2 view widened to `f64`.
    pub fn to_array2(&self) -> Result<Array2<f64>, TensorError> {
        let [r, c] = self.dims[..] else {
            return Err(TensorError::LengthMismatch { dims: self.dims.clone(), expected: 2, got: self.dims.len() });
        };
        let v: Vec<f64> = match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
            TensorData::U8(v) => v.iter().map(|&x| x as f64).collect(),
        };
        Ok(Array2::from_shape_vec((r, c), v).expect("length checked at construction"))
    }

    pub fn encode(&self) -> Vec<u8> {
        let elem = self.dtype().size();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.dims.len() + elem * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&[VERSION, self.dtype() as u8, self.dims.len() as u8, 0]);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::U8(v) => out.extend_from_slice(v),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, TensorError> {
        let truncated = |expected: usize| TensorError::Truncated { expected: expected as u64, got: bytes.len() as u64 };
        if bytes.len() < 4 {
            return Err(truncated(HEADER_LEN));
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(TensorError::BadMagic(magic));
        }
        if bytes.len() < HEADER_LEN {
            return Err(truncated(HEADER_LEN));
        }
        if bytes[4] != VERSION {
            return Err(TensorError::UnsupportedVersion(bytes[4]));
        }
        let dtype = DType::from_code(bytes[5])?;
        let rank = bytes[6] as usize;
        if bytes[7] != 0 {
            return Err(TensorError::Reserved(bytes[7]));
        }
        let dims_end = HEADER_LEN + 8 * rank;
        if bytes.len() < dims_end {
            return Err(truncated(dims_end));
        }
        let dims: Vec<u64> =
            bytes[HEADER_LEN..dims_end].chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
        let overflow = || TensorError::DimOverflow(dims.clone());
        let numel = checked_numel(dims.iter().copied()).ok_or_else(overflow)?;
        let payload_len = numel.checked_mul(dtype.size()).ok_or_else(overflow)?;
        let total = dims_end.checked_add(payload_len).ok_or_else(overflow)?;
        if bytes.len() < total {
            return Err(TensorError::Truncated { expected: total as u64, got: bytes.len() as u64 });
        }
        if bytes.len() > total {
            return Err(TensorError::TrailingBytes((bytes.len() - total) as u64));
        }
        let payload = &bytes[dims_end..];
        let data = match dtype {
            DType::F32 => {
                TensorData::F32(payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
            }
            DType::F64 => {
                TensorData::F64(payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
            }
            DType::U8 => TensorData::U8(payload.to_vec()),
        };
        Ok(Tensor { dims: dims.into_iter().map(|d| d as usize).collect(), data })
    }
}

fn checked_numel(mut dims: impl Iterator<Item = u64>) -> Option<usize> {
    let n = dims.try_fold(1u64, |acc, d| acc.checked_mul(d))?;
    usize::try_from(n).ok()
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, tensor.encode()).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::decode(&bytes).map_err(|source| Error::Tensor { path: path.to_path_buf(), source })
}

/// Reads a rank-2 tensor as an `f64` array.
pub fn read_array(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    read_tensor(path)?.to_array2().map_err(|source| Error::Tensor { path: path.to_path_buf(), source })
}
