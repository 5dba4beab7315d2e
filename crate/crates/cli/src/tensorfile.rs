//! `PQT1` binary tensor files.
//!
//! Layout: magic `PQT1`, version byte, dtype byte, rank (u32 LE), `rank`
//! dims (u32 LE), then the row-major little-endian payload. A rank-0 file
//! holds exactly one element.

use std::io::{Read, Write};
use std::path::Path;

use pqa_core::Matrix;

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"PQT1";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    I32(Vec<i32>),
    U8(Vec<u8>),
    F64(Vec<f64>),
}

impl TensorData {
    pub fn dtype_code(&self) -> u8 {
        match self {
            TensorData::F32(_) => 0,
            TensorData::I32(_) => 1,
            TensorData::U8(_) => 2,
            TensorData::F64(_) => 3,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::I32(v) => v.len(),
            TensorData::U8(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn element_size(code: u8) -> Option<usize> {
        match code {
            0 | 1 => Some(4),
            2 => Some(1),
            3 => Some(8),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dims: Vec<u32>,
    pub data: TensorData,
}

fn data_err(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

impl TensorFile {
    pub fn new(dims: Vec<u32>, data: TensorData) -> CliResult<Self> {
        let count = element_count(&dims)?;
        if count != data.len() {
            return Err(data_err(format!(
                "tensor dims {dims:?} need {count} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        Self {
            dims: vec![m.rows() as u32, m.cols() as u32],
            data: TensorData::F64(m.as_slice().to_vec()),
        }
    }

    pub fn f64(dims: Vec<u32>, values: Vec<f64>) -> CliResult<Self> {
        Self::new(dims, TensorData::F64(values))
    }

    /// Values widened to `f64`.
    pub fn to_f64(&self) -> Vec<f64> {
        match &self.data {
            TensorData::F32(v) => v.iter().map(|x| *x as f64).collect(),
            TensorData::I32(v) => v.iter().map(|x| *x as f64).collect(),
            TensorData::U8(v) => v.iter().map(|x| *x as f64).collect(),
            TensorData::F64(v) => v.clone(),
        }
    }

    pub fn to_matrix(&self) -> CliResult<Matrix> {
        if self.dims.len() != 2 {
            return Err(data_err(format!("expected a rank-2 tensor, got dims {:?}", self.dims)));
        }
        Ok(Matrix::new(self.dims[0] as usize, self.dims[1] as usize, self.to_f64())?)
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&[VERSION, self.data.dtype_code()])?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for d in &self.dims {
            w.write_all(&d.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
            TensorData::I32(v) => v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
            TensorData::U8(v) => buf.extend_from_slice(v),
            TensorData::F64(v) => v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
        }
        w.write_all(&buf)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> CliResult<Self> {
        let mut r = bytes;
        let mut head = [0u8; 10];
        r.read_exact(&mut head).map_err(|_| data_err("truncated tensor header"))?;
        if &head[..4] != MAGIC {
            return Err(data_err("not a PQT1 tensor file"));
        }
        if head[4] != VERSION {
            return Err(data_err(format!("unsupported tensor file version {}", head[4])));
        }
        let dtype = head[5];
        let size = TensorData::element_size(dtype).ok_or_else(|| data_err(format!("unknown dtype code {dtype}")))?;
        let rank = u32::from_le_bytes(head[6..10].try_into().expect("4 bytes")) as usize;
        if r.len() < rank * 4 {
            return Err(data_err("truncated tensor dims"));
        }
        let dims: Vec<u32> = r[..rank * 4]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let payload = &r[rank * 4..];
        let count = element_count(&dims)?;
        if payload.len() != count * size {
            return Err(data_err(format!(
                "tensor payload has {} bytes, expected {}",
                payload.len(),
                count * size
            )));
        }
        let data = match dtype {
            0 => TensorData::F32(payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4"))).collect()),
            1 => TensorData::I32(payload.chunks_exact(4).map(|c| i32::from_le_bytes(c.try_into().expect("4"))).collect()),
            2 => TensorData::U8(payload.to_vec()),
            _ => TensorData::F64(payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8"))).collect()),
        };
        Ok(Self { dims, data })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| CliError::io(path, e))?);
        self.write_to(&mut f).map_err(|e| CliError::io(path, e))?;
        f.flush().map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn element_count(dims: &[u32]) -> CliResult<usize> {
    dims.iter()
        .try_fold(1usize, |acc, d| acc.checked_mul(*d as usize))
        .ok_or_else(|| data_err("tensor element count overflows"))
}
