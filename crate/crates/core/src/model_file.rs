//! Binary model persistence.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "CSRR"            magic
//! u8                format version (1)
//! u8                kind: 1 = U, V   2 = P, Q, V
//! u64 × 4           rows, cols, latent dim (0 for kind 1), seed
//! u32 + bytes       UTF-8 configuration echo
//! per matrix:       u64 rows, u64 cols, u64 len, len × f64, row-major
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{CsrrError, Result};
use crate::matrix::DenseMatrix;

pub const MAGIC: &[u8; 4] = b"CSRR";
pub const VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    LowRankSparse = 1,
    Factored = 2,
}

impl ModelKind {
    fn from_byte(b: u8, offset: usize) -> Result<Self> {
        match b {
            1 => Ok(ModelKind::LowRankSparse),
            2 => Ok(ModelKind::Factored),
            other => Err(CsrrError::Format {
                offset,
                message: format!("unknown model kind {other}"),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelPayload {
    /// `U` and `V`, both `rows × cols`.
    LowRankSparse { u: DenseMatrix, v: DenseMatrix },
    /// `P` (`d × rows`), `Q` (`d × cols`) and `V` (`rows × cols`).
    Factored {
        p: DenseMatrix,
        q: DenseMatrix,
        v: DenseMatrix,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub seed: u64,
    /// Free-form configuration text stored alongside the weights.
    pub config: String,
    pub payload: ModelPayload,
}

impl ModelFile {
    pub fn kind(&self) -> ModelKind {
        match self.payload {
            ModelPayload::LowRankSparse { .. } => ModelKind::LowRankSparse,
            ModelPayload::Factored { .. } => ModelKind::Factored,
        }
    }

    /// `(rows, cols)` of the predicted matrix.
    pub fn shape(&self) -> (usize, usize) {
        match &self.payload {
            ModelPayload::LowRankSparse { u, .. } => u.shape(),
            ModelPayload::Factored { v, .. } => v.shape(),
        }
    }

    pub fn latent_dim(&self) -> usize {
        match &self.payload {
            ModelPayload::LowRankSparse { .. } => 0,
            ModelPayload::Factored { p, .. } => p.rows(),
        }
    }

    /// Predicted preference matrix `U + V` or `PᵀQ + V`.
    pub fn scores(&self) -> Result<DenseMatrix> {
        match &self.payload {
            ModelPayload::LowRankSparse { u, v } => u.add(v),
            ModelPayload::Factored { p, q, v } => p.transpose_matmul(q)?.add(v),
        }
    }

    fn check_shapes(&self) -> Result<()> {
        let (rows, cols) = self.shape();
        let ok = match &self.payload {
            ModelPayload::LowRankSparse { u, v } => u.shape() == v.shape(),
            ModelPayload::Factored { p, q, v } => {
                p.rows() == q.rows() && p.cols() == rows && q.cols() == cols && v.shape() == (rows, cols)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(CsrrError::InvalidMatrix("model matrices have inconsistent shapes".into()))
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.check_shapes()?;
        let (rows, cols) = self.shape();
        let config_len = u32::try_from(self.config.len())
            .map_err(|_| CsrrError::InvalidConfig("configuration echo exceeds 4 GiB".into()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.kind() as u8);
        for v in [rows as u64, cols as u64, self.latent_dim() as u64, self.seed] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&config_len.to_le_bytes());
        out.extend_from_slice(self.config.as_bytes());
        let matrices: Vec<&DenseMatrix> = match &self.payload {
            ModelPayload::LowRankSparse { u, v } => vec![u, v],
            ModelPayload::Factored { p, q, v } => vec![p, q, v],
        };
        for m in matrices {
            for v in [m.rows() as u64, m.cols() as u64, m.values().len() as u64] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for x in m.values() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(r.error_at(0, "bad magic bytes"));
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(r.error_at(4, &format!("unsupported version {version}")));
        }
        let kind = ModelKind::from_byte(r.u8()?, 5)?;
        let rows = r.dim()?;
        let cols = r.dim()?;
        let latent = r.dim()?;
        let seed = r.u64()?;
        let config_len = r.u32()? as usize;
        let config_at = r.pos;
        let config = std::str::from_utf8(r.take(config_len)?)
            .map_err(|e| r.error_at(config_at, &format!("configuration is not UTF-8: {e}")))?
            .to_string();

        let payload = match kind {
            ModelKind::LowRankSparse => {
                if latent != 0 {
                    return Err(r.error_at(22, "latent dim must be 0 for a U, V model"));
                }
                let u = r.matrix((rows, cols))?;
                let v = r.matrix((rows, cols))?;
                ModelPayload::LowRankSparse { u, v }
            }
            ModelKind::Factored => {
                if latent == 0 {
                    return Err(r.error_at(22, "latent dim must be positive for a P, Q, V model"));
                }
                let p = r.matrix((latent, rows))?;
                let q = r.matrix((latent, cols))?;
                let v = r.matrix((rows, cols))?;
                ModelPayload::Factored { p, q, v }
            }
        };
        if r.pos != bytes.len() {
            return Err(r.error_at(r.pos, &format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(ModelFile { seed, config, payload })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = fs::File::create(path)?;
        file.write_all(&self.to_bytes()?)?;
        file.sync_all()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn error_at(&self, offset: usize, message: &str) -> CsrrError {
        CsrrError::Format {
            offset,
            message: message.to_string(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(self.error_at(
                self.pos,
                &format!("truncated: need {n} bytes, {} left", self.bytes.len() - self.pos),
            )),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn dim(&mut self) -> Result<usize> {
        let at = self.pos;
        usize::try_from(self.u64()?).map_err(|_| self.error_at(at, "dimension overflows usize"))
    }

    fn matrix(&mut self, expected: (usize, usize)) -> Result<DenseMatrix> {
        let at = self.pos;
        let rows = self.dim()?;
        let cols = self.dim()?;
        let len = self.dim()?;
        if (rows, cols) != expected {
            return Err(self.error_at(
                at,
                &format!("matrix is {rows}x{cols}, header implies {}x{}", expected.0, expected.1),
            ));
        }
        if Some(len) != rows.checked_mul(cols) {
            return Err(self.error_at(at + 16, &format!("length {len} does not match {rows}x{cols}")));
        }
        let raw = self.take(len.checked_mul(8).ok_or_else(|| self.error_at(at + 16, "length overflow"))?)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        DenseMatrix::new(rows, cols, values).map_err(|e| self.error_at(at, &e.to_string()))
    }
}
