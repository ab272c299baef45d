//! Binary checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "KSRCKPT\0"
//! version      u32      1
//! dim          u64
//! entities     u64
//! relations    u64
//! offset mode  u8       0 = shared, 1 = per relation
//! names        entities then relations, each u32 byte length + UTF-8
//! matrices     f64, row-major, in this order:
//!              entity centers          entities x dim
//!              relation centers        2*relations x dim (forward, then inverse)
//!              relation offsets        1 or 2*relations x dim
//!              attention layer 1, 2    weight (out x in) then bias
//!              inner layer 1, 2
//!              outer layer 1, 2
//! ```

use std::path::Path;

use ksr_core::boxalg::IntersectionNet;
use ksr_core::ids::Vocab;
use ksr_core::linalg::Matrix;
use ksr_core::params::{OffsetMode, ParamStore};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"KSRCKPT\0";
pub const VERSION: u32 = 1;

pub fn encode(p: &ParamStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for n in [p.dim, p.n_entities(), p.n_relations()] {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    out.push(match p.offset_mode {
        OffsetMode::Shared => 0,
        OffsetMode::PerRelation => 1,
    });
    for name in p.entities.names().iter().chain(p.relations.names()) {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    let floats = p
        .entity_centers
        .as_slice()
        .iter()
        .chain(p.relation_centers.as_slice())
        .chain(p.relation_offsets.as_slice())
        .chain(p.net.params());
    for v in floats {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(CliError::Validation("checkpoint is truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| CliError::Validation("checkpoint count overflows".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let n = rows.checked_mul(cols).ok_or_else(|| CliError::Validation("checkpoint shape overflows".into()))?;
        if (self.buf.len() - self.pos) / 8 < n {
            return Err(CliError::Validation("checkpoint is truncated".into()));
        }
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Ok(Matrix::from_vec(rows, cols, data))
    }

    fn vocab(&mut self, n: usize) -> Result<Vocab> {
        let mut v = Vocab::new();
        for _ in 0..n {
            let len = self.u32()? as usize;
            let name =
                std::str::from_utf8(self.take(len)?).map_err(|_| CliError::Validation("checkpoint name is not UTF-8".into()))?;
            v.intern(name);
        }
        if v.len() != n {
            return Err(CliError::Validation("checkpoint repeats a name".into()));
        }
        Ok(v)
    }
}

/// Decodes a checkpoint. With `expected_dim`, a store of another dimension is
/// rejected with both dimensions in the message.
pub fn decode(bytes: &[u8], expected_dim: Option<usize>) -> Result<ParamStore> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8).ok() != Some(MAGIC.as_slice()) {
        return Err(CliError::Validation("not a checkpoint (bad magic header)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CliError::Validation(format!("unsupported checkpoint version {version}, expected {VERSION}")));
    }
    let dim = r.u64()?;
    if let Some(want) = expected_dim {
        if want != dim {
            return Err(CliError::Validation(format!("checkpoint has dim {dim} but the config asks for dim {want}")));
        }
    }
    let n_e = r.u64()?;
    let n_r = r.u64()?;
    let offset_mode = match r.take(1)?[0] {
        0 => OffsetMode::Shared,
        1 => OffsetMode::PerRelation,
        b => return Err(CliError::Validation(format!("unknown offset mode byte {b}"))),
    };
    let entities = r.vocab(n_e)?;
    let relations = r.vocab(n_r)?;
    let entity_centers = r.matrix(n_e, dim)?;
    let both = n_r.checked_mul(2).ok_or_else(|| CliError::Validation("checkpoint shape overflows".into()))?;
    let relation_centers = r.matrix(both, dim)?;
    let offset_rows = match offset_mode {
        OffsetMode::Shared => 1,
        OffsetMode::PerRelation => both,
    };
    let relation_offsets = r.matrix(offset_rows, dim)?;
    let mut net = IntersectionNet::zeros(dim);
    for v in net.params_mut() {
        *v = r.f64()?;
    }
    if r.pos != bytes.len() {
        return Err(CliError::Validation(format!("checkpoint has {} trailing bytes", bytes.len() - r.pos)));
    }
    let store = ParamStore { dim, entities, relations, entity_centers, relation_centers, offset_mode, relation_offsets, net };
    store.validate()?;
    Ok(store)
}

pub fn save(p: &ParamStore, path: &Path) -> Result<()> {
    std::fs::write(path, encode(p)).map_err(CliError::io(path))
}

pub fn load(path: &Path, expected_dim: Option<usize>) -> Result<ParamStore> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    decode(&bytes, expected_dim).map_err(|e| e.in_file(path))
}
