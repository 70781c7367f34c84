//! Model checkpoint file format.
//!
//! Byte layout (all integers little-endian `u32`, all floats little-endian
//! IEEE-754 `f32`):
//!
//! ```text
//! magic      4 bytes   "MCKP"
//! version    u32       currently 1
//! n_widths   u32       number of layer widths
//! widths     u32 * n_widths
//! n_labels   u32       number of class labels (== output width)
//! labels     u32 * n_labels
//! n_tensors  u32       number of parameter tensors
//! per tensor:
//!   rows     u32
//!   cols     u32
//!   data     f32 * rows * cols, row-major
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{MlpSpec, Model};
use crate::tensor::Matrix;

const MAGIC: &[u8; 4] = b"MCKP";
const VERSION: u32 = 1;

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, model.spec.layer_widths.len() as u32);
    for &w in &model.spec.layer_widths {
        put_u32(&mut out, w as u32);
    }
    put_u32(&mut out, model.class_labels.len() as u32);
    for &l in &model.class_labels {
        put_u32(&mut out, l);
    }
    put_u32(&mut out, model.params.len() as u32);
    for p in &model.params {
        put_u32(&mut out, p.rows() as u32);
        put_u32(&mut out, p.cols() as u32);
        for &v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    let magic = cur.take(4)?;
    if magic != MAGIC {
        return Err(Error::input("not a checkpoint file (bad magic)"));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::input(format!("unsupported checkpoint version {}", version)));
    }
    let n_widths = cur.u32()? as usize;
    let widths: Vec<usize> = (0..n_widths)
        .map(|_| cur.u32().map(|w| w as usize))
        .collect::<Result<_>>()?;
    let spec = MlpSpec::new(widths)?;
    let n_labels = cur.u32()? as usize;
    let class_labels: Vec<u32> = (0..n_labels).map(|_| cur.u32()).collect::<Result<_>>()?;
    let n_tensors = cur.u32()? as usize;
    if n_tensors != 2 * spec.num_layers() {
        return Err(Error::input("tensor count does not match the architecture"));
    }
    let mut params = Vec::with_capacity(n_tensors);
    for t in 0..n_tensors {
        let rows = cur.u32()? as usize;
        let cols = cur.u32()? as usize;
        let layer = t / 2;
        let (want_r, want_c) = if t % 2 == 0 {
            (spec.layer_widths[layer + 1], spec.layer_widths[layer])
        } else {
            (1, spec.layer_widths[layer + 1])
        };
        if (rows, cols) != (want_r, want_c) {
            return Err(Error::input(format!(
                "tensor {} has shape {}x{}, expected {}x{}",
                t, rows, cols, want_r, want_c
            )));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let b = cur.take(4)?;
            data.push(f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
        }
        params.push(Matrix::from_vec(rows, cols, data)?);
    }
    if cur.pos != bytes.len() {
        return Err(Error::input("trailing bytes after checkpoint payload"));
    }
    if class_labels.len() != spec.output_dim() {
        return Err(Error::input("label count does not match the output width"));
    }
    Ok(Model {
        spec,
        params,
        class_labels,
    })
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::input("checkpoint file truncated"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
