//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! magic  b"SFNN"
//! u32    version (1)
//! u32    layer count
//! per layer:
//!   u32 rows, u32 cols, u8 activation code
//!   rows*cols f32 weights (row-major), rows f32 bias
//! ```

use crate::dense::{Activation, DenseLayer};
use crate::matrix::Matrix;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"SFNN";
pub const VERSION: u32 = 1;

/// Upper bound on any single dimension; guards against allocating garbage.
const MAX_DIM: u32 = 1 << 16;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("layer {layer}: {reason}")]
    Corrupt { layer: usize, reason: String },
    #[error("architecture mismatch: {0}")]
    Architecture(String),
}

fn write_u32(w: &mut impl Write, x: u32) -> io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn write_f32s(w: &mut impl Write, xs: &[f32]) -> io::Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_f32s(r: &mut impl Read, n: usize) -> io::Result<Vec<f32>> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

pub fn write_layers(w: &mut impl Write, layers: &[&DenseLayer]) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    write_u32(w, VERSION)?;
    write_u32(w, layers.len() as u32)?;
    for l in layers {
        write_u32(w, l.weights.rows() as u32)?;
        write_u32(w, l.weights.cols() as u32)?;
        w.write_all(&[l.activation.code()])?;
        write_f32s(w, l.weights.data())?;
        write_f32s(w, &l.bias)?;
    }
    Ok(())
}

pub fn read_layers(r: &mut impl Read) -> Result<Vec<DenseLayer>, CheckpointError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let count = read_u32(r)?;
    let mut layers = Vec::new();
    for layer in 0..count as usize {
        let corrupt = |reason: String| CheckpointError::Corrupt { layer, reason };
        let rows = read_u32(r)?;
        let cols = read_u32(r)?;
        if rows == 0 || cols == 0 || rows > MAX_DIM || cols > MAX_DIM {
            return Err(corrupt(format!("implausible shape {rows}x{cols}")));
        }
        let mut code = [0u8; 1];
        r.read_exact(&mut code)?;
        let activation = Activation::from_code(code[0]).ok_or_else(|| corrupt(format!("activation code {}", code[0])))?;
        let (rows, cols) = (rows as usize, cols as usize);
        let weights = read_f32s(r, rows * cols)?;
        let bias = read_f32s(r, rows)?;
        if weights.iter().chain(&bias).any(|x| !x.is_finite()) {
            return Err(corrupt("non-finite parameter".into()));
        }
        let weights = Matrix::from_vec(rows, cols, weights).map_err(|e| corrupt(e.to_string()))?;
        layers.push(DenseLayer::from_parts(weights, bias, activation).map_err(|e| corrupt(e.to_string()))?);
    }
    Ok(layers)
}

pub fn save_layers(path: &Path, layers: &[&DenseLayer]) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_layers(&mut w, layers)?;
    w.flush()?;
    Ok(())
}

pub fn load_layers(path: &Path) -> Result<Vec<DenseLayer>, CheckpointError> {
    read_layers(&mut BufReader::new(File::open(path)?))
}
