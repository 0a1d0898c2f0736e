//! Inference for the two learned compressors: sequence resizing and memory tokens.
//!
//! The learned pieces (MLP weights, encoder outputs) come from files; nothing is trained here.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::format::{put_f32s, put_u32, to_u32, ByteReader};
use crate::matrix::EmbeddingMatrix;

pub const MRSZ_MAGIC: &[u8; 4] = b"MRSZ";
pub const MRSZ_VERSION: u32 = 1;

/// Weights of the bias-free sequence MLP: `w1` is `d × n0`, `w2` is `m × d`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ResizeWeights {
    n0: usize,
    d: usize,
    m: usize,
    w1: Vec<f32>,
    w2: Vec<f32>,
}

impl ResizeWeights {
    pub fn new(n0: usize, d: usize, m: usize, w1: Vec<f32>, w2: Vec<f32>) -> Result<Self> {
        if n0 == 0 || d == 0 || m == 0 {
            return Err(Error::Contract(format!(
                "resize shape n0={n0}, d={d}, m={m} must be all nonzero"
            )));
        }
        if w1.len() != d * n0 {
            return Err(Error::Contract(format!(
                "W1 has {} values, expected {d}x{n0}",
                w1.len()
            )));
        }
        if w2.len() != m * d {
            return Err(Error::Contract(format!(
                "W2 has {} values, expected {m}x{d}",
                w2.len()
            )));
        }
        if w1.iter().chain(&w2).any(|v| !v.is_finite()) {
            return Err(Error::Validation("resize weights must be finite".into()));
        }
        Ok(Self { n0, d, m, w1, w2 })
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn hidden(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn w1(&self) -> &[f32] {
        &self.w1
    }

    pub fn w2(&self) -> &[f32] {
        &self.w2
    }
}

/// Keep the first `n0` rows, or append zero rows up to `n0`.
pub fn pad_trunc(z: &EmbeddingMatrix, n0: usize) -> Result<EmbeddingMatrix> {
    if n0 == 0 {
        return Err(Error::Contract(
            "pad_trunc length must be at least 1".into(),
        ));
    }
    if z.rows() >= n0 {
        Ok(z.select_rows(&(0..n0).collect::<Vec<_>>()))
    } else {
        Ok(z.zero_padded(n0))
    }
}

/// `C = W2 · ReLU(W1 · pad_trunc(Z, n0))`, applied to every hidden channel independently.
pub fn seq_resize(z: &EmbeddingMatrix, w: &ResizeWeights) -> Result<EmbeddingMatrix> {
    let zbar = pad_trunc(z, w.n0)?;
    let h = z.dim();
    let zdata = zbar.data();

    // hidden[e][c] = ReLU(Σ_t W1[e][t] · Z̄[t][c])
    let mut hidden = vec![0.0f64; w.d * h];
    for e in 0..w.d {
        let w1_row = &w.w1[e * w.n0..(e + 1) * w.n0];
        let out = &mut hidden[e * h..(e + 1) * h];
        for (t, &weight) in w1_row.iter().enumerate() {
            let weight = weight as f64;
            for (o, &v) in out.iter_mut().zip(&zdata[t * h..(t + 1) * h]) {
                *o += weight * v as f64;
            }
        }
        for o in out.iter_mut() {
            *o = o.max(0.0);
        }
    }

    let mut c = vec![0.0f64; w.m * h];
    for k in 0..w.m {
        let w2_row = &w.w2[k * w.d..(k + 1) * w.d];
        let out = &mut c[k * h..(k + 1) * h];
        for (e, &weight) in w2_row.iter().enumerate() {
            let weight = weight as f64;
            for (o, &v) in out.iter_mut().zip(&hidden[e * h..(e + 1) * h]) {
                *o += weight * v;
            }
        }
    }
    EmbeddingMatrix::from_f64_rows(w.m, h, &c)
}

/// Where the memory tokens sit in the encoder output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MemTokPlacement {
    #[default]
    Suffix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemTokLayout {
    pub m: usize,
    pub placement: MemTokPlacement,
}

impl MemTokLayout {
    pub fn suffix(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Contract(
                "memory token count must be at least 1".into(),
            ));
        }
        Ok(Self {
            m,
            placement: MemTokPlacement::Suffix,
        })
    }
}

/// Keep only the memory-token states of an encoder output.
pub fn mem_tok_extract(z: &EmbeddingMatrix, layout: MemTokLayout) -> Result<EmbeddingMatrix> {
    if layout.m == 0 {
        return Err(Error::Contract(
            "memory token count must be at least 1".into(),
        ));
    }
    if z.rows() < layout.m {
        return Err(Error::Contract(format!(
            "encoder output has {} rows, fewer than {} memory tokens",
            z.rows(),
            layout.m
        )));
    }
    match layout.placement {
        MemTokPlacement::Suffix => {
            let start = z.rows() - layout.m;
            Ok(z.select_rows(&(start..z.rows()).collect::<Vec<_>>()))
        }
    }
}

pub fn encode_resize_weights(w: &ResizeWeights) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(20 + 4 * (w.w1.len() + w.w2.len()));
    out.extend_from_slice(MRSZ_MAGIC);
    put_u32(&mut out, MRSZ_VERSION);
    put_u32(&mut out, to_u32(w.n0, "n0")?);
    put_u32(&mut out, to_u32(w.d, "d")?);
    put_u32(&mut out, to_u32(w.m, "m")?);
    put_f32s(&mut out, &w.w1);
    put_f32s(&mut out, &w.w2);
    Ok(out)
}

pub fn decode_resize_weights(bytes: &[u8]) -> Result<ResizeWeights> {
    let mut r = ByteReader::new(bytes);
    r.magic(MRSZ_MAGIC)?;
    r.version(MRSZ_VERSION)?;
    let n0 = r.u32("n0")? as usize;
    let d = r.u32("d")? as usize;
    let m = r.u32("m")? as usize;
    let w1 = r.f32s(d * n0, "W1")?;
    let w2 = r.f32s(m * d, "W2")?;
    r.finish()?;
    ResizeWeights::new(n0, d, m, w1, w2)
}

pub fn read_resize_weights(path: &Path) -> Result<ResizeWeights> {
    decode_resize_weights(&fs::read(path)?)
}

pub fn write_resize_weights(w: &ResizeWeights, path: &Path) -> Result<()> {
    fs::write(path, encode_resize_weights(w)?)?;
    Ok(())
}
