//! File formats: BLMD complex arrays, 16-bit PGM frames and CSV traces.
//!
//! BLMD layout (all little-endian):
//!
//! ```text
//! "BLMD" | version u32 = 1 | ndims u32 | dims u64 × ndims | dtype u8 = 1 | payload
//! ```
//!
//! dtype 1 is complex128 stored as interleaved (re, im) f64 pairs. Cubes are
//! written with dims `[n_p, n_f, n_fr]`, frame-major and column-major within
//! a frame, which is exactly the in-memory order of [`Cube`].

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::transforms::{Cube, SamplingMask, C64};

pub const BLMD_MAGIC: [u8; 4] = *b"BLMD";
pub const BLMD_VERSION: u32 = 1;
pub const DTYPE_COMPLEX128: u8 = 1;

/// An n-dimensional complex array as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct BlmdArray {
    pub dims: Vec<u64>,
    pub data: Vec<C64>,
}

/// Payload size in bytes for complex128 data of the given dims.
pub fn payload_len(dims: &[u64]) -> Option<u64> {
    dims.iter().try_fold(16u64, |acc, &d| acc.checked_mul(d))
}

pub fn encode_blmd(arr: &BlmdArray) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 8 * arr.dims.len() + 16 * arr.data.len());
    out.extend_from_slice(&BLMD_MAGIC);
    out.extend_from_slice(&BLMD_VERSION.to_le_bytes());
    out.extend_from_slice(&(arr.dims.len() as u32).to_le_bytes());
    for d in &arr.dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.push(DTYPE_COMPLEX128);
    for z in &arr.data {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn decode_blmd(bytes: &[u8], path: &Path) -> Result<BlmdArray> {
    let truncated = |detail: &str| Error::Truncated {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    };
    let mut pos = 0usize;
    let mut take = |n: usize, what: &str| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| truncated(what))?;
        pos += n;
        Ok(s)
    };
    if take(4, "magic")? != BLMD_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
        });
    }
    let version = u32::from_le_bytes(take(4, "version")?.try_into().unwrap());
    if version != BLMD_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            version,
        });
    }
    let ndims = u32::from_le_bytes(take(4, "ndims")?.try_into().unwrap()) as usize;
    let mut dims = Vec::with_capacity(ndims.min(16));
    for _ in 0..ndims {
        dims.push(u64::from_le_bytes(take(8, "dims")?.try_into().unwrap()));
    }
    let code = take(1, "dtype")?[0];
    if code != DTYPE_COMPLEX128 {
        return Err(Error::UnsupportedDtype {
            path: path.to_path_buf(),
            code,
        });
    }
    let expected = payload_len(&dims).ok_or_else(|| truncated("dims overflow"))?;
    let rest = &bytes[pos..];
    if rest.len() as u64 != expected {
        return Err(truncated(&format!(
            "payload has {} bytes, header declares {expected}",
            rest.len()
        )));
    }
    let data = rest
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok(BlmdArray { dims, data })
}

pub fn write_blmd_array(path: &Path, arr: &BlmdArray) -> Result<()> {
    std::fs::write(path, encode_blmd(arr)).map_err(|e| Error::io(path, e))
}

pub fn read_blmd_array(path: &Path) -> Result<BlmdArray> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_blmd(&bytes, path)
}

pub fn write_blmd<D>(path: &Path, cube: &Cube<D>) -> Result<()> {
    let (n_p, n_f, n_fr) = cube.shape();
    write_blmd_array(
        path,
        &BlmdArray {
            dims: vec![n_p as u64, n_f as u64, n_fr as u64],
            data: cube.data().to_vec(),
        },
    )
}

pub fn read_blmd<D>(path: &Path) -> Result<Cube<D>> {
    let arr = read_blmd_array(path)?;
    match arr.dims[..] {
        [n_p, n_f, n_fr] => Cube::new(n_p as usize, n_f as usize, n_fr as usize, arr.data),
        _ => Err(Error::shape(format!(
            "{}: expected a 3-d cube, got dims {:?}",
            path.display(),
            arr.dims
        ))),
    }
}

/// The sampling pattern as a 0/1 cube in native (DC at index 0) order.
pub fn write_mask(path: &Path, mask: &SamplingMask) -> Result<()> {
    let (n_p, n_f, n_fr) = mask.shape();
    write_blmd_array(
        path,
        &BlmdArray {
            dims: vec![n_p as u64, n_f as u64, n_fr as u64],
            data: mask
                .pattern()
                .iter()
                .map(|&s| C64::new(if s { 1.0 } else { 0.0 }, 0.0))
                .collect(),
        },
    )
}

/// Writes `|frame|` as a binary 16-bit PGM, linearly mapped so the largest
/// value becomes 65535. Returns that largest value (the scale).
pub fn write_pgm(path: &Path, n_p: usize, n_f: usize, frame: &[C64]) -> Result<f64> {
    let scale = frame.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = Vec::with_capacity(2 * n_p * n_f);
    // PGM is row-major with rows = image rows
    for r in 0..n_p {
        for c in 0..n_f {
            let v = frame[r + n_p * c].norm();
            let q = if scale > 0.0 {
                (v / scale * 65535.0).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            };
            body.extend_from_slice(&q.to_be_bytes());
        }
    }
    write!(w, "P5\n{n_f} {n_p}\n65535\n")
        .and_then(|_| w.write_all(&body))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))?;
    Ok(scale)
}

pub fn write_frame_nrmse_csv(path: &Path, nrmse: &[f64]) -> Result<()> {
    let mut s = String::from("frame_index,nrmse\n");
    for (t, v) in nrmse.iter().enumerate() {
        s.push_str(&format!("{t},{v:e}\n"));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn write_trace_csv(path: &Path, objective: &[f64], gamma: &[f64], residual: &[f64]) -> Result<()> {
    let mut s = String::from("iter,objective,gamma,residual\n");
    for (i, ((o, g), r)) in objective.iter().zip(gamma).zip(residual).enumerate() {
        s.push_str(&format!("{i},{o:e},{g:e},{r:e}\n"));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
