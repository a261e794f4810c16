//! RMT1 tensor files, mask JSON and provenance sidecars.
//!
//! RMT1 layout: magic `RMT1`, `u8` ndim, `ndim` little-endian `u64` dims in
//! `(M, N, K)` order, then `f64` LE payload with `k` fastest, then `m`, then
//! `n`. Two-dimensional files are read as `K = 1`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rme_core::{SamplingMask, Tensor3};
use serde::{Deserialize, Serialize};

use crate::error::{format_err, io_err, Result};

pub const MAGIC: &[u8; 4] = b"RMT1";

pub fn encode_tensor(t: &Tensor3) -> Vec<u8> {
    let (m, n, k) = t.dims();
    let mut out = Vec::with_capacity(5 + 24 + 8 * m * n * k);
    out.extend_from_slice(MAGIC);
    out.push(3);
    for d in [m, n, k] {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in t.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor3> {
    if bytes.len() < 5 || &bytes[..4] != MAGIC {
        return Err(format_err("bad magic: not an RMT1 tensor file"));
    }
    let ndim = bytes[4] as usize;
    if !(ndim == 2 || ndim == 3) {
        return Err(format_err(format!("unsupported tensor rank {ndim}")));
    }
    let header = 5 + 8 * ndim;
    if bytes.len() < header {
        return Err(format_err("truncated RMT1 header"));
    }
    let mut dims = [1usize; 3];
    for (i, d) in dims.iter_mut().take(ndim).enumerate() {
        let raw = u64::from_le_bytes(bytes[5 + 8 * i..13 + 8 * i].try_into().expect("8 bytes"));
        *d = usize::try_from(raw).map_err(|_| format_err("dimension overflows usize"))?;
        if *d == 0 {
            return Err(format_err("zero dimension"));
        }
    }
    let count = dims[0]
        .checked_mul(dims[1])
        .and_then(|v| v.checked_mul(dims[2]))
        .ok_or_else(|| format_err("dimension product overflows"))?;
    let expect = count.checked_mul(8).and_then(|v| v.checked_add(header)).ok_or_else(|| format_err("payload too large"))?;
    if bytes.len() != expect {
        return Err(format_err(format!(
            "dim mismatch: header {:?} needs {expect} bytes, file has {}",
            &dims[..ndim],
            bytes.len()
        )));
    }
    let data: Vec<f64> =
        bytes[header..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(format_err("tensor contains non-finite values"));
    }
    Ok(Tensor3::from_vec(dims[0], dims[1], dims[2], data)?)
}

pub fn read_tensor(path: &Path) -> Result<Tensor3> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_tensor(&bytes).map_err(|e| format_err(format!("{}: {e}", path.display())))
}

pub fn write_tensor(path: &Path, t: &Tensor3) -> Result<()> {
    write_atomic(path, &encode_tensor(t))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err(&dir))?;
    tmp.write_all(bytes).map_err(io_err(tmp.path()))?;
    tmp.as_file().sync_all().map_err(io_err(tmp.path()))?;
    tmp.persist(path).map_err(|e| crate::RmeError::Io { path: path.into(), source: e.error })?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

/// Mask as a JSON array of `[m, n]` pairs in ascending linear-index order.
pub fn mask_to_json(mask: &SamplingMask) -> String {
    let cells: Vec<[usize; 2]> = mask.cells().into_iter().map(|(m, n)| [m, n]).collect();
    serde_json::to_string(&cells).expect("plain integers serialize")
}

pub fn mask_from_json(text: &str, dims: (usize, usize)) -> Result<SamplingMask> {
    let cells: Vec<[usize; 2]> = serde_json::from_str(text)?;
    let pairs: Vec<(usize, usize)> = cells.iter().map(|c| (c[0], c[1])).collect();
    Ok(SamplingMask::new(dims.0, dims.1, &pairs)?)
}

pub fn read_mask(path: &Path, dims: (usize, usize)) -> Result<SamplingMask> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    mask_from_json(&text, dims).map_err(|e| format_err(format!("{}: {e}", path.display())))
}

pub fn write_mask(path: &Path, mask: &SamplingMask) -> Result<()> {
    let mut text = mask_to_json(mask);
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Provenance written next to every artifact as `<artifact>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub summary: serde_json::Value,
}

impl Sidecar {
    pub fn new(command: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        Self {
            tool: "rme".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config,
            inputs: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }
}

pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut s = artifact.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_sidecar(artifact: &Path, sidecar: &Sidecar) -> Result<()> {
    write_json(&sidecar_path(artifact), sidecar)
}
