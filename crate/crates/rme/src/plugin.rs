//! Client for external denoisers speaking the DNRQ/DNRS stdio protocol.
//!
//! Request: `DNRQ`, `u32` M, `u32` N, `f64` sigma, then `M*N` `f64` values.
//! Response: `DNRS`, then `M*N` `f64` values. All little-endian. Pixels are
//! sent with `m` fastest (the in-memory column-major order of
//! [`Field`]), one request in flight per process.

use std::io::{BufReader, BufWriter, Read, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use rme_core::denoise::{DenoiserKind, DenoiserSpec, LogWrapped, PlugDenoiser};
use rme_core::Field;

use crate::error::{RmeError, Result};

pub const REQUEST_MAGIC: &[u8; 4] = b"DNRQ";
pub const RESPONSE_MAGIC: &[u8; 4] = b"DNRS";

pub fn encode_request(image: &Field, sigma: f64) -> Vec<u8> {
    let (m, n) = image.dims();
    let mut out = Vec::with_capacity(20 + 8 * m * n);
    out.extend_from_slice(REQUEST_MAGIC);
    out.extend_from_slice(&(m as u32).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&sigma.to_le_bytes());
    for v in image.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_response(image: &Field) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 8 * image.len());
    out.extend_from_slice(RESPONSE_MAGIC);
    for v in image.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_values<R: Read>(r: &mut R, count: usize) -> std::io::Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * count];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

/// Reads one request; `Ok(None)` on a clean EOF before the magic.
pub fn read_request<R: Read>(r: &mut R) -> Result<Option<(Field, f64)>> {
    let mut magic = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        let k = r.read(&mut magic[got..]).map_err(|e| RmeError::Plugin(e.to_string()))?;
        if k == 0 {
            return if got == 0 { Ok(None) } else { Err(RmeError::Plugin("truncated request magic".into())) };
        }
        got += k;
    }
    if &magic != REQUEST_MAGIC {
        return Err(RmeError::Plugin("bad request magic".into()));
    }
    let mut head = [0u8; 16];
    r.read_exact(&mut head).map_err(|e| RmeError::Plugin(format!("truncated request header: {e}")))?;
    let m = u32::from_le_bytes(head[0..4].try_into().expect("4 bytes")) as usize;
    let n = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes")) as usize;
    let sigma = f64::from_le_bytes(head[8..16].try_into().expect("8 bytes"));
    let data = read_values(r, m * n).map_err(|e| RmeError::Plugin(format!("truncated request payload: {e}")))?;
    Ok(Some((Field::from_vec(m, n, data)?, sigma)))
}

pub fn read_response<R: Read>(r: &mut R, dims: (usize, usize)) -> Result<Field> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| RmeError::Plugin(format!("no response: {e}")))?;
    if &magic != RESPONSE_MAGIC {
        return Err(RmeError::Plugin("bad response magic".into()));
    }
    let data = read_values(r, dims.0 * dims.1).map_err(|e| RmeError::Plugin(format!("short response: {e}")))?;
    Ok(Field::from_vec(dims.0, dims.1, data)?)
}

/// Serves requests by echoing each image back; returns the number served.
pub fn serve_echo<R: Read, W: Write>(input: R, output: W) -> Result<u64> {
    let mut input = BufReader::new(input);
    let mut output = BufWriter::new(output);
    let mut served = 0;
    while let Some((image, _sigma)) = read_request(&mut input)? {
        output.write_all(&encode_response(&image)).map_err(|e| RmeError::Plugin(e.to_string()))?;
        output.flush().map_err(|e| RmeError::Plugin(e.to_string()))?;
        served += 1;
    }
    Ok(served)
}

/// A child process serving denoise requests.
pub struct ExternalDenoiser {
    command: String,
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    stdout: BufReader<ChildStdout>,
    pub calls: u64,
}

impl ExternalDenoiser {
    /// Starts `command` through `sh -c`.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| RmeError::Plugin(format!("cannot start `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(Self {
            command: command.into(),
            child,
            stdin: Some(BufWriter::new(stdin)),
            stdout: BufReader::new(stdout),
            calls: 0,
        })
    }

    pub fn request(&mut self, image: &Field, sigma: f64) -> Result<Field> {
        let stdin = self.stdin.as_mut().ok_or_else(|| RmeError::Plugin("plugin input closed".into()))?;
        let sent = stdin.write_all(&encode_request(image, sigma)).and_then(|_| stdin.flush());
        let reply = match sent {
            Ok(()) => read_response(&mut self.stdout, image.dims()),
            Err(e) => Err(RmeError::Plugin(format!("write failed: {e}"))),
        };
        match reply {
            Ok(out) => {
                self.calls += 1;
                Ok(out)
            }
            Err(e) => {
                let status = self.child.try_wait().ok().flatten();
                match status {
                    Some(s) if !s.success() => Err(RmeError::Plugin(format!("`{}` exited with {s}: {e}", self.command))),
                    _ => Err(e),
                }
            }
        }
    }
}

impl Drop for ExternalDenoiser {
    fn drop(&mut self) {
        self.stdin.take();
        let _ = self.child.wait();
    }
}

impl PlugDenoiser for ExternalDenoiser {
    fn denoise(&mut self, _slot: usize, _iteration: usize, image: &Field, sigma: f64) -> rme_core::Result<Field> {
        self.request(image, sigma).map_err(|e| rme_core::Error::Plugin(e.to_string()))
    }

    fn name(&self) -> String {
        format!("external:{}", self.command)
    }
}

/// Any denoiser named by a spec, including external plugins.
pub fn make_denoiser(spec: &DenoiserSpec, dims: (usize, usize)) -> Result<Box<dyn PlugDenoiser>> {
    match &spec.kind {
        DenoiserKind::External { command } => {
            let d = ExternalDenoiser::spawn(command)?;
            if spec.log_wrap {
                Ok(Box::new(LogWrapped { inner: d }))
            } else {
                Ok(Box::new(d))
            }
        }
        _ => Ok(rme_core::denoise::build_denoiser(spec, dims)?),
    }
}
