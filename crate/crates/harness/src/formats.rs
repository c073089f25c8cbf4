//! Binary artifact files.
//!
//! Every file is a 5-byte magic, a version byte, the dimensions as `u32`
//! little-endian, then a payload of `f64` little-endian values with complex
//! numbers stored as (re, im) pairs.
//!
//! | magic | dims | payload |
//! |-------|------|---------|
//! | DDCH1 | frames, ports, tx, doppler, delay | tensors, frame-major then port, tx, doppler, delay |
//! | DDCD1 | frames, r_s, r_d, ref_port | codes, frame-major, each column-major |
//! | DDPB1 | n_tx, n_bins, r_s, r_d | threshold, A_s, A_d (row-major), eig_s, eig_d |
//! | DDMD1 | d_in, width, heads, blocks, lora_rank, ffn_mult, past, horizon | alpha, params, mean, std |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ddfas_core::channel::{ChannelTensor, TensorShape};
use ddfas_core::compression::{Code, PcaBasis};
use ddfas_core::linalg::CMatrix;
use ddfas_core::predictor::model::ParamLayout;
use ddfas_core::predictor::{MicroModel, ModelConfig, Normalizer};
use num_complex::Complex64;

use crate::error::{HarnessError, Result};

pub const CHANNEL_MAGIC: [u8; 5] = *b"DDCH1";
pub const CODES_MAGIC: [u8; 5] = *b"DDCD1";
pub const BASIS_MAGIC: [u8; 5] = *b"DDPB1";
pub const MODEL_MAGIC: [u8; 5] = *b"DDMD1";
pub const VERSION: u8 = 1;

/// Sanity bound on the block count of a stored model.
const MAX_BLOCKS: usize = 1 << 12;

/// Size in bytes of a header with `n_dims` dimensions.
pub fn header_len(n_dims: usize) -> u64 {
    6 + 4 * n_dims as u64
}

fn to_u32(path: &Path, v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| HarnessError::format(path, format!("dimension {v} does not fit in u32")))
}

fn write_header(w: &mut impl Write, path: &Path, magic: [u8; 5], dims: &[usize]) -> Result<()> {
    let mut buf = Vec::with_capacity(header_len(dims.len()) as usize);
    buf.extend_from_slice(&magic);
    buf.push(VERSION);
    for &d in dims {
        buf.extend_from_slice(&to_u32(path, d)?.to_le_bytes());
    }
    w.write_all(&buf).map_err(|e| HarnessError::io(path, e))
}

fn put_f64s(buf: &mut Vec<u8>, vals: impl IntoIterator<Item = f64>) {
    for v in vals {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_complex(buf: &mut Vec<u8>, vals: &[Complex64]) {
    put_f64s(buf, vals.iter().flat_map(|z| [z.re, z.im]));
}

/// Opened file positioned after a validated header.
struct Opened {
    reader: BufReader<File>,
    dims: Vec<usize>,
    path: PathBuf,
}

/// Reads the header and checks the magic, version and total length against
/// `payload_f64s(dims)`.
fn open_checked(
    path: &Path,
    magic: [u8; 5],
    n_dims: usize,
    payload_f64s: impl Fn(&[usize]) -> Option<u64>,
) -> Result<Opened> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let file_len = file.metadata().map_err(|e| HarnessError::io(path, e))?.len();
    let mut reader = BufReader::new(file);
    let mut head = [0u8; 6];
    if file_len < 6 {
        return Err(HarnessError::BadMagic {
            path: path.to_path_buf(),
            expected: String::from_utf8_lossy(&magic).into_owned(),
        });
    }
    reader.read_exact(&mut head).map_err(|e| HarnessError::io(path, e))?;
    if head[..5] != magic {
        return Err(HarnessError::BadMagic {
            path: path.to_path_buf(),
            expected: String::from_utf8_lossy(&magic).into_owned(),
        });
    }
    if head[5] != VERSION {
        return Err(HarnessError::format(path, format!("unsupported version {}", head[5])));
    }
    if file_len < header_len(n_dims) {
        return Err(HarnessError::format(path, "truncated header"));
    }
    let mut raw = vec![0u8; 4 * n_dims];
    reader.read_exact(&mut raw).map_err(|e| HarnessError::io(path, e))?;
    let dims: Vec<usize> = raw
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let expected = payload_f64s(&dims)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(header_len(n_dims)))
        .ok_or_else(|| HarnessError::format(path, "header dimensions are invalid"))?;
    if expected != file_len {
        return Err(HarnessError::format(
            path,
            format!("file is {file_len} bytes but its header implies {expected}"),
        ));
    }
    Ok(Opened {
        reader,
        dims,
        path: path.to_path_buf(),
    })
}

impl Opened {
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut raw = vec![0u8; 8 * n];
        self.reader
            .read_exact(&mut raw)
            .map_err(|e| HarnessError::io(&self.path, e))?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }

    fn complex(&mut self, n: usize) -> Result<Vec<Complex64>> {
        Ok(self
            .f64s(2 * n)?
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect())
    }
}

fn product(dims: &[usize]) -> Option<u64> {
    dims.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
}

fn write_file(path: &Path, magic: [u8; 5], dims: &[usize], payload: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_header(&mut w, path, magic, dims)?;
    w.write_all(payload).map_err(|e| HarnessError::io(path, e))?;
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Frame-by-frame DDCH1 writer.
pub struct ChannelWriter {
    out: BufWriter<File>,
    path: PathBuf,
    shape: TensorShape,
    expected: usize,
    written: usize,
}

impl ChannelWriter {
    pub fn create(path: &Path, shape: TensorShape, n_frames: usize) -> Result<Self> {
        let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        let mut out = BufWriter::new(file);
        let dims = [n_frames, shape.n_ports, shape.n_tx, shape.n_doppler, shape.n_delay];
        write_header(&mut out, path, CHANNEL_MAGIC, &dims)?;
        Ok(ChannelWriter {
            out,
            path: path.to_path_buf(),
            shape,
            expected: n_frames,
            written: 0,
        })
    }

    pub fn write_frame(&mut self, frame: &ChannelTensor) -> Result<()> {
        if frame.shape != self.shape {
            return Err(HarnessError::format(
                &self.path,
                "frame shape differs from the file header",
            ));
        }
        if self.written == self.expected {
            return Err(HarnessError::format(&self.path, "more frames than declared"));
        }
        let mut buf = Vec::with_capacity(16 * frame.data.len());
        put_complex(&mut buf, &frame.data);
        self.out.write_all(&buf).map_err(|e| HarnessError::io(&self.path, e))?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if self.written != self.expected {
            return Err(HarnessError::format(
                &self.path,
                format!("wrote {} of {} declared frames", self.written, self.expected),
            ));
        }
        self.out.flush().map_err(|e| HarnessError::io(&self.path, e))
    }
}

/// Frame-by-frame DDCH1 reader.
pub struct ChannelReader {
    inner: Opened,
    pub shape: TensorShape,
    pub n_frames: usize,
    next: usize,
}

impl ChannelReader {
    pub fn open(path: &Path) -> Result<Self> {
        let inner = open_checked(path, CHANNEL_MAGIC, 5, |d| product(d)?.checked_mul(2))?;
        let d = &inner.dims;
        let shape = TensorShape {
            n_ports: d[1],
            n_tx: d[2],
            n_doppler: d[3],
            n_delay: d[4],
        };
        let n_frames = d[0];
        Ok(ChannelReader {
            inner,
            shape,
            n_frames,
            next: 0,
        })
    }

    /// The next frame, or `None` after the last one.
    pub fn next_frame(&mut self) -> Result<Option<ChannelTensor>> {
        if self.next == self.n_frames {
            return Ok(None);
        }
        let data = self.inner.complex(self.shape.len())?;
        let frame = ChannelTensor::from_vec(self.shape, data, self.next)?;
        self.next += 1;
        Ok(Some(frame))
    }
}

pub fn read_channels(path: &Path) -> Result<Vec<ChannelTensor>> {
    let mut r = ChannelReader::open(path)?;
    let mut out = Vec::with_capacity(r.n_frames);
    while let Some(f) = r.next_frame()? {
        out.push(f);
    }
    Ok(out)
}

/// A code sequence covering frames `0..codes.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeFile {
    pub ref_port: usize,
    pub r_s: usize,
    pub r_d: usize,
    pub codes: Vec<Code>,
}

pub fn write_codes(path: &Path, file: &CodeFile) -> Result<()> {
    let mut buf = Vec::with_capacity(16 * file.codes.len() * file.r_s * file.r_d);
    for (i, c) in file.codes.iter().enumerate() {
        if c.matrix.rows() != file.r_s || c.matrix.cols() != file.r_d || c.frame_index != i {
            return Err(HarnessError::format(
                path,
                format!("code {i} does not match the declared layout"),
            ));
        }
        put_complex(&mut buf, &c.vec());
    }
    write_file(
        path,
        CODES_MAGIC,
        &[file.codes.len(), file.r_s, file.r_d, file.ref_port],
        &buf,
    )
}

pub fn read_codes(path: &Path) -> Result<CodeFile> {
    let mut f = open_checked(path, CODES_MAGIC, 4, |d| product(&d[..3])?.checked_mul(2))?;
    let (n, r_s, r_d, ref_port) = (f.dims[0], f.dims[1], f.dims[2], f.dims[3]);
    let mut codes = Vec::with_capacity(n);
    for i in 0..n {
        let v = f.complex(r_s * r_d)?;
        codes.push(Code::from_vec(&v, r_s, r_d, i)?);
    }
    Ok(CodeFile {
        ref_port,
        r_s,
        r_d,
        codes,
    })
}

pub fn write_basis(path: &Path, basis: &PcaBasis) -> Result<()> {
    let (n_tx, n_bins) = (basis.n_tx(), basis.n_bins());
    if basis.eig_s.len() != n_tx || basis.eig_d.len() != n_bins {
        return Err(HarnessError::format(
            path,
            "eigenvalue spectra do not match the basis size",
        ));
    }
    let mut buf = Vec::new();
    put_f64s(&mut buf, [basis.energy_threshold]);
    put_complex(&mut buf, basis.a_s.as_slice());
    put_complex(&mut buf, basis.a_d.as_slice());
    put_f64s(&mut buf, basis.eig_s.iter().copied());
    put_f64s(&mut buf, basis.eig_d.iter().copied());
    write_file(path, BASIS_MAGIC, &[n_tx, n_bins, basis.r_s(), basis.r_d()], &buf)
}

pub fn read_basis(path: &Path) -> Result<PcaBasis> {
    let mut f = open_checked(path, BASIS_MAGIC, 4, |d| {
        let (n_tx, n_bins, r_s, r_d) = (d[0] as u64, d[1] as u64, d[2] as u64, d[3] as u64);
        Some(1 + 2 * n_tx.checked_mul(r_s)? + 2 * n_bins.checked_mul(r_d)? + n_tx + n_bins)
    })?;
    let (n_tx, n_bins, r_s, r_d) = (f.dims[0], f.dims[1], f.dims[2], f.dims[3]);
    let energy_threshold = f.f64s(1)?[0];
    let a_s = CMatrix::from_vec(n_tx, r_s, f.complex(n_tx * r_s)?)?;
    let a_d = CMatrix::from_vec(n_bins, r_d, f.complex(n_bins * r_d)?)?;
    let eig_s = f.f64s(n_tx)?;
    let eig_d = f.f64s(n_bins)?;
    Ok(PcaBasis {
        a_s,
        a_d,
        eig_s,
        eig_d,
        energy_threshold,
    })
}

/// A trained forecaster together with its feature normaliser.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: MicroModel,
    pub normalizer: Normalizer,
}

pub fn write_model(path: &Path, file: &ModelFile) -> Result<()> {
    let c = &file.model.config;
    if file.normalizer.dim() != c.d_in {
        return Err(HarnessError::format(
            path,
            "normaliser width differs from the model input",
        ));
    }
    let dims = [
        c.d_in,
        c.width,
        c.heads,
        c.blocks,
        c.lora_rank,
        c.ffn_mult,
        c.past,
        c.horizon,
    ];
    let mut buf = Vec::new();
    put_f64s(&mut buf, [c.lora_alpha]);
    put_f64s(&mut buf, file.model.params.iter().copied());
    put_f64s(&mut buf, file.normalizer.mean.iter().copied());
    put_f64s(&mut buf, file.normalizer.std.iter().copied());
    write_file(path, MODEL_MAGIC, &dims, &buf)
}

fn model_config(d: &[usize], lora_alpha: f64) -> ModelConfig {
    ModelConfig {
        d_in: d[0],
        width: d[1],
        heads: d[2],
        blocks: d[3],
        lora_rank: d[4],
        lora_alpha,
        ffn_mult: d[5],
        past: d[6],
        horizon: d[7],
    }
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let mut f = open_checked(path, MODEL_MAGIC, 8, |d| {
        let cfg = model_config(d, 0.0);
        if cfg.blocks > MAX_BLOCKS {
            return None;
        }
        cfg.validate().ok()?;
        let n = ParamLayout::new(&cfg).total as u64;
        Some(1 + n + 2 * d[0] as u64)
    })?;
    let alpha = f.f64s(1)?[0];
    let cfg = model_config(&f.dims, alpha);
    let n = ParamLayout::new(&cfg).total;
    let params = f.f64s(n)?;
    let mean = f.f64s(cfg.d_in)?;
    let std = f.f64s(cfg.d_in)?;
    Ok(ModelFile {
        model: MicroModel::from_params(cfg, params)?,
        normalizer: Normalizer { mean, std },
    })
}
