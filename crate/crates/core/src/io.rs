//! TRPC tensor files and run reports.
//!
//! TRPC layout (all integers little-endian):
//!
//! | offset      | size      | field                                   |
//! |-------------|-----------|-----------------------------------------|
//! | 0           | 4         | magic `b"TRPC"`                         |
//! | 4           | 1         | version, always `1`                     |
//! | 5           | 1         | order `N` (≥ 1)                         |
//! | 6           | 2         | reserved, zero                          |
//! | 8           | 8·N       | dims as `u64`, each ≥ 1                 |
//! | 8 + 8·N     | 8·Π n_k   | IEEE-754 binary64 values, row-major     |
//!
//! Values must be finite. Nothing may follow the payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::error::{Error, Result};
use crate::metrics::Diagnostics;
use crate::rpca::{IterationRecord, SolverConfig};
use crate::tensor::DenseTensor;

pub const MAGIC: [u8; 4] = *b"TRPC";
pub const VERSION: u8 = 1;
pub const HEADER_FIXED_LEN: usize = 8;

/// Report schema version written in every report header record.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("reserved bytes must be zero")]
    BadReserved,
    #[error("tensor order must be at least 1")]
    ZeroOrder,
    #[error("dimension {0} is zero")]
    ZeroDim(usize),
    #[error("dims overflow the addressable size")]
    DimsOverflow,
    #[error("truncated file: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("non-finite payload value at index {0}")]
    NonFinite(usize),
    #[error("tensor order {0} exceeds 255")]
    OrderTooLarge(usize),
}

impl FormatError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            FormatError::BadMagic(_) => "bad_magic",
            FormatError::UnsupportedVersion(_) => "unsupported_version",
            FormatError::BadReserved => "bad_reserved",
            FormatError::ZeroOrder => "zero_order",
            FormatError::ZeroDim(_) => "zero_dim",
            FormatError::DimsOverflow => "dims_overflow",
            FormatError::Truncated { .. } => "truncated",
            FormatError::TrailingBytes(_) => "trailing_bytes",
            FormatError::NonFinite(_) => "non_finite",
            FormatError::OrderTooLarge(_) => "order_too_large",
        }
    }
}

/// Serializes a tensor into TRPC bytes.
pub fn encode_tensor(t: &DenseTensor) -> std::result::Result<Vec<u8>, FormatError> {
    let order = t.order();
    if order > u8::MAX as usize {
        return Err(FormatError::OrderTooLarge(order));
    }
    let mut out = Vec::with_capacity(HEADER_FIXED_LEN + 8 * order + 8 * t.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(order as u8);
    out.extend_from_slice(&[0, 0]);
    for &d in t.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in t.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses TRPC bytes, validating header, length and finiteness.
pub fn decode_tensor(bytes: &[u8]) -> std::result::Result<DenseTensor, FormatError> {
    if bytes.len() < HEADER_FIXED_LEN {
        return Err(FormatError::Truncated {
            expected: HEADER_FIXED_LEN,
            actual: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    if bytes[4] != VERSION {
        return Err(FormatError::UnsupportedVersion(bytes[4]));
    }
    let order = bytes[5] as usize;
    if bytes[6] != 0 || bytes[7] != 0 {
        return Err(FormatError::BadReserved);
    }
    if order == 0 {
        return Err(FormatError::ZeroOrder);
    }
    let header_len = HEADER_FIXED_LEN + 8 * order;
    if bytes.len() < header_len {
        return Err(FormatError::Truncated {
            expected: header_len,
            actual: bytes.len(),
        });
    }
    let mut dims = Vec::with_capacity(order);
    let mut count: usize = 1;
    for k in 0..order {
        let off = HEADER_FIXED_LEN + 8 * k;
        let d = u64::from_le_bytes(bytes[off..off + 8].try_into().expect("8 bytes"));
        if d == 0 {
            return Err(FormatError::ZeroDim(k));
        }
        let d = usize::try_from(d).map_err(|_| FormatError::DimsOverflow)?;
        count = count.checked_mul(d).ok_or(FormatError::DimsOverflow)?;
        dims.push(d);
    }
    let payload_len = count.checked_mul(8).ok_or(FormatError::DimsOverflow)?;
    let expected = header_len
        .checked_add(payload_len)
        .ok_or(FormatError::DimsOverflow)?;
    if bytes.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(FormatError::TrailingBytes(bytes.len() - expected));
    }
    let mut values = Vec::with_capacity(count);
    for (i, chunk) in bytes[header_len..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(FormatError::NonFinite(i));
        }
        values.push(v);
    }
    Ok(DenseTensor::new(&dims, values).expect("validated above"))
}

/// Writes `bytes` to `path` through a temporary file in the same directory, then renames.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_tensor(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    atomic_write(path.as_ref(), &encode_tensor(t)?)
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let bytes = fs::read(path)?;
    Ok(decode_tensor(&bytes)?)
}

/// Final accuracy of a run measured against a known low-rank truth.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FinalErrors {
    pub rel_fro: f64,
    pub inf_err: f64,
    pub inf_envelope_ratio: f64,
}

/// Everything a decomposition run reports.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub input_dims: Vec<usize>,
    pub config: SolverConfig,
    pub zeta0: f64,
    pub zeta1: f64,
    pub rho: f64,
    pub diagnostics: Option<Diagnostics>,
    pub trace: Vec<IterationRecord>,
    pub iterations: usize,
    pub stopped_early: bool,
    pub final_errors: Option<FinalErrors>,
    pub wall_seconds: f64,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum ReportLine<'a> {
    Header {
        schema_version: u32,
        input_dims: &'a [usize],
    },
    Config {
        config: &'a SolverConfig,
        zeta0: f64,
        zeta1: f64,
        rho: f64,
    },
    Diagnostics {
        diagnostics: &'a Diagnostics,
    },
    Iteration(&'a IterationRecord),
    Summary {
        iterations: usize,
        stopped_early: bool,
        final_errors: &'a Option<FinalErrors>,
        wall_seconds: f64,
    },
}

impl RunReport {
    /// Line-delimited JSON records: header, config, diagnostics (if any),
    /// one record per trace row, then a summary.
    pub fn to_jsonl(&self) -> String {
        let mut lines = vec![
            ReportLine::Header {
                schema_version: self.schema_version,
                input_dims: &self.input_dims,
            },
            ReportLine::Config {
                config: &self.config,
                zeta0: self.zeta0,
                zeta1: self.zeta1,
                rho: self.rho,
            },
        ];
        if let Some(d) = &self.diagnostics {
            lines.push(ReportLine::Diagnostics { diagnostics: d });
        }
        lines.extend(self.trace.iter().map(ReportLine::Iteration));
        lines.push(ReportLine::Summary {
            iterations: self.iterations,
            stopped_early: self.stopped_early,
            final_errors: &self.final_errors,
            wall_seconds: self.wall_seconds,
        });
        let mut out = String::new();
        for line in &lines {
            out.push_str(&serde_json::to_string(line).expect("report records serialize"));
            out.push('\n');
        }
        out
    }

    /// Flat CSV of the trace.
    pub fn trace_csv(&self) -> String {
        trace_csv(&self.trace)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trace_csv(trace: &[IterationRecord]) -> String {
    let mut out = String::from("iter,zeta,rel_fro,inf_err,loss,step_seconds,elapsed_seconds\n");
    for r in trace {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.iter,
            r.zeta,
            opt(r.rel_fro),
            opt(r.inf_err),
            r.loss,
            r.step_seconds,
            r.elapsed_seconds
        ));
    }
    out
}
