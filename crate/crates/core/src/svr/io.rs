//! Versioned binary SVR model file.
//!
//! ```text
//! magic  "SVRM"
//! u32    version (1)
//! u64    kernel tag: 0 linear, 1 polynomial, 2 rbf
//! kernel parameters: polynomial u64 degree, f64 coef; rbf f64 gamma
//! f64    epsilon, f64 C, f64 bias
//! u64    m (support vectors), u64 dim
//! f64[m * dim] support vectors, f64[m] dual coefficients
//! ```
//! Little-endian throughout.

use std::fs;
use std::path::Path;

use super::{KernelSpec, SvrModel};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SVRM";
const VERSION: u32 = 1;

pub fn write_model(path: &Path, m: &SvrModel) -> Result<()> {
    let mut b = Vec::with_capacity(64 + 8 * (m.support_vectors.len() + m.dual_coefs.len()));
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    let u = |b: &mut Vec<u8>, v: u64| b.extend_from_slice(&v.to_le_bytes());
    let f = |b: &mut Vec<u8>, v: f64| b.extend_from_slice(&v.to_le_bytes());
    match m.kernel {
        KernelSpec::Linear => u(&mut b, 0),
        KernelSpec::Polynomial { degree, coef } => {
            u(&mut b, 1);
            u(&mut b, degree as u64);
            f(&mut b, coef);
        }
        KernelSpec::Rbf { gamma } => {
            u(&mut b, 2);
            f(&mut b, gamma);
        }
    }
    f(&mut b, m.epsilon);
    f(&mut b, m.c);
    f(&mut b, m.bias);
    u(&mut b, m.dual_coefs.len() as u64);
    u(&mut b, m.dim as u64);
    for &v in m.support_vectors.iter().chain(&m.dual_coefs) {
        f(&mut b, v);
    }
    fs::write(path, b).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<SvrModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes
            .get(pos..pos + n)
            .ok_or_else(|| Error::format(path, format!("truncated SVR model at byte {pos}")))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err(Error::format(path, "not an SVR model file (bad magic)"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported SVR model version {version}")));
    }
    let mut u = || -> Result<u64> { Ok(u64::from_le_bytes(take(8)?.try_into().unwrap())) };
    let tag = u()?;
    let mut header = Vec::new();
    let kernel = match tag {
        0 => KernelSpec::Linear,
        1 => {
            let degree = u()?;
            let coef = f64::from_bits(u()?);
            KernelSpec::Polynomial {
                degree: u32::try_from(degree).map_err(|_| Error::format(path, "polynomial degree overflow"))?,
                coef,
            }
        }
        2 => KernelSpec::Rbf {
            gamma: f64::from_bits(u()?),
        },
        t => return Err(Error::format(path, format!("unknown kernel tag {t}"))),
    };
    for _ in 0..3 {
        header.push(f64::from_bits(u()?));
    }
    let m = u()? as usize;
    let dim = u()? as usize;
    let count = m
        .checked_mul(dim)
        .and_then(|v| v.checked_add(m))
        .ok_or_else(|| Error::format(path, "support set size overflow"))?;
    let mut values = Vec::with_capacity(count.min(bytes.len() / 8));
    for _ in 0..count {
        values.push(f64::from_bits(u()?));
    }
    if pos != bytes.len() {
        return Err(Error::format(path, format!("{} trailing bytes", bytes.len() - pos)));
    }
    kernel.validate().map_err(|e| Error::format(path, e.to_string()))?;
    let dual_coefs = values.split_off(m * dim);
    Ok(SvrModel {
        kernel,
        epsilon: header[0],
        c: header[1],
        bias: header[2],
        dim,
        support_vectors: values,
        dual_coefs,
        diagnostics: None,
    })
}
