//! Binary array container.
//!
//! Layout (little-endian): magic `SCAT1`, one element-tag byte (`1` = f64,
//! `2` = complex128 stored as interleaved re/im f64), rank as `u32`, `rank`
//! dimensions as `u64`, then the row-major payload.

use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"SCAT1";
const TAG_REAL: u8 = 1;
const TAG_COMPLEX: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl ArrayData {
    pub fn len(&self) -> usize {
        match self {
            ArrayData::Real(v) => v.len(),
            ArrayData::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayFile {
    pub dims: Vec<u64>,
    pub data: ArrayData,
}

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

impl ArrayFile {
    pub fn real(dims: Vec<u64>, values: Vec<f64>) -> Result<Self> {
        Self::checked(dims, ArrayData::Real(values))
    }

    pub fn complex(dims: Vec<u64>, values: Vec<Complex64>) -> Result<Self> {
        Self::checked(dims, ArrayData::Complex(values))
    }

    fn checked(dims: Vec<u64>, data: ArrayData) -> Result<Self> {
        let expect: u64 = dims.iter().product();
        if expect != data.len() as u64 {
            return format_err(format!("dims {dims:?} hold {expect} elements, got {}", data.len()));
        }
        Ok(Self { dims, data })
    }

    pub fn as_real(&self) -> Result<&[f64]> {
        match &self.data {
            ArrayData::Real(v) => Ok(v),
            ArrayData::Complex(_) => format_err("expected a real array"),
        }
    }

    pub fn as_complex(&self) -> Result<&[Complex64]> {
        match &self.data {
            ArrayData::Complex(v) => Ok(v),
            ArrayData::Real(_) => format_err("expected a complex array"),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.dims.len() + 16 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.push(match self.data {
            ArrayData::Real(_) => TAG_REAL,
            ArrayData::Complex(_) => TAG_COMPLEX,
        });
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        match &self.data {
            ArrayData::Real(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            ArrayData::Complex(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let end = pos.checked_add(n).filter(|&e| e <= bytes.len());
            match end {
                Some(e) => {
                    let out = &bytes[pos..e];
                    pos = e;
                    Ok(out)
                }
                None => format_err("truncated array file"),
            }
        };
        if take(5)? != MAGIC {
            return format_err("bad magic, not an array file");
        }
        let tag = take(1)?[0];
        let rank = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
        let mut dims = Vec::with_capacity(rank.min(64) as usize);
        for _ in 0..rank {
            dims.push(u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")));
        }
        let count = dims
            .iter()
            .try_fold(1u64, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format("dimension product overflows".into()))? as usize;
        let width = match tag {
            TAG_REAL => 8,
            TAG_COMPLEX => 16,
            t => return format_err(format!("unknown element tag {t}")),
        };
        let body = take(
            count
                .checked_mul(width)
                .ok_or_else(|| Error::Format("payload too large".into()))?,
        )?;
        let f64_at = |i: usize| f64::from_le_bytes(body[8 * i..8 * i + 8].try_into().expect("8 bytes"));
        let data = if tag == TAG_REAL {
            ArrayData::Real((0..count).map(f64_at).collect())
        } else {
            ArrayData::Complex(
                (0..count)
                    .map(|i| Complex64::new(f64_at(2 * i), f64_at(2 * i + 1)))
                    .collect(),
            )
        };
        if take(1).is_ok() {
            return format_err("trailing bytes after payload");
        }
        Ok(Self { dims, data })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}
