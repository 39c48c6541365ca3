//! Binary coefficient database.
//!
//! Layout, all integers big-endian:
//!
//! ```text
//! "GFSC"            magic
//! u16               format version
//! u32               tensor count
//! per tensor:
//!   u8              basis tag (0 Legendre, 1 trigonometric)
//!   u8              k
//!   u16 × k         p_1 .. p_k
//!   per entry (j_1 fastest):
//!     Legendre:     u32 len, signed numerator bytes; u32 len, unsigned denominator bytes
//!     trig:         f64 unit-interval value
//! u32               CRC-32 of every preceding byte
//! ```
//!
//! Legendre entries store `C̄`, trig entries store coefficients on a unit interval;
//! loaded tensors are on a unit interval and can be moved with [`CoeffTensor::rescaled`].

use std::fs;
use std::path::Path;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;

use super::{CoeffTensor, MAX_K};
use crate::basis::BasisKind;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GFSC";
pub const VERSION: u16 = 1;

pub fn encode(tensors: &[CoeffTensor]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_be_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_be_bytes());
    for t in tensors {
        out.push(t.basis().tag());
        out.push(t.k() as u8);
        for &pl in t.p() {
            out.extend_from_slice(&(pl as u16).to_be_bytes());
        }
        match t.exact_core() {
            Some(core) => {
                for c in core {
                    let num = c.numer().to_signed_bytes_be();
                    let (_, den) = c.denom().to_bytes_be();
                    out.extend_from_slice(&(num.len() as u32).to_be_bytes());
                    out.extend_from_slice(&num);
                    out.extend_from_slice(&(den.len() as u32).to_be_bytes());
                    out.extend_from_slice(&den);
                }
            }
            None => {
                for v in t.unit_values() {
                    out.extend_from_slice(&v.to_be_bytes());
                }
            }
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_be_bytes());
    out
}

pub fn decode(bytes: &[u8]) -> Result<Vec<CoeffTensor>> {
    if bytes.len() < 4 + 2 + 4 + 4 {
        return Err(Error::CorruptHeader("file shorter than the fixed header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::CorruptHeader("bad magic".into()));
    }
    let version = u16::from_be_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::VersionMismatch { found: version, expected: VERSION });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_be_bytes([tail[0], tail[1], tail[2], tail[3]]);
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let mut r = Reader { buf: body, pos: 6 };
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let basis = BasisKind::from_tag(r.u8()?)
            .ok_or_else(|| Error::CorruptHeader("unknown basis tag".into()))?;
        let k = r.u8()? as usize;
        if k == 0 || k > MAX_K {
            return Err(Error::CorruptHeader(format!("multiplicity {k}")));
        }
        let mut p = Vec::with_capacity(k);
        for _ in 0..k {
            p.push(r.u16()? as usize);
        }
        let total: usize = p.iter().map(|x| x + 1).product();
        match basis {
            BasisKind::Legendre => {
                let mut core = Vec::with_capacity(total);
                for _ in 0..total {
                    let n = r.u32()? as usize;
                    let num = BigInt::from_signed_bytes_be(r.take(n)?);
                    let d = r.u32()? as usize;
                    let den = BigInt::from_biguint(Sign::Plus, BigUint::from_bytes_be(r.take(d)?));
                    if den == BigInt::from(0) {
                        return Err(Error::CorruptHeader("zero denominator".into()));
                    }
                    core.push(BigRational::new(num, den));
                }
                out.push(CoeffTensor::from_exact(p, core, 1.0));
            }
            BasisKind::Trigonometric => {
                let mut unit = Vec::with_capacity(total);
                for _ in 0..total {
                    let b = r.take(8)?;
                    unit.push(f64::from_be_bytes(b.try_into().unwrap()));
                }
                out.push(CoeffTensor::from_trig_unit(p, unit, 1.0));
            }
        }
    }
    if r.pos != body.len() {
        return Err(Error::CorruptHeader("trailing bytes after last tensor".into()));
    }
    Ok(out)
}

pub fn save_db(tensors: &[CoeffTensor], path: &Path) -> Result<u32> {
    let bytes = encode(tensors);
    fs::write(path, &bytes)?;
    Ok(u32::from_be_bytes(bytes[bytes.len() - 4..].try_into().unwrap()))
}

pub fn load_db(path: &Path) -> Result<Vec<CoeffTensor>> {
    decode(&fs::read(path)?)
}

/// CRC-32 stored in a database file.
pub fn db_checksum(path: &Path) -> Result<u32> {
    let bytes = fs::read(path)?;
    if bytes.len() < 4 {
        return Err(Error::CorruptHeader("file shorter than the checksum".into()));
    }
    Ok(u32::from_be_bytes(bytes[bytes.len() - 4..].try_into().unwrap()))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::CorruptHeader("unexpected end of data".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
}
