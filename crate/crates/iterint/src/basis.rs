//! Complete orthonormal systems on `[t, T]`: shifted Legendre polynomials and the
//! trigonometric system, together with their antiderivatives `∫_t^s φ_j`.
//!
//! Trigonometric indexing: `j = 0` is the constant, `j = 2r - 1` is the sine of
//! frequency `r`, `j = 2r` is the cosine of frequency `r`.

use std::f64::consts::PI;

use crate::{Error, Result};

/// Which orthonormal system of `L2([t, T])` is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    Legendre,
    Trigonometric,
}

impl BasisKind {
    pub fn tag(self) -> u8 {
        match self {
            BasisKind::Legendre => 0,
            BasisKind::Trigonometric => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(BasisKind::Legendre),
            1 => Some(BasisKind::Trigonometric),
            _ => None,
        }
    }
}

/// Integration interval `[start, end]` with `end > start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(Error::InvalidInterval { start, end });
        }
        Ok(Interval { start, end })
    }

    /// `[0, h]`.
    pub fn of_length(h: f64) -> Result<Self> {
        Interval::new(0.0, h)
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    /// Affine map of `s` onto `[-1, 1]`.
    pub fn to_unit(&self, s: f64) -> f64 {
        (s - 0.5 * (self.end + self.start)) * 2.0 / (self.end - self.start)
    }

    fn check(&self, s: f64) -> Result<()> {
        if s >= self.start && s <= self.end {
            Ok(())
        } else {
            Err(Error::OutOfInterval { s, start: self.start, end: self.end })
        }
    }
}

/// `P_j(x)` by the forward three-term recurrence.
pub fn legendre_poly(j: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if j == 0 {
        return prev;
    }
    let mut cur = x;
    for n in 1..j {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * cur - nf * prev) / (nf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[0..=n]` with `P_0(x) .. P_n(x)`.
pub fn legendre_all(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = ((2.0 * nf + 1.0) * x * out[n] - nf * out[n - 1]) / (nf + 1.0);
    }
}

/// `φ_j(s)` on `iv`.
pub fn phi(basis: BasisKind, j: usize, s: f64, iv: Interval) -> Result<f64> {
    iv.check(s)?;
    Ok(phi_unchecked(basis, j, s, iv))
}

/// `∫_t^s φ_j(u) du` on `iv`.
pub fn phi_antiderivative(basis: BasisKind, j: usize, s: f64, iv: Interval) -> Result<f64> {
    iv.check(s)?;
    Ok(antiderivative_unchecked(basis, j, s, iv))
}

pub(crate) fn phi_unchecked(basis: BasisKind, j: usize, s: f64, iv: Interval) -> f64 {
    let h = iv.len();
    match basis {
        BasisKind::Legendre => {
            ((2 * j + 1) as f64 / h).sqrt() * legendre_poly(j, iv.to_unit(s))
        }
        BasisKind::Trigonometric => {
            if j == 0 {
                return 1.0 / h.sqrt();
            }
            let r = ((j + 1) / 2) as f64;
            let arg = 2.0 * PI * r * (s - iv.start) / h;
            let amp = (2.0 / h).sqrt();
            if j % 2 == 1 {
                amp * arg.sin()
            } else {
                amp * arg.cos()
            }
        }
    }
}

pub(crate) fn antiderivative_unchecked(basis: BasisKind, j: usize, s: f64, iv: Interval) -> f64 {
    let h = iv.len();
    match basis {
        BasisKind::Legendre => {
            let x = iv.to_unit(s);
            let unit = if j == 0 {
                x + 1.0
            } else {
                (legendre_poly(j + 1, x) - legendre_poly(j - 1, x)) / (2 * j + 1) as f64
            };
            ((2 * j + 1) as f64 * h).sqrt() / 2.0 * unit
        }
        BasisKind::Trigonometric => {
            if j == 0 {
                return (s - iv.start) / h.sqrt();
            }
            let r = ((j + 1) / 2) as f64;
            let arg = 2.0 * PI * r * (s - iv.start) / h;
            let amp = (2.0 / h).sqrt() * h / (2.0 * PI * r);
            if j % 2 == 1 {
                amp * (1.0 - arg.cos())
            } else {
                amp * arg.sin()
            }
        }
    }
}

/// Fills `out[j] = φ_j(s)` for `j = 0..out.len()`.
pub fn phi_all(basis: BasisKind, s: f64, iv: Interval, out: &mut [f64]) {
    let h = iv.len();
    match basis {
        BasisKind::Legendre => {
            legendre_all(iv.to_unit(s), out);
            for (j, v) in out.iter_mut().enumerate() {
                *v *= ((2 * j + 1) as f64 / h).sqrt();
            }
        }
        BasisKind::Trigonometric => {
            for (j, v) in out.iter_mut().enumerate() {
                *v = phi_unchecked(basis, j, s, iv);
            }
        }
    }
}

/// Fills `out[j] = ∫_t^s φ_j` for `j = 0..out.len()`.
pub fn antiderivative_all(basis: BasisKind, s: f64, iv: Interval, out: &mut [f64]) {
    let h = iv.len();
    match basis {
        BasisKind::Legendre => {
            let x = iv.to_unit(s);
            let mut p = vec![0.0; out.len() + 1];
            legendre_all(x, &mut p);
            for (j, v) in out.iter_mut().enumerate() {
                let unit = if j == 0 { x + 1.0 } else { (p[j + 1] - p[j - 1]) / (2 * j + 1) as f64 };
                *v = ((2 * j + 1) as f64 * h).sqrt() / 2.0 * unit;
            }
        }
        BasisKind::Trigonometric => {
            for (j, v) in out.iter_mut().enumerate() {
                *v = antiderivative_unchecked(basis, j, s, iv);
            }
        }
    }
}
