//! Fourier coefficients `C_{j_k…j_1}` of the simplex kernel for unit weights:
//!
//! `C_{j_k…j_1} = ∫_t^T φ_{j_k}(t_k) … ∫_t^{t_2} φ_{j_1}(t_1) dt_1 … dt_k`.
//!
//! Index order: `j[0]` is `j_1`, the innermost integration variable. Flat
//! storage puts `j_1` fastest.
//!
//! Legendre coefficients are exact: `C = √Π(2j_l+1) · (T−t)^{k/2} / 2^k · C̄`
//! where `C̄` is the same nested integral of plain `P_j` over `[-1, 1]`, held as
//! a `BigRational`. Trigonometric coefficients come from panel Gauss quadrature.
//! Both bases scale as `(T−t)^{k/2}`, so tensors are built on a unit interval
//! and rescaled.

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::basis::{phi_unchecked, BasisKind, Interval};
use crate::quadrature::PanelRule;
use crate::{Error, Result};

pub mod db;

/// Largest basis index accepted anywhere.
pub const INDEX_CAP: usize = 64;
/// Largest supported multiplicity.
pub const MAX_K: usize = 6;

/// Per-dimension limit for dense tensors of multiplicity `k`.
pub fn dense_limit(k: usize) -> usize {
    match k {
        1 | 2 => INDEX_CAP,
        3 => 16,
        4 | 5 => 6,
        _ => 4,
    }
}

const TRIG_TOL: f64 = 1e-13;
const TRIG_SNAP: f64 = 1e-13;

/// A multi-index `(j_1, …, j_k)`, innermost first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    j: Vec<usize>,
}

impl MultiIndex {
    pub fn new(j: Vec<usize>) -> Result<Self> {
        if j.is_empty() || j.len() > MAX_K {
            return Err(Error::MultiplicityOutOfRange { k: j.len() });
        }
        if let Some(&big) = j.iter().find(|&&x| x > INDEX_CAP) {
            return Err(Error::IndexCap { j: big, cap: INDEX_CAP });
        }
        Ok(MultiIndex { j })
    }

    pub fn k(&self) -> usize {
        self.j.len()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.j
    }
}

/// A single coefficient; `exact` is `C̄` for the Legendre basis.
#[derive(Debug, Clone)]
pub struct Coeff {
    pub value: f64,
    pub exact: Option<BigRational>,
}

/// The Legendre scaling `√Π(2j_l+1) · h^{k/2} / 2^k` between `C̄` and `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleRule {
    pub h: f64,
    pub k: usize,
}

impl ScaleRule {
    pub fn factor(&self, j: &[usize]) -> f64 {
        let prod: f64 = j.iter().map(|&x| (2 * x + 1) as f64).product();
        prod.sqrt() * self.h.powf(self.k as f64 / 2.0) / (1u64 << self.k) as f64
    }
}

/// Dense table of all coefficients with `j_l ≤ p_l`.
#[derive(Debug, Clone)]
pub struct CoeffTensor {
    basis: BasisKind,
    k: usize,
    p: Vec<usize>,
    h: f64,
    unit: Vec<f64>,
    values: Vec<f64>,
    exact: Option<Vec<BigRational>>,
    nonzero: Vec<usize>,
}

impl CoeffTensor {
    fn from_unit(
        basis: BasisKind,
        p: Vec<usize>,
        unit: Vec<f64>,
        exact: Option<Vec<BigRational>>,
        h: f64,
    ) -> Self {
        let k = p.len();
        let s = h.powf(k as f64 / 2.0);
        let values: Vec<f64> = unit.iter().map(|u| u * s).collect();
        let nonzero = unit
            .iter()
            .enumerate()
            .filter(|(_, u)| **u != 0.0)
            .map(|(i, _)| i)
            .collect();
        CoeffTensor { basis, k, p, h, unit, values, exact, nonzero }
    }

    pub(crate) fn from_exact(p: Vec<usize>, exact: Vec<BigRational>, h: f64) -> Self {
        let k = p.len();
        let rule = ScaleRule { h: 1.0, k };
        let mut unit = Vec::with_capacity(exact.len());
        let mut j = vec![0; k];
        for (flat, c) in exact.iter().enumerate() {
            unflatten(flat, &p, &mut j);
            unit.push(rule.factor(&j) * ratio_to_f64(c));
        }
        CoeffTensor::from_unit(BasisKind::Legendre, p, unit, Some(exact), h)
    }

    pub(crate) fn from_trig_unit(p: Vec<usize>, unit: Vec<f64>, h: f64) -> Self {
        CoeffTensor::from_unit(BasisKind::Trigonometric, p, unit, None, h)
    }

    pub fn basis(&self) -> BasisKind {
        self.basis
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> &[usize] {
        &self.p
    }

    /// Interval length the values are scaled to.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scale_rule(&self) -> Option<ScaleRule> {
        match self.basis {
            BasisKind::Legendre => Some(ScaleRule { h: self.h, k: self.k }),
            BasisKind::Trigonometric => None,
        }
    }

    /// Flat offset of `j` (innermost first); `None` when out of range.
    pub fn offset(&self, j: &[usize]) -> Option<usize> {
        if j.len() != self.k {
            return None;
        }
        let mut off = 0;
        let mut stride = 1;
        for (l, &jl) in j.iter().enumerate() {
            if jl > self.p[l] {
                return None;
            }
            off += jl * stride;
            stride *= self.p[l] + 1;
        }
        Some(off)
    }

    pub fn get(&self, j: &[usize]) -> f64 {
        self.offset(j).map(|o| self.values[o]).expect("multi-index outside tensor")
    }

    /// `C̄` for Legendre tensors.
    pub fn get_exact(&self, j: &[usize]) -> Option<&BigRational> {
        let o = self.offset(j)?;
        self.exact.as_ref().map(|e| &e[o])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values on a unit-length interval.
    pub fn unit_values(&self) -> &[f64] {
        &self.unit
    }

    pub fn exact_core(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    /// Flat offsets of the nonzero entries, ascending.
    pub fn nonzero(&self) -> &[usize] {
        &self.nonzero
    }

    pub fn unflatten(&self, flat: usize, j: &mut [usize]) {
        unflatten(flat, &self.p, j)
    }

    /// Same coefficients on another interval.
    pub fn rescaled(&self, iv: Interval) -> CoeffTensor {
        let mut t = self.clone();
        let s = iv.len().powf(self.k as f64 / 2.0);
        t.h = iv.len();
        t.values = t.unit.iter().map(|u| u * s).collect();
        t
    }

    /// Sub-tensor with `j_l ≤ p_l`.
    pub fn slice(&self, p: &[usize]) -> Result<CoeffTensor> {
        if p.len() != self.k {
            return Err(Error::InvalidArgument(format!("slice needs {} bounds", self.k)));
        }
        for (l, (&want, &have)) in p.iter().zip(&self.p).enumerate() {
            if want > have {
                return Err(Error::TensorTooSmall { dim: l, need: want, have });
            }
        }
        let total: usize = p.iter().map(|x| x + 1).product();
        let mut unit = Vec::with_capacity(total);
        let mut exact = self.exact.as_ref().map(|_| Vec::with_capacity(total));
        let mut j = vec![0; self.k];
        for flat in 0..total {
            unflatten(flat, p, &mut j);
            let o = self.offset(&j).unwrap();
            unit.push(self.unit[o]);
            if let (Some(dst), Some(src)) = (exact.as_mut(), self.exact.as_ref()) {
                dst.push(src[o].clone());
            }
        }
        Ok(CoeffTensor::from_unit(self.basis, p.to_vec(), unit, exact, self.h))
    }

    /// `Σ C²` over the whole tensor.
    pub fn squared_sum(&self) -> f64 {
        neumaier_sum(self.values.iter().map(|v| v * v))
    }

    /// `Σ C² / h^k` exactly, for Legendre tensors: `Σ Π(2j_l+1) C̄² / 4^k`.
    pub fn squared_sum_exact(&self) -> Option<BigRational> {
        let exact = self.exact.as_ref()?;
        let mut acc = BigRational::zero();
        let mut j = vec![0; self.k];
        for (flat, c) in exact.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            unflatten(flat, &self.p, &mut j);
            let w: u64 = j.iter().map(|&x| (2 * x + 1) as u64).product();
            acc += c * c * BigRational::from_integer(BigInt::from(w));
        }
        Some(acc / BigRational::from_integer(BigInt::from(1u64 << (2 * self.k))))
    }
}

pub(crate) fn unflatten(mut flat: usize, p: &[usize], j: &mut [usize]) {
    for (l, &pl) in p.iter().enumerate() {
        j[l] = flat % (pl + 1);
        flat /= pl + 1;
    }
}

pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    r.to_f64().unwrap_or_else(|| {
        // Fallback for magnitudes the direct conversion refuses.
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Compensated (Neumaier) sum.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = Neumaier::default();
    for x in it {
        acc.add(x);
    }
    acc.value()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn check_p(k: usize, p: &[usize], dense: bool) -> Result<()> {
    if k == 0 || k > MAX_K {
        return Err(Error::MultiplicityOutOfRange { k });
    }
    if p.len() != k {
        return Err(Error::InvalidArgument(format!("expected {k} truncation bounds, got {}", p.len())));
    }
    for &pl in p {
        if pl > INDEX_CAP {
            return Err(Error::IndexCap { j: pl, cap: INDEX_CAP });
        }
        if dense && pl > dense_limit(k) {
            return Err(Error::DenseLimit { k, p: pl, limit: dense_limit(k) });
        }
    }
    Ok(())
}

/// One coefficient `C_{j_k…j_1}` on `iv`.
pub fn coeff(basis: BasisKind, mi: &MultiIndex, iv: Interval) -> Result<Coeff> {
    let j = mi.as_slice();
    let k = j.len();
    match basis {
        BasisKind::Legendre => {
            let c = legendre_exact(j);
            let value = ScaleRule { h: iv.len(), k }.factor(j) * ratio_to_f64(&c);
            Ok(Coeff { value, exact: Some(c) })
        }
        BasisKind::Trigonometric => {
            let p: Vec<usize> = j.to_vec();
            let unit = trig_entries(&p, Some(j))?;
            Ok(Coeff { value: unit[0] * iv.len().powf(k as f64 / 2.0), exact: None })
        }
    }
}

/// Dense tensor of all coefficients with `j_l ≤ p_l`.
pub fn coeff_table(basis: BasisKind, k: usize, p: &[usize], iv: Interval) -> Result<CoeffTensor> {
    check_p(k, p, true)?;
    Ok(match basis {
        BasisKind::Legendre => CoeffTensor::from_exact(p.to_vec(), legendre_exact_table(p), iv.len()),
        BasisKind::Trigonometric => {
            CoeffTensor::from_trig_unit(p.to_vec(), trig_entries(p, None)?, iv.len())
        }
    })
}

/// Memoizes unit-interval tensors by `(basis, p)`.
#[derive(Debug, Default)]
pub struct CoeffCache {
    map: HashMap<(BasisKind, Vec<usize>), Arc<CoeffTensor>>,
}

impl CoeffCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Unit-interval tensor for `p` (its length gives `k`).
    pub fn unit(&mut self, basis: BasisKind, p: &[usize]) -> Result<Arc<CoeffTensor>> {
        if let Some(t) = self.map.get(&(basis, p.to_vec())) {
            return Ok(t.clone());
        }
        let t = Arc::new(coeff_table(basis, p.len(), p, Interval { start: 0.0, end: 1.0 })?);
        self.map.insert((basis, p.to_vec()), t.clone());
        Ok(t)
    }

    /// Tensor for `p` scaled to `iv`.
    pub fn get(&mut self, basis: BasisKind, p: &[usize], iv: Interval) -> Result<CoeffTensor> {
        Ok(self.unit(basis, p)?.rescaled(iv))
    }
}

// ---------------------------------------------------------------------------
// Exact Legendre core

type Poly = Vec<BigRational>;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn add_at(p: &mut Poly, n: usize, v: BigRational) {
    if p.len() <= n {
        p.resize(n + 1, BigRational::zero());
    }
    p[n] += v;
}

/// `x · f` for `f` in the Legendre basis.
fn mul_x(f: &Poly) -> Poly {
    let mut g = vec![BigRational::zero(); f.len() + 1];
    for (n, a) in f.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        let d = (2 * n + 1) as i64;
        g[n + 1] += a * rat((n + 1) as i64, d);
        if n > 0 {
            g[n - 1] += a * rat(n as i64, d);
        }
    }
    g
}

fn lin(a: &Poly, ca: &BigRational, b: &Poly, cb: &BigRational) -> Poly {
    let n = a.len().max(b.len());
    let mut out = vec![BigRational::zero(); n];
    for (i, v) in a.iter().enumerate() {
        if !v.is_zero() {
            out[i] += v * ca;
        }
    }
    for (i, v) in b.iter().enumerate() {
        if !v.is_zero() {
            out[i] += v * cb;
        }
    }
    out
}

/// `P_j · f` for `j = 0..=jmax`.
fn products(f: &Poly, jmax: usize) -> Vec<Poly> {
    let mut out = Vec::with_capacity(jmax + 1);
    out.push(f.clone());
    if jmax >= 1 {
        out.push(mul_x(f));
    }
    for n in 1..jmax {
        let xq = mul_x(&out[n]);
        let next = lin(
            &xq,
            &rat((2 * n + 1) as i64, (n + 1) as i64),
            &out[n - 1],
            &rat(-(n as i64), (n + 1) as i64),
        );
        out.push(next);
    }
    out
}

/// `∫_{-1}^{y} f`.
fn antiderivative(f: &Poly) -> Poly {
    let mut g: Poly = vec![BigRational::zero(); f.len() + 1];
    for (n, a) in f.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        if n == 0 {
            g[0] += a.clone();
            g[1] += a.clone();
        } else {
            let c = a * rat(1, (2 * n + 1) as i64);
            add_at(&mut g, n + 1, c.clone());
            g[n - 1] -= c;
        }
    }
    g
}

/// `∫_{-1}^{1} P_j f = 2/(2j+1) · [P_j] f`.
fn project(f: &Poly, j: usize) -> BigRational {
    match f.get(j) {
        Some(a) if !a.is_zero() => a * rat(2, (2 * j + 1) as i64),
        _ => BigRational::zero(),
    }
}

/// `C̄_{j_k…j_1}` exactly.
pub fn legendre_exact(j: &[usize]) -> BigRational {
    let mut g: Poly = vec![BigRational::one()];
    let k = j.len();
    for &jl in &j[..k - 1] {
        let q = products(&g, jl).pop().unwrap();
        g = antiderivative(&q);
    }
    project(&g, j[k - 1])
}

/// All `C̄` with `j_l ≤ p_l`, flat with `j_1` fastest.
pub fn legendre_exact_table(p: &[usize]) -> Vec<BigRational> {
    let k = p.len();
    let total: usize = p.iter().map(|x| x + 1).product();
    let mut out = vec![BigRational::zero(); total];
    let mut strides = vec![1usize; k];
    for l in 1..k {
        strides[l] = strides[l - 1] * (p[l - 1] + 1);
    }
    fn walk(
        depth: usize,
        g: &Poly,
        offset: usize,
        p: &[usize],
        strides: &[usize],
        out: &mut [BigRational],
    ) {
        let k = p.len();
        if depth == k - 1 {
            for j in 0..=p[depth] {
                out[offset + j * strides[depth]] = project(g, j);
            }
            return;
        }
        let prods = products(g, p[depth]);
        for (j, q) in prods.iter().enumerate() {
            let next = antiderivative(q);
            walk(depth + 1, &next, offset + j * strides[depth], p, strides, out);
        }
    }
    walk(0, &vec![BigRational::one()], 0, p, &strides, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Trigonometric quadrature

/// Unit-interval trig coefficients for all `j ≤ p`, or for the single index `only`.
fn trig_entries(p: &[usize], only: Option<&[usize]>) -> Result<Vec<f64>> {
    let order = 16;
    let mut panels = 8;
    let mut prev = trig_with_rule(p, only, &PanelRule::new(panels, order));
    loop {
        panels *= 2;
        let cur = trig_with_rule(p, only, &PanelRule::new(panels, order));
        let diff = prev.iter().zip(&cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if diff < TRIG_TOL {
            return Ok(cur
                .into_iter()
                .map(|v| if v.abs() < TRIG_SNAP { 0.0 } else { v })
                .collect());
        }
        if panels >= 4096 {
            return Err(Error::QuadratureFailed { residual: diff });
        }
        prev = cur;
    }
}

fn trig_with_rule(p: &[usize], only: Option<&[usize]>, rule: &PanelRule) -> Vec<f64> {
    let unit = Interval { start: 0.0, end: 1.0 };
    let n = rule.len();
    let jmax = *p.iter().max().unwrap();
    let f: Vec<Vec<f64>> = (0..=jmax)
        .map(|j| rule.nodes.iter().map(|&x| phi_unchecked(BasisKind::Trigonometric, j, x, unit)).collect())
        .collect();
    let k = p.len();
    if let Some(j) = only {
        let mut g = vec![1.0; n];
        let mut tmp = vec![0.0; n];
        for &jl in &j[..k - 1] {
            let prod: Vec<f64> = g.iter().zip(&f[jl]).map(|(a, b)| a * b).collect();
            rule.running_integral(&prod, &mut tmp);
            std::mem::swap(&mut g, &mut tmp);
        }
        let last: Vec<f64> = g.iter().zip(&f[j[k - 1]]).map(|(a, b)| a * b).collect();
        return vec![rule.integral(&last)];
    }
    let total: usize = p.iter().map(|x| x + 1).product();
    let mut out = vec![0.0; total];
    let mut strides = vec![1usize; k];
    for l in 1..k {
        strides[l] = strides[l - 1] * (p[l - 1] + 1);
    }
    fn walk(
        depth: usize,
        g: &[f64],
        offset: usize,
        p: &[usize],
        strides: &[usize],
        f: &[Vec<f64>],
        rule: &PanelRule,
        out: &mut [f64],
    ) {
        let k = p.len();
        for j in 0..=p[depth] {
            let prod: Vec<f64> = g.iter().zip(&f[j]).map(|(a, b)| a * b).collect();
            if depth == k - 1 {
                out[offset + j * strides[depth]] = rule.integral(&prod);
            } else {
                let mut next = vec![0.0; g.len()];
                rule.running_integral(&prod, &mut next);
                walk(depth + 1, &next, offset + j * strides[depth], p, strides, f, rule, out);
            }
        }
    }
    walk(0, &vec![1.0; n], 0, p, &strides, &f, rule, &mut out);
    out
}
