//! Mean-square errors of truncated expansions: the exact permutation formula,
//! the `k!` upper bound, closed-form error series for both bases, and minimal
//! truncation search.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::basis::{BasisKind, Interval};
use crate::coeffs::{coeff_table, dense_limit, neumaier_sum, ratio_to_f64, CoeffTensor, Neumaier, MAX_K};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Calculus {
    Ito,
    Stratonovich,
}

/// One iterated integral: indices `(i_1, …, i_k)` innermost first, `0` meaning `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralSpec {
    pub indices: Vec<usize>,
    pub calculus: Calculus,
    pub iv: Interval,
}

impl IntegralSpec {
    pub fn new(indices: Vec<usize>, calculus: Calculus, iv: Interval) -> Result<Self> {
        if indices.is_empty() || indices.len() > MAX_K {
            return Err(Error::MultiplicityOutOfRange { k: indices.len() });
        }
        Ok(IntegralSpec { indices, calculus, iv })
    }

    pub fn ito(indices: &[usize], iv: Interval) -> Result<Self> {
        Self::new(indices.to_vec(), Calculus::Ito, iv)
    }

    pub fn stratonovich(indices: &[usize], iv: Interval) -> Result<Self> {
        Self::new(indices.to_vec(), Calculus::Stratonovich, iv)
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn pairwise_distinct(&self) -> bool {
        let i = &self.indices;
        (0..i.len()).all(|a| (a + 1..i.len()).all(|b| i[a] != i[b]))
    }

    /// `λ_l = 0` positions.
    pub fn has_time_channel(&self) -> bool {
        self.indices.contains(&0)
    }

    /// `(T−t)^k / k!`.
    pub fn i_k(&self) -> f64 {
        self.iv.len().powi(self.k() as i32) / factorial(self.k()) as f64
    }
}

pub(crate) fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Exact,
    ClosedForm,
    UpperBound,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub value: f64,
    pub kind: ErrorKind,
    pub truncation: usize,
    /// Standard error of a Monte Carlo estimate.
    pub std_error: Option<f64>,
}

/// Permutations `σ` of `0..k` with `i[σ(l)] = i[l]` for every `l`.
pub fn stabilizer(indices: &[usize]) -> Vec<Vec<usize>> {
    let k = indices.len();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    let mut used = vec![false; k];
    fn rec(i: &[usize], cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        let l = cur.len();
        if l == i.len() {
            out.push(cur.clone());
            return;
        }
        for s in 0..i.len() {
            if !used[s] && i[s] == i[l] {
                used[s] = true;
                cur.push(s);
                rec(i, cur, used, out);
                cur.pop();
                used[s] = false;
            }
        }
    }
    rec(indices, &mut cur, &mut used, &mut out);
    out
}

fn check_exact_pre(spec: &IntegralSpec, p: usize, coeffs: &CoeffTensor) -> Result<()> {
    if spec.calculus != Calculus::Ito {
        return Err(Error::CalculusNotSupported("exact errors are for Itô integrals".into()));
    }
    if spec.has_time_channel() {
        return Err(Error::PatternNotImplemented(format!(
            "index pattern {:?} contains a time channel",
            spec.indices
        )));
    }
    if coeffs.k() != spec.k() {
        return Err(Error::InvalidArgument(format!(
            "tensor has k = {}, integral has k = {}",
            coeffs.k(),
            spec.k()
        )));
    }
    for (dim, &have) in coeffs.p().iter().enumerate() {
        if have < p {
            return Err(Error::TensorTooSmall { dim, need: p, have });
        }
    }
    Ok(())
}

fn cube(coeffs: &CoeffTensor, p: usize) -> Result<CoeffTensor> {
    if coeffs.p().iter().all(|&x| x == p) {
        Ok(coeffs.clone())
    } else {
        coeffs.slice(&vec![p; coeffs.k()])
    }
}

/// `E_k^p / (T−t)^k` as an exact rational, for Legendre tensors.
pub fn exact_ms_error_rational(
    spec: &IntegralSpec,
    p: usize,
    coeffs: &CoeffTensor,
) -> Result<Option<BigRational>> {
    check_exact_pre(spec, p, coeffs)?;
    if coeffs.basis() != BasisKind::Legendre {
        return Ok(None);
    }
    let t = cube(coeffs, p)?;
    let core = t.exact_core().unwrap();
    let k = spec.k();
    let perms = stabilizer(&spec.indices);
    let mut acc = BigRational::zero();
    let mut j = vec![0; k];
    let mut js = vec![0; k];
    for (flat, c) in core.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        t.unflatten(flat, &mut j);
        let mut inner = BigRational::zero();
        for s in &perms {
            for l in 0..k {
                js[l] = j[s[l]];
            }
            inner += t.get_exact(&js).unwrap();
        }
        if inner.is_zero() {
            continue;
        }
        let w: u64 = j.iter().map(|&x| (2 * x + 1) as u64).product();
        acc += c * inner * BigRational::from_integer(BigInt::from(w));
    }
    let scale = BigRational::from_integer(BigInt::from(1u64 << (2 * k)));
    let ik = BigRational::new(BigInt::from(1), BigInt::from(factorial(k)));
    Ok(Some(ik - acc / scale))
}

/// Exact mean-square error of the cube truncation `j_l ≤ p` of an Itô integral.
///
/// `E = I_k − Σ_j C_j Σ_σ C_{j∘σ}` over permutations `σ` that fix the index labels.
pub fn exact_ms_error(spec: &IntegralSpec, p: usize, coeffs: &CoeffTensor) -> Result<ErrorReport> {
    check_exact_pre(spec, p, coeffs)?;
    let h = spec.iv.len();
    let k = spec.k();
    let value = if let Some(r) = exact_ms_error_rational(spec, p, coeffs)? {
        ratio_to_f64(&r) * h.powi(k as i32)
    } else {
        let t = cube(coeffs, p)?.rescaled(spec.iv);
        let perms = stabilizer(&spec.indices);
        let mut j = vec![0; k];
        let mut js = vec![0; k];
        let mut acc = Neumaier::default();
        for &flat in t.nonzero() {
            t.unflatten(flat, &mut j);
            let c = t.values()[flat];
            let mut inner = 0.0;
            for s in &perms {
                for l in 0..k {
                    js[l] = j[s[l]];
                }
                inner += t.get(&js);
            }
            acc.add(c * inner);
        }
        let e = spec.i_k() - acc.value();
        if e < 0.0 && e > -1e-12 * spec.i_k() {
            0.0
        } else {
            e
        }
    };
    Ok(ErrorReport { value, kind: ErrorKind::Exact, truncation: p, std_error: None })
}

/// `k! (I_k − Σ_{j ≤ p} C²)`.
pub fn ms_error_bound(spec: &IntegralSpec, p: usize, coeffs: &CoeffTensor) -> Result<ErrorReport> {
    let h = spec.iv.len();
    if spec.has_time_channel() && h >= 1.0 {
        return Err(Error::IntervalCondition(format!(
            "T − t = {h} must be below 1 when a time channel is present"
        )));
    }
    if coeffs.k() != spec.k() {
        return Err(Error::InvalidArgument("tensor multiplicity mismatch".into()));
    }
    for (dim, &have) in coeffs.p().iter().enumerate() {
        if have < p {
            return Err(Error::TensorTooSmall { dim, need: p, have });
        }
    }
    let k = spec.k();
    let t = cube(coeffs, p)?;
    let deficit = match t.squared_sum_exact() {
        Some(s) => {
            let ik = BigRational::new(BigInt::from(1), BigInt::from(factorial(k)));
            ratio_to_f64(&(ik - s)) * h.powi(k as i32)
        }
        None => {
            let s = t.rescaled(spec.iv).squared_sum();
            (spec.i_k() - s).max(0.0)
        }
    };
    Ok(ErrorReport {
        value: factorial(k) as f64 * deficit,
        kind: ErrorKind::UpperBound,
        truncation: p,
        std_error: None,
    })
}

/// Closed-form mean-square errors with their truncation parameter `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClosedForm {
    /// Legendre `J_(11)`, `i_1 ≠ i_2`: `(T−t)²/2 (1/2 − Σ_{i≤q} 1/(4i²−1))`.
    Legendre11,
    /// Trig `J_(11)` with tail variables: `(T−t)²/(2π²) α_q`.
    Trig11,
    /// Trig `J_(11)` without tail variables: three times [`ClosedForm::Trig11`].
    Trig11NoTail,
    /// Trig `J_(01)` or `J_(10)` without tail variables: `(T−t)³/(2π²) α_q`.
    Trig01NoTail,
    /// Trig `J_(111)` with tail variables, pairwise distinct indices.
    Trig111,
    /// Trig `J_(111)` without tail variables.
    Trig111NoTail,
    /// Trig Stratonovich `J*_(011)`, `i_1 ≠ i_2`.
    Trig011Strat,
    /// Legendre Stratonovich `J*_(011)`, `i_1 ≠ i_2`.
    Legendre011Strat,
}

impl ClosedForm {
    pub const ALL: [ClosedForm; 8] = [
        ClosedForm::Legendre11,
        ClosedForm::Trig11,
        ClosedForm::Trig11NoTail,
        ClosedForm::Trig01NoTail,
        ClosedForm::Trig111,
        ClosedForm::Trig111NoTail,
        ClosedForm::Trig011Strat,
        ClosedForm::Legendre011Strat,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ClosedForm::Legendre11 => "legendre-11",
            ClosedForm::Trig11 => "trig-11",
            ClosedForm::Trig11NoTail => "trig-11-notail",
            ClosedForm::Trig01NoTail => "trig-01-notail",
            ClosedForm::Trig111 => "trig-111",
            ClosedForm::Trig111NoTail => "trig-111-notail",
            ClosedForm::Trig011Strat => "trig-011-strat",
            ClosedForm::Legendre011Strat => "legendre-011-strat",
        }
    }

    /// Power of `T − t` in front of the dimensionless series.
    pub fn order(self) -> i32 {
        match self {
            ClosedForm::Legendre11 | ClosedForm::Trig11 | ClosedForm::Trig11NoTail => 2,
            ClosedForm::Trig01NoTail | ClosedForm::Trig111 | ClosedForm::Trig111NoTail => 3,
            ClosedForm::Trig011Strat | ClosedForm::Legendre011Strat => 4,
        }
    }
}

impl fmt::Display for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ClosedForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClosedForm::ALL
            .iter()
            .copied()
            .find(|c| c.id() == s)
            .ok_or_else(|| Error::UnknownFormula(s.to_string()))
    }
}

/// Closed-form error series advanced one `q` at a time.
///
/// Partial sums run in ascending order with compensated summation; each new
/// `q` adds the shell `{(q, l), (l, q) : l < q}` of the double sums.
#[derive(Debug, Clone)]
pub struct ClosedFormSeries {
    formula: ClosedForm,
    q: usize,
    s2: Neumaier,
    s4: Neumaier,
    legendre: Neumaier,
    double: Neumaier,
    t4a: Neumaier,
    t4b: Neumaier,
    t4c: Neumaier,
}

impl ClosedFormSeries {
    pub fn new(formula: ClosedForm) -> Self {
        let mut s = ClosedFormSeries {
            formula,
            q: 0,
            s2: Neumaier::default(),
            s4: Neumaier::default(),
            legendre: Neumaier::default(),
            double: Neumaier::default(),
            t4a: Neumaier::default(),
            t4b: Neumaier::default(),
            t4c: Neumaier::default(),
        };
        s.t4c.add(t4_c_term(0));
        s
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn advance(&mut self) {
        self.q += 1;
        let n = self.q as f64;
        self.s2.add(1.0 / (n * n));
        self.s4.add(1.0 / (n * n * n * n));
        match self.formula {
            ClosedForm::Legendre11 => self.legendre.add(1.0 / (4.0 * n * n - 1.0)),
            ClosedForm::Trig111 | ClosedForm::Trig111NoTail => {
                let mut row = Neumaier::default();
                for l in 1..self.q {
                    let l = l as f64;
                    row.add(triple_term(n, l) + triple_term(l, n));
                }
                self.double.add(row.value());
            }
            ClosedForm::Trig011Strat => {
                let mut row = Neumaier::default();
                for l in 1..self.q {
                    let l = l as f64;
                    row.add(strat_term(n, l) + strat_term(l, n));
                }
                self.double.add(row.value());
            }
            ClosedForm::Legendre011Strat => {
                if self.q >= 2 {
                    self.t4a.add(2.0 / (4.0 * n * n - 1.0));
                }
                let a = 2.0 * n - 1.0;
                let b = 2.0 * n + 3.0;
                self.t4b.add(1.0 / (a * a * b * b));
                self.t4c.add(t4_c_term(self.q));
            }
            _ => {}
        }
    }

    /// Value divided by `(T−t)^order`.
    pub fn unit_value(&self) -> f64 {
        let pi2 = PI * PI;
        let pi4 = pi2 * pi2;
        let alpha = pi2 / 6.0 - self.s2.value();
        let s2 = self.s2.value();
        let s4 = self.s4.value();
        let d = self.double.value();
        match self.formula {
            ClosedForm::Legendre11 => 0.5 * (0.5 - self.legendre.value()),
            ClosedForm::Trig11 => alpha / (2.0 * pi2),
            ClosedForm::Trig11NoTail => 3.0 * alpha / (2.0 * pi2),
            ClosedForm::Trig01NoTail => alpha / (2.0 * pi2),
            ClosedForm::Trig111 => {
                4.0 / 45.0 - s2 / (4.0 * pi2) - 55.0 * s4 / (32.0 * pi4) - d / (4.0 * pi4)
            }
            ClosedForm::Trig111NoTail => {
                5.0 / 36.0 - s2 / (2.0 * pi2) - 79.0 * s4 / (32.0 * pi4) - d / (4.0 * pi4)
            }
            ClosedForm::Trig011Strat => {
                0.25 * (1.0 / 9.0 - s2 / (2.0 * pi2) - 5.0 * s4 / (8.0 * pi4) - d / pi4)
            }
            ClosedForm::Legendre011Strat => {
                (5.0 / 9.0 - self.t4a.value() - self.t4b.value() - self.t4c.value()) / 16.0
            }
        }
    }
}

fn triple_term(r: f64, l: f64) -> f64 {
    let (r2, l2) = (r * r, l * l);
    let d = r2 - l2;
    (5.0 * l2 * l2 + 4.0 * r2 * r2 - 3.0 * r2 * l2) / (r2 * l2 * d * d)
}

fn strat_term(k: f64, l: f64) -> f64 {
    let (k2, l2) = (k * k, l * l);
    let d = l2 - k2;
    (k2 + l2) / (l2 * d * d)
}

fn t4_c_term(i: usize) -> f64 {
    let i = i as f64;
    let a = 2.0 * i + 3.0;
    ((i + 2.0) * (i + 2.0) + (i + 1.0) * (i + 1.0)) / ((2.0 * i + 1.0) * (2.0 * i + 5.0) * a * a)
}

/// Closed-form error at truncation `q` on `iv`.
pub fn closed_form_error(formula: ClosedForm, q: usize, iv: Interval) -> ErrorReport {
    let mut s = ClosedFormSeries::new(formula);
    for _ in 0..q {
        s.advance();
    }
    ErrorReport {
        value: s.unit_value() * iv.len().powi(formula.order()),
        kind: ErrorKind::ClosedForm,
        truncation: q,
        std_error: None,
    }
}

/// Closed-form error by formula id.
pub fn closed_form_error_by_id(id: &str, q: usize, iv: Interval) -> Result<ErrorReport> {
    Ok(closed_form_error(id.parse()?, q, iv))
}

/// Unit values for `q = 0..=q_max`.
pub fn closed_form_values(formula: ClosedForm, q_max: usize) -> Vec<f64> {
    let mut s = ClosedFormSeries::new(formula);
    let mut out = Vec::with_capacity(q_max + 1);
    out.push(s.unit_value());
    for _ in 0..q_max {
        s.advance();
        out.push(s.unit_value());
    }
    out
}

/// `E_k^q / (T−t)^k` for pairwise distinct indices and the Legendre basis.
pub fn legendre_distinct_error(k: usize, q: usize) -> Result<BigRational> {
    let unit = Interval { start: 0.0, end: 1.0 };
    let t = coeff_table(BasisKind::Legendre, k, &vec![q; k], unit)?;
    let sq = t.squared_sum_exact().unwrap();
    Ok(BigRational::new(BigInt::from(1), BigInt::from(factorial(k))) - sq)
}

/// Error function scanned by [`min_truncation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Closed(ClosedForm),
    /// Exact Legendre error, pairwise distinct indices, multiplicity `k`.
    LegendreExact { k: usize },
}

/// Scan cap for [`min_truncation`].
pub const SCAN_CAP: usize = 1_000_000;

/// Smallest `q ≥ 1` with `error(q) ≤ (T−t)^γ`, by linear scan from 1.
pub fn min_truncation(objective: Objective, gamma: i32, iv: Interval) -> Result<usize> {
    let h = iv.len();
    let threshold = h.powi(gamma);
    match objective {
        Objective::Closed(f) => {
            let scale = h.powi(f.order());
            let mut s = ClosedFormSeries::new(f);
            let mut prev = f64::INFINITY;
            for q in 1..=SCAN_CAP {
                s.advance();
                let v = s.unit_value();
                if v > prev {
                    return Err(Error::NonMonotone { q });
                }
                if v * scale <= threshold {
                    return Ok(q);
                }
                prev = v;
            }
            Err(Error::ScanCapExceeded { cap: SCAN_CAP })
        }
        Objective::LegendreExact { k } => {
            let cap = dense_limit(k);
            let scale = h.powi(k as i32);
            let mut prev = f64::INFINITY;
            for q in 1..=cap {
                let v = legendre_distinct_error(k, q)?.to_f64().unwrap_or(f64::NAN);
                if v > prev {
                    return Err(Error::NonMonotone { q });
                }
                if v * scale <= threshold {
                    return Ok(q);
                }
                prev = v;
            }
            Err(Error::ScanCapExceeded { cap })
        }
    }
}

/// `Σ C²` helper used by reports.
pub fn squared_sum(coeffs: &CoeffTensor) -> f64 {
    neumaier_sum(coeffs.values().iter().map(|v| v * v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stabilizer_sizes() {
        assert_eq!(stabilizer(&[1, 2, 3]).len(), 1);
        assert_eq!(stabilizer(&[1, 1, 1]).len(), 6);
        assert_eq!(stabilizer(&[1, 1, 2]).len(), 2);
        assert_eq!(stabilizer(&[1, 2, 1, 2]).len(), 4);
    }

    #[test]
    fn formula_ids_round_trip() {
        for f in ClosedForm::ALL {
            assert_eq!(f.id().parse::<ClosedForm>().unwrap(), f);
        }
        assert!(matches!("x9".parse::<ClosedForm>(), Err(Error::UnknownFormula(_))));
    }

    #[test]
    fn legendre_11_closed_form_is_telescoped() {
        // Σ_{i≤q} 1/(4i²−1) = q/(2q+1)
        for q in 0..40 {
            let v = closed_form_error(ClosedForm::Legendre11, q, Interval::of_length(1.0).unwrap()).value;
            assert!((v - 1.0 / (4.0 * (2 * q + 1) as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_time_channel_and_stratonovich() {
        let iv = Interval::of_length(1.0).unwrap();
        let t = coeff_table(BasisKind::Legendre, 2, &[2, 2], iv).unwrap();
        let s = IntegralSpec::ito(&[0, 1], iv).unwrap();
        assert!(matches!(exact_ms_error(&s, 2, &t), Err(Error::PatternNotImplemented(_))));
        let s = IntegralSpec::stratonovich(&[1, 2], iv).unwrap();
        assert!(matches!(exact_ms_error(&s, 2, &t), Err(Error::CalculusNotSupported(_))));
        let s = IntegralSpec::ito(&[1, 2], iv).unwrap();
        assert!(matches!(exact_ms_error(&s, 3, &t), Err(Error::TensorTooSmall { .. })));
    }

    #[test]
    fn bound_interval_condition() {
        let iv = Interval::of_length(1.5).unwrap();
        let t = coeff_table(BasisKind::Legendre, 2, &[1, 1], iv).unwrap();
        let s = IntegralSpec::ito(&[0, 1], iv).unwrap();
        assert!(matches!(ms_error_bound(&s, 1, &t), Err(Error::IntervalCondition(_))));
        let s = IntegralSpec::ito(&[2, 1], iv).unwrap();
        assert!(ms_error_bound(&s, 1, &t).is_ok());
    }
}
