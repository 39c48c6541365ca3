//! Gaussian coordinates `ζ_j^{(i)}` and truncated expansions of iterated
//! integrals built from them.
//!
//! Channel `0` is the time channel `w^{(0)}_τ = τ`; its coordinates are never
//! stored and evaluate to `√(T−t) δ_{j0}`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::basis::Interval;
use crate::coeffs::{CoeffTensor, MAX_K};
use crate::errors::{Calculus, IntegralSpec};
use crate::{Error, Result};

/// Tail variables `ξ_q^{(i)}`, `μ_q^{(i)}` for `i = 1..m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tails {
    pub xi: Vec<f64>,
    pub mu: Vec<f64>,
}

/// One realization of `ζ_j^{(i)}`, `i = 1..m`, `j = 0..p`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDraws {
    m: usize,
    p: usize,
    zeta: Vec<f64>,
    tails: Option<Tails>,
}

impl GaussianDraws {
    /// `zeta` is row-major by component: `zeta[(i−1)(p+1) + j]`.
    pub fn from_parts(m: usize, p: usize, zeta: Vec<f64>, tails: Option<Tails>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("at least one Wiener component is required".into()));
        }
        if zeta.len() != m * (p + 1) {
            return Err(Error::InvalidArgument(format!(
                "zeta has {} entries, expected {}",
                zeta.len(),
                m * (p + 1)
            )));
        }
        if let Some(t) = &tails {
            if t.xi.len() != m || t.mu.len() != m {
                return Err(Error::InvalidArgument("tail vectors need one entry per component".into()));
            }
        }
        Ok(GaussianDraws { m, p, zeta, tails })
    }

    pub fn zeros(m: usize, p: usize, with_tails: bool) -> Self {
        let tails = with_tails.then(|| Tails { xi: vec![0.0; m], mu: vec![0.0; m] });
        GaussianDraws { m, p, zeta: vec![0.0; m * (p + 1)], tails }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn tails(&self) -> Option<&Tails> {
        self.tails.as_ref()
    }

    pub fn zeta_matrix(&self) -> &[f64] {
        &self.zeta
    }

    /// `ζ_j^{(i)}` for `i ≥ 1`.
    pub fn zeta(&self, i: usize, j: usize) -> f64 {
        assert!(i >= 1 && i <= self.m && j <= self.p, "ζ index ({i}, {j}) out of range");
        self.zeta[(i - 1) * (self.p + 1) + j]
    }

    pub fn set_zeta(&mut self, i: usize, j: usize, v: f64) {
        assert!(i >= 1 && i <= self.m && j <= self.p, "ζ index ({i}, {j}) out of range");
        self.zeta[(i - 1) * (self.p + 1) + j] = v;
    }

    pub fn set_tails(&mut self, tails: Option<Tails>) {
        self.tails = tails;
    }

    /// `ζ_j^{(i)}`, with the time channel resolved to `√h δ_{j0}`.
    pub fn coord(&self, i: usize, j: usize, h: f64) -> f64 {
        if i == 0 {
            if j == 0 {
                h.sqrt()
            } else {
                0.0
            }
        } else {
            self.zeta(i, j)
        }
    }

    fn check(&self, max_channel: usize, max_j: usize) -> Result<()> {
        if max_channel > self.m {
            return Err(Error::ChannelOutOfRange { need: max_channel, have: self.m });
        }
        if max_j > self.p {
            return Err(Error::DrawsTooSmall { need: max_j, have: self.p });
        }
        Ok(())
    }
}

/// Fresh draws from stream `stream` of the generator seeded with `seed`.
pub fn draw(m: usize, p: usize, with_tails: bool, seed: u64, stream: u64) -> GaussianDraws {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    draw_with(&mut rng, m, p, with_tails)
}

pub fn draw_with<R: Rng>(rng: &mut R, m: usize, p: usize, with_tails: bool) -> GaussianDraws {
    let zeta = (0..m * (p + 1)).map(|_| rng.sample(StandardNormal)).collect();
    let tails = with_tails.then(|| Tails {
        xi: (0..m).map(|_| rng.sample(StandardNormal)).collect(),
        mu: (0..m).map(|_| rng.sample(StandardNormal)).collect(),
    });
    GaussianDraws { m, p, zeta, tails }
}

/// All matchings of `{0..k}`, including the empty one.
pub fn matchings(k: usize) -> &'static [Vec<(usize, usize)>] {
    static CACHE: OnceLock<Vec<Vec<Vec<(usize, usize)>>>> = OnceLock::new();
    let all = CACHE.get_or_init(|| (0..=MAX_K).map(enumerate_matchings).collect());
    &all[k]
}

fn enumerate_matchings(k: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(free: &[usize], cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        let Some((&first, rest)) = free.split_first() else {
            out.push(cur.clone());
            return;
        };
        // `first` unmatched
        rec(rest, cur, out);
        for (pos, &other) in rest.iter().enumerate() {
            let mut remaining = rest.to_vec();
            remaining.remove(pos);
            cur.push((first, other));
            rec(&remaining, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    let free: Vec<usize> = (0..k).collect();
    rec(&free, &mut Vec::new(), &mut out);
    out
}

/// A truncated expansion compiled to a polynomial in the `ζ_j^{(i)}`.
///
/// Time-channel factors and indicator corrections are folded in at build
/// time, equal monomials are merged.
#[derive(Debug, Clone)]
pub struct ExpansionPlan {
    terms: Vec<(f64, Vec<(usize, usize)>)>,
    max_channel: usize,
    max_j: usize,
}

impl ExpansionPlan {
    /// Plan for `spec` with truncation `j_l ≤ p[l]`; the tensor may be on any interval.
    pub fn new(spec: &IntegralSpec, coeffs: &CoeffTensor, p: &[usize]) -> Result<Self> {
        let k = spec.k();
        if coeffs.k() != k || p.len() != k {
            return Err(Error::InvalidArgument(format!(
                "multiplicity mismatch: integral {k}, tensor {}, truncation {}",
                coeffs.k(),
                p.len()
            )));
        }
        for (dim, (&want, &have)) in p.iter().zip(coeffs.p()).enumerate() {
            if want > have {
                return Err(Error::TensorTooSmall { dim, need: want, have });
            }
        }
        let h = spec.iv.len();
        let scale = (h / coeffs.h()).powf(k as f64 / 2.0);
        let idx = &spec.indices;
        let active: Vec<&Vec<(usize, usize)>> = match spec.calculus {
            Calculus::Ito => matchings(k)
                .iter()
                .filter(|m| m.iter().all(|&(a, b)| idx[a] == idx[b] && idx[a] != 0))
                .collect(),
            Calculus::Stratonovich => {
                if !(2..=5).contains(&k) {
                    return Err(Error::MultiplicityOutOfRange { k });
                }
                vec![&matchings(k)[0]]
            }
        };
        let sqrt_h = h.sqrt();
        let mut acc: BTreeMap<Vec<(usize, usize)>, f64> = BTreeMap::new();
        let mut j = vec![0; k];
        let mut unmatched = vec![true; k];
        for &flat in coeffs.nonzero() {
            coeffs.unflatten(flat, &mut j);
            if j.iter().zip(p).any(|(a, b)| a > b) {
                continue;
            }
            let c = coeffs.values()[flat] * scale;
            'm: for m in &active {
                unmatched.iter_mut().for_each(|u| *u = true);
                for &(a, b) in m.iter() {
                    if j[a] != j[b] {
                        continue 'm;
                    }
                    unmatched[a] = false;
                    unmatched[b] = false;
                }
                let mut w = if m.len() % 2 == 0 { c } else { -c };
                let mut key = Vec::with_capacity(k);
                for l in 0..k {
                    if !unmatched[l] {
                        continue;
                    }
                    if idx[l] == 0 {
                        if j[l] != 0 {
                            continue 'm;
                        }
                        w *= sqrt_h;
                    } else {
                        key.push((idx[l], j[l]));
                    }
                }
                key.sort_unstable();
                *acc.entry(key).or_insert(0.0) += w;
            }
        }
        let terms: Vec<_> = acc.into_iter().filter(|(_, w)| *w != 0.0).map(|(k, w)| (w, k)).collect();
        let max_channel = terms.iter().flat_map(|(_, f)| f.iter().map(|x| x.0)).max().unwrap_or(0);
        let max_j = terms.iter().flat_map(|(_, f)| f.iter().map(|x| x.1)).max().unwrap_or(0);
        Ok(ExpansionPlan { terms, max_channel, max_j })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest basis index the plan reads.
    pub fn max_j(&self) -> usize {
        self.max_j
    }

    pub fn eval(&self, draws: &GaussianDraws) -> Result<f64> {
        draws.check(self.max_channel, self.max_j)?;
        Ok(self.eval_unchecked(draws))
    }

    pub(crate) fn eval_unchecked(&self, draws: &GaussianDraws) -> f64 {
        let stride = draws.p + 1;
        let z = &draws.zeta;
        let mut s = 0.0;
        for (w, f) in &self.terms {
            let mut v = *w;
            for &(i, j) in f {
                v *= z[(i - 1) * stride + j];
            }
            s += v;
        }
        s
    }
}

/// Itô expansion `Σ_j C_j Σ_M (−1)^{|M|} Π 1{…} Π ζ` truncated at `j_l ≤ p[l]`.
pub fn ito_approx(spec: &IntegralSpec, draws: &GaussianDraws, coeffs: &CoeffTensor, p: &[usize]) -> Result<f64> {
    if spec.calculus != Calculus::Ito {
        return Err(Error::CalculusNotSupported("ito_approx needs an Itô integral".into()));
    }
    ExpansionPlan::new(spec, coeffs, p)?.eval(draws)
}

/// Stratonovich expansion `Σ_j C_j Π ζ_{j_l}^{(i_l)}`, `k ∈ 2..=5`.
pub fn strat_approx(spec: &IntegralSpec, draws: &GaussianDraws, coeffs: &CoeffTensor, p: &[usize]) -> Result<f64> {
    let s = IntegralSpec { calculus: Calculus::Stratonovich, ..spec.clone() };
    ExpansionPlan::new(&s, coeffs, p)?.eval(draws)
}

/// Integrals with short Legendre closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussianIntegral {
    J1,
    J01,
    J10,
    J001,
}

/// Closed Legendre forms of the Gaussian integrals for channel `i`.
pub fn closed_form_gaussian(draws: &GaussianDraws, which: GaussianIntegral, i: usize, iv: Interval) -> Result<f64> {
    let need = match which {
        GaussianIntegral::J1 => 0,
        GaussianIntegral::J01 | GaussianIntegral::J10 => 1,
        GaussianIntegral::J001 => 2,
    };
    if i == 0 {
        return Err(Error::InvalidArgument("channel must be a Wiener component".into()));
    }
    draws.check(i, need)?;
    let h = iv.len();
    let z = |j| draws.zeta(i, j);
    let s3 = 3f64.sqrt();
    Ok(match which {
        GaussianIntegral::J1 => h.sqrt() * z(0),
        GaussianIntegral::J01 => h.powf(1.5) / 2.0 * (z(0) + z(1) / s3),
        GaussianIntegral::J10 => h.powf(1.5) / 2.0 * (z(0) - z(1) / s3),
        GaussianIntegral::J001 => {
            h.powf(2.5) / 6.0 * (z(0) + s3 / 2.0 * z(1) + z(2) / (2.0 * 5f64.sqrt()))
        }
    })
}

/// Trigonometric approximations with tail variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrigIntegral {
    J1,
    J11,
    J01,
    J10,
    J001,
    /// Itô `J_(111)`, pairwise distinct indices.
    J111,
    /// Stratonovich `J*_(111)`, any indices including the time channel.
    J111Strat,
    /// Stratonovich `J*_(011)` with indices `(0, i_1, i_2)`.
    J011Strat,
}

impl TrigIntegral {
    /// Basis indices `0..=max_j(q)` read from the draws.
    pub fn max_j(self, q: usize) -> usize {
        match self {
            TrigIntegral::J1 => 0,
            TrigIntegral::J111 | TrigIntegral::J111Strat => 4 * q,
            _ => 2 * q,
        }
    }

    pub fn multiplicity(self) -> usize {
        match self {
            TrigIntegral::J1 | TrigIntegral::J01 | TrigIntegral::J10 | TrigIntegral::J001 => 1,
            TrigIntegral::J11 | TrigIntegral::J011Strat => 2,
            TrigIntegral::J111 | TrigIntegral::J111Strat => 3,
        }
    }
}

/// `α_q = π²/6 − Σ_{r≤q} 1/r²`.
pub fn alpha(q: usize) -> f64 {
    let s: f64 = (1..=q).rev().map(|r| 1.0 / (r * r) as f64).sum();
    PI * PI / 6.0 - s
}

/// `β_q = π⁴/90 − Σ_{r≤q} 1/r⁴`.
pub fn beta(q: usize) -> f64 {
    let s: f64 = (1..=q).rev().map(|r| 1.0 / ((r * r) as f64).powi(2)).sum();
    PI.powi(4) / 90.0 - s
}

struct TrigView<'a> {
    d: &'a GaussianDraws,
    h: f64,
    tails: bool,
    sa: f64,
    sb: f64,
}

impl TrigView<'_> {
    fn z(&self, i: usize, j: usize) -> f64 {
        self.d.coord(i, j, self.h)
    }

    fn xi(&self, i: usize) -> f64 {
        match (&self.d.tails, self.tails, i) {
            (Some(t), true, i) if i > 0 => t.xi[i - 1],
            _ => 0.0,
        }
    }

    fn mu(&self, i: usize) -> f64 {
        match (&self.d.tails, self.tails, i) {
            (Some(t), true, i) if i > 0 => t.mu[i - 1],
            _ => 0.0,
        }
    }
}

/// Trigonometric approximation of `which` with indices `idx` (innermost first).
///
/// With `tails = false` the `ξ_q`, `μ_q` terms are dropped, giving the plain
/// truncated series. Single-channel integrals take `idx = [i]`.
pub fn milstein_trig_approx(
    draws: &GaussianDraws,
    which: TrigIntegral,
    idx: &[usize],
    q: usize,
    iv: Interval,
    tails: bool,
) -> Result<f64> {
    if idx.len() != which.multiplicity() {
        return Err(Error::InvalidArgument(format!(
            "{which:?} takes {} channel indices",
            which.multiplicity()
        )));
    }
    let max_ch = idx.iter().copied().max().unwrap_or(0);
    draws.check(max_ch, which.max_j(q))?;
    if tails && draws.tails.is_none() && want_tails(which) {
        return Err(Error::TailsMissing);
    }
    match which {
        TrigIntegral::J111 => {
            let (a, b, c) = (idx[0], idx[1], idx[2]);
            if a == b || a == c || b == c {
                return Err(Error::NotPairwiseDistinct);
            }
        }
        TrigIntegral::J1 | TrigIntegral::J01 | TrigIntegral::J10 | TrigIntegral::J001 if idx[0] == 0 => {
            return Err(Error::InvalidArgument("channel must be a Wiener component".into()));
        }
        _ => {}
    }
    let v = TrigView { d: draws, h: iv.len(), tails, sa: alpha(q).max(0.0).sqrt(), sb: beta(q).max(0.0).sqrt() };
    Ok(match which {
        TrigIntegral::J1 => v.h.sqrt() * v.z(idx[0], 0),
        TrigIntegral::J11 => trig_j11(&v, idx[0], idx[1], q),
        TrigIntegral::J01 => trig_j01(&v, idx[0], q, -1.0),
        TrigIntegral::J10 => trig_j01(&v, idx[0], q, 1.0),
        TrigIntegral::J001 => trig_j001(&v, idx[0], q),
        TrigIntegral::J111 | TrigIntegral::J111Strat => v.h.powf(1.5) * trig_x111(&v, idx[0], idx[1], idx[2], q),
        TrigIntegral::J011Strat => v.h.powf(1.5) * trig_x111(&v, 0, idx[0], idx[1], q),
    })
}

fn want_tails(which: TrigIntegral) -> bool {
    !matches!(which, TrigIntegral::J1)
}

fn trig_j11(v: &TrigView, a: usize, b: usize, q: usize) -> f64 {
    let mut s = 0.0;
    for r in 1..=q {
        let rf = r as f64;
        s += (v.z(a, 2 * r) * v.z(b, 2 * r - 1) - v.z(a, 2 * r - 1) * v.z(b, 2 * r)
            + SQRT_2 * (v.z(a, 2 * r - 1) * v.z(b, 0) - v.z(a, 0) * v.z(b, 2 * r - 1)))
            / rf;
    }
    let tail = SQRT_2 / PI * v.sa * (v.xi(a) * v.z(b, 0) - v.z(a, 0) * v.xi(b));
    let ind = if a == b && a != 0 { 1.0 } else { 0.0 };
    0.5 * v.h * (v.z(a, 0) * v.z(b, 0) + s / PI + tail - ind)
}

fn sine_sum(v: &TrigView, i: usize, q: usize) -> f64 {
    let s: f64 = (1..=q).map(|r| v.z(i, 2 * r - 1) / r as f64).sum();
    s + v.sa * v.xi(i)
}

fn cosine_sum(v: &TrigView, i: usize, q: usize) -> f64 {
    let s: f64 = (1..=q).map(|r| v.z(i, 2 * r) / (r * r) as f64).sum();
    s + v.sb * v.mu(i)
}

fn trig_j01(v: &TrigView, i: usize, q: usize, sign: f64) -> f64 {
    v.h.powf(1.5) / 2.0 * (v.z(i, 0) + sign * SQRT_2 / PI * sine_sum(v, i, q))
}

fn trig_j001(v: &TrigView, i: usize, q: usize) -> f64 {
    let c = 1.0 / (2.0 * SQRT_2 * PI * PI);
    let s = 1.0 / (2.0 * SQRT_2 * PI);
    v.h.powf(2.5) * (v.z(i, 0) / 6.0 + c * cosine_sum(v, i, q) - s * sine_sum(v, i, q))
}

/// Bracket of the triple trigonometric expansion, without the `(T−t)^{3/2}` factor.
fn trig_x111(v: &TrigView, i1: usize, i2: usize, i3: usize, q: usize) -> f64 {
    let z1 = |j: usize| v.z(i1, j);
    let z2 = |j: usize| v.z(i2, j);
    let z3 = |j: usize| v.z(i3, j);
    let pi2 = PI * PI;
    let (z10, z20, z30) = (z1(0), z2(0), z3(0));

    let mut out = z10 * z20 * z30 / 6.0;
    out += v.sa / (2.0 * SQRT_2 * PI) * (v.xi(i1) * z20 * z30 - v.xi(i3) * z20 * z10);
    out += v.sb / (2.0 * SQRT_2 * pi2)
        * (v.mu(i1) * z20 * z30 - 2.0 * v.mu(i2) * z10 * z30 + v.mu(i3) * z10 * z20);

    let mut single = 0.0;
    let mut diag = 0.0;
    for r in 1..=q {
        let rf = r as f64;
        let (s, c) = (2 * r - 1, 2 * r);
        single += (z1(s) * z20 * z30 - z3(s) * z20 * z10) / (PI * rf)
            + (z1(c) * z20 * z30 - 2.0 * z2(c) * z30 * z10 + z3(c) * z20 * z10) / (pi2 * rf * rf);
        diag += (z1(c) * z2(s) * z30 - z1(s) * z2(c) * z30 - z2(s) * z3(c) * z10 + z3(s) * z2(c) * z10)
            / (4.0 * PI * rf)
            + (3.0 * z1(s) * z2(s) * z30 + z1(c) * z2(c) * z30 - 6.0 * z1(s) * z3(s) * z20
                + 3.0 * z2(s) * z3(s) * z10
                - 2.0 * z1(c) * z3(c) * z20
                + z3(c) * z2(c) * z10)
                / (8.0 * pi2 * rf * rf);
    }
    out += single / (2.0 * SQRT_2) + diag;

    // D block
    let mut d1 = 0.0;
    for r in 1..=q {
        for l in 1..=q {
            if r == l {
                continue;
            }
            let (rf, lf) = (r as f64, l as f64);
            d1 += (z1(2 * r) * z2(2 * l) * z30 - z2(2 * r) * z10 * z3(2 * l)
                + rf / lf * z1(2 * r - 1) * z2(2 * l - 1) * z30
                - lf / rf * z10 * z2(2 * r - 1) * z3(2 * l - 1))
                / (rf * rf - lf * lf)
                - z1(2 * r - 1) * z20 * z3(2 * l - 1) / (rf * lf);
        }
    }
    let mut d2 = 0.0;
    for r in 1..=q {
        for m in 1..=q {
            let (rf, mf) = (r as f64, m as f64);
            let (rs, rc, ms, mc) = (2 * r - 1, 2 * r, 2 * m - 1, 2 * m);
            let (ps, pc) = (2 * (m + r) - 1, 2 * (m + r));
            d2 += 2.0 / (rf * mf)
                * (-z1(rs) * z2(ms) * z3(mc) + z1(rs) * z2(rc) * z3(ms) + z1(rs) * z2(mc) * z3(ms)
                    - z1(rc) * z2(rs) * z3(ms))
                + (-z1(pc) * z2(rc) * z3(mc) - z1(ps) * z2(rs) * z3(mc) - z1(ps) * z2(rc) * z3(ms)
                    + z1(pc) * z2(rs) * z3(ms))
                    / (mf * (rf + mf));
        }
    }
    for m in 1..=q {
        for l in m + 1..=q {
            let (mf, lf) = (m as f64, l as f64);
            let (ds, dc) = (2 * (l - m) - 1, 2 * (l - m));
            let (ls, lc, ms, mc) = (2 * l - 1, 2 * l, 2 * m - 1, 2 * m);
            d2 += (z1(dc) * z2(lc) * z3(mc) + z1(ds) * z2(ls) * z3(mc) - z1(ds) * z2(lc) * z3(ms)
                + z1(dc) * z2(ls) * z3(ms))
                / (mf * (lf - mf))
                + (-z1(dc) * z2(mc) * z3(lc) + z1(ds) * z2(ms) * z3(lc) - z1(ds) * z2(mc) * z3(ls)
                    - z1(dc) * z2(ms) * z3(ls))
                    / (lf * (lf - mf));
        }
    }
    out + d1 / (2.0 * pi2) + d2 / (4.0 * SQRT_2 * pi2)
}

/// Itô `J_(111)` from the trigonometric family for any indices in `1..=m`:
/// `J = J* − ½ 1{i_1=i_2} J_(01)^{(0 i_3)} − ½ 1{i_2=i_3} J_(10)^{(i_1 0)}`.
pub fn trig_ito_111(draws: &GaussianDraws, idx: [usize; 3], q: usize, iv: Interval, tails: bool) -> Result<f64> {
    let [a, b, c] = idx;
    if a == 0 || b == 0 || c == 0 {
        return Err(Error::InvalidArgument("indices must be Wiener components".into()));
    }
    let mut v = milstein_trig_approx(draws, TrigIntegral::J111Strat, &idx, q, iv, tails)?;
    if a == b {
        v -= 0.5 * milstein_trig_approx(draws, TrigIntegral::J01, &[c], q, iv, tails)?;
    }
    if b == c {
        v -= 0.5 * milstein_trig_approx(draws, TrigIntegral::J10, &[a], q, iv, tails)?;
    }
    Ok(v)
}

/// Legendre approximation of `J*_(011)^{(0 i_1 i_2)}`, reading `ζ_j` for `j ≤ q + 2`.
pub fn legendre_011_approx(draws: &GaussianDraws, i1: usize, i2: usize, q: usize, iv: Interval) -> Result<f64> {
    if i1 == 0 || i2 == 0 {
        return Err(Error::InvalidArgument("indices must be Wiener components".into()));
    }
    draws.check(i1.max(i2), q + 2)?;
    let h = iv.len();
    let a = |j: usize| draws.zeta(i1, j);
    let b = |j: usize| draws.zeta(i2, j);
    let mut j11 = a(0) * b(0);
    for i in 1..=q {
        j11 += (a(i - 1) * b(i) - a(i) * b(i - 1)) / ((4 * i * i - 1) as f64).sqrt();
    }
    j11 *= h / 2.0;
    let mut s = b(0) * a(1) / 3f64.sqrt();
    for i in 0..=q {
        let fi = i as f64;
        s += ((fi + 1.0) * b(i + 2) * a(i) - (fi + 2.0) * b(i) * a(i + 2))
            / (((2.0 * fi + 1.0) * (2.0 * fi + 5.0)).sqrt() * (2.0 * fi + 3.0))
            + a(i) * b(i) / ((2.0 * fi - 1.0) * (2.0 * fi + 3.0));
    }
    Ok(h / 2.0 * j11 + h * h / 4.0 * s)
}

/// A reproducible batch of realizations of one integral approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub spec: IntegralSpec,
    pub q: usize,
    pub values: Vec<f64>,
    pub seed: u64,
    /// Stream of the first sample; sample `n` uses `first_stream + n`.
    pub first_stream: u64,
}

impl SampleBatch {
    /// Draws `n` realizations with `m` components and indices `0..=p`, one stream per sample.
    #[allow(clippy::too_many_arguments)]
    pub fn generate<F>(
        spec: IntegralSpec,
        q: usize,
        n: usize,
        m: usize,
        p: usize,
        with_tails: bool,
        seed: u64,
        f: F,
    ) -> Result<SampleBatch>
    where
        F: Fn(&GaussianDraws) -> Result<f64>,
    {
        let mut values = Vec::with_capacity(n);
        for s in 0..n {
            values.push(f(&draw(m, p, with_tails, seed, s as u64))?);
        }
        Ok(SampleBatch { spec, q, values, seed, first_stream: 0 })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Mean of squares and its standard error.
    pub fn second_moment(&self) -> (f64, f64) {
        let n = self.values.len() as f64;
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        let mean = sq.iter().sum::<f64>() / n;
        let var = sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }
}
