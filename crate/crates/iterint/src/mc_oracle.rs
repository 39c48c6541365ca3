//! Brute-force reference values from fine Wiener paths, coupled to the
//! expansions through the projected coordinates `ζ_j^{(i)}`.
//!
//! Projections use cell averages of `φ_j`, i.e. `ζ_j = Σ_l Δw_l (Φ_j(τ_{l+1}) − Φ_j(τ_l))/Δ`
//! with `Φ_j` the antiderivative, which is the conditional expectation of
//! `∫φ_j dw` given the grid increments. The Itô reference is the conditional
//! expectation of the iterated integral given the same increments.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::basis::{antiderivative_all, antiderivative_unchecked, BasisKind, Interval};
use crate::coeffs::{CoeffTensor, Neumaier};
use crate::errors::{factorial, Calculus, ErrorKind, ErrorReport, IntegralSpec};
use crate::sampler::{
    alpha, beta, legendre_011_approx, matchings, milstein_trig_approx, ExpansionPlan, GaussianDraws, Tails,
    TrigIntegral,
};
use crate::{Error, Result};

/// Smallest grid-to-index ratio accepted by [`Projector`].
pub const GRID_FACTOR: usize = 100;

/// A sample path on a uniform grid of `n` cells; `increments[c·n + l]` is `Δw_l^{(c+1)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    pub iv: Interval,
    pub n: usize,
    pub m: usize,
    pub increments: Vec<f64>,
}

impl WienerPath {
    pub fn step(&self) -> f64 {
        self.iv.len() / self.n as f64
    }

    /// Increments of component `i ≥ 1`.
    pub fn component(&self, i: usize) -> &[f64] {
        &self.increments[(i - 1) * self.n..i * self.n]
    }

    /// `w^{(i)}` at grid point `l` (`w^{(i)}_t = 0`).
    pub fn value_at(&self, i: usize, l: usize) -> f64 {
        self.component(i)[..l].iter().sum()
    }

    pub fn terminal(&self, i: usize) -> f64 {
        self.value_at(i, self.n)
    }

    /// Sums of `factor` consecutive increments.
    pub fn coarsen(&self, factor: usize) -> Result<WienerPath> {
        if factor == 0 || self.n % factor != 0 {
            return Err(Error::Divisibility { n: self.n, n_coarse: self.n / factor.max(1) });
        }
        let nc = self.n / factor;
        let mut inc = Vec::with_capacity(self.m * nc);
        for i in 1..=self.m {
            for chunk in self.component(i).chunks(factor) {
                inc.push(chunk.iter().sum());
            }
        }
        Ok(WienerPath { iv: self.iv, n: nc, m: self.m, increments: inc })
    }
}

/// Independent `N(0, Δ)` increments from stream `stream` of the generator seeded with `seed`.
pub fn simulate_path(m: usize, n: usize, iv: Interval, seed: u64, stream: u64) -> Result<WienerPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    simulate_path_with(&mut rng, m, n, iv)
}

pub fn simulate_path_with<R: Rng>(rng: &mut R, m: usize, n: usize, iv: Interval) -> Result<WienerPath> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("grid needs at least 2 cells, got {n}")));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("at least one Wiener component is required".into()));
    }
    let sd = (iv.len() / n as f64).sqrt();
    let increments = (0..m * n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    Ok(WienerPath { iv, n, m, increments })
}

/// Cell-average projection weights for one basis, grid and index range.
#[derive(Debug, Clone)]
pub struct Projector {
    pub basis: BasisKind,
    pub n: usize,
    pub p: usize,
    pub iv: Interval,
    /// `(p+1) × n`, row-major by basis index.
    weights: Vec<f64>,
    /// Trig only: cell averages of `Σ_r φ_{2r−1}/r` and `Σ_r φ_{2r}/r²`.
    tail_weights: Option<[Vec<f64>; 2]>,
}

impl Projector {
    pub fn new(basis: BasisKind, n: usize, p: usize, iv: Interval) -> Result<Self> {
        if n < GRID_FACTOR * (p + 1) {
            return Err(Error::GridTooCoarse { n, p });
        }
        let h = iv.len();
        let dt = h / n as f64;
        let mut prev = vec![0.0; p + 1];
        let mut cur = vec![0.0; p + 1];
        let mut weights = vec![0.0; (p + 1) * n];
        antiderivative_all(basis, iv.start, iv, &mut prev);
        for l in 0..n {
            let s = if l + 1 == n { iv.end } else { iv.start + (l + 1) as f64 * dt };
            antiderivative_all(basis, s, iv, &mut cur);
            for j in 0..=p {
                weights[j * n + l] = (cur[j] - prev[j]) / dt;
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        let tail_weights = (basis == BasisKind::Trigonometric).then(|| {
            let amp = (2.0 / h).sqrt() * h;
            let g1 = |u: f64| amp * PI * (u / 2.0 - u * u / 2.0);
            let g2 = |u: f64| amp * PI * PI * (u * u * u / 3.0 - u * u / 2.0 + u / 6.0);
            let mut w1 = vec![0.0; n];
            let mut w2 = vec![0.0; n];
            for l in 0..n {
                let (ua, ub) = (l as f64 / n as f64, (l + 1) as f64 / n as f64);
                w1[l] = (g1(ub) - g1(ua)) / dt;
                w2[l] = (g2(ub) - g2(ua)) / dt;
            }
            [w1, w2]
        });
        Ok(Projector { basis, n, p, iv, weights, tail_weights })
    }

    fn check(&self, path: &WienerPath) -> Result<()> {
        if path.n != self.n || path.iv != self.iv {
            return Err(Error::InvalidArgument("path grid does not match the projector".into()));
        }
        Ok(())
    }

    /// `ζ_j^{(i)}` for `j ≤ p` and every component of `path`.
    pub fn project(&self, path: &WienerPath) -> Result<GaussianDraws> {
        self.check(path)?;
        let mut zeta = Vec::with_capacity(path.m * (self.p + 1));
        for i in 1..=path.m {
            let inc = path.component(i);
            for j in 0..=self.p {
                zeta.push(dot(&self.weights[j * self.n..(j + 1) * self.n], inc));
            }
        }
        GaussianDraws::from_parts(path.m, self.p, zeta, None)
    }

    /// `(∫ Σ_r φ_{2r−1}/r dw, ∫ Σ_r φ_{2r}/r² dw)` per component, trig only.
    pub fn tail_integrals(&self, path: &WienerPath) -> Result<Vec<(f64, f64)>> {
        self.check(path)?;
        let [w1, w2] = self
            .tail_weights
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("tail variables need the trigonometric basis".into()))?;
        Ok((1..=path.m)
            .map(|i| {
                let inc = path.component(i);
                (dot(w1, inc), dot(w2, inc))
            })
            .collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = [0.0; 4];
    let (ca, ra) = a.split_at(a.len() - a.len() % 4);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(4).zip(cb.chunks_exact(4)) {
        for t in 0..4 {
            s[t] += x[t] * y[t];
        }
    }
    let mut r = s[0] + s[1] + s[2] + s[3];
    for (x, y) in ra.iter().zip(rb) {
        r += x * y;
    }
    r
}

/// Tail variables for truncation `q` consistent with the projected `draws`.
pub fn coupled_tails(draws: &GaussianDraws, tail_integrals: &[(f64, f64)], q: usize) -> Result<Tails> {
    if draws.p() < 2 * q {
        return Err(Error::DrawsTooSmall { need: 2 * q, have: draws.p() });
    }
    let (sa, sb) = (alpha(q).sqrt(), beta(q).sqrt());
    let mut xi = Vec::with_capacity(draws.m());
    let mut mu = Vec::with_capacity(draws.m());
    for (i, &(g1, g2)) in tail_integrals.iter().enumerate() {
        let i = i + 1;
        let s1: f64 = (1..=q).map(|r| draws.zeta(i, 2 * r - 1) / r as f64).sum();
        let s2: f64 = (1..=q).map(|r| draws.zeta(i, 2 * r) / (r * r) as f64).sum();
        xi.push((g1 - s1) / sa);
        mu.push((g2 - s2) / sb);
    }
    Ok(Tails { xi, mu })
}

/// Projected draws for `path` (the free function form).
pub fn project_zeta(path: &WienerPath, basis: BasisKind, p: usize) -> Result<GaussianDraws> {
    Projector::new(basis, path.n, p, path.iv)?.project(path)
}

/// Conditional expectation of an iterated Itô integral given the grid increments.
#[derive(Debug, Clone)]
pub struct ItoOracle {
    indices: Vec<usize>,
    /// `blocks[m][g−1]`: terms of the within-cell factor for levels `m−g..m`.
    blocks: Vec<Vec<Vec<(f64, Vec<usize>)>>>,
    dt: f64,
}

impl ItoOracle {
    pub fn new(indices: &[usize], dt: f64) -> Self {
        let k = indices.len();
        let mut blocks = vec![Vec::new(); k + 1];
        for m in 1..=k {
            for g in 1..=m {
                let lv: Vec<usize> = (m - g..m).collect();
                let mut terms = Vec::new();
                for mt in matchings(g) {
                    if !mt.iter().all(|&(a, b)| indices[lv[a]] == indices[lv[b]] && indices[lv[a]] != 0) {
                        continue;
                    }
                    let mut coef = (-dt).powi(mt.len() as i32) / factorial(g) as f64;
                    let mut free = Vec::new();
                    for (pos, &l) in lv.iter().enumerate() {
                        if mt.iter().any(|&(a, b)| a == pos || b == pos) {
                            continue;
                        }
                        if indices[l] == 0 {
                            coef *= dt;
                        } else {
                            free.push(indices[l]);
                        }
                    }
                    terms.push((coef, free));
                }
                blocks[m].push(terms);
            }
        }
        ItoOracle { indices: indices.to_vec(), blocks, dt }
    }

    pub fn eval(&self, path: &WienerPath) -> Result<f64> {
        let k = self.indices.len();
        if let Some(&c) = self.indices.iter().max() {
            if c > path.m {
                return Err(Error::ChannelOutOfRange { need: c, have: path.m });
            }
        }
        if (path.step() - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::InvalidArgument("oracle built for another grid".into()));
        }
        let mut a = [0.0f64; 8];
        a[0] = 1.0;
        let mut x = vec![0.0f64; path.m + 1];
        let mut channels: Vec<usize> = self.indices.iter().copied().filter(|&c| c != 0).collect();
        channels.sort_unstable();
        channels.dedup();
        let n = path.n;
        for l in 0..n {
            for &c in &channels {
                x[c] = path.increments[(c - 1) * n + l];
            }
            for m in (1..=k).rev() {
                let mut add = 0.0;
                for g in 1..=m {
                    let mut b = 0.0;
                    for (coef, free) in &self.blocks[m][g - 1] {
                        let mut v = *coef;
                        for &c in free {
                            v *= x[c];
                        }
                        b += v;
                    }
                    add += a[m - g] * b;
                }
                a[m] += add;
            }
        }
        Ok(a[k])
    }
}

/// Stratonovich integral as a combination of Itô integrals: adjacent equal
/// nonzero pairs may collapse to a time step with weight ½ each.
pub fn strat_to_ito(indices: &[usize]) -> Vec<(f64, Vec<usize>)> {
    fn rec(idx: &[usize], w: f64, prefix: &mut Vec<usize>, out: &mut Vec<(f64, Vec<usize>)>) {
        if idx.is_empty() {
            out.push((w, prefix.clone()));
            return;
        }
        prefix.push(idx[0]);
        rec(&idx[1..], w, prefix, out);
        prefix.pop();
        if idx.len() >= 2 && idx[0] == idx[1] && idx[0] != 0 {
            prefix.push(0);
            rec(&idx[2..], 0.5 * w, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(indices, 1.0, &mut Vec::new(), &mut out);
    out
}

/// Reference value of `spec` on `path`.
#[derive(Debug, Clone)]
pub struct Oracle {
    parts: Vec<(f64, ItoOracle)>,
}

impl Oracle {
    pub fn new(spec: &IntegralSpec, dt: f64) -> Self {
        let parts = match spec.calculus {
            Calculus::Ito => vec![(1.0, ItoOracle::new(&spec.indices, dt))],
            Calculus::Stratonovich => strat_to_ito(&spec.indices)
                .into_iter()
                .map(|(w, idx)| (w, ItoOracle::new(&idx, dt)))
                .collect(),
        };
        Oracle { parts }
    }

    pub fn eval(&self, path: &WienerPath) -> Result<f64> {
        let mut s = 0.0;
        for (w, o) in &self.parts {
            s += w * o.eval(path)?;
        }
        Ok(s)
    }
}

/// Discretized reference value of `spec` on `path` (see [`Oracle`]).
pub fn discretized_integral(spec: &IntegralSpec, path: &WienerPath) -> Result<f64> {
    if spec.k() > 5 {
        return Err(Error::MultiplicityOutOfRange { k: spec.k() });
    }
    Oracle::new(spec, path.step()).eval(path)
}

/// Strict left-point sum over `l_1 < … < l_k`.
pub fn left_point_sum(indices: &[usize], path: &WienerPath) -> Result<f64> {
    let k = indices.len();
    if let Some(&c) = indices.iter().max() {
        if c > path.m {
            return Err(Error::ChannelOutOfRange { need: c, have: path.m });
        }
    }
    let dt = path.step();
    let mut a = vec![0.0; k + 1];
    a[0] = 1.0;
    for l in 0..path.n {
        for m in (1..=k).rev() {
            let c = indices[m - 1];
            let x = if c == 0 { dt } else { path.increments[(c - 1) * path.n + l] };
            a[m] += a[m - 1] * x;
        }
    }
    Ok(a[k])
}

/// Iterated integral along the piecewise-linear interpolation of `path` on
/// `n_coarse` equal cells.
pub fn piecewise_linear_integral(indices: &[usize], path: &WienerPath, n_coarse: usize) -> Result<f64> {
    if n_coarse == 0 || path.n % n_coarse != 0 {
        return Err(Error::Divisibility { n: path.n, n_coarse });
    }
    let coarse = path.coarsen(path.n / n_coarse)?;
    let k = indices.len();
    if let Some(&c) = indices.iter().max() {
        if c > path.m {
            return Err(Error::ChannelOutOfRange { need: c, have: path.m });
        }
    }
    let dt = coarse.step();
    let mut a = vec![0.0; k + 1];
    a[0] = 1.0;
    let mut x = vec![0.0; k];
    for l in 0..coarse.n {
        for m in 0..k {
            let c = indices[m];
            x[m] = if c == 0 { dt } else { coarse.increments[(c - 1) * coarse.n + l] };
        }
        for m in (1..=k).rev() {
            let mut add = 0.0;
            let mut prod = 1.0;
            for g in 1..=m {
                prod *= x[m - g];
                add += a[m - g] * prod / factorial(g) as f64;
            }
            a[m] += add;
        }
    }
    Ok(a[k])
}

/// `Σ_l Σ_{q<l} Δf_q^{(i_1)} Δf_l^{(i_2)} + ½ Σ_l Δf_l^{(i_1)} Δf_l^{(i_2)}` on `n_coarse` cells.
pub fn wong_zakai_piecewise_linear(path: &WienerPath, n_coarse: usize, i1: usize, i2: usize) -> Result<f64> {
    piecewise_linear_integral(&[i1, i2], path, n_coarse)
}

/// `Σ_{j_1,j_2 ≤ p} C_{j_2 j_1} ζ_{j_1}^{(i_1)} ζ_{j_2}^{(i_2)}`.
pub fn wong_zakai_series_double(
    draws: &GaussianDraws,
    p: usize,
    coeffs: &CoeffTensor,
    i1: usize,
    i2: usize,
    iv: Interval,
) -> Result<f64> {
    let spec = IntegralSpec::stratonovich(&[i1, i2], iv)?;
    ExpansionPlan::new(&spec, coeffs, &[p, p])?.eval(draws)
}

/// `Σ_{j≤p} (∫_t^τ φ_j) ζ_j^{(i)}`.
pub fn reconstruct_wiener(
    draws: &GaussianDraws,
    p: usize,
    tau: f64,
    basis: BasisKind,
    iv: Interval,
    i: usize,
) -> Result<f64> {
    if !(tau >= iv.start && tau <= iv.end) {
        return Err(Error::OutOfInterval { s: tau, start: iv.start, end: iv.end });
    }
    if i == 0 || i > draws.m() {
        return Err(Error::ChannelOutOfRange { need: i, have: draws.m() });
    }
    if p > draws.p() {
        return Err(Error::DrawsTooSmall { need: p, have: draws.p() });
    }
    Ok((0..=p).map(|j| antiderivative_unchecked(basis, j, tau, iv) * draws.zeta(i, j)).sum())
}

/// How the approximation under test is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Approx {
    /// Generic expansion with cube truncation: `p = q` for Legendre, `p = 2q` for trig.
    Expansion(BasisKind),
    /// Printed trigonometric formulas, with or without tail variables.
    TrigFormula { tails: bool },
    /// Legendre formula for `J*_(011)` with `ζ_j`, `j ≤ q + 2`.
    Legendre011,
}

impl Approx {
    pub fn basis(self) -> BasisKind {
        match self {
            Approx::Expansion(b) => b,
            Approx::TrigFormula { .. } => BasisKind::Trigonometric,
            Approx::Legendre011 => BasisKind::Legendre,
        }
    }

    /// Cube truncation used by [`Approx::Expansion`].
    pub fn cube(self, q: usize) -> usize {
        match self.basis() {
            BasisKind::Legendre => q,
            BasisKind::Trigonometric => 2 * q,
        }
    }
}

/// One (integral, approximation, truncation) triple of a coupled experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub spec: IntegralSpec,
    pub approx: Approx,
    pub q: usize,
}

enum Evaluator {
    Plan(ExpansionPlan),
    Trig { which: TrigIntegral, idx: Vec<usize>, tails: bool },
    Legendre011 { i1: usize, i2: usize },
}

/// Printed trigonometric formula matching `spec`, with its index arguments.
pub fn trig_family(spec: &IntegralSpec) -> Result<(TrigIntegral, Vec<usize>)> {
    let i = &spec.indices;
    let unsupported = || Error::PatternNotImplemented(format!("{:?} {:?} by trigonometric formulas", spec.calculus, i));
    Ok(match (spec.calculus, i.as_slice()) {
        (Calculus::Ito, [a]) if *a != 0 => (TrigIntegral::J1, vec![*a]),
        (Calculus::Ito, [0, a]) if *a != 0 => (TrigIntegral::J01, vec![*a]),
        (Calculus::Ito, [a, 0]) if *a != 0 => (TrigIntegral::J10, vec![*a]),
        (Calculus::Ito, [0, 0, a]) if *a != 0 => (TrigIntegral::J001, vec![*a]),
        (Calculus::Ito, [a, b]) if *a != 0 && *b != 0 => (TrigIntegral::J11, vec![*a, *b]),
        (Calculus::Ito, [a, b, c]) if *a != 0 && *b != 0 && *c != 0 => (TrigIntegral::J111, vec![*a, *b, *c]),
        (Calculus::Stratonovich, [0, a, b]) if *a != 0 && *b != 0 => (TrigIntegral::J011Strat, vec![*a, *b]),
        (Calculus::Stratonovich, [a, b, c]) => (TrigIntegral::J111Strat, vec![*a, *b, *c]),
        _ => return Err(unsupported()),
    })
}

/// Monte Carlo results for one [`Config`].
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub config: Config,
    pub report: ErrorReport,
}

/// Coupled Monte Carlo over shared paths: every config sees the same paths.
pub struct CoupledExperiment {
    configs: Vec<Config>,
    iv: Interval,
    n_grid: usize,
    m: usize,
}

impl CoupledExperiment {
    pub fn new(configs: Vec<Config>, n_grid: usize) -> Result<Self> {
        let first = configs.first().ok_or_else(|| Error::InvalidArgument("no configurations".into()))?;
        let iv = first.spec.iv;
        if configs.iter().any(|c| c.spec.iv != iv) {
            return Err(Error::InvalidArgument("all configurations must share one interval".into()));
        }
        if configs.iter().any(|c| c.spec.k() > 5) {
            return Err(Error::MultiplicityOutOfRange { k: 6 });
        }
        let m = configs.iter().flat_map(|c| c.spec.indices.iter().copied()).max().unwrap_or(0).max(1);
        Ok(CoupledExperiment { configs, iv, n_grid, m })
    }

    /// Mean of `(J_ref − J^q)²` over `n_samples` paths with streams `0..n_samples`.
    pub fn run(&self, n_samples: usize, seed: u64) -> Result<Vec<Estimate>> {
        let h = self.iv.len();
        let dt = h / self.n_grid as f64;
        let mut p_need: HashMap<BasisKind, usize> = HashMap::new();
        let mut evaluators = Vec::with_capacity(self.configs.len());
        let mut cache: HashMap<(BasisKind, usize, usize), CoeffTensor> = HashMap::new();
        for c in &self.configs {
            let basis = c.approx.basis();
            let (ev, need) = match c.approx {
                Approx::Expansion(b) => {
                    let p = c.approx.cube(c.q);
                    let k = c.spec.k();
                    let key = (b, k, p);
                    if !cache.contains_key(&key) {
                        cache.insert(key, crate::coeffs::coeff_table(b, k, &vec![p; k], self.iv)?);
                    }
                    let plan = ExpansionPlan::new(&c.spec, &cache[&key], &vec![p; k])?;
                    let need = plan.max_j();
                    (Evaluator::Plan(plan), need)
                }
                Approx::TrigFormula { tails } => {
                    let (which, idx) = trig_family(&c.spec)?;
                    (Evaluator::Trig { which, idx, tails }, which.max_j(c.q).max(2 * c.q))
                }
                Approx::Legendre011 => match (c.spec.calculus, c.spec.indices.as_slice()) {
                    (Calculus::Stratonovich, [0, a, b]) if *a != 0 && *b != 0 => {
                        (Evaluator::Legendre011 { i1: *a, i2: *b }, c.q + 2)
                    }
                    _ => {
                        return Err(Error::PatternNotImplemented(format!(
                            "Legendre formula for {:?}",
                            c.spec.indices
                        )))
                    }
                },
            };
            let e = p_need.entry(basis).or_insert(0);
            *e = (*e).max(need);
            evaluators.push(ev);
        }
        let mut projectors = Vec::new();
        for (&b, &p) in &p_need {
            projectors.push(Projector::new(b, self.n_grid, p, self.iv)?);
        }
        let mut oracle_keys: Vec<(Calculus, Vec<usize>)> = Vec::new();
        let mut oracle_of = Vec::with_capacity(self.configs.len());
        for c in &self.configs {
            let key = (c.spec.calculus, c.spec.indices.clone());
            let pos = oracle_keys.iter().position(|k| *k == key).unwrap_or_else(|| {
                oracle_keys.push(key.clone());
                oracle_keys.len() - 1
            });
            oracle_of.push(pos);
        }
        let oracles: Vec<Oracle> = oracle_keys
            .iter()
            .map(|(cal, idx)| Oracle::new(&IntegralSpec { indices: idx.clone(), calculus: *cal, iv: self.iv }, dt))
            .collect();

        let nc = self.configs.len();
        let mut sum = vec![Neumaier::default(); nc];
        let mut sum_sq = vec![Neumaier::default(); nc];
        let mut refs = vec![0.0; oracles.len()];
        for s in 0..n_samples {
            let path = simulate_path(self.m, self.n_grid, self.iv, seed, s as u64)?;
            let mut draws: HashMap<BasisKind, GaussianDraws> = HashMap::new();
            let mut tails_int = None;
            for pr in &projectors {
                draws.insert(pr.basis, pr.project(&path)?);
                if pr.basis == BasisKind::Trigonometric {
                    tails_int = Some(pr.tail_integrals(&path)?);
                }
            }
            for (r, o) in refs.iter_mut().zip(&oracles) {
                *r = o.eval(&path)?;
            }
            for (ci, (c, ev)) in self.configs.iter().zip(&evaluators).enumerate() {
                let d = &draws[&c.approx.basis()];
                let approx = match ev {
                    Evaluator::Plan(plan) => plan.eval_unchecked(d),
                    Evaluator::Trig { which, idx, tails } => {
                        if *tails {
                            let mut d = d.clone();
                            d.set_tails(Some(coupled_tails(&d, tails_int.as_ref().unwrap(), c.q)?));
                            milstein_trig_approx(&d, *which, idx, c.q, self.iv, true)?
                        } else {
                            milstein_trig_approx(d, *which, idx, c.q, self.iv, false)?
                        }
                    }
                    Evaluator::Legendre011 { i1, i2 } => legendre_011_approx(d, *i1, *i2, c.q, self.iv)?,
                };
                let e = (refs[oracle_of[ci]] - approx).powi(2);
                sum[ci].add(e);
                sum_sq[ci].add(e * e);
            }
        }
        let n = n_samples as f64;
        Ok(self
            .configs
            .iter()
            .enumerate()
            .map(|(ci, c)| {
                let mean = sum[ci].value() / n;
                let var = ((sum_sq[ci].value() / n - mean * mean) * n / (n - 1.0)).max(0.0);
                Estimate {
                    config: c.clone(),
                    report: ErrorReport {
                        value: mean,
                        kind: ErrorKind::MonteCarlo,
                        truncation: c.q,
                        std_error: Some((var / n).sqrt()),
                    },
                }
            })
            .collect())
    }
}

/// Coupled Monte Carlo estimate of `E[(J − J^q)²]` for one configuration.
pub fn estimate_ms_error(
    spec: &IntegralSpec,
    q: usize,
    approx: Approx,
    n_samples: usize,
    n_grid: usize,
    seed: u64,
) -> Result<ErrorReport> {
    let exp = CoupledExperiment::new(vec![Config { spec: spec.clone(), approx, q }], n_grid)?;
    Ok(exp.run(n_samples, seed)?.remove(0).report)
}

/// `|estimate − target| ≤ n_se · SE + floor`.
pub fn agrees(report: &ErrorReport, target: f64, n_se: f64, floor: f64) -> bool {
    let se = report.std_error.unwrap_or(0.0);
    (report.value - target).abs() <= n_se * se + floor
}
