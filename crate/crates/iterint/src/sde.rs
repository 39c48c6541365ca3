//! Strong one-step schemes for autonomous Itô systems `dX = a(X) dt + Σ_j b^j(X) dw^{(j)}`
//! driven by iterated-integral approximations, and a coupled convergence study.
//!
//! Noise coupling across a step ladder: every path holds Legendre coordinates
//! `ζ_0..ζ_{Q}` on each cell of a fine grid. A coarse step's Legendre
//! coordinates of degree `≤ Q` are exact linear combinations of the fine ones;
//! trigonometric coordinates are projected from them.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::basis::{phi_unchecked, BasisKind, Interval};
use crate::coeffs::{coeff_table, CoeffTensor};
use crate::errors::{min_truncation, ClosedForm, IntegralSpec, Objective};
use crate::mc_oracle::coupled_tails;
use crate::quadrature::gauss_legendre;
use crate::sampler::{milstein_trig_approx, trig_ito_111, ExpansionPlan, GaussianDraws, TrigIntegral};
use crate::{Error, Result};

/// An autonomous SDE with analytic derivatives.
///
/// Diffusion matrices are `n × m` row-major: `out[r·m + j] = b^{r j}`.
/// Jacobians: `drift_jacobian` fills `∂a_r/∂x_s` at `r·n + s`,
/// `diffusion_jacobian` fills `∂b^{r j}/∂x_s` at `(j·n + r)·n + s`.
pub trait SdeProblem {
    fn dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn initial(&self) -> Vec<f64>;
    fn drift(&self, x: &[f64], out: &mut [f64]);
    fn diffusion(&self, x: &[f64], out: &mut [f64]);

    fn drift_jacobian(&self, _x: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::MissingDerivative("drift Jacobian"))
    }

    fn diffusion_jacobian(&self, _x: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::MissingDerivative("diffusion Jacobian"))
    }

    /// `½ Σ_j Σ_{s,u} b^{s j} b^{u j} ∂_s ∂_u a`; zero for linear drifts.
    fn drift_second_order(&self, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }

    /// `½ Σ_{j'} Σ_{s,u} b^{s j'} b^{u j'} ∂_s ∂_u b^{· j}` as an `n × m` matrix; zero for linear diffusions.
    fn diffusion_second_order(&self, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }

    /// `Σ_{s,u} b^{s j_1} b^{u j_2} ∂_s ∂_u b^{· j_3}`; zero for linear diffusions.
    fn diffusion_mixed_second(&self, _x: &[f64], _j1: usize, _j2: usize, _j3: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Exact solution at time `t` given `w_t − w_0`, when known.
    fn exact(&self, _t: f64, _w: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Scalar geometric Brownian motion `dX = μX dt + σX dw`.
#[derive(Debug, Clone, Copy)]
pub struct Gbm {
    pub mu: f64,
    pub sigma: f64,
    pub x0: f64,
}

impl SdeProblem for Gbm {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn initial(&self) -> Vec<f64> {
        vec![self.x0]
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.mu * x[0];
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma * x[0];
    }
    fn drift_jacobian(&self, _x: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = self.mu;
        Ok(())
    }
    fn diffusion_jacobian(&self, _x: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = self.sigma;
        Ok(())
    }
    fn exact(&self, t: f64, w: &[f64]) -> Option<Vec<f64>> {
        Some(vec![self.x0 * ((self.mu - 0.5 * self.sigma * self.sigma) * t + self.sigma * w[0]).exp()])
    }
}

/// Linear system `dX = A X dt + Σ_j B_j X dw^{(j)}`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: Vec<f64>,
    pub b: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
}

impl LinearSystem {
    /// Two components, two noises with `B_1 B_2 ≠ B_2 B_1`.
    pub fn noncommutative() -> Self {
        LinearSystem {
            a: vec![-0.5, 0.2, 0.1, -0.4],
            b: vec![vec![0.4, 0.0, 0.3, 0.2], vec![0.1, 0.3, 0.0, 0.3]],
            x0: vec![1.0, 0.5],
        }
    }

    fn n(&self) -> usize {
        self.x0.len()
    }
}

fn matvec(m: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for r in 0..n {
        out[r] = (0..n).map(|s| m[r * n + s] * x[s]).sum();
    }
}

impl SdeProblem for LinearSystem {
    fn dim(&self) -> usize {
        self.n()
    }
    fn noise_dim(&self) -> usize {
        self.b.len()
    }
    fn initial(&self) -> Vec<f64> {
        self.x0.clone()
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        matvec(&self.a, x, out);
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        let (n, m) = (self.n(), self.b.len());
        let mut col = vec![0.0; n];
        for j in 0..m {
            matvec(&self.b[j], x, &mut col);
            for r in 0..n {
                out[r * m + j] = col[r];
            }
        }
    }
    fn drift_jacobian(&self, _x: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.a);
        Ok(())
    }
    fn diffusion_jacobian(&self, _x: &[f64], out: &mut [f64]) -> Result<()> {
        let n2 = self.n() * self.n();
        for (j, bj) in self.b.iter().enumerate() {
            out[j * n2..(j + 1) * n2].copy_from_slice(bj);
        }
        Ok(())
    }
}

/// Ornstein–Uhlenbeck `dX = −θ X dt + σ dw` (additive noise).
#[derive(Debug, Clone, Copy)]
pub struct OrnsteinUhlenbeck {
    pub theta: f64,
    pub sigma: f64,
    pub x0: f64,
}

impl SdeProblem for OrnsteinUhlenbeck {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn initial(&self) -> Vec<f64> {
        vec![self.x0]
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -self.theta * x[0];
    }
    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma;
    }
    fn drift_jacobian(&self, _x: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = -self.theta;
        Ok(())
    }
    fn diffusion_jacobian(&self, _x: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = 0.0;
        Ok(())
    }
}

/// Approximations of `J_(1)`, `J_(11)`, `J_(01)`, `J_(10)`, `J_(111)` on one step.
///
/// `j11[i1·m + i2]` is `J^{(i_1+1, i_2+1)}`; `j111` is indexed likewise.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralFamily {
    pub m: usize,
    pub dt: f64,
    pub j1: Vec<f64>,
    pub j11: Vec<f64>,
    pub j01: Vec<f64>,
    pub j10: Vec<f64>,
    pub j111: Vec<f64>,
}

impl IntegralFamily {
    pub fn zeros(m: usize, dt: f64) -> Self {
        IntegralFamily {
            m,
            dt,
            j1: vec![0.0; m],
            j11: vec![0.0; m * m],
            j01: vec![0.0; m],
            j10: vec![0.0; m],
            j111: vec![0.0; m * m * m],
        }
    }
}

/// Which family of approximations a scheme consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// Legendre expansions with independent truncations for `J_(11)` and `J_(111)`.
    Legendre { q11: usize, q111: usize },
    /// Trigonometric formulas with a shared `q`.
    Trig { q: usize, tails: bool },
}

impl FamilyKind {
    /// Largest basis index read per step.
    pub fn max_index(self, with_triple: bool) -> usize {
        match self {
            FamilyKind::Legendre { q11, q111 } => q11.max(if with_triple { q111 } else { 0 }).max(1),
            FamilyKind::Trig { q, .. } => {
                if with_triple {
                    4 * q
                } else {
                    2 * q
                }
            }
        }
    }

    pub fn basis(self) -> BasisKind {
        match self {
            FamilyKind::Legendre { .. } => BasisKind::Legendre,
            FamilyKind::Trig { .. } => BasisKind::Trigonometric,
        }
    }
}

/// Builds [`IntegralFamily`] values from per-step draws, with compiled plans
/// for the Legendre expansions.
pub struct FamilyBuilder {
    kind: FamilyKind,
    m: usize,
    dt: f64,
    with_triple: bool,
    plans11: Vec<ExpansionPlan>,
    plans111: Vec<ExpansionPlan>,
}

impl FamilyBuilder {
    pub fn new(kind: FamilyKind, m: usize, dt: f64, with_triple: bool) -> Result<Self> {
        let iv = Interval::of_length(dt)?;
        let mut plans11 = Vec::new();
        let mut plans111 = Vec::new();
        if let FamilyKind::Legendre { q11, q111 } = kind {
            let t2: CoeffTensor = coeff_table(BasisKind::Legendre, 2, &[q11, q11], iv)?;
            for a in 1..=m {
                for b in 1..=m {
                    plans11.push(ExpansionPlan::new(&IntegralSpec::ito(&[a, b], iv)?, &t2, &[q11, q11])?);
                }
            }
            if with_triple {
                let t3 = coeff_table(BasisKind::Legendre, 3, &[q111; 3], iv)?;
                for a in 1..=m {
                    for b in 1..=m {
                        for c in 1..=m {
                            let spec = IntegralSpec::ito(&[a, b, c], iv)?;
                            plans111.push(ExpansionPlan::new(&spec, &t3, &[q111; 3])?);
                        }
                    }
                }
            }
        }
        Ok(FamilyBuilder { kind, m, dt, with_triple, plans11, plans111 })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn build(&self, draws: &GaussianDraws) -> Result<IntegralFamily> {
        let m = self.m;
        let dt = self.dt;
        let iv = Interval::of_length(dt)?;
        let mut f = IntegralFamily::zeros(m, dt);
        let h32 = dt.powf(1.5);
        match self.kind {
            FamilyKind::Legendre { .. } => {
                let s3 = 3f64.sqrt();
                for i in 1..=m {
                    let (z0, z1) = (draws.zeta(i, 0), draws.zeta(i, 1));
                    f.j1[i - 1] = dt.sqrt() * z0;
                    f.j01[i - 1] = h32 / 2.0 * (z0 + z1 / s3);
                    f.j10[i - 1] = h32 / 2.0 * (z0 - z1 / s3);
                }
                for (v, plan) in f.j11.iter_mut().zip(&self.plans11) {
                    *v = plan.eval(draws)?;
                }
                for (v, plan) in f.j111.iter_mut().zip(&self.plans111) {
                    *v = plan.eval(draws)?;
                }
            }
            FamilyKind::Trig { q, tails } => {
                for i in 1..=m {
                    f.j1[i - 1] = milstein_trig_approx(draws, TrigIntegral::J1, &[i], q, iv, tails)?;
                    f.j01[i - 1] = milstein_trig_approx(draws, TrigIntegral::J01, &[i], q, iv, tails)?;
                    f.j10[i - 1] = milstein_trig_approx(draws, TrigIntegral::J10, &[i], q, iv, tails)?;
                    for k in 1..=m {
                        f.j11[(i - 1) * m + k - 1] =
                            milstein_trig_approx(draws, TrigIntegral::J11, &[i, k], q, iv, tails)?;
                    }
                }
                if self.with_triple {
                    for a in 1..=m {
                        for b in 1..=m {
                            for c in 1..=m {
                                f.j111[((a - 1) * m + b - 1) * m + c - 1] = trig_ito_111(draws, [a, b, c], q, iv, tails)?;
                            }
                        }
                    }
                }
            }
        }
        Ok(f)
    }
}

/// Numerical scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    Milstein,
    TaylorIto15,
}

impl Scheme {
    pub fn uses_triple(self) -> bool {
        self == Scheme::TaylorIto15
    }
}

struct Work {
    a: Vec<f64>,
    b: Vec<f64>,
    ja: Vec<f64>,
    jb: Vec<f64>,
}

impl Work {
    fn new(n: usize, m: usize) -> Self {
        Work { a: vec![0.0; n], b: vec![0.0; n * m], ja: vec![0.0; n * n], jb: vec![0.0; m * n * n] }
    }
}

/// `(L^{j1} b^{j2})_r = Σ_s b^{s j1} ∂_s b^{r j2}`.
fn l_b(w: &Work, n: usize, m: usize, j1: usize, j2: usize, out: &mut [f64]) {
    for r in 0..n {
        out[r] = (0..n).map(|s| w.b[s * m + j1] * w.jb[(j2 * n + r) * n + s]).sum();
    }
}

fn step_impl<P: SdeProblem + ?Sized>(p: &P, scheme: Scheme, x: &[f64], fam: &IntegralFamily) -> Result<Vec<f64>> {
    let n = p.dim();
    let m = p.noise_dim();
    if fam.m != m {
        return Err(Error::InvalidArgument(format!("family has {} noises, problem {m}", fam.m)));
    }
    let dt = fam.dt;
    let mut w = Work::new(n, m);
    p.drift(x, &mut w.a);
    p.diffusion(x, &mut w.b);
    let mut y: Vec<f64> = (0..n)
        .map(|r| x[r] + w.a[r] * dt + (0..m).map(|j| w.b[r * m + j] * fam.j1[j]).sum::<f64>())
        .collect();
    if scheme == Scheme::Euler {
        return Ok(y);
    }
    p.diffusion_jacobian(x, &mut w.jb)?;
    let mut tmp = vec![0.0; n];
    let mut lbs = vec![0.0; m * m * n];
    for j1 in 0..m {
        for j2 in 0..m {
            l_b(&w, n, m, j1, j2, &mut tmp);
            lbs[(j1 * m + j2) * n..(j1 * m + j2 + 1) * n].copy_from_slice(&tmp);
            let jj = fam.j11[j1 * m + j2];
            for r in 0..n {
                y[r] += tmp[r] * jj;
            }
        }
    }
    if scheme == Scheme::Milstein {
        return Ok(y);
    }
    p.drift_jacobian(x, &mut w.ja)?;
    // L^j a · J_(10)
    for j in 0..m {
        for r in 0..n {
            let la: f64 = (0..n).map(|s| w.b[s * m + j] * w.ja[r * n + s]).sum();
            y[r] += la * fam.j10[j];
        }
    }
    // L^0 b^j · J_(01)
    let mut b2 = vec![0.0; n * m];
    p.diffusion_second_order(x, &mut b2);
    for j in 0..m {
        for r in 0..n {
            let l0b: f64 = (0..n).map(|s| w.a[s] * w.jb[(j * n + r) * n + s]).sum::<f64>() + b2[r * m + j];
            y[r] += l0b * fam.j01[j];
        }
    }
    // ½ L^0 a Δ²
    let mut a2 = vec![0.0; n];
    p.drift_second_order(x, &mut a2);
    for r in 0..n {
        let l0a: f64 = (0..n).map(|s| w.a[s] * w.ja[r * n + s]).sum::<f64>() + a2[r];
        y[r] += 0.5 * l0a * dt * dt;
    }
    // L^{j1} L^{j2} b^{j3} · J_(111)
    let mut mixed = vec![0.0; n];
    for j1 in 0..m {
        for j2 in 0..m {
            let lb = &lbs[(j1 * m + j2) * n..(j1 * m + j2 + 1) * n];
            for j3 in 0..m {
                let jjj = fam.j111[(j1 * m + j2) * m + j3];
                p.diffusion_mixed_second(x, j1, j2, j3, &mut mixed);
                for r in 0..n {
                    let v: f64 = (0..n).map(|u| lb[u] * w.jb[(j3 * n + r) * n + u]).sum::<f64>() + mixed[r];
                    y[r] += v * jjj;
                }
            }
        }
    }
    Ok(y)
}

/// One scheme step from a prepared integral family.
pub fn scheme_step<P: SdeProblem + ?Sized>(p: &P, scheme: Scheme, x: &[f64], fam: &IntegralFamily) -> Result<Vec<f64>> {
    step_impl(p, scheme, x, fam)
}

/// Milstein step on `iv` with `J_(11)` truncated at `q` (trigonometric: shared `q` with tails).
pub fn milstein_step<P: SdeProblem + ?Sized>(
    p: &P,
    x: &[f64],
    iv: Interval,
    draws: &GaussianDraws,
    q: usize,
    basis: BasisKind,
) -> Result<Vec<f64>> {
    let kind = match basis {
        BasisKind::Legendre => FamilyKind::Legendre { q11: q, q111: 0 },
        BasisKind::Trigonometric => FamilyKind::Trig { q, tails: draws.tails().is_some() },
    };
    let fam = FamilyBuilder::new(kind, p.noise_dim(), iv.len(), false)?.build(draws)?;
    step_impl(p, Scheme::Milstein, x, &fam)
}

/// Order-1.5 step on `iv`; `q = (q11, q111)`, the trigonometric path uses `q11` for all.
pub fn taylor_ito_15_step<P: SdeProblem + ?Sized>(
    p: &P,
    x: &[f64],
    iv: Interval,
    draws: &GaussianDraws,
    q: (usize, usize),
    basis: BasisKind,
) -> Result<Vec<f64>> {
    let kind = match basis {
        BasisKind::Legendre => FamilyKind::Legendre { q11: q.0, q111: q.1 },
        BasisKind::Trigonometric => FamilyKind::Trig { q: q.0, tails: draws.tails().is_some() },
    };
    let fam = FamilyBuilder::new(kind, p.noise_dim(), iv.len(), true)?.build(draws)?;
    step_impl(p, Scheme::TaylorIto15, x, &fam)
}

/// Per-path Legendre coordinates on a fine grid.
#[derive(Debug, Clone)]
pub struct FineNoise {
    pub iv: Interval,
    pub n: usize,
    pub m: usize,
    pub q: usize,
    /// `coords[(l·m + i−1)·(q+1) + j]`.
    coords: Vec<f64>,
}

impl FineNoise {
    pub fn simulate(m: usize, n: usize, q: usize, iv: Interval, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let coords = (0..n * m * (q + 1)).map(|_| rng.sample(StandardNormal)).collect();
        FineNoise { iv, n, m, q, coords }
    }

    pub fn coord(&self, l: usize, i: usize, j: usize) -> f64 {
        self.coords[(l * self.m + i - 1) * (self.q + 1) + j]
    }

    /// `w_T − w_t` per component.
    pub fn terminal(&self) -> Vec<f64> {
        let sd = (self.iv.len() / self.n as f64).sqrt();
        (1..=self.m).map(|i| (0..self.n).map(|l| sd * self.coord(l, i, 0)).sum()).collect()
    }
}

/// Maps fine-cell Legendre coordinates to the coordinates of one coarse step.
#[derive(Debug, Clone)]
pub struct Reexpander {
    pub basis: BasisKind,
    pub ratio: usize,
    pub p: usize,
    pub qf: usize,
    /// `[(j·ratio + c)·(qf+1) + i] = ∫_{cell c} φ^{coarse}_j φ^{fine,c}_i`.
    mat: Vec<f64>,
    /// Trig only: the same for `Σ_r φ_{2r−1}/r` and `Σ_r φ_{2r}/r²`.
    tails: Vec<f64>,
}

impl Reexpander {
    pub fn new(basis: BasisKind, ratio: usize, p: usize, qf: usize) -> Result<Self> {
        if basis == BasisKind::Legendre && p > qf {
            return Err(Error::DrawsTooSmall { need: p, have: qf });
        }
        let unit = Interval { start: 0.0, end: 1.0 };
        let npts = (p + qf) / 2 + if basis == BasisKind::Legendre { 2 } else { 24 };
        let (gx, gw) = gauss_legendre(npts);
        let width = 1.0 / ratio as f64;
        let mut mat = vec![0.0; (p + 1) * ratio * (qf + 1)];
        let mut tails = vec![0.0; 2 * ratio * (qf + 1)];
        let sq2 = 2f64.sqrt();
        for c in 0..ratio {
            let cell = Interval { start: c as f64 * width, end: (c + 1) as f64 * width };
            for (x, w) in gx.iter().zip(&gw) {
                let s = cell.start + 0.5 * width * (x + 1.0);
                let wt = 0.5 * width * w;
                let fine: Vec<f64> = (0..=qf).map(|i| phi_unchecked(BasisKind::Legendre, i, s, cell)).collect();
                for j in 0..=p {
                    let cj = phi_unchecked(basis, j, s, unit) * wt;
                    for i in 0..=qf {
                        mat[(j * ratio + c) * (qf + 1) + i] += cj * fine[i];
                    }
                }
                if basis == BasisKind::Trigonometric {
                    let g1 = sq2 * std::f64::consts::PI * (0.5 - s);
                    let g2 = sq2 * std::f64::consts::PI.powi(2) * (s * s - s + 1.0 / 6.0);
                    for i in 0..=qf {
                        tails[c * (qf + 1) + i] += g1 * wt * fine[i];
                        tails[(ratio + c) * (qf + 1) + i] += g2 * wt * fine[i];
                    }
                }
            }
        }
        if basis == BasisKind::Legendre {
            // exact zeros above the diagonal
            for j in 0..=p {
                for c in 0..ratio {
                    for i in j + 1..=qf {
                        mat[(j * ratio + c) * (qf + 1) + i] = 0.0;
                    }
                }
            }
        }
        Ok(Reexpander { basis, ratio, p, qf, mat, tails })
    }

    /// Draws for coarse step `step` (cells `step·ratio ..`).
    pub fn draws(&self, noise: &FineNoise, step: usize, with_tails: bool, q_tail: usize) -> Result<GaussianDraws> {
        if noise.q != self.qf {
            return Err(Error::InvalidArgument("fine noise order mismatch".into()));
        }
        let m = noise.m;
        let mut zeta = vec![0.0; m * (self.p + 1)];
        let base = step * self.ratio;
        let w = self.qf + 1;
        for i in 1..=m {
            for j in 0..=self.p {
                let mut s = 0.0;
                for c in 0..self.ratio {
                    let row = &self.mat[(j * self.ratio + c) * w..(j * self.ratio + c + 1) * w];
                    let off = ((base + c) * m + i - 1) * w;
                    let fine = &noise.coords[off..off + w];
                    let lim = if self.basis == BasisKind::Legendre { j.min(self.qf) + 1 } else { w };
                    for t in 0..lim {
                        s += row[t] * fine[t];
                    }
                }
                zeta[(i - 1) * (self.p + 1) + j] = s;
            }
        }
        let mut d = GaussianDraws::from_parts(m, self.p, zeta, None)?;
        if with_tails {
            if self.basis != BasisKind::Trigonometric {
                return Err(Error::InvalidArgument("tail variables need the trigonometric basis".into()));
            }
            let mut ints = Vec::with_capacity(m);
            for i in 1..=m {
                let (mut g1, mut g2) = (0.0, 0.0);
                for c in 0..self.ratio {
                    let off = ((base + c) * m + i - 1) * w;
                    let fine = &noise.coords[off..off + w];
                    for t in 0..w {
                        g1 += self.tails[c * w + t] * fine[t];
                        g2 += self.tails[(self.ratio + c) * w + t] * fine[t];
                    }
                }
                ints.push((g1, g2));
            }
            let tails = coupled_tails(&d, &ints, q_tail)?;
            d.set_tails(Some(tails));
        }
        Ok(d)
    }
}

/// Truncation rule per step size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    Fixed(FamilyKind),
    /// Minimal Legendre truncations: `J_(11)` error `≤ Δ^γ` and, for the
    /// order-1.5 scheme, `J_(111)` error `≤ Δ⁴`; Milstein uses `γ = 3`, order 1.5 `γ = 4`.
    MinimalLegendre,
    /// Minimal shared trigonometric `q` with tail variables.
    MinimalTrig,
}

impl Truncation {
    pub fn resolve(self, scheme: Scheme, dt: f64) -> Result<FamilyKind> {
        let iv = Interval::of_length(dt)?;
        Ok(match self {
            Truncation::Fixed(k) => k,
            Truncation::MinimalLegendre => match scheme {
                Scheme::TaylorIto15 => FamilyKind::Legendre {
                    q11: min_truncation(Objective::Closed(ClosedForm::Legendre11), 4, iv)?,
                    q111: min_truncation(Objective::LegendreExact { k: 3 }, 4, iv)?,
                },
                _ => FamilyKind::Legendre {
                    q11: min_truncation(Objective::Closed(ClosedForm::Legendre11), 3, iv)?,
                    q111: 0,
                },
            },
            Truncation::MinimalTrig => match scheme {
                Scheme::TaylorIto15 => FamilyKind::Trig {
                    q: min_truncation(Objective::Closed(ClosedForm::Trig11), 4, iv)?
                        .max(min_truncation(Objective::Closed(ClosedForm::Trig111), 4, iv)?),
                    tails: true,
                },
                _ => FamilyKind::Trig { q: min_truncation(Objective::Closed(ClosedForm::Trig11), 3, iv)?, tails: true },
            },
        })
    }
}

/// Reference for strong errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// The problem's exact solution from `w_T`.
    Exact,
    /// The same scheme with half the step size.
    HalfStep,
}

/// Convergence study setup. `steps` lists step counts over `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub scheme: Scheme,
    pub truncation: Truncation,
    pub steps: Vec<usize>,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub reference: Reference,
    /// Fine cells per step of the finest level used.
    pub fine_factor: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderPoint {
    pub dt: f64,
    pub error: f64,
    pub std_error: f64,
    pub kind: FamilyKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub points: Vec<LadderPoint>,
    /// Least-squares slope of `log₂ error` against `log₂ Δ`.
    pub order: f64,
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

struct Level {
    steps: usize,
    kind: FamilyKind,
    builder: FamilyBuilder,
    reexp: Reexpander,
}

fn run_level<P: SdeProblem + ?Sized>(p: &P, scheme: Scheme, lv: &Level, noise: &FineNoise) -> Result<Vec<f64>> {
    let mut x = p.initial();
    let (tails, q_tail) = match lv.kind {
        FamilyKind::Trig { q, tails } => (tails, q),
        _ => (false, 0),
    };
    for s in 0..lv.steps {
        let d = lv.reexp.draws(noise, s, tails, q_tail)?;
        let fam = lv.builder.build(&d)?;
        x = step_impl(p, scheme, &x, &fam)?;
    }
    Ok(x)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Strong `L¹` errors over a step ladder with common random numbers.
pub fn convergence_study<P: SdeProblem + ?Sized>(p: &P, cfg: &StudyConfig) -> Result<ConvergenceTable> {
    if cfg.steps.len() < 3 {
        return Err(Error::LadderTooShort(cfg.steps.len()));
    }
    if cfg.reference == Reference::Exact && p.exact(0.0, &vec![0.0; p.noise_dim()]).is_none() {
        return Err(Error::InvalidArgument("problem has no exact solution; use the half-step reference".into()));
    }
    let m = p.noise_dim();
    let mut all_steps: Vec<usize> = cfg.steps.clone();
    if cfg.reference == Reference::HalfStep {
        all_steps.extend(cfg.steps.iter().map(|s| 2 * s));
    }
    all_steps.sort_unstable();
    all_steps.dedup();
    let finest = *all_steps.last().unwrap();
    let n_fine = finest * cfg.fine_factor.max(1);
    let mut levels = Vec::with_capacity(all_steps.len());
    for &s in &all_steps {
        if n_fine % s != 0 {
            return Err(Error::Divisibility { n: n_fine, n_coarse: s });
        }
        let dt = cfg.horizon / s as f64;
        let kind = cfg.truncation.resolve(cfg.scheme, dt)?;
        let builder = FamilyBuilder::new(kind, m, dt, cfg.scheme.uses_triple())?;
        levels.push((s, dt, kind, builder));
    }
    let qf = levels.iter().map(|l| l.2.max_index(cfg.scheme.uses_triple())).max().unwrap_or(1).max(2);
    let levels: Vec<Level> = levels
        .into_iter()
        .map(|(steps, _dt, kind, builder)| {
            let p_need = kind.max_index(cfg.scheme.uses_triple());
            let reexp = Reexpander::new(kind.basis(), n_fine / steps, p_need, qf)?;
            Ok(Level { steps, kind, builder, reexp })
        })
        .collect::<Result<_>>()?;
    let iv = Interval::of_length(cfg.horizon)?;
    let pos = |s: usize| all_steps.iter().position(|&x| x == s).unwrap();
    let nl = cfg.steps.len();
    let mut sum = vec![0.0; nl];
    let mut sum_sq = vec![0.0; nl];
    for path in 0..cfg.n_paths {
        let noise = FineNoise::simulate(m, n_fine, qf, iv, cfg.seed, path as u64);
        let results: Vec<Vec<f64>> =
            levels.iter().map(|lv| run_level(p, cfg.scheme, lv, &noise)).collect::<Result<_>>()?;
        let exact = match cfg.reference {
            Reference::Exact => p.exact(cfg.horizon, &noise.terminal()),
            Reference::HalfStep => None,
        };
        for (li, &s) in cfg.steps.iter().enumerate() {
            let x = &results[pos(s)];
            let e = match &exact {
                Some(ex) => dist(x, ex),
                None => dist(x, &results[pos(2 * s)]),
            };
            sum[li] += e;
            sum_sq[li] += e * e;
        }
    }
    let n = cfg.n_paths as f64;
    let points: Vec<LadderPoint> = cfg
        .steps
        .iter()
        .enumerate()
        .map(|(li, &s)| {
            let mean = sum[li] / n;
            let var = ((sum_sq[li] / n - mean * mean) * n / (n - 1.0)).max(0.0);
            LadderPoint { dt: cfg.horizon / s as f64, error: mean, std_error: (var / n).sqrt(), kind: levels[pos(s)].kind }
        })
        .collect();
    let x: Vec<f64> = points.iter().map(|p| p.dt.log2()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.error.log2()).collect();
    Ok(ConvergenceTable { order: ls_slope(&x, &y), points })
}

/// Wall-clock cost of building integral families for `n_steps` steps of size `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub dt: f64,
    pub legendre: FamilyKind,
    pub trig: FamilyKind,
    pub legendre_seconds: f64,
    pub trig_seconds: f64,
}

impl CostReport {
    pub fn ratio(&self) -> f64 {
        self.legendre_seconds / self.trig_seconds
    }
}

/// Times the order-1.5 family at matched target errors for both bases.
pub fn family_cost_comparison(m: usize, dt: f64, n_steps: usize, seed: u64) -> Result<CostReport> {
    let legendre = Truncation::MinimalLegendre.resolve(Scheme::TaylorIto15, dt)?;
    let trig = Truncation::MinimalTrig.resolve(Scheme::TaylorIto15, dt)?;
    let time = |kind: FamilyKind| -> Result<f64> {
        let b = FamilyBuilder::new(kind, m, dt, true)?;
        let p = kind.max_index(true);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = Instant::now();
        let mut acc = 0.0;
        for _ in 0..n_steps {
            let d = crate::sampler::draw_with(&mut rng, m, p, matches!(kind, FamilyKind::Trig { .. }));
            acc += b.build(&d)?.j111[0];
        }
        std::hint::black_box(acc);
        Ok(start.elapsed().as_secs_f64())
    };
    Ok(CostReport { dt, legendre, trig, legendre_seconds: time(legendre)?, trig_seconds: time(trig)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_derivatives_reported() {
        struct NoJac;
        impl SdeProblem for NoJac {
            fn dim(&self) -> usize {
                1
            }
            fn noise_dim(&self) -> usize {
                1
            }
            fn initial(&self) -> Vec<f64> {
                vec![1.0]
            }
            fn drift(&self, x: &[f64], out: &mut [f64]) {
                out[0] = x[0];
            }
            fn diffusion(&self, x: &[f64], out: &mut [f64]) {
                out[0] = x[0];
            }
        }
        let fam = IntegralFamily::zeros(1, 0.1);
        assert!(scheme_step(&NoJac, Scheme::Euler, &[1.0], &fam).is_ok());
        assert!(matches!(scheme_step(&NoJac, Scheme::Milstein, &[1.0], &fam), Err(Error::MissingDerivative(_))));
    }

    #[test]
    fn ladder_needs_three_points() {
        let g = Gbm { mu: 0.5, sigma: 0.5, x0: 1.0 };
        let cfg = StudyConfig {
            scheme: Scheme::Milstein,
            truncation: Truncation::Fixed(FamilyKind::Legendre { q11: 1, q111: 1 }),
            steps: vec![8, 16],
            horizon: 1.0,
            n_paths: 2,
            seed: 0,
            reference: Reference::Exact,
            fine_factor: 1,
        };
        assert!(matches!(convergence_study(&g, &cfg), Err(Error::LadderTooShort(2))));
    }

    #[test]
    fn legendre_reexpansion_is_exact_on_polynomials() {
        let r = Reexpander::new(BasisKind::Legendre, 4, 3, 3).unwrap();
        // coarse φ_j restricted to a fine cell has unit total energy across cells
        for j in 0..=3 {
            let e: f64 = (0..4).flat_map(|c| (0..=3).map(move |i| (j, c, i))).map(|(j, c, i)| r.mat[(j * 4 + c) * 4 + i].powi(2)).sum();
            assert!((e - 1.0).abs() < 1e-12, "j={j} e={e}");
        }
    }
}
