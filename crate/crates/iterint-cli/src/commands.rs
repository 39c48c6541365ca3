use std::path::Path;

use serde_json::{json, Value};

use iterint::coeffs::db::{db_checksum, load_db, save_db};
use iterint::errors::{
    closed_form_error, exact_ms_error, min_truncation, ms_error_bound, ClosedForm, ErrorKind, Objective,
};
use iterint::mc_oracle::{
    agrees, trig_family, wong_zakai_piecewise_linear, wong_zakai_series_double, Approx, Config, CoupledExperiment,
    Oracle, Projector, simulate_path,
};
use iterint::sampler::{ito_approx, milstein_trig_approx, ExpansionPlan, SampleBatch};
use iterint::sde::{
    convergence_study, family_cost_comparison, FamilyKind, Gbm, LinearSystem, OrnsteinUhlenbeck, Reference, Scheme,
    SdeProblem, StudyConfig, Truncation,
};
use iterint::{coeff_table, BasisKind, Calculus, CoeffTensor, Error, IntegralSpec, Interval};

use crate::args::*;
use crate::report::{num, Report};
use crate::tables;

pub enum Failure {
    Lib(Error),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Io(_) => 4,
            Failure::Lib(e) => match e {
                Error::Io(_) | Error::CorruptHeader(_) | Error::VersionMismatch { .. } | Error::Checksum { .. } => 4,
                Error::InvalidArgument(_)
                | Error::UnknownFormula(_)
                | Error::InvalidInterval { .. }
                | Error::MultiplicityOutOfRange { .. }
                | Error::ChannelOutOfRange { .. }
                | Error::LadderTooShort(_)
                | Error::Divisibility { .. }
                | Error::GridTooCoarse { .. } => 2,
                _ => 3,
            },
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Lib(e) => e.to_string(),
            Failure::Io(e) => e.to_string(),
        }
    }
}

pub type Outcome = std::result::Result<Report, Failure>;

fn calculus(c: CalculusArg) -> Calculus {
    match c {
        CalculusArg::Ito => Calculus::Ito,
        CalculusArg::Strat => Calculus::Stratonovich,
    }
}

fn default_indices(indices: &[usize], k: usize) -> Vec<usize> {
    if indices.is_empty() {
        (1..=k).collect()
    } else {
        indices.to_vec()
    }
}

fn approx_for(basis: BasisArg) -> Approx {
    match basis {
        BasisArg::Legendre => Approx::Expansion(BasisKind::Legendre),
        BasisArg::Trig => Approx::Expansion(BasisKind::Trigonometric),
        BasisArg::TrigTails => Approx::TrigFormula { tails: true },
    }
}

/// Tensor for `(basis, k, p)` on `iv`, from the database when one is given.
fn tensor(basis: BasisKind, k: usize, p: usize, iv: Interval, db: Option<&Path>) -> Result<CoeffTensor, Failure> {
    if let Some(path) = db {
        let found = load_db(path)?
            .into_iter()
            .find(|t| t.basis() == basis && t.k() == k && t.p().iter().all(|&pp| pp >= p));
        if let Some(t) = found {
            return Ok(t.slice(&vec![p; k])?.rescaled(iv));
        }
        return Err(Error::InvalidArgument(format!("database has no {basis:?} tensor with k = {k} and p >= {p}")).into());
    }
    Ok(coeff_table(basis, k, &vec![p; k], iv)?)
}

pub fn tables_cmd(a: &TablesArgs) -> Outcome {
    let t = tables::table(a.which)?;
    let mut r = Report::new("tables", a, &["table", "row", t.key_name, "computed", "printed", "match"]);
    r.notes.push(t.title.to_string());
    for c in &t.cells {
        let ours = if c.ours.fract() == 0.0 && c.ours.abs() < 1e15 { json!(c.ours as i64) } else { num(c.ours) };
        r.row(vec![json!(t.which), json!(c.row), json!(c.key), ours, json!(c.printed), json!(c.pass)]);
    }
    if a.paper_check {
        for c in &t.cells {
            r.check(format!("table{} {} {}", t.which, c.row, c.key), c.pass, format!("computed {} printed {}", c.ours, c.printed));
        }
    }
    Ok(r)
}

pub fn coeffs_cmd(a: &CoeffsArgs) -> Outcome {
    let mut r = Report::new("coeffs", a, &["basis", "k", "p", "entries", "nonzero", "squared_sum", "index", "value", "exact"]);
    let tensors = if a.load {
        let path = a.db.as_deref().ok_or_else(|| Error::InvalidArgument("--load needs --db".into()))?;
        r.db_checksum = Some(db_checksum(path)?);
        load_db(path)?
    } else {
        let p = match a.q.len() {
            0 => return Err(Error::InvalidArgument("--q is required unless --load".into()).into()),
            1 => vec![a.q[0]; a.k],
            n if n == a.k => a.q.clone(),
            n => return Err(Error::InvalidArgument(format!("{n} truncations given for k = {}", a.k)).into()),
        };
        let t = coeff_table(a.basis.kind(), a.k, &p, Interval::of_length(a.dt)?)?;
        if let Some(path) = &a.db {
            r.db_checksum = Some(save_db(std::slice::from_ref(&t), path)?);
        }
        vec![t]
    };
    for t in &tensors {
        let basis = format!("{:?}", t.basis()).to_lowercase();
        let p: Vec<String> = t.p().iter().map(|v| v.to_string()).collect();
        r.row(vec![
            json!(basis),
            json!(t.k()),
            json!(p.join(" ")),
            json!(t.len()),
            json!(t.nonzero().len()),
            num(t.squared_sum()),
            Value::Null,
            Value::Null,
            Value::Null,
        ]);
        if a.entries {
            let mut j = vec![0; t.k()];
            for &flat in t.nonzero() {
                t.unflatten(flat, &mut j);
                let idx: Vec<String> = j.iter().map(|v| v.to_string()).collect();
                let exact = t.get_exact(&j).map(|e| json!(e.to_string())).unwrap_or(Value::Null);
                r.row(vec![
                    json!(basis),
                    json!(t.k()),
                    json!(p.join(" ")),
                    Value::Null,
                    Value::Null,
                    Value::Null,
                    json!(idx.join(" ")),
                    num(t.get(&j)),
                    exact,
                ]);
            }
        }
    }
    Ok(r)
}

fn kind_name(k: ErrorKind) -> &'static str {
    match k {
        ErrorKind::Exact => "exact",
        ErrorKind::ClosedForm => "closed-form",
        ErrorKind::UpperBound => "upper-bound",
        ErrorKind::MonteCarlo => "monte-carlo",
    }
}

pub fn error_cmd(a: &ErrorArgs) -> Outcome {
    let iv = Interval::of_length(a.dt)?;
    let mut r = Report::new("error", a, &["integral", "q", "p", "value", "relative", "kind"]);
    if let Some(id) = &a.formula {
        let f: ClosedForm = id.parse()?;
        for &q in &a.q {
            let e = closed_form_error(f, q, iv);
            r.row(vec![json!(f.id()), json!(q), Value::Null, num(e.value), Value::Null, json!(kind_name(e.kind))]);
        }
        return Ok(r);
    }
    let indices = match a.k {
        Some(k) if a.indices.is_empty() => (1..=k).collect(),
        Some(k) if a.indices.len() != k => {
            return Err(Error::InvalidArgument(format!("{} indices given for k = {k}", a.indices.len())).into())
        }
        None if a.indices.is_empty() => return Err(Error::InvalidArgument("give --k, --indices or --formula".into()).into()),
        _ => a.indices.clone(),
    };
    let spec = IntegralSpec::new(indices, calculus(a.calculus), iv)?;
    let basis = a.basis.kind();
    let approx = Approx::Expansion(basis);
    let p_max = a.q.iter().map(|&q| approx.cube(q)).max().unwrap_or(0);
    let full = tensor(basis, spec.k(), p_max, iv, a.db.as_deref())?;
    if let Some(db) = &a.db {
        r.db_checksum = Some(db_checksum(db)?);
    }
    let name: Vec<String> = spec.indices.iter().map(|v| v.to_string()).collect();
    let name = name.join(",");
    for &q in &a.q {
        let p = approx.cube(q);
        let t = full.slice(&vec![p; spec.k()])?;
        let e = exact_ms_error(&spec, p, &t)?;
        r.row(vec![json!(name), json!(q), json!(p), num(e.value), num(e.value / spec.i_k()), json!(kind_name(e.kind))]);
        if a.bound {
            let b = ms_error_bound(&spec, p, &t)?;
            r.row(vec![json!(name), json!(q), json!(p), num(b.value), num(b.value / spec.i_k()), json!(kind_name(b.kind))]);
        }
    }
    Ok(r)
}

fn minq_objective(a: &MinqArgs) -> Result<Objective, Failure> {
    if let Some(id) = &a.formula {
        return Ok(Objective::Closed(id.parse()?));
    }
    let f = match (a.basis, a.k) {
        (BasisArg::Legendre, 2) => ClosedForm::Legendre11,
        (BasisArg::Legendre, k) if (3..=6).contains(&k) => return Ok(Objective::LegendreExact { k }),
        (BasisArg::TrigTails, 2) => ClosedForm::Trig11,
        (BasisArg::TrigTails, 3) => ClosedForm::Trig111,
        (BasisArg::Trig, 2) => ClosedForm::Trig11NoTail,
        (BasisArg::Trig, 3) => ClosedForm::Trig111NoTail,
        (b, k) => return Err(Error::InvalidArgument(format!("no error formula for {b:?} with k = {k}")).into()),
    };
    Ok(Objective::Closed(f))
}

pub fn minq_cmd(a: &MinqArgs) -> Outcome {
    let obj = minq_objective(a)?;
    let dts: Vec<f64> = if a.dt.is_empty() { (5..=12).map(|e| 2f64.powi(-e)).collect() } else { a.dt.clone() };
    let mut r = Report::new("minq", a, &["dt", "gamma", "q"]);
    for dt in dts {
        let q = min_truncation(obj, a.gamma, Interval::of_length(dt)?)?;
        r.row(vec![num(dt), json!(a.gamma), json!(q)]);
    }
    Ok(r)
}

pub fn sample_cmd(a: &SampleArgs) -> Outcome {
    let iv = Interval::of_length(a.dt)?;
    let indices = default_indices(&a.indices, a.k);
    if indices.len() != a.k {
        return Err(Error::InvalidArgument(format!("{} indices given for k = {}", indices.len(), a.k)).into());
    }
    let spec = IntegralSpec::new(indices, calculus(a.calculus), iv)?;
    let m = spec.indices.iter().copied().max().unwrap_or(0).max(1);
    let q = a.q;
    let batch = match a.basis {
        BasisArg::TrigTails => {
            let (which, idx) = trig_family(&spec)?;
            let p = which.max_j(q).max(2 * q);
            SampleBatch::generate(spec.clone(), q, a.n, m, p, true, a.seed, |d| {
                milstein_trig_approx(d, which, &idx, q, iv, true)
            })?
        }
        b => {
            let p = approx_for(b).cube(q);
            let t = coeff_table(b.kind(), spec.k(), &vec![p; spec.k()], iv)?;
            let plan = ExpansionPlan::new(&spec, &t, &vec![p; spec.k()])?;
            SampleBatch::generate(spec.clone(), q, a.n, m, plan.max_j().max(p), false, a.seed, |d| plan.eval(d))?
        }
    };
    let mut r = Report::new("sample", a, &["sample", "value"]);
    r.seed = Some(a.seed);
    for (i, v) in batch.values.iter().enumerate() {
        r.row(vec![json!(i), num(*v)]);
    }
    if batch.values.len() > 1 {
        let (m2, se) = batch.second_moment();
        r.notes.push(format!("mean {:e}, second moment {:e} (SE {:e})", batch.mean(), m2, se));
    }
    Ok(r)
}

/// Formula value the coupled estimate is compared against.
fn mc_target(basis: BasisArg, spec: &IntegralSpec, q: usize) -> Result<(Approx, f64, &'static str), Failure> {
    let iv = spec.iv;
    let i = spec.indices.as_slice();
    let strat = spec.calculus == Calculus::Stratonovich;
    match basis {
        BasisArg::Legendre if strat => match i {
            [0, a, b] if *a != 0 && *b != 0 && a != b => {
                Ok((Approx::Legendre011, closed_form_error(ClosedForm::Legendre011Strat, q, iv).value, "closed-form"))
            }
            _ => Err(Error::CalculusNotSupported("Stratonovich target only for J*011 with distinct indices".into()).into()),
        },
        BasisArg::TrigTails => {
            let approx = Approx::TrigFormula { tails: true };
            let f = match (strat, i) {
                (false, [a, b]) if *a != 0 && a == b => return Ok((approx, 0.0, "exact")),
                (false, [a, b]) if *a != 0 && *b != 0 => ClosedForm::Trig11,
                (false, [a, b, c]) if *a != 0 && *b != 0 && *c != 0 && a != b && b != c && a != c => ClosedForm::Trig111,
                (true, [0, a, b]) if *a != 0 && *b != 0 && a != b => ClosedForm::Trig011Strat,
                _ => return Err(Error::PatternNotImplemented(format!("no closed-form target for {i:?}")).into()),
            };
            Ok((approx, closed_form_error(f, q, iv).value, "closed-form"))
        }
        b => {
            let approx = approx_for(b);
            let p = approx.cube(q);
            let t = coeff_table(b.kind(), spec.k(), &vec![p; spec.k()], iv)?;
            Ok((approx, exact_ms_error(spec, p, &t)?.value, "exact"))
        }
    }
}

pub fn verify_mc_cmd(a: &VerifyMcArgs) -> Outcome {
    let iv = Interval::of_length(a.dt)?;
    let indices = default_indices(&a.indices, a.k);
    let spec = IntegralSpec::new(indices, calculus(a.calculus), iv)?;
    verify_mc_spec(a, spec)
}

fn verify_mc_spec(a: &VerifyMcArgs, spec: IntegralSpec) -> Outcome {
    let mut configs = Vec::new();
    let mut targets = Vec::new();
    for &q in &a.q {
        let (approx, target, kind) = mc_target(a.basis, &spec, q)?;
        configs.push(Config { spec: spec.clone(), approx, q });
        targets.push((target, kind));
    }
    let est = CoupledExperiment::new(configs, a.n_grid)?.run(a.n_samples, a.seed)?;
    let mut r = Report::new("verify-mc", a, &["q", "estimate", "std_error", "target", "target_kind", "z", "pass"]);
    r.seed = Some(a.seed);
    let floor = 1e-10 * spec.i_k();
    for (e, (target, kind)) in est.iter().zip(targets) {
        let se = e.report.std_error.unwrap_or(0.0);
        let pass = agrees(&e.report, target, a.n_se, floor);
        let z = if se > 0.0 { (e.report.value - target) / se } else { 0.0 };
        r.row(vec![json!(e.config.q), num(e.report.value), num(se), num(target), json!(kind), num(z), json!(pass)]);
        r.check(format!("q={}", e.config.q), pass, format!("within {} SE (z = {z:.2})", a.n_se));
    }
    Ok(r)
}

pub fn wong_zakai_cmd(a: &WongZakaiArgs) -> Outcome {
    let [i1, i2] = a.indices[..] else {
        return Err(Error::InvalidArgument("--indices takes two channels".into()).into());
    };
    if i1 == 0 || i2 == 0 {
        return Err(Error::InvalidArgument("channels must be nonzero".into()).into());
    }
    let iv = Interval::of_length(a.dt)?;
    let h = iv.len();
    let m = i1.max(i2);
    let p_max = a.q.iter().copied().max().unwrap_or(0);
    let proj = Projector::new(BasisKind::Legendre, a.n_grid, p_max, iv)?;
    let t = coeff_table(BasisKind::Legendre, 2, &[p_max, p_max], iv)?;
    let strat = Oracle::new(&IntegralSpec::stratonovich(&[i1, i2], iv)?, h / a.n_grid as f64);
    let ito_spec = IntegralSpec::ito(&[i1, i2], iv)?;
    let expected = if i1 == i2 { h / 2.0 } else { 0.0 };
    let mut pl = vec![(0.0, 0.0); a.coarse.len()];
    let mut series = vec![(0.0, 0.0); a.q.len()];
    let mut identity_gap: f64 = 0.0;
    for s in 0..a.n_samples {
        let path = simulate_path(m, a.n_grid, iv, a.seed, s as u64)?;
        let reference = strat.eval(&path)?;
        for (acc, &nc) in pl.iter_mut().zip(&a.coarse) {
            let d = (wong_zakai_piecewise_linear(&path, nc, i1, i2)? - reference).powi(2);
            acc.0 += d;
            acc.1 += d * d;
        }
        let draws = proj.project(&path)?;
        for (acc, &q) in series.iter_mut().zip(&a.q) {
            let tq = t.slice(&[q, q])?;
            let sv = wong_zakai_series_double(&draws, q, &tq, i1, i2, iv)?;
            let iv_ito = ito_approx(&ito_spec, &draws, &tq, &[q, q])?;
            identity_gap = identity_gap.max((sv - iv_ito - expected).abs());
            let d = (sv - reference).powi(2);
            acc.0 += d;
            acc.1 += d * d;
        }
    }
    let n = a.n_samples as f64;
    let stats = |(s, s2): (f64, f64)| {
        let mean = s / n;
        let var = ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    };
    let mut r = Report::new("wong-zakai", a, &["approximation", "parameter", "ms_gap", "std_error"]);
    r.seed = Some(a.seed);
    let pl_stats: Vec<(f64, f64)> = pl.into_iter().map(stats).collect();
    let se_stats: Vec<(f64, f64)> = series.into_iter().map(stats).collect();
    for (&nc, (m, se)) in a.coarse.iter().zip(&pl_stats) {
        r.row(vec![json!("piecewise-linear"), json!(nc), num(*m), num(*se)]);
    }
    for (&q, (m, se)) in a.q.iter().zip(&se_stats) {
        r.row(vec![json!("legendre-series"), json!(q), num(*m), num(*se)]);
    }
    let tol = 1e-12 * h.max(1.0);
    r.check("series minus Ito expansion", identity_gap <= tol, format!("max deviation {identity_gap:e} from {expected}"));
    let decreasing = |v: &[(f64, f64)]| v.windows(2).all(|w| w[0].0 - w[1].0 > 3.0 * w[1].1.hypot(w[0].1));
    let gaps = |v: &[(f64, f64)]| format!("{:?}", v.iter().map(|s| s.0).collect::<Vec<_>>());
    if i1 == i2 {
        // both approximations are exact for equal channels
        let tiny = |v: &[(f64, f64)]| v.iter().all(|s| s.0 <= 1e-20 * h * h);
        r.check("piecewise-linear gap vanishes", tiny(&pl_stats), gaps(&pl_stats));
        r.check("series gap vanishes", tiny(&se_stats), gaps(&se_stats));
    } else {
        r.check("piecewise-linear gap decreasing", decreasing(&pl_stats), gaps(&pl_stats));
        r.check("series gap decreasing", decreasing(&se_stats), gaps(&se_stats));
    }
    Ok(r)
}

fn scheme(s: SchemeArg) -> Scheme {
    match s {
        SchemeArg::Euler => Scheme::Euler,
        SchemeArg::Milstein => Scheme::Milstein,
        SchemeArg::Taylor15 => Scheme::TaylorIto15,
    }
}

fn kind_text(k: FamilyKind) -> String {
    match k {
        FamilyKind::Legendre { q11, q111 } => format!("legendre q11={q11} q111={q111}"),
        FamilyKind::Trig { q, tails } => format!("trig q={q} tails={tails}"),
    }
}

pub fn sde_cmd(a: &SdeArgs) -> Outcome {
    let problem: Box<dyn SdeProblem> = match a.problem {
        ProblemArg::Gbm => Box::new(Gbm { mu: 0.5, sigma: 0.5, x0: 1.0 }),
        ProblemArg::Ou => Box::new(OrnsteinUhlenbeck { theta: 1.0, sigma: 0.5, x0: 1.0 }),
        ProblemArg::Linear2 => Box::new(LinearSystem::noncommutative()),
    };
    let has_exact = problem.exact(0.0, &vec![0.0; problem.noise_dim()]).is_some();
    let reference = match a.reference {
        Some(ReferenceArg::Exact) => Reference::Exact,
        Some(ReferenceArg::Half) => Reference::HalfStep,
        None if has_exact => Reference::Exact,
        None => Reference::HalfStep,
    };
    let truncation = match (a.basis, a.q.as_slice()) {
        (BasisArg::Legendre, []) => Truncation::MinimalLegendre,
        (BasisArg::TrigTails, []) => Truncation::MinimalTrig,
        (BasisArg::Trig, []) => return Err(Error::InvalidArgument("--basis trig needs --q".into()).into()),
        (BasisArg::Legendre, q) => Truncation::Fixed(FamilyKind::Legendre { q11: q[0], q111: *q.get(1).unwrap_or(&q[0]) }),
        (b, q) => Truncation::Fixed(FamilyKind::Trig { q: q[0], tails: b == BasisArg::TrigTails }),
    };
    let cfg = StudyConfig {
        scheme: scheme(a.scheme),
        truncation,
        steps: a.steps.clone(),
        horizon: a.horizon,
        n_paths: a.n_paths,
        seed: a.seed,
        reference,
        fine_factor: a.fine_factor,
    };
    let table = convergence_study(problem.as_ref(), &cfg)?;
    let mut r = Report::new("sde", a, &["dt", "strong_error", "std_error", "integrals"]);
    r.seed = Some(a.seed);
    for p in &table.points {
        r.row(vec![num(p.dt), num(p.error), num(p.std_error), json!(kind_text(p.kind))]);
    }
    r.notes.push(format!("fitted order {:.4}", table.order));
    if let Some(dt) = a.compare_cost {
        let c = family_cost_comparison(problem.noise_dim(), dt, 200, a.seed)?;
        r.notes.push(format!(
            "order-1.5 family at dt={dt}: {} took {:.3e}s, {} took {:.3e}s, ratio {:.3}",
            kind_text(c.legendre),
            c.legendre_seconds,
            kind_text(c.trig),
            c.trig_seconds,
            c.ratio()
        ));
        r.check("legendre cost <= trig cost", c.ratio() <= 1.0, format!("ratio {:.3}", c.ratio()));
    }
    Ok(r)
}
