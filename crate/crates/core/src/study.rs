//! Monte Carlo convergence studies.
//!
//! Mean-square studies couple all step sizes through one Wiener path per
//! sample, generated at the finest dyadic level and coarsened by summation.
//! Weak studies draw independent discrete increments per step. Samples are
//! independent work items that may run on a thread pool; results are always
//! reduced in sample-index order, so reports are bit-reproducible for a
//! given master seed regardless of the worker count.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::btree::{deterministic_order, predicted_sde_order};
use crate::driving::{gaussian_increments, generate_path, WeakOrder};
use crate::error::{Error, Result};
use crate::problems::{ScalarFn, SdeProblem};
use crate::solver::{integrate_endpoint, integrate_increments, integrate_weak_sample, StageSolveConfig, StepFailure};
use crate::tableau::ButcherTableau;

/// Errors at or below this are dropped before fitting an order.
pub const DEFAULT_ERROR_FLOOR: f64 = 1e-14;

/// Highest tree order used when reporting a method's deterministic order.
const ORDER_CHECK: usize = 8;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// Reference solution for mean-square errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Exact solution when the problem has one, finest level otherwise.
    Auto,
    Exact,
    /// Same method on the finest level of the same path.
    FinestLevel,
}

/// How `E g(Y_N)` is estimated in a weak study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeakEstimator {
    /// Sample mean of `g(Y_N)`.
    Plain,
    /// Sample mean of `g(Y_N) - g(X̂)` plus the exact expectation of
    /// `g(X̂)`, where `X̂ = exact(T, Σ ΔŴ)` is the exact solution driven by
    /// the same discrete increments. Requires an exact solution. Unbiased
    /// for `E g(Y_N)`, with variance of the order of the pathwise error.
    ExactSurrogate,
}

#[derive(Clone)]
pub struct WeakFunctional {
    pub name: String,
    pub func: ScalarFn,
}

impl std::fmt::Debug for WeakFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "WeakFunctional({})", self.name)
    }
}

impl WeakFunctional {
    pub fn new(name: impl Into<String>, func: ScalarFn) -> Self {
        Self {
            name: name.into(),
            func,
        }
    }

    /// `g(x) = x_1`.
    pub fn first_component() -> Self {
        Self::new("x1", Arc::new(|x: &[f64]| x[0]))
    }

    /// `g(x) = |x|²`.
    pub fn squared_norm() -> Self {
        Self::new("norm2", Arc::new(|x: &[f64]| x.iter().map(|v| v * v).sum()))
    }

    pub fn constant(c: f64) -> Self {
        Self::new("constant", Arc::new(move |_: &[f64]| c))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.func)(x)
    }
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub problem: SdeProblem,
    pub methods: Vec<ButcherTableau>,
    pub master_seed: u64,
    pub n_paths: usize,
    /// Level the Wiener paths are generated at (mean-square studies).
    pub finest_level: u32,
    /// Levels evaluated; step size `(T - t0) / 2^level`.
    pub levels: Vec<u32>,
    pub error_floor: f64,
    pub reference: Reference,
    pub weak_functional: Option<WeakFunctional>,
    pub weak_order: WeakOrder,
    /// Closed-form `E g(X(T))`; computed by quadrature when absent.
    pub weak_reference: Option<f64>,
    pub weak_estimator: WeakEstimator,
    pub solve: StageSolveConfig,
    /// Thread count; `None` uses the available parallelism.
    pub workers: Option<usize>,
}

impl StudyConfig {
    pub fn new(problem: SdeProblem, methods: Vec<ButcherTableau>) -> Self {
        Self {
            problem,
            methods,
            master_seed: 0,
            n_paths: 1000,
            finest_level: 9,
            levels: (4..=9).collect(),
            error_floor: DEFAULT_ERROR_FLOOR,
            reference: Reference::Auto,
            weak_functional: None,
            weak_order: WeakOrder::Two,
            weak_reference: None,
            weak_estimator: WeakEstimator::Plain,
            solve: StageSolveConfig::default(),
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_paths == 0 {
            return bad("number of paths must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods given".into());
        }
        if self.levels.is_empty() {
            return bad("no levels given".into());
        }
        if self.finest_level > crate::driving::MAX_LEVELS {
            return bad(format!("finest level {} exceeds {}", self.finest_level, crate::driving::MAX_LEVELS));
        }
        if let Some(l) = self.levels.iter().find(|&&l| l > self.finest_level) {
            return bad(format!("level {l} is finer than the finest level {}", self.finest_level));
        }
        if !(self.error_floor > 0.0) {
            return bad("error floor must be positive".into());
        }
        if self.workers == Some(0) {
            return bad("worker count must be at least 1".into());
        }
        self.solve.validate()
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.workers {
            builder = builder.num_threads(n);
        }
        builder
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))
    }

    fn resolved_reference(&self) -> Result<Reference> {
        match (self.reference, self.problem.has_exact()) {
            (Reference::Auto, true) => Ok(Reference::Exact),
            (Reference::Auto, false) => Ok(Reference::FinestLevel),
            (Reference::Exact, false) => Err(Error::InvalidConfig(format!(
                "problem {} has no exact solution",
                self.problem.name()
            ))),
            (r, _) => Ok(r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    MeanSquare,
    Weak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub method: String,
    pub stages: usize,
    pub h: f64,
    pub level: u32,
    /// Root-mean-square error (mean-square study) or `|E g(Y) - E g(X)|`
    /// (weak study). `NaN` when no sample succeeded.
    pub error: f64,
    /// Mean absolute error; mean-square studies only.
    pub mae: Option<f64>,
    pub stderr: f64,
    /// Estimate of `E g(Y_N)`; weak studies only.
    pub estimate: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
}

impl ConvergenceRow {
    pub fn is_valid(&self) -> bool {
        self.n_ok > 0 && self.error.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitOutcome {
    Slope(f64),
    NotEnoughData { usable: usize },
}

impl FitOutcome {
    pub fn slope(&self) -> Option<f64> {
        match self {
            FitOutcome::Slope(s) => Some(*s),
            FitOutcome::NotEnoughData { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub stages: usize,
    pub deterministic_order: usize,
    pub predicted_order: usize,
    pub fitted_order: FitOutcome,
    /// Slope of the mean absolute error; mean-square studies only.
    pub fitted_order_mae: Option<FitOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub kind: StudyKind,
    pub problem: String,
    pub params: Vec<(String, f64)>,
    pub master_seed: u64,
    pub n_paths: usize,
    pub finest_level: u32,
    pub levels: Vec<u32>,
    pub error_floor: f64,
    pub reference: String,
    pub weak_functional: Option<String>,
    pub weak_order: Option<u32>,
    pub weak_estimator: Option<WeakEstimator>,
    pub weak_reference: Option<f64>,
    pub rows: Vec<ConvergenceRow>,
    pub methods: Vec<MethodSummary>,
}

impl ConvergenceReport {
    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a ConvergenceRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn summary(&self, method: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn fitted_order(&self, method: &str) -> Option<f64> {
        self.summary(method).and_then(|m| m.fitted_order.slope())
    }

    /// CSV with columns `method,s,h,level,mse,mae,stderr,n_ok,n_failed`.
    /// `mse` holds the row's error; `mae` is empty for weak studies.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["method", "s", "h", "level", "mse", "mae", "stderr", "n_ok", "n_failed"])?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.stages.to_string(),
                r.h.to_string(),
                r.level.to_string(),
                r.error.to_string(),
                r.mae.map(|v| v.to_string()).unwrap_or_default(),
                r.stderr.to_string(),
                r.n_ok.to_string(),
                r.n_failed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Least-squares slope of `log(error)` against `log(h)` over the rows with
/// `error > floor`.
pub fn fit_order(rows: &[(f64, f64)], error_floor: f64) -> FitOutcome {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(h, e)| *h > 0.0 && e.is_finite() && *e > error_floor)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return FitOutcome::NotEnoughData { usable: pts.len() };
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return FitOutcome::NotEnoughData { usable: 1 };
    }
    FitOutcome::Slope(sxy / sxx)
}

/// Running mean and variance (Welford). Exact zero variance for constant
/// input.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    fn stderr(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

fn summarize_methods(cfg: &StudyConfig, rows: &[ConvergenceRow]) -> Result<Vec<MethodSummary>> {
    cfg.methods
        .iter()
        .map(|t| {
            let pd = deterministic_order(t, ORDER_CHECK)?.order;
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.method == t.name())
                .map(|r| (r.h, r.error))
                .collect();
            let mae: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.method == t.name())
                .filter_map(|r| r.mae.map(|e| (r.h, e)))
                .collect();
            Ok(MethodSummary {
                method: t.name().to_string(),
                stages: t.stages(),
                deterministic_order: pd,
                predicted_order: predicted_sde_order(pd),
                fitted_order: fit_order(&pts, cfg.error_floor),
                fitted_order_mae: (!mae.is_empty()).then(|| fit_order(&mae, cfg.error_floor)),
            })
        })
        .collect()
}

fn base_report(cfg: &StudyConfig, kind: StudyKind, reference: String) -> ConvergenceReport {
    ConvergenceReport {
        kind,
        problem: cfg.problem.name().to_string(),
        params: cfg.problem.params().to_vec(),
        master_seed: cfg.master_seed,
        n_paths: cfg.n_paths,
        finest_level: cfg.finest_level,
        levels: cfg.levels.clone(),
        error_floor: cfg.error_floor,
        reference,
        weak_functional: None,
        weak_order: None,
        weak_estimator: None,
        weak_reference: None,
        rows: Vec::new(),
        methods: Vec::new(),
    }
}

fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean-square and mean-absolute errors at `T` for every method and level.
pub fn mean_square_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let reference = cfg.resolved_reference()?;
    let problem = &cfg.problem;
    let spec = *problem.spec();
    let solve = cfg.solve.for_problem(problem);
    let n_methods = cfg.methods.len();
    let n_levels = cfg.levels.len();

    // errors[path][method * n_levels + level]; None marks a failed sample.
    let per_path = |index: usize| -> Result<Vec<Option<f64>>> {
        let path = generate_path(spec, cfg.finest_level, derive_seed(cfg.master_seed, index as u64))?;
        let exact = match reference {
            Reference::Exact => problem.exact(spec.t1, path.wiener_total()),
            _ => None,
        };
        let mut out = Vec::with_capacity(n_methods * n_levels);
        for tableau in &cfg.methods {
            let target = match &exact {
                Some(x) => Some(x.clone()),
                None => {
                    let incs = path.increments_at_level(cfg.finest_level)?;
                    integrate_endpoint(problem, tableau, &incs, &solve).ok()
                }
            };
            for &level in &cfg.levels {
                let err = match &target {
                    Some(x) => {
                        let incs = path.increments_at_level(level)?;
                        integrate_endpoint(problem, tableau, &incs, &solve)
                            .ok()
                            .map(|y| euclidean_distance(&y, x))
                    }
                    None => None,
                };
                out.push(err);
            }
        }
        Ok(out)
    };

    let results: Vec<Vec<Option<f64>>> = cfg.pool()?.install(|| {
        (0..cfg.n_paths)
            .into_par_iter()
            .map(per_path)
            .collect::<Result<Vec<_>>>()
    })?;

    let mut report = base_report(
        cfg,
        StudyKind::MeanSquare,
        match reference {
            Reference::Exact => "exact".into(),
            _ => format!("finest_level_{}", cfg.finest_level),
        },
    );
    for (m, tableau) in cfg.methods.iter().enumerate() {
        for (l, &level) in cfg.levels.iter().enumerate() {
            let mut sq = Moments::default();
            let mut abs = Moments::default();
            let mut failed = 0;
            for path in &results {
                match path[m * n_levels + l] {
                    Some(e) => {
                        sq.push(e * e);
                        abs.push(e);
                    }
                    None => failed += 1,
                }
            }
            let (error, mae, stderr) = if sq.n == 0 {
                (f64::NAN, None, f64::NAN)
            } else {
                let rms = sq.mean.sqrt();
                let se = if rms > 0.0 { sq.stderr() / (2.0 * rms) } else { 0.0 };
                (rms, Some(abs.mean), se)
            };
            report.rows.push(ConvergenceRow {
                method: tableau.name().to_string(),
                stages: tableau.stages(),
                h: spec.length() / (1u64 << level) as f64,
                level,
                error,
                mae,
                stderr,
                estimate: None,
                n_ok: sq.n,
                n_failed: failed,
            });
        }
    }
    report.methods = summarize_methods(cfg, &report.rows)?;
    Ok(report)
}

/// Nodes and weights of the `n`-point Gauss-Hermite rule for the standard
/// normal law (Golub-Welsch).
pub fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `E g(X(T))` for `W(T) - W(t0) ~ N(0, T - t0)`, by Gauss-Hermite
/// quadrature over the exact solution.
pub fn weak_reference_by_quadrature(problem: &SdeProblem, g: &WeakFunctional, nodes: usize) -> Result<f64> {
    let spec = problem.spec();
    if !problem.has_exact() {
        return Err(Error::InvalidConfig(format!(
            "problem {} has no exact solution; supply the weak reference",
            problem.name()
        )));
    }
    let scale = spec.length().sqrt();
    let (x, w) = gauss_hermite_normal(nodes);
    Ok(x.iter()
        .zip(&w)
        .map(|(z, wk)| wk * g.eval(&problem.exact(spec.t1, scale * z).unwrap()))
        .sum())
}

/// Law of `Σ_{i<n} ΔŴ_i / unit` on the integer lattice `-n..=n`, where
/// `unit` is `√h` (order 1) or `√(3h)` (order 2).
fn lattice_distribution(order: WeakOrder, n: usize) -> (f64, Vec<f64>) {
    let (unit, p_move, p_stay) = match order {
        WeakOrder::One => (1.0, 0.5, 0.0),
        WeakOrder::Two => (3f64.sqrt(), 1.0 / 6.0, 2.0 / 3.0),
    };
    let mut dist = vec![0.0; 2 * n + 1];
    dist[n] = 1.0;
    let mut next = vec![0.0; 2 * n + 1];
    for step in 0..n {
        next.iter_mut().for_each(|v| *v = 0.0);
        for k in (n - step)..=(n + step) {
            let p = dist[k];
            if p == 0.0 {
                continue;
            }
            next[k - 1] += p * p_move;
            next[k] += p * p_stay;
            next[k + 1] += p * p_move;
        }
        std::mem::swap(&mut dist, &mut next);
    }
    (unit, dist)
}

/// Exact `E g(exact(T, Σ ΔŴ))` for `n` discrete weak increments of size `h`.
fn discrete_surrogate_mean(problem: &SdeProblem, g: &WeakFunctional, order: WeakOrder, h: f64, n: usize) -> f64 {
    let (unit, dist) = lattice_distribution(order, n);
    let t1 = problem.spec().t1;
    dist.iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(k, p)| {
            let w = (k as f64 - n as f64) * unit * h.sqrt();
            p * g.eval(&problem.exact(t1, w).unwrap())
        })
        .sum()
}

/// Weak errors `|E g(Y_N) - E g(X(T))|` for every method and level.
pub fn weak_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let g = cfg
        .weak_functional
        .clone()
        .ok_or_else(|| Error::InvalidConfig("weak study needs a functional".into()))?;
    let problem = &cfg.problem;
    if cfg.weak_estimator == WeakEstimator::ExactSurrogate && !problem.has_exact() {
        return Err(Error::InvalidConfig("surrogate estimator needs an exact solution".into()));
    }
    let reference = match cfg.weak_reference {
        Some(r) => r,
        None => weak_reference_by_quadrature(problem, &g, 80)?,
    };
    let spec = *problem.spec();
    let solve = cfg.solve.for_problem(problem);
    let pool = cfg.pool()?;

    let mut report = base_report(cfg, StudyKind::Weak, format!("{reference}"));
    report.weak_functional = Some(g.name.clone());
    report.weak_order = Some(cfg.weak_order.value());
    report.weak_estimator = Some(cfg.weak_estimator);
    report.weak_reference = Some(reference);

    let mut rows_by_level = Vec::new();
    for &level in &cfg.levels {
        let n_steps = 1usize << level;
        let h = spec.length() / n_steps as f64;
        let stream = derive_seed(cfg.master_seed, 0x5745_414b ^ ((level as u64) << 32));
        let per_path = |index: usize| -> Vec<Option<f64>> {
            let seed = derive_seed(stream, index as u64);
            cfg.methods
                .iter()
                .map(|tableau| {
                    // Same increments for every method.
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let sample =
                        integrate_weak_sample(problem, tableau, h, n_steps, cfg.weak_order, &mut rng, &solve).ok()?;
                    let gy = g.eval(&sample.state);
                    let value = match cfg.weak_estimator {
                        WeakEstimator::Plain => gy,
                        WeakEstimator::ExactSurrogate => {
                            gy - g.eval(&problem.exact(spec.t1, sample.wiener_total).unwrap())
                        }
                    };
                    value.is_finite().then_some(value)
                })
                .collect()
        };
        let results: Vec<Vec<Option<f64>>> =
            pool.install(|| (0..cfg.n_paths).into_par_iter().map(per_path).collect());
        let offset = match cfg.weak_estimator {
            WeakEstimator::Plain => 0.0,
            WeakEstimator::ExactSurrogate => discrete_surrogate_mean(problem, &g, cfg.weak_order, h, n_steps),
        };
        rows_by_level.push((level, h, results, offset));
    }

    for (m, tableau) in cfg.methods.iter().enumerate() {
        for (level, h, results, offset) in &rows_by_level {
            let mut acc = Moments::default();
            let mut failed = 0;
            for path in results {
                match path[m] {
                    Some(v) => acc.push(v),
                    None => failed += 1,
                }
            }
            let (estimate, error, stderr) = if acc.n == 0 {
                (None, f64::NAN, f64::NAN)
            } else {
                let est = acc.mean + offset;
                (Some(est), (est - reference).abs(), acc.stderr())
            };
            report.rows.push(ConvergenceRow {
                method: tableau.name().to_string(),
                stages: tableau.stages(),
                h: *h,
                level: *level,
                error,
                mae: None,
                stderr,
                estimate,
                n_ok: acc.n,
                n_failed: failed,
            });
        }
    }
    report.methods = summarize_methods(cfg, &report.rows)?;
    Ok(report)
}

/// Invariant drift `I(Y_n) - I(Y_0)` along one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSeries {
    pub method: String,
    pub invariants: Vec<String>,
    pub times: Vec<f64>,
    /// `drift[k][n]` for invariant `k` at `times[n]`.
    pub drift: Vec<Vec<f64>>,
    /// Step index and message when the trajectory stopped early.
    pub failure: Option<(usize, String)>,
}

impl DriftSeries {
    /// `max_n |I_k(Y_n) - I_k(Y_0)|`.
    pub fn max_abs_drift(&self, invariant: usize) -> f64 {
        self.drift[invariant].iter().fold(0.0, |m, d| if d.is_nan() { f64::INFINITY } else { m.max(d.abs()) })
    }

    pub fn invariant_index(&self, name: &str) -> Option<usize> {
        self.invariants.iter().position(|n| n == name)
    }
}

/// One trajectory per method on a shared Wiener path with `horizon / h`
/// uniform steps, recording every invariant's drift.
pub fn invariant_drift_study(
    problem: &SdeProblem,
    methods: &[ButcherTableau],
    h: f64,
    horizon: f64,
    seed: u64,
    cfg: &StageSolveConfig,
) -> Result<Vec<DriftSeries>> {
    if problem.invariants().is_empty() {
        return Err(Error::InvalidConfig(format!("problem {} has no invariants", problem.name())));
    }
    if !(h > 0.0) || !(horizon > 0.0) {
        return Err(Error::InvalidConfig("step and horizon must be positive".into()));
    }
    let steps = (horizon / h).round();
    if steps < 1.0 || (steps * h - horizon).abs() > 1e-9 * horizon {
        return Err(Error::InvalidConfig(format!("horizon {horizon} is not a multiple of h = {h}")));
    }
    let steps = steps as usize;
    let spec = *problem.spec();
    let problem = problem.with_interval(spec.t0, spec.t0 + horizon)?;
    let increments: Vec<f64> = gaussian_increments(steps, h, seed)
        .into_iter()
        .map(|dw| spec.measure(h, dw))
        .collect();
    let invariants = problem.invariants();
    methods
        .iter()
        .map(|tableau| {
            let traj = integrate_increments(&problem, tableau, spec.t0, h, &increments, cfg)?;
            let drift = invariants
                .iter()
                .map(|inv| {
                    let start = inv.eval(&traj.states[0]);
                    traj.states.iter().map(|y| inv.eval(y) - start).collect()
                })
                .collect();
            Ok(DriftSeries {
                method: tableau.name().to_string(),
                invariants: invariants.iter().map(|i| i.name.clone()).collect(),
                times: traj.times.clone(),
                drift,
                failure: traj
                    .failure
                    .as_ref()
                    .map(|StepFailure { step, error }| (*step, error.to_string())),
            })
        })
        .collect()
}

/// CSV with columns `method,t,<invariant…>,status`. A failed series ends
/// with a `failed` row at the time of the failed step.
pub fn write_drift_csv<W: Write>(series: &[DriftSeries], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let names = series.first().map(|s| s.invariants.clone()).unwrap_or_default();
    let mut header = vec!["method".to_string(), "t".to_string()];
    header.extend(names.iter().cloned());
    header.push("status".into());
    w.write_record(&header)?;
    for s in series {
        for (n, t) in s.times.iter().enumerate() {
            let mut rec = vec![s.method.clone(), t.to_string()];
            rec.extend(s.drift.iter().map(|d| d[n].to_string()));
            rec.push("ok".into());
            w.write_record(&rec)?;
        }
        if let Some((step, _)) = &s.failure {
            let h = if s.times.len() > 1 { s.times[1] - s.times[0] } else { 0.0 };
            let t = s.times[0] + (*step + 1) as f64 * h;
            let mut rec = vec![s.method.clone(), t.to_string()];
            rec.extend(names.iter().map(|_| String::new()));
            rec.push("failed".into());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
