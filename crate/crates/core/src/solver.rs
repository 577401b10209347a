//! The stochastic Runge-Kutta step
//!
//! ```text
//! H_i     = Y_n + Δμ_n Σ_j a_ij f(H_j)
//! Y_{n+1} = Y_n + Δμ_n Σ_i b_i f(H_i)
//! ```
//!
//! and trajectory integration over dyadic, uniform or weak-increment grids.
//! Explicit tableaus use forward substitution; implicit ones solve the
//! stacked `s·d` stage system by Newton's method or fixed-point iteration.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::driving::{weak_wiener, DrivingPath, WeakOrder};
use crate::error::{Error, Result, SolveError};
use crate::problems::{JacobianFn, SdeProblem};
use crate::tableau::ButcherTableau;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageMethod {
    /// Newton on the stage residual. Uses the supplied Jacobian when there
    /// is one, central differences otherwise.
    NewtonFd,
    FixedPoint,
}

#[derive(Clone)]
pub struct StageSolveConfig {
    pub method: StageMethod,
    /// Residual tolerance, scaled by `1 + ‖y‖∞`.
    pub tol: f64,
    pub max_iter: usize,
    pub jacobian: Option<JacobianFn>,
}

impl Default for StageSolveConfig {
    fn default() -> Self {
        Self {
            method: StageMethod::NewtonFd,
            tol: 1e-12,
            max_iter: 50,
            jacobian: None,
        }
    }
}

impl std::fmt::Debug for StageSolveConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StageSolveConfig")
            .field("method", &self.method)
            .field("tol", &self.tol)
            .field("max_iter", &self.max_iter)
            .field("jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl StageSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("stage tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    /// Copy that falls back to the problem's analytic Jacobian.
    pub fn for_problem(&self, problem: &SdeProblem) -> Self {
        let mut cfg = self.clone();
        if cfg.jacobian.is_none() {
            cfg.jacobian = problem.jacobian().cloned();
        }
        cfg
    }
}

/// Reusable buffers for stepping one tableau on one dimension.
pub struct Stepper<'a> {
    tableau: &'a ButcherTableau,
    cfg: &'a StageSolveConfig,
    dim: usize,
    stages: Vec<f64>,
    derivs: Vec<f64>,
    residual: Vec<f64>,
    jac: Vec<f64>,
    probe: Vec<f64>,
    fplus: Vec<f64>,
    fminus: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(tableau: &'a ButcherTableau, dim: usize, cfg: &'a StageSolveConfig) -> Self {
        let sd = tableau.stages() * dim;
        Self {
            tableau,
            cfg,
            dim,
            stages: vec![0.0; sd],
            derivs: vec![0.0; sd],
            residual: vec![0.0; sd],
            jac: vec![0.0; sd * dim],
            probe: vec![0.0; dim],
            fplus: vec![0.0; dim],
            fminus: vec![0.0; dim],
        }
    }

    /// Advances `y` in place by one step with increment `dmu`. Returns the
    /// number of stage iterations (zero for explicit tableaus).
    pub fn step(&mut self, f: &dyn Fn(&[f64], &mut [f64]), y: &mut [f64], dmu: f64) -> Result<usize, SolveError> {
        if self.tableau.is_explicit() {
            self.explicit_stages(f, y, dmu);
            self.finish(y, dmu)?;
            Ok(0)
        } else {
            self.step_stage_solve(f, y, dmu)
        }
    }

    /// Like [`Stepper::step`] but always solves the full stage system, even
    /// for explicit tableaus.
    pub fn step_stage_solve(
        &mut self,
        f: &dyn Fn(&[f64], &mut [f64]),
        y: &mut [f64],
        dmu: f64,
    ) -> Result<usize, SolveError> {
        let iterations = match self.cfg.method {
            StageMethod::NewtonFd => self.newton(f, y, dmu)?,
            StageMethod::FixedPoint => self.fixed_point(f, y, dmu)?,
        };
        self.finish(y, dmu)?;
        Ok(iterations)
    }

    fn explicit_stages(&mut self, f: &dyn Fn(&[f64], &mut [f64]), y: &[f64], dmu: f64) {
        let d = self.dim;
        for i in 0..self.tableau.stages() {
            let (done, rest) = self.derivs.split_at_mut(i * d);
            let h = &mut self.stages[i * d..(i + 1) * d];
            h.copy_from_slice(y);
            for (j, a) in self.tableau.a_row(i)[..i].iter().enumerate() {
                if *a != 0.0 {
                    for (hk, kk) in h.iter_mut().zip(&done[j * d..(j + 1) * d]) {
                        *hk += dmu * a * kk;
                    }
                }
            }
            f(h, &mut rest[..d]);
        }
    }

    fn finish(&mut self, y: &mut [f64], dmu: f64) -> Result<(), SolveError> {
        let d = self.dim;
        for (i, b) in self.tableau.b().iter().enumerate() {
            if *b != 0.0 {
                for (yk, kk) in y.iter_mut().zip(&self.derivs[i * d..(i + 1) * d]) {
                    *yk += dmu * b * kk;
                }
            }
        }
        if y.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(SolveError::Blowup)
        }
    }

    /// Evaluates `f` at every stage and the residual
    /// `H_i - y - Δμ Σ_j a_ij f(H_j)`; returns its max norm.
    fn residual_norm(&mut self, f: &dyn Fn(&[f64], &mut [f64]), y: &[f64], dmu: f64) -> f64 {
        let d = self.dim;
        let s = self.tableau.stages();
        for i in 0..s {
            f(&self.stages[i * d..(i + 1) * d], &mut self.derivs[i * d..(i + 1) * d]);
        }
        let mut norm = 0.0f64;
        for i in 0..s {
            for (k, yk) in y.iter().enumerate() {
                let mut acc = 0.0;
                for (j, a) in self.tableau.a_row(i).iter().enumerate() {
                    acc += a * self.derivs[j * d + k];
                }
                let r = self.stages[i * d + k] - yk - dmu * acc;
                self.residual[i * d + k] = r;
                norm = if r.is_nan() { f64::NAN } else { norm.max(r.abs()) };
            }
        }
        norm
    }

    fn threshold(&self, y: &[f64]) -> f64 {
        self.cfg.tol * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }

    fn newton(&mut self, f: &dyn Fn(&[f64], &mut [f64]), y: &[f64], dmu: f64) -> Result<usize, SolveError> {
        let d = self.dim;
        let s = self.tableau.stages();
        let sd = s * d;
        let threshold = self.threshold(y);
        for i in 0..s {
            self.stages[i * d..(i + 1) * d].copy_from_slice(y);
        }
        let mut iterations = 0;
        loop {
            let norm = self.residual_norm(f, y, dmu);
            if !norm.is_finite() {
                return Err(SolveError::Blowup);
            }
            if norm <= threshold {
                return Ok(iterations);
            }
            if iterations == self.cfg.max_iter {
                return Err(SolveError::StageSolve {
                    iterations,
                    residual: norm,
                });
            }
            for j in 0..s {
                self.stage_jacobian(f, j);
            }
            let mut m = DMatrix::<f64>::identity(sd, sd);
            for i in 0..s {
                for j in 0..s {
                    let a = self.tableau.a(i, j);
                    if a == 0.0 {
                        continue;
                    }
                    for r in 0..d {
                        for c in 0..d {
                            m[(i * d + r, j * d + c)] -= dmu * a * self.jac[j * d * d + r * d + c];
                        }
                    }
                }
            }
            let rhs = DVector::from_iterator(sd, self.residual.iter().map(|r| -r));
            let delta = m
                .lu()
                .solve(&rhs)
                .ok_or(SolveError::SingularJacobian { residual: norm })?;
            for (h, dh) in self.stages.iter_mut().zip(delta.iter()) {
                *h += dh;
            }
            iterations += 1;
        }
    }

    /// Jacobian of `f` at stage `j`, written into its block of `self.jac`.
    fn stage_jacobian(&mut self, f: &dyn Fn(&[f64], &mut [f64]), j: usize) {
        let d = self.dim;
        let x = &self.stages[j * d..(j + 1) * d];
        let block = &mut self.jac[j * d * d..(j + 1) * d * d];
        if let Some(jac) = &self.cfg.jacobian {
            jac(x, block);
            return;
        }
        let root_eps = f64::EPSILON.sqrt();
        self.probe.copy_from_slice(x);
        for c in 0..d {
            let delta = root_eps * (1.0 + x[c].abs());
            self.probe[c] = x[c] + delta;
            f(&self.probe, &mut self.fplus);
            self.probe[c] = x[c] - delta;
            f(&self.probe, &mut self.fminus);
            self.probe[c] = x[c];
            for r in 0..d {
                block[r * d + c] = (self.fplus[r] - self.fminus[r]) / (2.0 * delta);
            }
        }
    }

    fn fixed_point(&mut self, f: &dyn Fn(&[f64], &mut [f64]), y: &[f64], dmu: f64) -> Result<usize, SolveError> {
        let d = self.dim;
        let s = self.tableau.stages();
        let threshold = self.threshold(y);
        for i in 0..s {
            self.stages[i * d..(i + 1) * d].copy_from_slice(y);
        }
        let mut iterations = 0;
        loop {
            let norm = self.residual_norm(f, y, dmu);
            if !norm.is_finite() {
                return Err(SolveError::Blowup);
            }
            if norm <= threshold {
                return Ok(iterations);
            }
            if iterations == self.cfg.max_iter {
                return Err(SolveError::StageSolve {
                    iterations,
                    residual: norm,
                });
            }
            for (h, r) in self.stages.iter_mut().zip(&self.residual) {
                *h -= r;
            }
            iterations += 1;
        }
    }
}

/// One step from `y` with increment `dmu`.
pub fn step(
    tableau: &ButcherTableau,
    f: &dyn Fn(&[f64], &mut [f64]),
    y: &[f64],
    dmu: f64,
    cfg: &StageSolveConfig,
) -> Result<Vec<f64>, SolveError> {
    let mut out = y.to_vec();
    Stepper::new(tableau, y.len(), cfg).step(f, &mut out, dmu)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepFailure {
    /// Zero-based index of the failed step.
    pub step: usize,
    pub error: SolveError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub dmu: Vec<f64>,
    /// Stage iterations per completed step.
    pub iterations: Vec<usize>,
    /// Set when integration stopped early; `states` then ends at the last
    /// successful step.
    pub failure: Option<StepFailure>,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn into_result(self) -> Result<Self> {
        match self.failure {
            Some(StepFailure { step, error }) => Err(Error::StepFailed { step, source: error }),
            None => Ok(self),
        }
    }

    /// CSV with columns `t,y1,…,yd`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let d = self.states.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|k| format!("y{k}")));
        w.write_record(&header)?;
        for (t, y) in self.times.iter().zip(&self.states) {
            let mut rec = vec![t.to_string()];
            rec.extend(y.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates over a uniform grid of step `h` starting at `t0`, one step
/// per entry of `increments`.
pub fn integrate_increments(
    problem: &SdeProblem,
    tableau: &ButcherTableau,
    t0: f64,
    h: f64,
    increments: &[f64],
    cfg: &StageSolveConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let cfg = cfg.for_problem(problem);
    let field = problem.field().clone();
    let f = move |x: &[f64], out: &mut [f64]| field(x, out);
    let mut stepper = Stepper::new(tableau, problem.dim(), &cfg);
    let n = increments.len();
    let mut traj = Trajectory {
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        dmu: Vec::with_capacity(n),
        iterations: Vec::with_capacity(n),
        failure: None,
    };
    let mut y = problem.x0().to_vec();
    traj.times.push(t0);
    traj.states.push(y.clone());
    for (k, &dmu) in increments.iter().enumerate() {
        match stepper.step(&f, &mut y, dmu) {
            Ok(it) => {
                traj.times.push(t0 + (k + 1) as f64 * h);
                traj.states.push(y.clone());
                traj.dmu.push(dmu);
                traj.iterations.push(it);
            }
            Err(error) => {
                traj.failure = Some(StepFailure { step: k, error });
                break;
            }
        }
    }
    Ok(traj)
}

/// Integrates `problem` along `path` on dyadic `level`.
pub fn integrate(
    problem: &SdeProblem,
    tableau: &ButcherTableau,
    path: &DrivingPath,
    level: u32,
    cfg: &StageSolveConfig,
) -> Result<Trajectory> {
    let increments = path.increments_at_level(level)?;
    integrate_increments(problem, tableau, path.spec().t0, path.step_size(level), &increments, cfg)
}

/// Final state only, for Monte Carlo loops that do not need the trajectory.
pub fn integrate_endpoint(
    problem: &SdeProblem,
    tableau: &ButcherTableau,
    increments: &[f64],
    cfg: &StageSolveConfig,
) -> Result<Vec<f64>, StepFailure> {
    let field = problem.field().clone();
    let f = move |x: &[f64], out: &mut [f64]| field(x, out);
    let mut stepper = Stepper::new(tableau, problem.dim(), cfg);
    let mut y = problem.x0().to_vec();
    for (step, &dmu) in increments.iter().enumerate() {
        stepper
            .step(&f, &mut y, dmu)
            .map_err(|error| StepFailure { step, error })?;
    }
    Ok(y)
}

/// Final state of a weak-increment run together with the accumulated
/// discrete Wiener value `Σ ΔŴ`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakSample {
    pub state: Vec<f64>,
    pub wiener_total: f64,
}

/// Runs `n_steps` steps of size `h` with independent weak increments drawn
/// from `rng`. `cfg` is used as given.
pub fn integrate_weak_sample<R: Rng + ?Sized>(
    problem: &SdeProblem,
    tableau: &ButcherTableau,
    h: f64,
    n_steps: usize,
    order: WeakOrder,
    rng: &mut R,
    cfg: &StageSolveConfig,
) -> Result<WeakSample, StepFailure> {
    let field = problem.field().clone();
    let f = move |x: &[f64], out: &mut [f64]| field(x, out);
    let mut stepper = Stepper::new(tableau, problem.dim(), cfg);
    let spec = problem.spec();
    let mut y = problem.x0().to_vec();
    let mut wiener_total = 0.0;
    for step in 0..n_steps {
        let dw = weak_wiener(order, h, rng);
        wiener_total += dw;
        stepper
            .step(&f, &mut y, spec.measure(h, dw))
            .map_err(|error| StepFailure { step, error })?;
    }
    Ok(WeakSample { state: y, wiener_total })
}

/// Final state of a weak-increment run.
pub fn integrate_weak<R: Rng + ?Sized>(
    problem: &SdeProblem,
    tableau: &ButcherTableau,
    h: f64,
    n_steps: usize,
    order: WeakOrder,
    rng: &mut R,
    cfg: &StageSolveConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let cfg = cfg.for_problem(problem);
    integrate_weak_sample(problem, tableau, h, n_steps, order, rng, &cfg)
        .map(|s| s.state)
        .map_err(|e| Error::StepFailed {
            step: e.step,
            source: e.error,
        })
}
