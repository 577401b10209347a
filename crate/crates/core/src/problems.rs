//! Single-integrand test problems `dX = λ f(X) dt + σ f(X) ∘ dW`.

use std::fmt;
use std::sync::Arc;

use crate::driving::DrivingSpec;
use crate::error::{Error, Result};

/// Integrand `f: R^d -> R^d`, written into the output slice.
pub type FieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Row-major `d x d` Jacobian of the integrand.
pub type JacobianFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Exact solution as a function of `(t, W(t) - W(t0))`.
pub type ExactFn = Arc<dyn Fn(f64, f64) -> Vec<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Invariant {
    pub name: String,
    pub func: ScalarFn,
}

impl Invariant {
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.func)(x)
    }
}

#[derive(Clone)]
pub struct SdeProblem {
    name: String,
    params: Vec<(String, f64)>,
    dim: usize,
    field: FieldFn,
    jacobian: Option<JacobianFn>,
    x0: Vec<f64>,
    spec: DrivingSpec,
    exact: Option<ExactFn>,
    invariants: Vec<Invariant>,
}

impl fmt::Debug for SdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeProblem")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("dim", &self.dim)
            .field("x0", &self.x0)
            .field("spec", &self.spec)
            .field("exact", &self.exact.is_some())
            .field("jacobian", &self.jacobian.is_some())
            .field("invariants", &self.invariants.iter().map(|i| &i.name).collect::<Vec<_>>())
            .finish()
    }
}

pub struct ProblemBuilder {
    problem: SdeProblem,
}

impl ProblemBuilder {
    pub fn param(mut self, name: impl Into<String>, value: f64) -> Self {
        self.problem.params.push((name.into(), value));
        self
    }

    pub fn jacobian(mut self, jacobian: JacobianFn) -> Self {
        self.problem.jacobian = Some(jacobian);
        self
    }

    pub fn exact(mut self, exact: ExactFn) -> Self {
        self.problem.exact = Some(exact);
        self
    }

    pub fn invariant(mut self, name: impl Into<String>, func: ScalarFn) -> Self {
        self.problem.invariants.push(Invariant {
            name: name.into(),
            func,
        });
        self
    }

    /// Checks that `f(x0)` and the invariants at `x0` are finite and that
    /// the exact solution starts at `x0`.
    pub fn build(self) -> Result<SdeProblem> {
        let p = self.problem;
        if p.x0.len() != p.dim || p.dim == 0 {
            return Err(Error::InvalidProblem(format!(
                "x0 has length {} but dim = {}",
                p.x0.len(),
                p.dim
            )));
        }
        let mut fx = vec![0.0; p.dim];
        (p.field)(&p.x0, &mut fx);
        if fx.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("f(x0) is not finite".into()));
        }
        if let Some(exact) = &p.exact {
            let start = exact(p.spec.t0, 0.0);
            let scale = 1.0 + p.x0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if start.len() != p.dim
                || start.iter().zip(&p.x0).any(|(a, b)| (a - b).abs() > 1e-12 * scale)
            {
                return Err(Error::InvalidProblem("exact(t0, 0) differs from x0".into()));
            }
        }
        for inv in &p.invariants {
            if !inv.eval(&p.x0).is_finite() {
                return Err(Error::InvalidProblem(format!("invariant {} is not finite at x0", inv.name)));
            }
        }
        Ok(p)
    }
}

impl SdeProblem {
    pub fn builder(
        name: impl Into<String>,
        dim: usize,
        field: FieldFn,
        x0: Vec<f64>,
        spec: DrivingSpec,
    ) -> ProblemBuilder {
        ProblemBuilder {
            problem: SdeProblem {
                name: name.into(),
                params: Vec::new(),
                dim,
                field,
                jacobian: None,
                x0,
                spec,
                exact: None,
                invariants: Vec::new(),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Named numeric parameters, echoed in study reports.
    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn spec(&self) -> &DrivingSpec {
        &self.spec
    }

    pub fn field(&self) -> &FieldFn {
        &self.field
    }

    pub fn jacobian(&self) -> Option<&JacobianFn> {
        self.jacobian.as_ref()
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.field)(x, out)
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn exact(&self, t: f64, w: f64) -> Option<Vec<f64>> {
        self.exact.as_ref().map(|e| e(t, w))
    }

    pub fn invariants(&self) -> &[Invariant] {
        &self.invariants
    }

    /// Same problem on a different interval.
    pub fn with_interval(&self, t0: f64, t1: f64) -> Result<Self> {
        let mut p = self.clone();
        p.spec = DrivingSpec::new(self.spec.lambda, self.spec.sigma, t0, t1)?;
        Ok(p)
    }
}

/// `dX = √(1+X²) dt + σ √(1+X²) ∘ dW`, `X(0) = 0`, on `[0, 1]`, with exact
/// solution `sinh(t + σW(t))`.
pub fn sinh_problem(sigma: f64) -> Result<SdeProblem> {
    let spec = DrivingSpec::new(1.0, sigma, 0.0, 1.0)?;
    SdeProblem::builder(
        "sinh",
        1,
        Arc::new(|x: &[f64], out: &mut [f64]| out[0] = (1.0 + x[0] * x[0]).sqrt()),
        vec![0.0],
        spec,
    )
    .param("sigma", sigma)
    .jacobian(Arc::new(|x: &[f64], out: &mut [f64]| {
        out[0] = x[0] / (1.0 + x[0] * x[0]).sqrt()
    }))
    .exact(Arc::new(move |t, w| vec![(t + sigma * w).sinh()]))
    .build()
}

/// Kubo oscillator `dX = a B X dt + σ B X ∘ dW` with `B` the rotation
/// generator, `X(0) = (1, 0)`, on `[0, 1]`. The drift scale `a` is carried
/// by the driving measure `μ(t) = a t + σW(t)`.
pub fn kubo_problem(a: f64, sigma: f64) -> Result<SdeProblem> {
    let spec = DrivingSpec::new(a, sigma, 0.0, 1.0)?;
    SdeProblem::builder(
        "kubo",
        2,
        Arc::new(|x: &[f64], out: &mut [f64]| {
            out[0] = -x[1];
            out[1] = x[0];
        }),
        vec![1.0, 0.0],
        spec,
    )
    .param("a", a)
    .param("sigma", sigma)
    .jacobian(Arc::new(|_: &[f64], out: &mut [f64]| {
        out.copy_from_slice(&[0.0, -1.0, 1.0, 0.0]);
    }))
    .exact(Arc::new(move |t, w| {
        let phase = a * t + sigma * w;
        vec![phase.cos(), phase.sin()]
    }))
    .invariant("I", Arc::new(|x: &[f64]| x[0] * x[0] + x[1] * x[1]))
    .build()
}

pub const RIGID_BODY_INERTIA: [f64; 3] = [2.0, 1.0, 2.0 / 3.0];

/// Stochastic rigid body `dX = A(X)X dt + σ A(X)X ∘ dW` with inertia
/// `(2, 1, 2/3)` and `X(0) = (cos 1.1, 0, sin 1.1)`, on `[0, 1]`.
/// Conserves the energy `H` and the Casimir `C = |X|²`.
pub fn rigid_body_problem(sigma: f64) -> Result<SdeProblem> {
    let [i1, i2, i3] = RIGID_BODY_INERTIA;
    let k1 = 1.0 / i3 - 1.0 / i2;
    let k2 = 1.0 / i1 - 1.0 / i3;
    let k3 = 1.0 / i2 - 1.0 / i1;
    let spec = DrivingSpec::new(1.0, sigma, 0.0, 1.0)?;
    SdeProblem::builder(
        "rigid_body",
        3,
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            out[0] = k1 * x[1] * x[2];
            out[1] = k2 * x[0] * x[2];
            out[2] = k3 * x[0] * x[1];
        }),
        vec![1.1f64.cos(), 0.0, 1.1f64.sin()],
        spec,
    )
    .param("sigma", sigma)
    .jacobian(Arc::new(move |x: &[f64], out: &mut [f64]| {
        out.copy_from_slice(&[
            0.0,
            k1 * x[2],
            k1 * x[1],
            k2 * x[2],
            0.0,
            k2 * x[0],
            k3 * x[1],
            k3 * x[0],
            0.0,
        ]);
    }))
    .invariant(
        "H",
        Arc::new(move |x: &[f64]| 0.5 * (x[0] * x[0] / i1 + x[1] * x[1] / i2 + x[2] * x[2] / i3)),
    )
    .invariant("C", Arc::new(|x: &[f64]| x[0] * x[0] + x[1] * x[1] + x[2] * x[2]))
    .build()
}

/// Builds the single-noise problem equivalent to
/// `dX = λ f(X) dt + Σ_i σ_i f(X) ∘ dW_i`.
#[allow(clippy::too_many_arguments)]
pub fn reduce_multinoise(
    name: impl Into<String>,
    dim: usize,
    field: FieldFn,
    x0: Vec<f64>,
    lambda: f64,
    sigmas: &[f64],
    t0: f64,
    t1: f64,
) -> Result<SdeProblem> {
    let spec = DrivingSpec::from_noise_scales(lambda, sigmas, t0, t1)?;
    SdeProblem::builder(name, dim, field, x0, spec)
        .param("sigma", spec.sigma)
        .build()
}

pub fn problem_names() -> &'static [&'static str] {
    &["sinh", "kubo", "rigid_body"]
}

/// Builds a named benchmark problem. `a` is only used by `kubo`.
pub fn named_problem(name: &str, sigma: f64, a: f64) -> Result<SdeProblem> {
    match name {
        "sinh" => sinh_problem(sigma),
        "kubo" => kubo_problem(a, sigma),
        "rigid_body" => rigid_body_problem(sigma),
        other => Err(Error::UnknownProblem {
            name: other.to_string(),
            available: problem_names().join(", "),
        }),
    }
}
