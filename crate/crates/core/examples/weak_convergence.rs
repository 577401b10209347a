//! Weak convergence of `E X_1(T)` on the sinh problem with three-point
//! increments. The reference `e^{σ²T/2} sinh(T)` is compared with
//! Gauss-Hermite quadrature of the exact solution.
//!
//! ```bash
//! cargo run --release --example weak_convergence -- [paths] [plain|surrogate]
//! ```

use strat_rk::problems::sinh_problem;
use strat_rk::study::{weak_reference_by_quadrature, weak_study, StudyConfig, WeakEstimator, WeakFunctional};
use strat_rk::tableau::builtin;

fn main() -> strat_rk::Result<()> {
    let mut args = std::env::args().skip(1);
    let paths = args.next().and_then(|a| a.parse().ok()).unwrap_or(100_000);
    let estimator = match args.next().as_deref() {
        Some("plain") => WeakEstimator::Plain,
        _ => WeakEstimator::ExactSurrogate,
    };

    let sigma = 0.8;
    let problem = sinh_problem(sigma)?;
    let g = WeakFunctional::first_component();
    let closed = (0.5 * sigma * sigma).exp() * 1f64.sinh();
    let quad = weak_reference_by_quadrature(&problem, &g, 80)?;
    println!("E X(1): closed form {closed:.15}, quadrature {quad:.15}");

    let methods = ["gauss1", "gauss2", "erk4_classic"].iter().map(|m| builtin(m)).collect::<Result<Vec<_>, _>>()?;
    let mut cfg = StudyConfig::new(problem, methods);
    cfg.n_paths = paths;
    cfg.master_seed = 42;
    cfg.levels = (3..=7).collect();
    cfg.weak_functional = Some(g);
    cfg.weak_reference = Some(closed);
    cfg.weak_estimator = estimator;
    let report = weak_study(&cfg)?;
    report.write_csv(std::io::stdout())?;
    for m in &report.methods {
        println!("{:<14} weak order {:?}", m.method, m.fitted_order);
    }
    Ok(())
}
