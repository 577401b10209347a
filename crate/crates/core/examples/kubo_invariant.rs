//! Kubo oscillator: `x² + y²` is conserved exactly by Gauss methods along
//! any driving path, drifts for Radau IIA and explicit methods.
//!
//! ```bash
//! cargo run --release --example kubo_invariant -- [h] [horizon]
//! ```

use strat_rk::problems::kubo_problem;
use strat_rk::solver::StageSolveConfig;
use strat_rk::study::invariant_drift_study;
use strat_rk::tableau::builtin;

fn main() -> strat_rk::Result<()> {
    let mut args = std::env::args().skip(1);
    let h: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.5);
    let horizon: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1000.0);

    let problem = kubo_problem(1.0, 1.0)?;
    let methods = ["gauss1", "gauss2", "gauss3", "radau_iia3", "erk4_classic", "erk5_fehlberg"]
        .iter()
        .map(|m| builtin(m))
        .collect::<Result<Vec<_>, _>>()?;
    let series = invariant_drift_study(&problem, &methods, h, horizon, 3, &StageSolveConfig::default())?;
    for s in &series {
        let status = match &s.failure {
            Some((step, msg)) => format!("stopped at step {step}: {msg}"),
            None => "ok".into(),
        };
        println!("{:<14} max |I - I0| = {:.3e}  {}", s.method, s.max_abs_drift(0), status);
    }
    Ok(())
}
