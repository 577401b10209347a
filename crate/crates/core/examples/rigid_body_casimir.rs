//! Stochastic rigid body: the Casimir `C` and the energy `H` are both
//! quadratic, so Gauss methods keep them to round-off while Radau IIA and
//! explicit methods drift.
//!
//! ```bash
//! cargo run --release --example rigid_body_casimir -- [h] [horizon] [csv-out]
//! ```

use strat_rk::problems::rigid_body_problem;
use strat_rk::solver::StageSolveConfig;
use strat_rk::study::{invariant_drift_study, write_drift_csv};
use strat_rk::tableau::builtin;

fn main() -> strat_rk::Result<()> {
    let mut args = std::env::args().skip(1);
    let h: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1.0 / 32.0);
    let horizon: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(100.0);
    let out = args.next();

    let problem = rigid_body_problem(0.5)?;
    let methods = ["gauss2", "radau_iia3", "erk5_fehlberg"]
        .iter()
        .map(|m| builtin(m))
        .collect::<Result<Vec<_>, _>>()?;
    let series = invariant_drift_study(&problem, &methods, h, horizon, 11, &StageSolveConfig::default())?;
    for s in &series {
        let c = s.invariant_index("C").unwrap();
        let e = s.invariant_index("H").unwrap();
        println!(
            "{:<14} max |C drift| = {:.3e}   max |H drift| = {:.3e}",
            s.method,
            s.max_abs_drift(c),
            s.max_abs_drift(e)
        );
    }
    if let Some(path) = out {
        write_drift_csv(&series, std::fs::File::create(&path)?)?;
        println!("drift series written to {path}");
    }
    Ok(())
}
