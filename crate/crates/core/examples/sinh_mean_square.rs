//! Mean-square convergence on `dX = √(1+X²)(dt + σ∘dW)`, exact solution
//! `sinh(t + σW(t))`, for the Gauss, Radau IIA and explicit families.
//!
//! ```bash
//! cargo run --release --example sinh_mean_square -- [paths] [seed]
//! ```

use strat_rk::problems::sinh_problem;
use strat_rk::study::{mean_square_study, StudyConfig};
use strat_rk::tableau::builtin;

fn main() -> strat_rk::Result<()> {
    let mut args = std::env::args().skip(1);
    let paths = args.next().and_then(|a| a.parse().ok()).unwrap_or(2000);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(42);

    let methods = [
        "gauss1", "gauss2", "gauss3", "radau_iia2", "radau_iia3", "erk3", "erk4_classic", "erk5_fehlberg",
    ]
    .iter()
    .map(|m| builtin(m))
    .collect::<Result<Vec<_>, _>>()?;

    let mut cfg = StudyConfig::new(sinh_problem(0.8)?, methods);
    cfg.n_paths = paths;
    cfg.master_seed = seed;
    cfg.finest_level = 9;
    cfg.levels = (4..=9).collect();

    let start = std::time::Instant::now();
    let report = mean_square_study(&cfg)?;
    report.write_csv(std::io::stdout())?;
    println!();
    for m in &report.methods {
        println!(
            "{:<14} p_d={} predicted={} fitted={:?}",
            m.method, m.deterministic_order, m.predicted_order, m.fitted_order
        );
    }
    eprintln!("{} paths in {:.1?}", paths, start.elapsed());
    Ok(())
}
