//! Loads a tableau from JSON (rational coefficients as `"p/q"` strings),
//! checks its order conditions and runs a short mean-square study with it.
//!
//! ```bash
//! cargo run --release --example custom_tableau -- [path/to/tableau.json]
//! ```

use strat_rk::btree::{deterministic_order, predicted_sde_order};
use strat_rk::problems::sinh_problem;
use strat_rk::study::{mean_square_study, StudyConfig};
use strat_rk::tableau::load_tableau;

fn main() -> strat_rk::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/lobatto_iiic3.json").to_string());
    let tableau = load_tableau(&std::fs::read_to_string(&path)?)?;
    println!("{tableau}");

    let report = deterministic_order(&tableau, 8)?;
    println!("p_d={}, sde order={}", report.order, predicted_sde_order(report.order));
    if let Some(f) = &report.first_failure {
        println!("first failing tree {} : phi={:.6} vs 1/gamma={:.6}", f.tree, f.weight, f.expected);
    }

    let mut cfg = StudyConfig::new(sinh_problem(0.8)?, vec![tableau]);
    cfg.n_paths = 500;
    cfg.master_seed = 7;
    cfg.finest_level = 8;
    cfg.levels = (3..=8).collect();
    let study = mean_square_study(&cfg)?;
    study.write_csv(std::io::stdout())?;
    println!("fitted order {:?}", study.methods[0].fitted_order);
    Ok(())
}
