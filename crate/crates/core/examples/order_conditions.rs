//! Rooted trees up to order 5 with their density `γ` and symmetry
//! coefficient `α`, then the deterministic order of every built-in tableau
//! and the SDE order it predicts.
//!
//! ```bash
//! cargo run --example order_conditions
//! ```

use strat_rk::btree::{alpha, deterministic_order, enumerate_trees, gamma, predicted_sde_order, ElementaryWeights};
use strat_rk::tableau::{all_builtins, builtin};

fn main() -> strat_rk::Result<()> {
    let gauss2 = builtin("gauss2")?;
    let mut weights = ElementaryWeights::new(&gauss2);
    println!("{:<22} {:>5} {:>5} {:>12} {:>12}", "tree", "gamma", "alpha", "phi(gauss2)", "1/gamma");
    for tree in enumerate_trees(5)? {
        let g = gamma(&tree);
        println!(
            "{:<22} {:>5} {:>5} {:>12.9} {:>12.9}",
            tree.to_string(),
            g.to_string(),
            alpha(&tree).to_string(),
            weights.weight(&tree),
            1.0 / num_traits::ToPrimitive::to_f64(&g).unwrap()
        );
    }

    println!();
    for t in all_builtins() {
        let report = deterministic_order(&t, 8)?;
        let failure = report
            .first_failure
            .map(|f| format!("first failure {} (|diff| {:.2e})", f.tree, f.residual()))
            .unwrap_or_default();
        println!(
            "{:<14} s={} p_d={} sde order={}  {}",
            t.name(),
            t.stages(),
            report.order,
            predicted_sde_order(report.order),
            failure
        );
    }
    Ok(())
}
