//! Generates one seeded Brownian path, saves it as CSV, reloads it and
//! integrates the sinh problem with Gauss s=2 on a coarser level, printing
//! the trajectory next to the exact solution.
//!
//! ```bash
//! cargo run --example trajectory_dump -- [level] [seed]
//! ```

use strat_rk::driving::{generate_path, DrivingPath};
use strat_rk::problems::sinh_problem;
use strat_rk::solver::{integrate, StageSolveConfig};
use strat_rk::tableau::builtin;

fn main() -> strat_rk::Result<()> {
    let mut args = std::env::args().skip(1);
    let level: u32 = args.next().and_then(|a| a.parse().ok()).unwrap_or(4);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(42);

    let problem = sinh_problem(0.8)?;
    let path = generate_path(*problem.spec(), 10, seed)?;
    let mut buf = Vec::new();
    path.write_csv(&mut buf)?;
    let reloaded = DrivingPath::read_csv(buf.as_slice())?;
    assert_eq!(reloaded.fine_increments(), path.fine_increments());

    let traj = integrate(&problem, &builtin("gauss2")?, &reloaded, level, &StageSolveConfig::default())?.into_result()?;
    let dw = reloaded.wiener_increments_at_level(level)?;
    let mut w = 0.0;
    println!("t,y,exact");
    for (n, (t, y)) in traj.times.iter().zip(&traj.states).enumerate() {
        if n > 0 {
            w += dw[n - 1];
        }
        println!("{t},{},{}", y[0], problem.exact(*t, w).unwrap()[0]);
    }
    Ok(())
}
