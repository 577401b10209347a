//! Moments of the driving increment `μ(h) = λh + σΔW`: exact polynomials in
//! `h`, the discrete weak replacements that match them, and a pathwise
//! check of `∫ μ² ∘ dμ = μ(T)³/3` under dyadic refinement.
//!
//! ```bash
//! cargo run --release --example driving_moments
//! ```

use num_rational::BigRational;
use strat_rk::driving::{
    generate_path, leading_power, mu_moment_polynomial, strat_power_integral_estimate, strat_power_integral_exact,
    weak_moment_polynomial, DrivingSpec, WeakOrder,
};

fn show(poly: &[BigRational]) -> String {
    let terms: Vec<String> = poly
        .iter()
        .enumerate()
        .filter(|(_, c)| *c != &BigRational::from_integer(0.into()))
        .map(|(k, c)| format!("{c}·h^{k}"))
        .collect();
    if terms.is_empty() { "0".into() } else { terms.join(" + ") }
}

fn main() -> strat_rk::Result<()> {
    let lambda = BigRational::from_integer(1.into());
    let sigma = BigRational::new(4.into(), 5.into());
    println!("E μ(h)^n with λ=1, σ=4/5");
    for n in 1..=6 {
        let exact = mu_moment_polynomial(n, &lambda, &sigma);
        let two = weak_moment_polynomial(WeakOrder::Two, n, &lambda, &sigma);
        println!(
            "n={n}: leading power h^{}  matches 3-point: {}\n    {}",
            leading_power(&exact).unwrap(),
            exact == two,
            show(&exact)
        );
    }

    println!("\nStratonovich sum for ∫ μ² ∘ dμ on one path, error vs level");
    let path = generate_path(DrivingSpec::new(1.0, 0.8, 0.0, 1.0)?, 14, 5)?;
    let exact = strat_power_integral_exact(&path, 2);
    for level in (4..=14).step_by(2) {
        let est = strat_power_integral_estimate(&path, 2, level)?;
        println!("level {level:>2}  error {:+.3e}", est - exact);
    }
    Ok(())
}
