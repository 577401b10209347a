//! The driving measure `μ(t) = λt + σW(t)`: seeded Wiener paths on dyadic
//! grids with exact coarsening, moment-matched weak increments, and the
//! closed-form moments of `μ(h)`.

use std::io::{Read, Write};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deepest dyadic level a path may be generated at.
pub const MAX_LEVELS: u32 = 30;

/// Parameters of `μ(t) = λt + σW(t)` on `[t0, t1]`.
///
/// `λ` is normally 0 or 1. Any finite real is accepted so that problems
/// such as the Kubo oscillator, whose drift is a multiple of the common
/// integrand, can be written with `μ(t) = a t + σW(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivingSpec {
    pub lambda: f64,
    pub sigma: f64,
    pub t0: f64,
    pub t1: f64,
}

impl DrivingSpec {
    pub fn new(lambda: f64, sigma: f64, t0: f64, t1: f64) -> Result<Self> {
        if ![lambda, sigma, t0, t1].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidDriving("parameters must be finite".into()));
        }
        if !(t1 > t0) {
            return Err(Error::InvalidDriving(format!("need t0 < T, got [{t0}, {t1}]")));
        }
        Ok(Self { lambda, sigma, t0, t1 })
    }

    /// Collapses independent noises `σ_1 dW_1 + … + σ_m dW_m` sharing one
    /// integrand into a single noise of scale `√(Σ σ_i²)`.
    pub fn from_noise_scales(lambda: f64, sigmas: &[f64], t0: f64, t1: f64) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::InvalidDriving("need at least one noise scale".into()));
        }
        let sigma = sigmas.iter().map(|s| s * s).sum::<f64>().sqrt();
        Self::new(lambda, sigma, t0, t1)
    }

    pub fn length(&self) -> f64 {
        self.t1 - self.t0
    }

    /// `μ` over `[t0, t0 + elapsed]` given the Wiener increment over it.
    pub fn measure(&self, elapsed: f64, dw: f64) -> f64 {
        self.lambda * elapsed + self.sigma * dw
    }
}

/// One Wiener realization on `[t0, t1]`, stored as increments over the
/// `2^levels` finest uniform sub-steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingPath {
    spec: DrivingSpec,
    levels: u32,
    seed: u64,
    dw_fine: Vec<f64>,
}

fn check_level(level: u32, max: u32) -> Result<()> {
    if level > max {
        Err(Error::LevelOutOfRange { level, max })
    } else {
        Ok(())
    }
}

/// Draws `n` independent `N(0, h)` samples from the stream keyed by `seed`.
pub fn gaussian_increments(n: usize, h: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = h.sqrt();
    (0..n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Generates the fine Wiener increments for `(spec, levels, seed)`.
pub fn generate_path(spec: DrivingSpec, levels: u32, seed: u64) -> Result<DrivingPath> {
    check_level(levels, MAX_LEVELS)?;
    let n = 1usize << levels;
    let h_min = spec.length() / n as f64;
    Ok(DrivingPath {
        spec,
        levels,
        seed,
        dw_fine: gaussian_increments(n, h_min, seed),
    })
}

impl DrivingPath {
    /// Wraps externally supplied fine increments.
    pub fn from_increments(spec: DrivingSpec, seed: u64, dw_fine: Vec<f64>) -> Result<Self> {
        let n = dw_fine.len();
        if !n.is_power_of_two() || n.trailing_zeros() > MAX_LEVELS {
            return Err(Error::InvalidDriving(format!(
                "increment count {n} is not 2^L with L <= {MAX_LEVELS}"
            )));
        }
        if dw_fine.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidDriving("increments must be finite".into()));
        }
        Ok(Self {
            spec,
            levels: n.trailing_zeros(),
            seed,
            dw_fine,
        })
    }

    pub fn spec(&self) -> &DrivingSpec {
        &self.spec
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fine_increments(&self) -> &[f64] {
        &self.dw_fine
    }

    /// Uniform step size on dyadic `level`.
    pub fn step_size(&self, level: u32) -> f64 {
        self.spec.length() / (1u64 << level) as f64
    }

    /// Wiener increments on `level`: each is the left-to-right sum of the
    /// `2^(levels - level)` fine increments it covers.
    pub fn wiener_increments_at_level(&self, level: u32) -> Result<Vec<f64>> {
        check_level(level, self.levels)?;
        let chunk = 1usize << (self.levels - level);
        Ok(self
            .dw_fine
            .chunks(chunk)
            .map(|c| c.iter().sum())
            .collect())
    }

    /// `Δμ_n = λh + σΔW_n` on `level`.
    pub fn increments_at_level(&self, level: u32) -> Result<Vec<f64>> {
        let h = self.step_size(level);
        Ok(self
            .wiener_increments_at_level(level)?
            .into_iter()
            .map(|dw| self.spec.measure(h, dw))
            .collect())
    }

    /// `W(t1) - W(t0)`, summed left to right over the fine increments.
    pub fn wiener_total(&self) -> f64 {
        self.dw_fine.iter().sum()
    }

    /// `μ(t1) - μ(t0)`.
    pub fn measure_total(&self) -> f64 {
        self.spec.measure(self.spec.length(), self.wiener_total())
    }

    /// Writes the fine increments as CSV: a header record
    /// `t0,T,levels,seed,lambda,sigma`, its values, then a `dw` column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        w.write_record(["t0", "T", "levels", "seed", "lambda", "sigma"])?;
        w.write_record([
            self.spec.t0.to_string(),
            self.spec.t1.to_string(),
            self.levels.to_string(),
            self.seed.to_string(),
            self.spec.lambda.to_string(),
            self.spec.sigma.to_string(),
        ])?;
        w.write_record(["dw"])?;
        for dw in &self.dw_fine {
            w.write_record([dw.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let records = r.records().collect::<std::result::Result<Vec<_>, _>>()?;
        let bad = |what: &str| Error::InvalidDriving(format!("path CSV: {what}"));
        if records.len() < 3 || records[2].get(0) != Some("dw") {
            return Err(bad("expected header, values and `dw` records"));
        }
        let meta = &records[1];
        let num = |i: usize| -> Result<f64> {
            meta.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("malformed header values"))
        };
        let seed: u64 = meta
            .get(3)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("malformed seed"))?;
        let levels: u32 = meta
            .get(2)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("malformed levels"))?;
        let spec = DrivingSpec::new(num(4)?, num(5)?, num(0)?, num(1)?)?;
        let dw = records[3..]
            .iter()
            .map(|rec| rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(|| bad("malformed increment")))
            .collect::<Result<Vec<f64>>>()?;
        let path = Self::from_increments(spec, seed, dw)?;
        if path.levels != levels {
            return Err(bad("increment count does not match levels"));
        }
        Ok(path)
    }
}

/// Number of matched moments of a discrete weak increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeakOrder {
    /// Two-point `±√h`; matches moments up to 3.
    One,
    /// Three-point `±√(3h)`, `0`; matches moments up to 5.
    Two,
}

impl WeakOrder {
    pub fn value(self) -> u32 {
        match self {
            WeakOrder::One => 1,
            WeakOrder::Two => 2,
        }
    }

    /// Support points of `ΔŴ / √h` and their probabilities.
    pub fn support(self) -> (Vec<f64>, Vec<f64>) {
        match self {
            WeakOrder::One => (vec![-1.0, 1.0], vec![0.5, 0.5]),
            WeakOrder::Two => {
                let r = 3f64.sqrt();
                (vec![-r, 0.0, r], vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0])
            }
        }
    }
}

impl TryFrom<u32> for WeakOrder {
    type Error = Error;

    fn try_from(order: u32) -> Result<Self> {
        match order {
            1 => Ok(WeakOrder::One),
            2 => Ok(WeakOrder::Two),
            other => Err(Error::UnsupportedWeakOrder(other)),
        }
    }
}

/// Draws the discrete Wiener substitute `ΔŴ` for a step of size `h`.
pub fn weak_wiener<R: Rng + ?Sized>(order: WeakOrder, h: f64, rng: &mut R) -> f64 {
    match order {
        WeakOrder::One => {
            if rng.random::<bool>() {
                h.sqrt()
            } else {
                -h.sqrt()
            }
        }
        WeakOrder::Two => match rng.random_range(0..6u32) {
            0 => (3.0 * h).sqrt(),
            1 => -(3.0 * h).sqrt(),
            _ => 0.0,
        },
    }
}

/// `λh + σΔŴ` with `ΔŴ` from [`weak_wiener`].
pub fn weak_increment<R: Rng + ?Sized>(
    order: WeakOrder,
    h: f64,
    spec: &DrivingSpec,
    rng: &mut R,
) -> f64 {
    spec.measure(h, weak_wiener(order, h, rng))
}

/// `E(ΔW^i) / h^(i/2)`: `(i-1)!!` for even `i`, zero for odd `i`.
fn gaussian_moment_factor(i: u32) -> BigInt {
    if i % 2 == 1 {
        return BigInt::zero();
    }
    (1..i).step_by(2).fold(BigInt::from(1), |acc, k| acc * k)
}

fn binomial(n: u32, k: u32) -> BigInt {
    (0..k).fold(BigInt::from(1), |acc, j| acc * (n - j) / (j + 1))
}

/// Coefficients of a polynomial in `h`, lowest power first.
pub type MomentPolynomial = Vec<BigRational>;

fn moment_polynomial(
    n: u32,
    lambda: &BigRational,
    sigma: &BigRational,
    factor: impl Fn(u32) -> BigRational,
) -> MomentPolynomial {
    // (λh + σ√h Z)^n: the i-th binomial term carries h^(n - i + i/2) and
    // only even i survive, so every power of h is an integer.
    let mut coeffs = vec![BigRational::zero(); n as usize + 1];
    for i in (0..=n).step_by(2) {
        let power = (n - i + i / 2) as usize;
        let term = BigRational::from_integer(binomial(n, i))
            * num_traits::pow(lambda.clone(), (n - i) as usize)
            * num_traits::pow(sigma.clone(), i as usize)
            * factor(i);
        coeffs[power] += term;
    }
    coeffs
}

/// `E μ(h)^n` as an exact polynomial in `h`.
pub fn mu_moment_polynomial(n: u32, lambda: &BigRational, sigma: &BigRational) -> MomentPolynomial {
    moment_polynomial(n, lambda, sigma, |i| BigRational::from_integer(gaussian_moment_factor(i)))
}

/// `E (λh + σΔŴ)^n` for the discrete weak increment, as an exact
/// polynomial in `h`.
pub fn weak_moment_polynomial(
    order: WeakOrder,
    n: u32,
    lambda: &BigRational,
    sigma: &BigRational,
) -> MomentPolynomial {
    moment_polynomial(n, lambda, sigma, |i| match (order, i) {
        (_, 0) => BigRational::from_integer(1.into()),
        (WeakOrder::One, _) => BigRational::from_integer(1.into()),
        // (±√3)^i with probability 1/3 in total.
        (WeakOrder::Two, _) => BigRational::new(num_traits::pow(BigInt::from(3), (i / 2) as usize), 3.into()),
    })
}

/// Lowest power of `h` with a non-zero coefficient.
pub fn leading_power(poly: &MomentPolynomial) -> Option<usize> {
    poly.iter().position(|c| !c.is_zero())
}

/// `E μ(h)^n` in closed form. Panics for `n > 30`.
pub fn mu_moment(n: u32, h: f64, spec: &DrivingSpec) -> f64 {
    assert!(n <= 30, "moment order {n} exceeds 30");
    let mut total = 0.0;
    for i in (0..=n).step_by(2) {
        let gm = gaussian_moment_factor(i).to_f64().unwrap() * h.powf(i as f64 / 2.0);
        total += binomial(n, i).to_f64().unwrap()
            * (spec.lambda * h).powi((n - i) as i32)
            * spec.sigma.powi(i as i32)
            * gm;
    }
    total
}

/// Stratonovich Riemann sum `Σ ((μ_n + μ_{n+1})/2)^k Δμ_n` of
/// `∫ μ^k ∘ dμ` over the whole path, on dyadic `level`.
pub fn strat_power_integral_estimate(path: &DrivingPath, k: u32, level: u32) -> Result<f64> {
    let dmu = path.increments_at_level(level)?;
    let mut mu = 0.0;
    let mut sum = 0.0;
    for d in dmu {
        let next = mu + d;
        sum += (0.5 * (mu + next)).powi(k as i32) * d;
        mu = next;
    }
    Ok(sum)
}

/// Closed form `μ(T)^(k+1) / (k+1)` of the same integral.
pub fn strat_power_integral_exact(path: &DrivingPath, k: u32) -> f64 {
    path.measure_total().powi(k as i32 + 1) / (k + 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_spec(lambda: f64, sigma: f64) -> DrivingSpec {
        DrivingSpec::new(lambda, sigma, 0.0, 1.0).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(DrivingSpec::new(1.0, 0.5, 1.0, 1.0).is_err());
        assert!(DrivingSpec::new(f64::NAN, 0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn noise_reduction_uses_euclidean_norm() {
        assert_eq!(DrivingSpec::from_noise_scales(1.0, &[3.0, 4.0], 0.0, 1.0).unwrap().sigma, 5.0);
        assert_eq!(DrivingSpec::from_noise_scales(1.0, &[0.7], 0.0, 1.0).unwrap().sigma, 0.7);
        assert_eq!(DrivingSpec::from_noise_scales(1.0, &[0.0, 0.0], 0.0, 1.0).unwrap().sigma, 0.0);
        assert!(DrivingSpec::from_noise_scales(1.0, &[], 0.0, 1.0).is_err());
    }

    #[test]
    fn level_zero_path_has_one_increment() {
        let p = generate_path(unit_spec(1.0, 1.0), 0, 3).unwrap();
        assert_eq!(p.fine_increments().len(), 1);
        assert_eq!(p.increments_at_level(0).unwrap().len(), 1);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_path(unit_spec(1.0, 1.0), 8, 11).unwrap();
        let b = generate_path(unit_spec(1.0, 1.0), 8, 11).unwrap();
        let c = generate_path(unit_spec(1.0, 1.0), 8, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.fine_increments(), c.fine_increments());
    }

    #[test]
    fn levels_out_of_range() {
        assert!(matches!(
            generate_path(unit_spec(1.0, 1.0), 31, 0),
            Err(Error::LevelOutOfRange { level: 31, max: 30 })
        ));
        let p = generate_path(unit_spec(1.0, 1.0), 3, 0).unwrap();
        assert!(p.increments_at_level(4).is_err());
    }

    #[test]
    fn pure_drift_increments() {
        let p = generate_path(unit_spec(1.0, 0.0), 6, 5).unwrap();
        assert_eq!(p.increments_at_level(2).unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn finest_level_is_elementwise() {
        let spec = DrivingSpec::new(1.0, 0.8, 0.0, 2.0).unwrap();
        let p = generate_path(spec, 5, 9).unwrap();
        let h = p.step_size(5);
        let dmu = p.increments_at_level(5).unwrap();
        for (d, w) in dmu.iter().zip(p.fine_increments()) {
            assert_eq!(*d, h + 0.8 * w);
        }
    }

    #[test]
    fn increments_telescope() {
        let p = generate_path(unit_spec(1.0, 0.8), 10, 1).unwrap();
        for level in [0, 3, 10] {
            let total: f64 = p.increments_at_level(level).unwrap().iter().sum();
            assert!((total - p.measure_total()).abs() < 1e-12);
        }
    }

    #[test]
    fn fine_increment_variance() {
        let spec = DrivingSpec::new(0.0, 1.0, 0.0, 2f64.powi(-10) * 131072.0).unwrap();
        let p = generate_path(spec, 17, 2024).unwrap();
        let h = p.step_size(17);
        assert_eq!(h, 2f64.powi(-10));
        let n = p.fine_increments().len() as f64;
        let var = p.fine_increments().iter().map(|x| x * x).sum::<f64>() / n;
        assert!((var / h - 1.0).abs() < 0.05, "variance ratio {}", var / h);
    }

    #[test]
    fn weak_order_conversion() {
        assert_eq!(WeakOrder::try_from(2).unwrap(), WeakOrder::Two);
        assert!(matches!(WeakOrder::try_from(3), Err(Error::UnsupportedWeakOrder(3))));
    }

    #[test]
    fn weak_increment_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = unit_spec(1.0, 0.5);
        let h = 0.01;
        for _ in 0..200 {
            let d = weak_increment(WeakOrder::One, h, &spec, &mut rng);
            assert!((d - h).abs() - 0.5 * 0.1 < 1e-15);
            let d = weak_increment(WeakOrder::Two, h, &spec, &mut rng);
            let z = (d - h) / 0.5;
            assert!(z == 0.0 || (z.abs() - (3.0 * h).sqrt()).abs() < 1e-14);
        }
        let zero_noise = unit_spec(1.0, 0.0);
        assert_eq!(weak_increment(WeakOrder::Two, h, &zero_noise, &mut rng), h);
    }

    #[test]
    fn mu_moment_low_orders() {
        let spec = unit_spec(1.0, 0.8);
        let h = 0.3;
        assert_eq!(mu_moment(0, h, &spec), 1.0);
        assert!((mu_moment(1, h, &spec) - h).abs() < 1e-16);
        assert!((mu_moment(2, h, &spec) - (h * h + 0.64 * h)).abs() < 1e-15);
    }

    #[test]
    fn strat_integral_low_powers_are_exact() {
        let p = generate_path(unit_spec(1.0, 0.8), 8, 77).unwrap();
        for level in [0, 4, 8] {
            let k0 = strat_power_integral_estimate(&p, 0, level).unwrap();
            assert!((k0 - p.measure_total()).abs() < 1e-13);
            let k1 = strat_power_integral_estimate(&p, 1, level).unwrap();
            assert!((k1 - strat_power_integral_exact(&p, 1)).abs() < 1e-13);
        }
    }

    #[test]
    fn csv_round_trip() {
        let p = generate_path(DrivingSpec::new(1.0, 0.8, 0.5, 1.5).unwrap(), 4, 99).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = DrivingPath::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, p);
    }
}
