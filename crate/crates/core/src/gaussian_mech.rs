//! Gaussian noise calibration.
//!
//! Two calibrations are provided for a release with L2 sensitivity `Δ`:
//!
//! * the classical mechanism, `σ = Δ·√(2 ln(1.25/δ))/ε`, valid for `ε < 1`;
//! * the analytic mechanism, which finds the smallest `σ` satisfying the exact
//!   Gaussian privacy-profile condition
//!   `Φ(Δ/2σ − εσ/Δ) − e^ε·Φ(−Δ/2σ − εσ/Δ) ≤ δ` for any `ε > 0`.
//!
//! The analytic solver works in the reparameterised variables `v` (or `u`)
//! where the condition becomes a monotone scalar function `B(v) ≤ δ`, brackets
//! the root by doubling and then bisects until the bracket collapses.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Random stream used for every noise draw in the crate.
pub type NoiseRng = ChaCha8Rng;

/// Default tolerance on `|B(x) − δ|` for the analytic solver.
pub const DEFAULT_AGM_TOL: f64 = 1e-12;

/// Iteration cap shared by the bracketing and bisection phases.
pub const AGM_MAX_ITERATIONS: usize = 200;

/// Within this distance of `δ₀` both solver branches give `v* = u* = 0`.
const BRANCH_BOUNDARY_TOL: f64 = 1e-15;

/// Standard normal CDF through the complementary error function.
///
/// Uses `Φ(t) = erfc(−t/√2)/2`, which is algebraically the same as
/// `(1 + erf(t/√2))/2` but keeps full relative precision in the lower tail.
#[inline]
pub(crate) fn phi(t: f64) -> f64 {
    0.5 * libm::erfc(-t * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal cumulative distribution function.
pub fn std_normal_cdf(t: f64) -> Result<f64> {
    if !t.is_finite() {
        return domain(format!("normal CDF argument must be finite, got {t}"));
    }
    Ok(phi(t))
}

/// L2 sensitivity of a release together with the data shape it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySpec {
    pub delta_l2: f64,
    pub n: usize,
    pub d: usize,
}

impl SensitivitySpec {
    pub fn new(delta_l2: f64, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return domain(format!("sensitivity needs n >= 1 and d >= 1, got n={n}, d={d}"));
        }
        if !(delta_l2.is_finite() && delta_l2 >= 0.0) {
            return domain(format!("sensitivity must be finite and nonnegative, got {delta_l2}"));
        }
        Ok(Self { delta_l2, n, d })
    }

    /// `Δ = √d / n`: one of `n` contributions in `[0,1]^d` moves the mean by at most this much.
    pub fn from_shape(n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return domain(format!("sensitivity needs n >= 1 and d >= 1, got n={n}, d={d}"));
        }
        Ok(Self {
            delta_l2: (d as f64).sqrt() / n as f64,
            n,
            d,
        })
    }
}

/// One `(ε_i, δ_i)` stage of a composed budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetPart {
    pub epsilon: f64,
    pub delta: f64,
}

impl BudgetPart {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        let part = Self { epsilon, delta };
        part.validate()?;
        Ok(part)
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return domain(format!("epsilon must be positive and finite, got {}", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return domain(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        Ok(())
    }
}

/// Total `(ε, δ)` and its division into sequentially composed stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
    pub split: Vec<BudgetPart>,
}

impl PrivacyBudget {
    /// Splits `(ε, δ)` into `parts` equal stages.
    pub fn equal_split(epsilon: f64, delta: f64, parts: usize) -> Result<Self> {
        if parts == 0 {
            return domain("a budget needs at least one part");
        }
        Self::weighted_split(epsilon, delta, &vec![1.0; parts])
    }

    /// Splits `(ε, δ)` proportionally to `weights` (both coordinates use the same proportions).
    pub fn weighted_split(epsilon: f64, delta: f64, weights: &[f64]) -> Result<Self> {
        BudgetPart::new(epsilon, delta)?;
        if weights.is_empty() {
            return domain("a budget needs at least one part");
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return domain(format!("split weights must be positive, got {weights:?}"));
        }
        let total: f64 = weights.iter().sum();
        let split = weights
            .iter()
            .map(|w| BudgetPart::new(epsilon * w / total, delta * w / total))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            epsilon,
            delta,
            split,
        })
    }

    /// The whole budget as a single stage.
    pub fn total(&self) -> BudgetPart {
        BudgetPart {
            epsilon: self.epsilon,
            delta: self.delta,
        }
    }

    pub fn part(&self, index: usize) -> Result<BudgetPart> {
        self.split.get(index).copied().ok_or_else(|| {
            Error::Domain(format!(
                "budget has {} parts, stage {} requested",
                self.split.len(),
                index + 1
            ))
        })
    }

    /// Sums of the stage parameters, for composition accounting.
    pub fn consumed(&self) -> (f64, f64) {
        self.split
            .iter()
            .fold((0.0, 0.0), |(e, d), p| (e + p.epsilon, d + p.delta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mechanism {
    Classical,
    Analytic,
}

impl Mechanism {
    pub fn label(self) -> &'static str {
        match self {
            Mechanism::Classical => "CGM",
            Mechanism::Analytic => "AGM",
        }
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cgm" | "classical" => Ok(Mechanism::Classical),
            "agm" | "analytic" => Ok(Mechanism::Analytic),
            other => domain(format!("unknown mechanism '{other}'")),
        }
    }
}

/// Which side of `δ₀` the analytic solver worked on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// `δ ≥ δ₀`: `v* = sup{v ≥ 0 : B⁺(v) ≤ δ}`.
    BPlus,
    /// `δ < δ₀`: `u* = inf{u ≥ 0 : B⁻(u) ≤ δ}`.
    BMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub mechanism: Mechanism,
    pub sigma: f64,
    pub alpha: Option<f64>,
    pub delta0: Option<f64>,
    pub root: Option<f64>,
    pub branch: Option<Branch>,
}

impl CalibrationResult {
    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// Classical Gaussian mechanism: `σ = Δ·√(2 ln(1.25/δ))/ε`.
pub fn cgm_sigma(sens: &SensitivitySpec, part: BudgetPart) -> Result<CalibrationResult> {
    check_sensitivity(sens)?;
    part.validate()?;
    if part.epsilon >= 1.0 {
        return Err(Error::CgmRange {
            epsilon: part.epsilon,
        });
    }
    let sigma = sens.delta_l2 * (2.0 * (1.25 / part.delta).ln()).sqrt() / part.epsilon;
    Ok(CalibrationResult {
        mechanism: Mechanism::Classical,
        sigma,
        alpha: None,
        delta0: None,
        root: None,
        branch: None,
    })
}

/// The exact Gaussian privacy profile: the smallest `δ` for which adding
/// `N(0, σ²I)` to a function of L2 sensitivity `Δ` is `(ε, δ)`-DP.
pub fn gaussian_privacy_delta(sigma: f64, delta_l2: f64, epsilon: f64) -> f64 {
    let a = delta_l2 / (2.0 * sigma);
    let b = epsilon * sigma / delta_l2;
    phi(a - b) - epsilon.exp() * phi(-a - b)
}

fn b_plus(epsilon: f64, v: f64) -> f64 {
    phi((epsilon * v).sqrt()) - epsilon.exp() * phi(-(epsilon * (v + 2.0)).sqrt())
}

fn b_minus(epsilon: f64, u: f64) -> f64 {
    phi(-(epsilon * u).sqrt()) - epsilon.exp() * phi(-(epsilon * (u + 2.0)).sqrt())
}

/// `δ₀ = Φ(0) − e^ε·Φ(−√(2ε))`, the profile value at `v = u = 0`.
pub fn agm_delta0(epsilon: f64) -> f64 {
    phi(0.0) - epsilon.exp() * phi(-(2.0 * epsilon).sqrt())
}

/// Root of a monotone function on `[0, ∞)` against a threshold.
///
/// `feasible(x)` must hold on `[0, x*]` (increasing case) or on `[x*, ∞)`
/// (decreasing case). Returns the feasible end of the collapsed bracket.
fn monotone_root(
    f: impl Fn(f64) -> f64,
    target: f64,
    increasing: bool,
    tol: f64,
) -> Result<f64> {
    let feasible = |x: f64| f(x) <= target;
    let mut iterations = 0;
    // For the increasing branch `lo` stays feasible; for the decreasing one `hi` does.
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while feasible(hi) == increasing {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
        if iterations >= AGM_MAX_ITERATIONS {
            return Err(Error::Convergence { lo, hi, iterations });
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations >= AGM_MAX_ITERATIONS {
            return Err(Error::Convergence { lo, hi, iterations });
        }
    }
    let root = if increasing { lo } else { hi };
    if (f(root) - target).abs() > tol {
        return Err(Error::Convergence { lo, hi, iterations });
    }
    Ok(root)
}

/// Analytic Gaussian mechanism calibration.
///
/// `tol` bounds `|B(root) − δ|` at the returned root; the bisection itself
/// runs until the bracket cannot be split further.
pub fn agm_sigma(sens: &SensitivitySpec, part: BudgetPart, tol: f64) -> Result<CalibrationResult> {
    check_sensitivity(sens)?;
    part.validate()?;
    if !(tol.is_finite() && tol > 0.0) {
        return domain(format!("solver tolerance must be positive, got {tol}"));
    }
    let BudgetPart { epsilon, delta } = part;
    let delta0 = agm_delta0(epsilon);

    let (branch, root, alpha) = if (delta - delta0).abs() <= BRANCH_BOUNDARY_TOL {
        (Branch::BPlus, 0.0, 1.0)
    } else if delta >= delta0 {
        let v = monotone_root(|v| b_plus(epsilon, v), delta, true, tol)?;
        (Branch::BPlus, v, (1.0 + v / 2.0).sqrt() - (v / 2.0).sqrt())
    } else {
        let u = monotone_root(|u| b_minus(epsilon, u), delta, false, tol)?;
        (Branch::BMinus, u, (1.0 + u / 2.0).sqrt() + (u / 2.0).sqrt())
    };

    let mut sigma = alpha * sens.delta_l2 / (2.0 * epsilon).sqrt();
    // The profile is decreasing in σ; absorb rounding from the change of variables.
    let mut guard = 0;
    while sens.delta_l2 > 0.0
        && gaussian_privacy_delta(sigma, sens.delta_l2, epsilon) > delta
        && guard < 64
    {
        sigma *= 1.0 + 4.0 * f64::EPSILON;
        guard += 1;
    }

    Ok(CalibrationResult {
        mechanism: Mechanism::Analytic,
        sigma,
        alpha: Some(alpha),
        delta0: Some(delta0),
        root: Some(root),
        branch: Some(branch),
    })
}

/// Calibrates with the requested mechanism (analytic uses [`DEFAULT_AGM_TOL`]).
pub fn calibrate(
    mechanism: Mechanism,
    sens: &SensitivitySpec,
    part: BudgetPart,
) -> Result<CalibrationResult> {
    match mechanism {
        Mechanism::Classical => cgm_sigma(sens, part),
        Mechanism::Analytic => agm_sigma(sens, part, DEFAULT_AGM_TOL),
    }
}

fn check_sensitivity(sens: &SensitivitySpec) -> Result<()> {
    if !(sens.delta_l2.is_finite() && sens.delta_l2 > 0.0) {
        return domain(format!("sensitivity must be positive, got {}", sens.delta_l2));
    }
    Ok(())
}

/// One standard normal draw (Box–Muller, cosine branch).
#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let (z, _) = standard_normal_pair(rng);
    z
}

#[inline]
fn standard_normal_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // gen::<f64>() is in [0, 1); flip it so the log argument is never zero.
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

/// Fills `out` with i.i.d. `N(0, σ²)` entries.
pub fn fill_gaussian<R: Rng + ?Sized>(out: &mut [f64], sigma: f64, rng: &mut R) {
    if sigma == 0.0 {
        out.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let (a, b) = standard_normal_pair(rng);
        pair[0] = sigma * a;
        pair[1] = sigma * b;
    }
    if let [last] = chunks.into_remainder() {
        *last = sigma * standard_normal(rng);
    }
}

/// A `dim`-vector of i.i.d. `N(0, σ²)` draws; `σ = 0` gives the zero vector.
pub fn sample_gaussian_vector<R: Rng + ?Sized>(dim: usize, sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    if dim == 0 {
        return domain("gaussian vector dimension must be at least 1");
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return domain(format!("standard deviation must be finite and nonnegative, got {sigma}"));
    }
    let mut out = vec![0.0; dim];
    fill_gaussian(&mut out, sigma, rng);
    Ok(out)
}

/// Average of `clients` independent `N(0, clients·σ²)` share vectors.
///
/// This is the noise that survives when each client perturbs its own
/// contribution and only the average is revealed; its variance is `σ²`.
pub fn aggregate_share_noise<R: Rng + ?Sized>(
    dim: usize,
    sigma: f64,
    clients: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if clients == 0 {
        return domain("share aggregation needs at least one client");
    }
    let mut total = sample_gaussian_vector(dim, 0.0, rng)?;
    if sigma == 0.0 {
        return Ok(total);
    }
    if !sigma.is_finite() || sigma < 0.0 {
        return domain(format!("standard deviation must be finite and nonnegative, got {sigma}"));
    }
    let share_sigma = sigma * (clients as f64).sqrt();
    let mut share = vec![0.0; dim];
    for _ in 0..clients {
        fill_gaussian(&mut share, share_sigma, rng);
        total.iter_mut().zip(&share).for_each(|(t, s)| *t += s);
    }
    let k = clients as f64;
    total.iter_mut().for_each(|t| *t /= k);
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn part(e: f64, d: f64) -> BudgetPart {
        BudgetPart::new(e, d).unwrap()
    }

    #[test]
    fn cdf_reference_points() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
        // Reference values frozen from a 1e-3 Simpson integration of the density.
        assert_abs_diff_eq!(std_normal_cdf(1.959963985).unwrap(), 0.975, epsilon = 1e-9);
        assert_abs_diff_eq!(std_normal_cdf(-3.0).unwrap(), 0.001349898, epsilon = 1e-9);
        assert_eq!(std_normal_cdf(-40.0).unwrap(), 0.0);
        assert_eq!(std_normal_cdf(40.0).unwrap(), 1.0);
    }

    #[test]
    fn cdf_rejects_non_finite() {
        assert!(matches!(std_normal_cdf(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(std_normal_cdf(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn cgm_closed_form() {
        let sens = SensitivitySpec::new(1.0, 1, 1).unwrap();
        let r = cgm_sigma(&sens, part(0.5, 0.25)).unwrap();
        assert_abs_diff_eq!(r.sigma, 2.0 * (2.0 * 5.0_f64.ln()).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.sigma, 3.58825, epsilon = 1e-5);
        assert_eq!(r.mechanism, Mechanism::Classical);

        let sens = SensitivitySpec::from_shape(100, 784).unwrap();
        assert_abs_diff_eq!(sens.delta_l2, 784.0_f64.sqrt() / 100.0, epsilon = 0.0);
        let r = cgm_sigma(&sens, part(0.25, 0.1)).unwrap();
        let expected = (784.0_f64.sqrt() / 100.0) * (2.0 * 12.5_f64.ln()).sqrt() / 0.25;
        assert_abs_diff_eq!(r.sigma, expected, epsilon = 1e-12);
    }

    #[test]
    fn cgm_range_and_domain_errors() {
        let sens = SensitivitySpec::new(1.0, 1, 1).unwrap();
        assert!(matches!(
            cgm_sigma(&sens, part(1.5, 0.1)),
            Err(Error::CgmRange { .. })
        ));
        assert!(matches!(
            cgm_sigma(&sens, part(1.0, 0.1)),
            Err(Error::CgmRange { .. })
        ));
        let zero = SensitivitySpec::new(0.0, 1, 1).unwrap();
        assert!(matches!(cgm_sigma(&zero, part(0.5, 0.1)), Err(Error::Domain(_))));
        assert!(BudgetPart::new(0.5, 1.0).is_err());
        assert!(BudgetPart::new(-0.5, 0.1).is_err());
    }

    #[test]
    fn linear_in_sensitivity() {
        for mech in [Mechanism::Classical, Mechanism::Analytic] {
            let one = SensitivitySpec::new(0.3, 1, 1).unwrap();
            let two = SensitivitySpec::new(0.6, 1, 1).unwrap();
            let a = calibrate(mech, &one, part(0.5, 1e-3)).unwrap().sigma;
            let b = calibrate(mech, &two, part(0.5, 1e-3)).unwrap().sigma;
            assert_abs_diff_eq!(b, 2.0 * a, epsilon = 1e-12 * b);
        }
    }

    #[test]
    fn agm_boundary_branch() {
        let eps = 0.7;
        let d0 = agm_delta0(eps);
        let sens = SensitivitySpec::new(1.0, 1, 1).unwrap();
        let r = agm_sigma(&sens, part(eps, d0), DEFAULT_AGM_TOL).unwrap();
        assert_eq!(r.branch, Some(Branch::BPlus));
        assert_eq!(r.root, Some(0.0));
        assert_eq!(r.alpha, Some(1.0));
    }

    #[test]
    fn agm_branch_selection() {
        let sens = SensitivitySpec::new(1.0, 1, 1).unwrap();
        let eps = 1.0;
        let d0 = agm_delta0(eps);
        let above = agm_sigma(&sens, part(eps, (d0 * 1.5).min(0.9)), DEFAULT_AGM_TOL).unwrap();
        let below = agm_sigma(&sens, part(eps, d0 / 10.0), DEFAULT_AGM_TOL).unwrap();
        assert_eq!(above.branch, Some(Branch::BPlus));
        assert_eq!(below.branch, Some(Branch::BMinus));
        assert!(above.root.unwrap() >= 0.0 && below.root.unwrap() >= 0.0);
        for r in [above, below] {
            let expect = r.alpha.unwrap() / (2.0 * eps).sqrt();
            assert_abs_diff_eq!(r.sigma, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn agm_rejects_bad_input() {
        let sens = SensitivitySpec::new(1.0, 1, 1).unwrap();
        let bad = BudgetPart { epsilon: 0.0, delta: 0.1 };
        assert!(matches!(agm_sigma(&sens, bad, 1e-12), Err(Error::Domain(_))));
        let bad = BudgetPart { epsilon: 1.0, delta: 1.0 };
        assert!(matches!(agm_sigma(&sens, bad, 1e-12), Err(Error::Domain(_))));
        assert!(agm_sigma(&sens, part(1.0, 0.1), 0.0).is_err());
    }

    #[test]
    fn gaussian_vector_contract() {
        let mut rng = NoiseRng::seed_from_u64(1);
        assert_eq!(sample_gaussian_vector(3, 0.0, &mut rng).unwrap(), vec![0.0; 3]);
        assert!(sample_gaussian_vector(0, 1.0, &mut rng).is_err());
        assert!(sample_gaussian_vector(3, -1.0, &mut rng).is_err());

        let a = sample_gaussian_vector(17, 1.5, &mut NoiseRng::seed_from_u64(9)).unwrap();
        let b = sample_gaussian_vector(17, 1.5, &mut NoiseRng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_vector_variance() {
        let mut rng = NoiseRng::seed_from_u64(2024);
        let v = sample_gaussian_vector(100_000, 2.0, &mut rng).unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        assert!((var - 4.0).abs() < 0.2, "sample variance {var}");
        assert!(mean.abs() < 0.05);
    }

    #[test]
    fn budget_split_sums() {
        let b = PrivacyBudget::equal_split(0.25, 0.1, 3).unwrap();
        let (e, d) = b.consumed();
        assert_abs_diff_eq!(e, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(d, 0.1, epsilon = 1e-15);
        assert!(b.part(3).is_err());
        let w = PrivacyBudget::weighted_split(1.0, 0.01, &[3.0, 1.0]).unwrap();
        assert_abs_diff_eq!(w.split[0].epsilon, 0.75, epsilon = 1e-15);
        assert!(PrivacyBudget::weighted_split(1.0, 0.01, &[1.0, 0.0]).is_err());
    }
}
