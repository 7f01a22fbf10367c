//! Differentially private releases of the mean, dispersion, Q and I².
//!
//! Each release is a short pipeline of Gaussian perturbations, one per budget
//! stage. All stages use the mean's sensitivity `Δ = √d/n`. The draws that were
//! actually added are returned in a [`NoiseDraw`] so the closed-form error
//! expressions can be evaluated against the same noise.
//!
//! The `*_with_draws` functions evaluate a release for injected noise and are
//! what the sampling entry points call internally.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gaussian_mech::{
    aggregate_share_noise, calibrate, sample_gaussian_vector, BudgetPart, Mechanism, NoiseRng,
    PrivacyBudget, SensitivitySpec,
};
use crate::hetero_measures::{dataset_mean, i_squared, sq_dev, MeasureContext, VectorDataset};

/// Where the noise is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setting {
    /// Every client perturbs its own contribution before (simulated) secure aggregation.
    Distributed,
    /// One draw is added after aggregation.
    Centralized,
}

impl Setting {
    pub fn label(self) -> &'static str {
        match self {
            Setting::Distributed => "distributed",
            Setting::Centralized => "centralized",
        }
    }
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "distributed" | "dist" => Ok(Setting::Distributed),
            "centralized" | "central" => Ok(Setting::Centralized),
            other => domain(format!("unknown setting '{other}'")),
        }
    }
}

/// Random stream ids; each release stage reads its own ChaCha stream of the seed.
pub mod stream {
    pub const MEAN: u64 = 1;
    pub const STATISTIC: u64 = 2;
    pub const I_SQUARED: u64 = 3;
    pub const CENTRAL: u64 = 4;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub mechanism: Mechanism,
    pub setting: Setting,
    pub budget: PrivacyBudget,
    pub seed: u64,
    /// Forces every noise scale to zero (debugging aid).
    #[serde(default)]
    pub zero_noise: bool,
}

impl EstimatorConfig {
    pub fn new(mechanism: Mechanism, setting: Setting, budget: PrivacyBudget, seed: u64) -> Self {
        Self {
            mechanism,
            setting,
            budget,
            seed,
            zero_noise: false,
        }
    }

    pub fn zero_noise(mut self, on: bool) -> Self {
        self.zero_noise = on;
        self
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    fn require_parts(&self, parts: usize, what: &str) -> Result<()> {
        if self.budget.split.len() != parts {
            return domain(format!(
                "{what} needs a {parts}-part budget, got {} parts",
                self.budget.split.len()
            ));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> NoiseRng {
        let mut rng = NoiseRng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Noise standard deviation for one stage (zero when noise is disabled).
    pub fn stage_sigma(&self, sens: &SensitivitySpec, part: BudgetPart) -> Result<f64> {
        // Calibrate even under zero noise so invalid budgets still fail.
        let sigma = calibrate(self.mechanism, sens, part)?.sigma;
        Ok(if self.zero_noise { 0.0 } else { sigma })
    }

    fn draw(&self, dim: usize, sigma: f64, clients: usize, stream: u64) -> Result<Vec<f64>> {
        let mut rng = self.rng(stream);
        match self.setting {
            Setting::Distributed => aggregate_share_noise(dim, sigma, clients, &mut rng),
            Setting::Centralized => sample_gaussian_vector(dim, sigma, &mut rng),
        }
    }
}

/// The noise actually added by one release.
///
/// `y1`/`xi1_sq` belong to the mean (or weighted mean), `y2`/`xi2_sq` to the
/// statistic itself and `y3`/`xi3_sq` to I². Unused stages are empty / zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseDraw {
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub y3: Option<f64>,
    pub xi1_sq: f64,
    pub xi2_sq: f64,
    pub xi3_sq: Option<f64>,
}

fn mean_stage(data: &VectorDataset, cfg: &EstimatorConfig, part: BudgetPart) -> Result<(Vec<f64>, f64)> {
    let sens = SensitivitySpec::from_shape(data.n(), data.d())?;
    let sigma = cfg.stage_sigma(&sens, part)?;
    Ok((cfg.draw(data.d(), sigma, data.n(), stream::MEAN)?, sigma * sigma))
}

fn statistic_stage(data: &VectorDataset, cfg: &EstimatorConfig, part: BudgetPart) -> Result<(Vec<f64>, f64)> {
    let sens = SensitivitySpec::from_shape(data.n(), data.d())?;
    let sigma = cfg.stage_sigma(&sens, part)?;
    Ok((cfg.draw(data.d(), sigma, data.n(), stream::STATISTIC)?, sigma * sigma))
}

/// `μ′ = μ + Y₁` on the first budget stage.
pub fn noisy_mean(data: &VectorDataset, cfg: &EstimatorConfig) -> Result<(Vec<f64>, NoiseDraw)> {
    let mut mean = dataset_mean(data)?;
    let (y1, xi1_sq) = mean_stage(data, cfg, cfg.budget.part(0)?)?;
    mean.iter_mut().zip(&y1).for_each(|(m, y)| *m += y);
    let draw = NoiseDraw {
        y1,
        y2: Vec::new(),
        y3: None,
        xi1_sq,
        xi2_sq: 0.0,
        xi3_sq: None,
    };
    Ok((mean, draw))
}

fn check_draw_dims(d: usize, a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != d || b.len() != d {
        return domain(format!(
            "noise draws of length {} and {} for dimension {d}",
            a.len(),
            b.len()
        ));
    }
    Ok(())
}

/// `D″ = (1/n)·Σᵢ[Σⱼ((xᵢⱼ − μⱼ) − Y₁ⱼ)² + ΣⱼY₂ⱼ]` for given draws.
pub fn dispersion_with_draws(data: &VectorDataset, mean: &[f64], y1: &[f64], y2: &[f64]) -> Result<f64> {
    Ok(dispersion_stages(data, mean, y1, y2)?.1)
}

/// The intermediate `D′` (mean noise only) and the final `D″`.
pub fn dispersion_stages(
    data: &VectorDataset,
    mean: &[f64],
    y1: &[f64],
    y2: &[f64],
) -> Result<(f64, f64)> {
    check_draw_dims(data.d(), y1, y2)?;
    if mean.len() != data.d() {
        return domain("mean dimension does not match dataset");
    }
    let y2_sum: f64 = y2.iter().sum();
    let (mut first, mut second) = (0.0, 0.0);
    for row in data.rows() {
        let s: f64 = row
            .iter()
            .zip(mean)
            .zip(y1)
            .map(|((x, m), y)| {
                let e = (x - m) - y;
                e * e
            })
            .sum();
        first += s;
        second += s + y2_sum;
    }
    let n = data.n() as f64;
    Ok((first / n, second / n))
}

/// Two-stage private dispersion (exponent 2).
pub fn noisy_dispersion(data: &VectorDataset, cfg: &EstimatorConfig) -> Result<(f64, NoiseDraw)> {
    cfg.require_parts(2, "dispersion")?;
    let mean = dataset_mean(data)?;
    let (y1, xi1_sq) = mean_stage(data, cfg, cfg.budget.part(0)?)?;
    let (y2, xi2_sq) = statistic_stage(data, cfg, cfg.budget.part(1)?)?;
    let value = dispersion_with_draws(data, &mean, &y1, &y2)?;
    Ok((
        value,
        NoiseDraw {
            y1,
            y2,
            y3: None,
            xi1_sq,
            xi2_sq,
            xi3_sq: None,
        },
    ))
}

/// Q″ along the release pipeline: perturb the weighted mean by `Z₁`,
/// recompute weighted squared deviations, add `ΣZ₂` per client, divide by n.
pub fn q_with_draws(data: &VectorDataset, ctx: &MeasureContext, z1: &[f64], z2: &[f64]) -> Result<f64> {
    check_draw_dims(data.d(), z1, z2)?;
    if ctx.weights.len() != data.n() || ctx.weighted_mean.len() != data.d() {
        return domain("measure context does not match dataset");
    }
    let noisy_center: Vec<f64> = ctx.weighted_mean.iter().zip(z1).map(|(m, z)| m + z).collect();
    let z2_sum: f64 = z2.iter().sum();
    let total: f64 = data
        .rows()
        .zip(&ctx.weights)
        .map(|(row, w)| w * sq_dev(row, &noisy_center) + z2_sum)
        .sum();
    Ok(total / data.n() as f64)
}

/// `(1/n)·Σᵢ[Σⱼ(wᵢ(xᵢⱼ − μ̄ⱼ) − Z₁ⱼ)² + ΣⱼZ₂ⱼ]`.
///
/// Matches [`q_with_draws`] for unit weights only; with general weights the
/// noise enters differently.
pub fn q_closed_form(data: &VectorDataset, ctx: &MeasureContext, z1: &[f64], z2: &[f64]) -> Result<f64> {
    check_draw_dims(data.d(), z1, z2)?;
    if ctx.weights.len() != data.n() || ctx.weighted_mean.len() != data.d() {
        return domain("measure context does not match dataset");
    }
    let z2_sum: f64 = z2.iter().sum();
    let total: f64 = data
        .rows()
        .zip(&ctx.weights)
        .map(|(row, w)| {
            let s: f64 = row
                .iter()
                .zip(&ctx.weighted_mean)
                .zip(z1)
                .map(|((x, m), z)| {
                    let e = w * (x - m) - z;
                    e * e
                })
                .sum();
            s + z2_sum
        })
        .sum();
    Ok(total / data.n() as f64)
}

fn release_q(
    data: &VectorDataset,
    ctx: &MeasureContext,
    cfg: &EstimatorConfig,
    first: BudgetPart,
    second: BudgetPart,
) -> Result<(f64, NoiseDraw)> {
    let (z1, eta1_sq) = mean_stage(data, cfg, first)?;
    let (z2, eta2_sq) = statistic_stage(data, cfg, second)?;
    let value = q_with_draws(data, ctx, &z1, &z2)?;
    Ok((
        value,
        NoiseDraw {
            y1: z1,
            y2: z2,
            y3: None,
            xi1_sq: eta1_sq,
            xi2_sq: eta2_sq,
            xi3_sq: None,
        },
    ))
}

/// Two-stage private Q.
pub fn noisy_q(data: &VectorDataset, ctx: &MeasureContext, cfg: &EstimatorConfig) -> Result<(f64, NoiseDraw)> {
    cfg.require_parts(2, "Q")?;
    release_q(data, ctx, cfg, cfg.budget.part(0)?, cfg.budget.part(1)?)
}

/// `(I²)‴ = i_squared(Q″, n) + Z₃`. The result is not clamped.
pub fn i_squared_with_draws(q_noisy: f64, n: usize, z3: f64) -> Result<f64> {
    if !(q_noisy > 0.0) {
        return Err(Error::Degenerate(format!(
            "noisy Q is {q_noisy}; I² needs a positive Q"
        )));
    }
    Ok(i_squared(q_noisy, n)? + z3)
}

/// Three-stage private I²: the first two stages release Q″, the third adds a scalar `Z₃`.
pub fn noisy_i_squared(
    data: &VectorDataset,
    ctx: &MeasureContext,
    cfg: &EstimatorConfig,
) -> Result<(f64, NoiseDraw)> {
    cfg.require_parts(3, "I²")?;
    let (q_noisy, mut draw) = release_q(data, ctx, cfg, cfg.budget.part(0)?, cfg.budget.part(1)?)?;
    let sens = SensitivitySpec::from_shape(data.n(), data.d())?;
    let sigma = cfg.stage_sigma(&sens, cfg.budget.part(2)?)?;
    let z3 = cfg.draw(1, sigma, data.n(), stream::I_SQUARED)?[0];
    let value = i_squared_with_draws(q_noisy, data.n(), z3)?;
    draw.y3 = Some(z3);
    draw.xi3_sq = Some(sigma * sigma);
    Ok((value, draw))
}

/// Adds one post-aggregation draw to an already computed statistic.
///
/// A `d`-vector `N(0, σ²)` is drawn with `σ` calibrated on `part`, and its
/// coordinate sum is added. The perturbation depends only on the seed, the
/// part and the shape, so statistics released at the same scale see the same
/// noise.
pub fn centralized_noisy(
    statistic: f64,
    part: BudgetPart,
    shape: &SensitivitySpec,
    cfg: &EstimatorConfig,
) -> Result<(f64, NoiseDraw)> {
    if !statistic.is_finite() {
        return domain(format!("statistic must be finite, got {statistic}"));
    }
    let sigma = cfg.stage_sigma(shape, part)?;
    let y = sample_gaussian_vector(shape.d, sigma, &mut cfg.rng(stream::CENTRAL))?;
    let shift: f64 = y.iter().sum();
    Ok((
        statistic + shift,
        NoiseDraw {
            y1: y,
            y2: Vec::new(),
            y3: None,
            xi1_sq: sigma * sigma,
            xi2_sq: 0.0,
            xi3_sq: None,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetero_measures::{dispersion, q_statistic};
    use approx::assert_abs_diff_eq;

    fn two_rows() -> VectorDataset {
        VectorDataset::unlabelled(&[vec![0.0], vec![1.0]]).unwrap()
    }

    fn sample() -> VectorDataset {
        VectorDataset::unlabelled(&[
            vec![0.1, 0.8, 0.3],
            vec![0.5, 0.4, 0.9],
            vec![0.0, 1.0, 0.2],
            vec![0.7, 0.7, 0.6],
        ])
        .unwrap()
    }

    fn cfg(parts: usize, zero: bool) -> EstimatorConfig {
        EstimatorConfig::new(
            Mechanism::Analytic,
            Setting::Distributed,
            PrivacyBudget::equal_split(0.25, 0.1, parts).unwrap(),
            7,
        )
        .zero_noise(zero)
    }

    #[test]
    fn zero_noise_identities() {
        let data = sample();
        let ctx = MeasureContext::new(&data).unwrap();
        assert_eq!(noisy_mean(&data, &cfg(2, true)).unwrap().0, dataset_mean(&data).unwrap());
        assert_eq!(
            noisy_dispersion(&data, &cfg(2, true)).unwrap().0,
            dispersion(&data, 2.0).unwrap()
        );
        let q = q_statistic(&data, &ctx).unwrap();
        assert_eq!(noisy_q(&data, &ctx, &cfg(2, true)).unwrap().0, q);
        assert_eq!(
            noisy_i_squared(&data, &ctx, &cfg(3, true)).unwrap().0,
            i_squared(q, data.n()).unwrap()
        );
        let shape = SensitivitySpec::from_shape(4, 3).unwrap();
        let c = cfg(2, true);
        assert_eq!(centralized_noisy(0.123, c.budget.total(), &shape, &c).unwrap().0, 0.123);
    }

    #[test]
    fn unit_weight_q_reduces_to_dispersion() {
        let data = sample();
        let unit = MeasureContext::unit_weights(&data).unwrap();
        assert_eq!(
            noisy_q(&data, &unit, &cfg(2, true)).unwrap().0,
            dispersion(&data, 2.0).unwrap()
        );
    }

    #[test]
    fn injected_dispersion() {
        let v = dispersion_with_draws(&two_rows(), &[0.5], &[0.1], &[0.0]).unwrap();
        assert_abs_diff_eq!(v, 0.26, epsilon = 1e-15);
    }

    #[test]
    fn injected_q_pipeline() {
        let data = two_rows();
        let ctx = MeasureContext::with_weights(&data, vec![4.0, 4.0]).unwrap();
        let v = q_with_draws(&data, &ctx, &[0.1], &[0.0]).unwrap();
        assert_abs_diff_eq!(v, 1.04, epsilon = 1e-14);
    }

    #[test]
    fn injected_i_squared() {
        assert_abs_diff_eq!(i_squared_with_draws(4.0, 2, 0.01).unwrap(), 0.76, epsilon = 1e-15);
        assert!(matches!(
            i_squared_with_draws(0.0, 2, 0.0),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            i_squared_with_draws(-0.5, 2, 0.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn closed_form_matches_pipeline_for_unit_weights() {
        let data = sample();
        let unit = MeasureContext::unit_weights(&data).unwrap();
        let z1 = [0.03, -0.2, 0.11];
        let z2 = [0.5, -0.1, 0.02];
        let a = q_with_draws(&data, &unit, &z1, &z2).unwrap();
        let b = q_closed_form(&data, &unit, &z1, &z2).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn cgm_variance_matches_closed_form() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![(i % 7) as f64 / 7.0; 784]).collect();
        let data = VectorDataset::unlabelled(&rows).unwrap();
        let c = EstimatorConfig::new(
            Mechanism::Classical,
            Setting::Centralized,
            PrivacyBudget::equal_split(0.25, 0.1, 2).unwrap(),
            1,
        );
        let (_, draw) = noisy_mean(&data, &c).unwrap();
        let expect = 2.0 * 784.0 * 25.0_f64.ln() / (100.0_f64.powi(2) * 0.125_f64.powi(2));
        assert_abs_diff_eq!(draw.xi1_sq, expect, epsilon = 1e-12 * expect);
    }

    #[test]
    fn deterministic_and_recorded() {
        let data = sample();
        let ctx = MeasureContext::new(&data).unwrap();
        let c = cfg(3, false);
        let a = noisy_i_squared(&data, &ctx, &c).unwrap();
        let b = noisy_i_squared(&data, &ctx, &c).unwrap();
        assert_eq!(a, b);
        let q = q_with_draws(&data, &ctx, &a.1.y1, &a.1.y2).unwrap();
        let again = i_squared_with_draws(q, data.n(), a.1.y3.unwrap()).unwrap();
        assert_eq!(again, a.0);

        let (mu, draw) = noisy_mean(&data, &cfg(2, false)).unwrap();
        let exact = dataset_mean(&data).unwrap();
        for ((m, e), y) in mu.iter().zip(&exact).zip(&draw.y1) {
            assert_eq!(*m, e + y);
        }
    }

    #[test]
    fn budget_shape_is_enforced() {
        let data = sample();
        let ctx = MeasureContext::new(&data).unwrap();
        assert!(noisy_dispersion(&data, &cfg(3, false)).is_err());
        assert!(noisy_q(&data, &ctx, &cfg(3, false)).is_err());
        assert!(noisy_i_squared(&data, &ctx, &cfg(2, false)).is_err());
    }

    #[test]
    fn classical_range_propagates() {
        let data = sample();
        let c = EstimatorConfig::new(
            Mechanism::Classical,
            Setting::Distributed,
            PrivacyBudget::equal_split(4.0, 1e-5, 2).unwrap(),
            0,
        );
        assert!(matches!(noisy_dispersion(&data, &c), Err(Error::CgmRange { .. })));
    }
}
