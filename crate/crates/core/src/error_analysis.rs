//! Empirical, closed-form and centralized mean squared errors, plus the 95%
//! confidence half-widths, for the three private statistics.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gaussian_mech::SensitivitySpec;
use crate::hetero_measures::{
    dataset_mean, dispersion, i_squared, q_statistic, MeasureContext, VectorDataset,
};
use crate::private_estimators::{
    centralized_noisy, noisy_dispersion, noisy_i_squared, noisy_q, q_with_draws, EstimatorConfig,
    NoiseDraw,
};

/// `1.96·√(E[Y⁸] − E[Y⁴]²)/σ⁸ = 1.96·√(105 − 9) = 7.84·√6`.
pub const DISPERSION_CI_CONSTANT: f64 = 7.84 * 2.449_489_742_783_178;

/// `1.96·√(1/9 − 1/105) = 1.96·√(32/315)`, rounded as published.
pub const I_SQUARED_CI_CONSTANT: f64 = 0.625;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Statistic {
    Dispersion,
    Q,
    ISquared,
}

impl Statistic {
    pub const ALL: [Statistic; 3] = [Statistic::Dispersion, Statistic::Q, Statistic::ISquared];

    pub fn label(self) -> &'static str {
        match self {
            Statistic::Dispersion => "dispersion",
            Statistic::Q => "q",
            Statistic::ISquared => "i_squared",
        }
    }

    /// Number of budget stages a release of this statistic consumes.
    pub fn budget_parts(self) -> usize {
        match self {
            Statistic::Dispersion | Statistic::Q => 2,
            Statistic::ISquared => 3,
        }
    }
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "dispersion" | "d" => Ok(Statistic::Dispersion),
            "q" => Ok(Statistic::Q),
            "i_squared" | "i2" | "isquared" => Ok(Statistic::ISquared),
            other => domain(format!("unknown statistic '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub true_value: f64,
    pub emse: f64,
    pub sd_emse: f64,
    pub tmse: f64,
    pub sd_tmse: f64,
    pub cmse: f64,
    pub sd_cmse: f64,
    pub trials: usize,
    pub ci_half_width: f64,
}

/// Mixes a base seed and a trial index into an independent per-trial seed.
pub fn trial_seed(base: u64, trial: u64) -> u64 {
    let mut z = base ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (k - 1.0)).sqrt())
}

/// The noise-free value of a statistic.
pub fn true_value(statistic: Statistic, data: &VectorDataset, ctx: &MeasureContext) -> Result<f64> {
    match statistic {
        Statistic::Dispersion => dispersion(data, 2.0),
        Statistic::Q => q_statistic(data, ctx),
        Statistic::ISquared => i_squared(q_statistic(data, ctx)?, data.n()),
    }
}

/// One private release of `statistic` with its recorded draws.
pub fn release(
    statistic: Statistic,
    data: &VectorDataset,
    ctx: &MeasureContext,
    cfg: &EstimatorConfig,
) -> Result<(f64, NoiseDraw)> {
    match statistic {
        Statistic::Dispersion => noisy_dispersion(data, cfg),
        Statistic::Q => noisy_q(data, ctx, cfg),
        Statistic::ISquared => noisy_i_squared(data, ctx, cfg),
    }
}

/// Closed-form squared error of a release, evaluated on its own draws.
pub fn tmse_for(
    statistic: Statistic,
    data: &VectorDataset,
    ctx: &MeasureContext,
    draws: &NoiseDraw,
) -> Result<f64> {
    match statistic {
        Statistic::Dispersion => tmse_dispersion(data, draws),
        Statistic::Q => tmse_q(data, ctx, draws),
        Statistic::ISquared => {
            let z3 = draws
                .y3
                .ok_or_else(|| Error::Domain("I² draws carry no Z₃".into()))?;
            let q_true = q_statistic(data, ctx)?;
            let q_noisy = q_with_draws(data, ctx, &draws.y1, &draws.y2)?;
            tmse_i_squared(data.n(), q_true, q_noisy, z3)
        }
    }
}

struct TrialOutcome {
    emse: f64,
    tmse: f64,
    cmse: f64,
}

fn run_trial(
    statistic: Statistic,
    data: &VectorDataset,
    ctx: &MeasureContext,
    cfg: &EstimatorConfig,
    truth: f64,
    shape: &SensitivitySpec,
    trial: u64,
) -> Result<TrialOutcome> {
    let cfg = cfg.with_seed(trial_seed(cfg.seed, trial));
    let (noisy, draws) = release(statistic, data, ctx, &cfg)?;
    let tmse = tmse_for(statistic, data, ctx, &draws)?;
    let (central, _) = centralized_noisy(truth, cfg.budget.part(0)?, shape, &cfg)?;
    Ok(TrialOutcome {
        emse: (noisy - truth) * (noisy - truth),
        tmse,
        cmse: (central - truth) * (central - truth),
    })
}

fn run_trials(
    statistic: Statistic,
    data: &VectorDataset,
    ctx: &MeasureContext,
    cfg: &EstimatorConfig,
    truth: f64,
    trials: usize,
) -> Result<Vec<TrialOutcome>> {
    let shape = SensitivitySpec::from_shape(data.n(), data.d())?;
    let one = |t: usize| run_trial(statistic, data, ctx, cfg, truth, &shape, t as u64);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials).map(one).collect()
    }
}

/// Runs `trials` independent releases and aggregates EMSE, TMSE and CMSE.
///
/// Trial `t` uses seed `trial_seed(cfg.seed, t)`, so two configurations with
/// the same base seed see the same underlying random numbers.
pub fn evaluate(
    statistic: Statistic,
    data: &VectorDataset,
    ctx: &MeasureContext,
    cfg: &EstimatorConfig,
    trials: usize,
) -> Result<ErrorReport> {
    if trials == 0 {
        return domain("at least one trial is required");
    }
    let truth = true_value(statistic, data, ctx)?;
    let outcomes = run_trials(statistic, data, ctx, cfg, truth, trials)?;
    let col = |f: fn(&TrialOutcome) -> f64| outcomes.iter().map(f).collect::<Vec<_>>();
    let (emse, sd_emse) = mean_sd(&col(|o| o.emse));
    let (tmse, sd_tmse) = mean_sd(&col(|o| o.tmse));
    let (cmse, sd_cmse) = mean_sd(&col(|o| o.cmse));

    let ci_half_width = if cfg.zero_noise {
        0.0
    } else {
        let shape = SensitivitySpec::from_shape(data.n(), data.d())?;
        let xi1_sq = cfg.stage_sigma(&shape, cfg.budget.part(0)?)?.powi(2);
        match statistic {
            Statistic::Dispersion => dispersion_half_width(data.n(), xi1_sq)?,
            Statistic::Q => q_half_width(data.n(), &ctx.weights, xi1_sq)?,
            Statistic::ISquared => i_squared_half_width(data.n(), &ctx.weights, xi1_sq)?,
        }
    };

    Ok(ErrorReport {
        true_value: truth,
        emse,
        sd_emse,
        tmse,
        sd_tmse,
        cmse,
        sd_cmse,
        trials,
        ci_half_width,
    })
}

/// Mean and standard deviation of `(noisy − true)²` over `trials` releases.
pub fn emse(
    statistic: Statistic,
    data: &VectorDataset,
    cfg: &EstimatorConfig,
    trials: usize,
) -> Result<(f64, f64)> {
    let ctx = MeasureContext::new(data)?;
    let report = evaluate(statistic, data, &ctx, cfg, trials)?;
    Ok((report.emse, report.sd_emse))
}

/// `(1/n)·Σᵢ[Σⱼ(Y₁ⱼ(Y₁ⱼ − 2(xᵢⱼ − μⱼ)) + Y₂ⱼ)]²`.
pub fn tmse_dispersion(data: &VectorDataset, draws: &NoiseDraw) -> Result<f64> {
    let mean = dataset_mean(data)?;
    check_draws(data, draws)?;
    let total: f64 = data
        .rows()
        .map(|row| {
            let t: f64 = row
                .iter()
                .zip(&mean)
                .zip(draws.y1.iter().zip(&draws.y2))
                .map(|((x, m), (y1, y2))| y1 * (y1 - 2.0 * (x - m)) + y2)
                .sum();
            t * t
        })
        .sum();
    Ok(total / data.n() as f64)
}

/// `(1/n)·Σᵢ[wᵢ·ΣⱼZ₁ⱼ(Z₁ⱼ − 2(xᵢⱼ − μ̄ⱼ)) + ΣⱼZ₂ⱼ]²`.
pub fn tmse_q(data: &VectorDataset, ctx: &MeasureContext, draws: &NoiseDraw) -> Result<f64> {
    check_draws(data, draws)?;
    if ctx.weights.len() != data.n() || ctx.weighted_mean.len() != data.d() {
        return domain("measure context does not match dataset");
    }
    let z2_sum: f64 = draws.y2.iter().sum();
    let total: f64 = data
        .rows()
        .zip(&ctx.weights)
        .map(|(row, w)| {
            let t: f64 = row
                .iter()
                .zip(&ctx.weighted_mean)
                .zip(&draws.y1)
                .map(|((x, m), z)| z * (z - 2.0 * (x - m)))
                .sum();
            let t = w * t + z2_sum;
            t * t
        })
        .sum();
    Ok(total / data.n() as f64)
}

/// `(1/n)·[Z₃ − (n−1)/Q″ + (n−1)/Q]`², with both Q values raised to `n − 1` when smaller.
pub fn tmse_i_squared(n: usize, q_true: f64, q_noisy: f64, z3: f64) -> Result<f64> {
    if n < 2 {
        return domain(format!("I² needs at least two contributions, got {n}"));
    }
    if !(q_true > 0.0 && q_noisy > 0.0) {
        return domain(format!("Q values must be positive, got {q_true} and {q_noisy}"));
    }
    let df = (n - 1) as f64;
    let t = z3 - df / q_noisy.max(df) + df / q_true.max(df);
    Ok(t * t / n as f64)
}

fn check_draws(data: &VectorDataset, draws: &NoiseDraw) -> Result<()> {
    if draws.y1.len() != data.d() || draws.y2.len() != data.d() {
        return domain(format!(
            "draws of length {} and {} do not match dimension {}",
            draws.y1.len(),
            draws.y2.len(),
            data.d()
        ));
    }
    Ok(())
}

fn check_ci_inputs(n: usize, eta_sq: f64) -> Result<()> {
    if n == 0 {
        return domain("confidence interval needs n >= 1");
    }
    if !(eta_sq.is_finite() && eta_sq >= 0.0) {
        return domain(format!("noise variance must be finite and nonnegative, got {eta_sq}"));
    }
    Ok(())
}

/// `7.84·√6·(ξ₁²)²/√n`.
pub fn dispersion_half_width(n: usize, xi1_sq: f64) -> Result<f64> {
    check_ci_inputs(n, xi1_sq)?;
    Ok(DISPERSION_CI_CONSTANT * xi1_sq * xi1_sq / (n as f64).sqrt())
}

/// `Σᵢ 7.84·wᵢ·√6·(η₁²)²/√n`.
pub fn q_half_width(n: usize, weights: &[f64], eta1_sq: f64) -> Result<f64> {
    check_ci_inputs(n, eta1_sq)?;
    check_weights(weights)?;
    let w: f64 = weights.iter().sum();
    Ok(DISPERSION_CI_CONSTANT * w * eta1_sq * eta1_sq / (n as f64).sqrt())
}

/// `Σᵢ 0.625·(n−1)/(wᵢ·√n·(η₁²)²)`.
pub fn i_squared_half_width(n: usize, weights: &[f64], eta1_sq: f64) -> Result<f64> {
    check_ci_inputs(n, eta1_sq)?;
    check_weights(weights)?;
    if n == 1 {
        return Ok(0.0);
    }
    if eta1_sq == 0.0 {
        return domain("the I² interval is undefined for zero mean-stage noise");
    }
    let inv_w: f64 = weights.iter().map(|w| 1.0 / w).sum();
    let scale = (n - 1) as f64 / ((n as f64).sqrt() * eta1_sq * eta1_sq);
    Ok(I_SQUARED_CI_CONSTANT * scale * inv_w)
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return domain(format!("weights must be positive and finite, got {w}"));
    }
    Ok(())
}

fn interval(center: f64, half: f64) -> (f64, f64) {
    (center - half, center + half)
}

/// 95% interval for the true dispersion around a released `D″`.
pub fn ci_dispersion(d_noisy: f64, n: usize, xi1_sq: f64) -> Result<(f64, f64)> {
    Ok(interval(d_noisy, dispersion_half_width(n, xi1_sq)?))
}

/// 95% interval for the true Q around a released `Q″`.
pub fn ci_q(q_noisy: f64, n: usize, weights: &[f64], eta1_sq: f64) -> Result<(f64, f64)> {
    Ok(interval(q_noisy, q_half_width(n, weights, eta1_sq)?))
}

/// 95% interval for the true I² around a released `(I²)‴`; not clamped to `[0, 1]`.
pub fn ci_i_squared(i2_noisy: f64, n: usize, weights: &[f64], eta1_sq: f64) -> Result<(f64, f64)> {
    Ok(interval(i2_noisy, i_squared_half_width(n, weights, eta1_sq)?))
}

/// Squared gap between the dispersion about `μ` and about `μ′`, per coordinate,
/// summed over coordinates.
///
/// Since deviations about the exact mean sum to zero, this equals `Σⱼ(μⱼ − μ′ⱼ)⁴`.
pub fn variance_oracle_dispersion(data: &VectorDataset, mu_noisy: &[f64]) -> Result<f64> {
    let mean = dataset_mean(data)?;
    let unit = vec![1.0; data.n()];
    coordinate_gap(data, &unit, &mean, mu_noisy)
}

/// Weighted analogue of [`variance_oracle_dispersion`] about the weighted mean.
///
/// Algebraically `w̄²·Σⱼ(μ̄ⱼ − μ̄′ⱼ)⁴` with `w̄` the mean weight.
pub fn variance_oracle_q(data: &VectorDataset, ctx: &MeasureContext, mu_bar_noisy: &[f64]) -> Result<f64> {
    coordinate_gap(data, &ctx.weights, &ctx.weighted_mean, mu_bar_noisy)
}

fn coordinate_gap(data: &VectorDataset, weights: &[f64], center: &[f64], shifted: &[f64]) -> Result<f64> {
    let d = data.d();
    if center.len() != d || shifted.len() != d || weights.len() != data.n() {
        return domain("oracle inputs do not match the dataset shape");
    }
    let n = data.n() as f64;
    let mut about_center = vec![0.0; d];
    let mut about_shifted = vec![0.0; d];
    for (row, w) in data.rows().zip(weights) {
        for j in 0..d {
            let a = row[j] - center[j];
            let b = row[j] - shifted[j];
            about_center[j] += w * a * a;
            about_shifted[j] += w * b * b;
        }
    }
    Ok(about_center
        .iter()
        .zip(&about_shifted)
        .map(|(a, b)| {
            let g = a / n - b / n;
            g * g
        })
        .sum())
}
