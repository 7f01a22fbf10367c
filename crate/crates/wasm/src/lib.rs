//! Browser bindings for the demo page in `www/`.
//!
//! Each exported function takes plain numbers and returns a JSON string; the
//! `*_points` functions hold the logic and are what the native tests exercise.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use hetero_dp::data_pipeline::synthetic_dataset;
use hetero_dp::error_analysis::{evaluate, Statistic};
use hetero_dp::gaussian_mech::{agm_sigma, cgm_sigma, BudgetPart, Mechanism, PrivacyBudget, SensitivitySpec, DEFAULT_AGM_TOL};
use hetero_dp::hetero_measures::{measure, MeasureContext};
use hetero_dp::private_estimators::{EstimatorConfig, Setting};
use hetero_dp::{Error, Result};

/// Keeps a single call from freezing the tab.
const MAX_WORK: usize = 20_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct SigmaPoint {
    pub epsilon: f64,
    pub sigma_agm: f64,
    /// `None` for `ε ≥ 1`.
    pub sigma_cgm: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasurePoint {
    pub heterogeneity: f64,
    pub dispersion: f64,
    pub q: f64,
    pub i_squared: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorPoint {
    pub epsilon: f64,
    pub emse: f64,
    pub tmse: f64,
    pub cmse: f64,
}

fn grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(2..=2000).contains(&points) || !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Domain(format!(
            "need 0 < lo < hi and 2..=2000 points, got [{lo}, {hi}] with {points}"
        )));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|k| lo + step * k as f64).collect())
}

pub fn calibration_points(delta: f64, delta_l2: f64, eps_lo: f64, eps_hi: f64, points: usize) -> Result<Vec<SigmaPoint>> {
    let sens = SensitivitySpec::new(delta_l2, 1, 1)?;
    grid(eps_lo, eps_hi, points)?
        .into_iter()
        .map(|epsilon| {
            let part = BudgetPart::new(epsilon, delta)?;
            Ok(SigmaPoint {
                epsilon,
                sigma_agm: agm_sigma(&sens, part, DEFAULT_AGM_TOL)?.sigma,
                sigma_cgm: cgm_sigma(&sens, part).ok().map(|r| r.sigma),
            })
        })
        .collect()
}

pub fn measure_points(n: usize, d: usize, seed: u64, steps: usize) -> Result<Vec<MeasurePoint>> {
    if steps < 2 || n.saturating_mul(d).saturating_mul(steps) > MAX_WORK {
        return Err(Error::Domain("too few steps or too much work for the browser".into()));
    }
    (0..steps)
        .map(|k| {
            let h = k as f64 / (steps - 1) as f64;
            let r = measure(&synthetic_dataset(n, d, h, seed)?, 2.0)?;
            Ok(MeasurePoint {
                heterogeneity: h,
                dispersion: r.dispersion,
                q: r.q_value,
                i_squared: r.i_squared,
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn error_points(
    statistic: Statistic,
    mechanism: Mechanism,
    n: usize,
    d: usize,
    heterogeneity: f64,
    delta: f64,
    epsilons: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<ErrorPoint>> {
    if n.saturating_mul(d).saturating_mul(trials).saturating_mul(epsilons.len()) > MAX_WORK {
        return Err(Error::Domain("too much work for the browser; lower n, d or trials".into()));
    }
    let data = synthetic_dataset(n, d, heterogeneity, seed)?;
    let ctx = MeasureContext::new(&data)?;
    let weights = vec![1.0; statistic.budget_parts()];
    let mut out = Vec::new();
    for &epsilon in epsilons {
        let budget = PrivacyBudget::weighted_split(epsilon, delta, &weights)?;
        // CGM is only defined per stage below ε = 1.
        if mechanism == Mechanism::Classical && budget.split.iter().any(|p| p.epsilon >= 1.0) {
            continue;
        }
        let cfg = EstimatorConfig::new(mechanism, Setting::Distributed, budget, seed);
        let r = evaluate(statistic, &data, &ctx, &cfg, trials)?;
        out.push(ErrorPoint {
            epsilon,
            emse: r.emse,
            tmse: r.tmse,
            cmse: r.cmse,
        });
    }
    Ok(out)
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    let v = r.map_err(|e| JsValue::from_str(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string()))
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T> {
    s.parse()
}

/// `[{epsilon, sigma_agm, sigma_cgm}]` on an evenly spaced ε grid.
#[wasm_bindgen]
pub fn calibration_curve(delta: f64, delta_l2: f64, eps_lo: f64, eps_hi: f64, points: usize) -> std::result::Result<String, JsValue> {
    to_js(calibration_points(delta, delta_l2, eps_lo, eps_hi, points))
}

/// True D, Q and I² of synthetic data as the heterogeneity knob goes from 0 to 1.
#[wasm_bindgen]
pub fn measures_vs_heterogeneity(n: usize, d: usize, seed: u32, steps: usize) -> std::result::Result<String, JsValue> {
    to_js(measure_points(n, d, u64::from(seed), steps))
}

/// EMSE, TMSE and CMSE against ε for one statistic (`dispersion`, `q`, `i_squared`)
/// and mechanism (`agm`, `cgm`); `epsilons` is comma separated.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn error_curve(
    statistic: &str,
    mechanism: &str,
    n: usize,
    d: usize,
    heterogeneity: f64,
    delta: f64,
    epsilons: &str,
    trials: usize,
    seed: u32,
) -> std::result::Result<String, JsValue> {
    let run = || -> Result<Vec<ErrorPoint>> {
        let eps = epsilons
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Domain(format!("epsilon '{s}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        error_points(parse(statistic)?, parse(mechanism)?, n, d, heterogeneity, delta, &eps, trials, u64::from(seed))
    };
    to_js(run())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_curve_orders_mechanisms() {
        let pts = calibration_points(1e-5, 1.0, 0.1, 2.0, 20).unwrap();
        assert_eq!(pts.len(), 20);
        for p in &pts {
            match p.sigma_cgm {
                Some(c) => assert!(p.epsilon < 1.0 && p.sigma_agm < c),
                None => assert!(p.epsilon >= 1.0),
            }
        }
        assert!(pts.windows(2).all(|w| w[1].sigma_agm < w[0].sigma_agm));
        assert!(calibration_points(1e-5, 1.0, 2.0, 1.0, 5).is_err());
    }

    #[test]
    fn measures_track_heterogeneity() {
        let pts = measure_points(400, 8, 3, 5).unwrap();
        assert_eq!(pts[0].heterogeneity, 0.0);
        assert_eq!(pts[4].heterogeneity, 1.0);
        assert!(pts[4].i_squared > pts[0].i_squared);
    }

    #[test]
    fn error_curve_skips_cgm_out_of_range() {
        let pts = error_points(Statistic::Dispersion, Mechanism::Classical, 100, 4, 0.5, 1e-5, &[0.5, 1.5, 4.0], 10, 1)
            .unwrap();
        // 1.5 split in two is 0.75 per stage; 4.0 is out of range.
        assert_eq!(pts.len(), 2);
        let agm = error_points(Statistic::Dispersion, Mechanism::Analytic, 100, 4, 0.5, 1e-5, &[0.5, 4.0], 10, 1).unwrap();
        assert!(agm[1].emse < agm[0].emse);
    }

    #[test]
    fn json_wrappers_round_trip() {
        let s = error_curve("q", "agm", 50, 3, 0.3, 1e-5, "1, 2", 5, 7).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 2);
        // Error paths build a JsValue, which only exists on wasm.
        assert!(measure_points(10, 2, 0, 1).is_err());
    }
}
