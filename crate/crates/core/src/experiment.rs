//! Experiment orchestration: calibration tables, trial sweeps over a plan,
//! CSV/SVG emission and heterogeneity comparisons.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::data_pipeline::{stratified_sample, DatasetDescriptor, HeterogeneityProfile};
use crate::error::{domain, Error, Result};
use crate::error_analysis::{evaluate, true_value, Statistic};
use crate::gaussian_mech::{
    agm_sigma, cgm_sigma, BudgetPart, Mechanism, PrivacyBudget, SensitivitySpec, DEFAULT_AGM_TOL,
};
use crate::hetero_measures::{MeasureContext, VectorDataset};
use crate::private_estimators::{EstimatorConfig, Setting};

pub const DEFAULT_EPSILON_GRID: [f64; 7] = [0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0];
pub const SWEEP_DELTA: f64 = 1e-5;
pub const FIXED_EPSILON: f64 = 0.25;
pub const FIXED_DELTA: f64 = 0.1;
pub const DEFAULT_TRIALS: usize = 100;

/// One row of a calibration table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub epsilon: f64,
    pub delta: f64,
    pub delta_l2: f64,
    pub sigma_agm: f64,
    /// Absent when `ε ≥ 1` (outside the classical mechanism's range).
    pub sigma_cgm: Option<f64>,
    pub ratio: Option<f64>,
}

/// σ under both mechanisms for every `(ε, δ, Δ)` combination.
pub fn run_calibrate(epsilons: &[f64], deltas: &[f64], sensitivities: &[f64]) -> Result<Vec<CalibrationRow>> {
    if epsilons.is_empty() || deltas.is_empty() || sensitivities.is_empty() {
        return domain("calibration grid must be nonempty in every axis");
    }
    let mut rows = Vec::new();
    for &delta_l2 in sensitivities {
        let sens = SensitivitySpec::new(delta_l2, 1, 1)?;
        for &delta in deltas {
            for &epsilon in epsilons {
                let part = BudgetPart::new(epsilon, delta)?;
                let sigma_agm = agm_sigma(&sens, part, DEFAULT_AGM_TOL)?.sigma;
                let sigma_cgm = match cgm_sigma(&sens, part) {
                    Ok(r) => Some(r.sigma),
                    Err(Error::CgmRange { .. }) => None,
                    Err(e) => return Err(e),
                };
                rows.push(CalibrationRow {
                    epsilon,
                    delta,
                    delta_l2,
                    sigma_agm,
                    sigma_cgm,
                    ratio: sigma_cgm.map(|c| sigma_agm / c),
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub dataset: DatasetDescriptor,
    pub profiles: Vec<HeterogeneityProfile>,
    pub statistics: Vec<Statistic>,
    pub mechanisms: Vec<Mechanism>,
    pub settings: Vec<Setting>,
    pub epsilons: Vec<f64>,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    /// Relative sizes of the two stages used by dispersion and Q.
    pub split2: Vec<f64>,
    /// Relative sizes of the three stages used by I².
    pub split3: Vec<f64>,
    #[serde(default)]
    pub zero_noise: bool,
}

impl ExperimentPlan {
    /// ε sweep over the default grid at `δ = 1e-5`, every statistic, AGM, distributed.
    pub fn sweep(dataset: DatasetDescriptor, profiles: Vec<HeterogeneityProfile>) -> Self {
        Self {
            dataset,
            profiles,
            statistics: Statistic::ALL.to_vec(),
            mechanisms: vec![Mechanism::Analytic],
            settings: vec![Setting::Distributed],
            epsilons: DEFAULT_EPSILON_GRID.to_vec(),
            delta: SWEEP_DELTA,
            trials: DEFAULT_TRIALS,
            seed: 0,
            split2: vec![1.0; 2],
            split3: vec![1.0; 3],
            zero_noise: false,
        }
    }

    /// Single privacy level `ε = 0.25`, `δ = 0.1`, both mechanisms.
    pub fn fixed(dataset: DatasetDescriptor, profiles: Vec<HeterogeneityProfile>) -> Self {
        Self {
            mechanisms: vec![Mechanism::Analytic, Mechanism::Classical],
            epsilons: vec![FIXED_EPSILON],
            delta: FIXED_DELTA,
            ..Self::sweep(dataset, profiles)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let plan_err = |m: String| Err(Error::Plan(m));
        if self.profiles.is_empty() {
            return plan_err("plan has no profiles".into());
        }
        if self.statistics.is_empty() || self.mechanisms.is_empty() || self.settings.is_empty() {
            return plan_err("plan needs at least one statistic, mechanism and setting".into());
        }
        if self.epsilons.is_empty() {
            return plan_err("plan has an empty epsilon grid".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return plan_err(format!("epsilon {e} is not positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return plan_err(format!("delta {} outside (0, 1)", self.delta));
        }
        if self.trials == 0 {
            return plan_err("trials must be at least 1".into());
        }
        if self.split2.len() != 2 || self.split3.len() != 3 {
            return plan_err(format!(
                "budget splits need 2 and 3 weights, got {} and {}",
                self.split2.len(),
                self.split3.len()
            ));
        }
        let mut names: Vec<&str> = self.profiles.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return plan_err("profile names must be unique".into());
        }
        for p in &self.profiles {
            p.validate()?;
        }
        Ok(())
    }

    pub fn budget(&self, statistic: Statistic, epsilon: f64) -> Result<PrivacyBudget> {
        let weights = match statistic.budget_parts() {
            2 => &self.split2,
            _ => &self.split3,
        };
        PrivacyBudget::weighted_split(epsilon, self.delta, weights)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// One plan cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub statistic: Statistic,
    pub mechanism: Mechanism,
    pub setting: Setting,
    pub profile: String,
    pub epsilon: f64,
    pub delta: f64,
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    pub true_value: f64,
    /// Smallest and average true value of this statistic over the plan's profiles.
    pub true_min: f64,
    pub true_mean: f64,
    pub emse: f64,
    pub sd_emse: f64,
    pub tmse: f64,
    pub sd_tmse: f64,
    pub cmse: f64,
    pub sd_cmse: f64,
    pub ci_half_width: f64,
}

/// Profile subsets drawn for a plan, with their measure contexts.
pub struct PreparedProfiles {
    pub samples: Vec<(HeterogeneityProfile, VectorDataset, MeasureContext)>,
}

pub fn prepare_profiles(plan: &ExperimentPlan, data: &VectorDataset) -> Result<PreparedProfiles> {
    let mut samples = Vec::with_capacity(plan.profiles.len());
    for profile in &plan.profiles {
        let sample = stratified_sample(data, profile, plan.seed).map_err(|e| match e {
            Error::Capacity { .. } => Error::Plan(format!("profile '{}': {e}", profile.name)),
            other => other,
        })?;
        if sample.n() < 2 {
            return Err(Error::Plan(format!(
                "profile '{}' sampled {} records; at least 2 are needed",
                profile.name,
                sample.n()
            )));
        }
        let ctx = MeasureContext::new(&sample)?;
        info!(
            "profile {}: n={} d={} ratios={:?}",
            profile.name,
            sample.n(),
            sample.d(),
            profile.ratios
        );
        samples.push((profile.clone(), sample, ctx));
    }
    Ok(PreparedProfiles { samples })
}

/// Loads the dataset and runs every cell of the plan.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<ResultRow>> {
    plan.validate()?;
    info!("plan: {}", serde_json::to_string(plan)?);
    let data = plan.dataset.load()?;
    run_experiment_on(plan, &data)
}

/// Runs a plan against an already loaded dataset.
pub fn run_experiment_on(plan: &ExperimentPlan, data: &VectorDataset) -> Result<Vec<ResultRow>> {
    plan.validate()?;
    let prepared = prepare_profiles(plan, data)?;

    let mut truths: BTreeMap<Statistic, Vec<f64>> = BTreeMap::new();
    for &stat in &plan.statistics {
        let values = prepared
            .samples
            .iter()
            .map(|(_, s, ctx)| true_value(stat, s, ctx))
            .collect::<Result<Vec<_>>>()?;
        truths.insert(stat, values);
    }

    let mut keyed = Vec::new();
    for &stat in &plan.statistics {
        let values = &truths[&stat];
        let true_min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let true_mean = values.iter().sum::<f64>() / values.len() as f64;
        for &mech in &plan.mechanisms {
            for &setting in &plan.settings {
                for (pi, (profile, sample, ctx)) in prepared.samples.iter().enumerate() {
                    for (ei, &epsilon) in plan.epsilons.iter().enumerate() {
                        let budget = plan.budget(stat, epsilon)?;
                        if mech == Mechanism::Classical && budget.split.iter().any(|p| p.epsilon >= 1.0) {
                            warn!(
                                "skipping {stat} CGM at epsilon {epsilon}: a stage reaches epsilon >= 1"
                            );
                            continue;
                        }
                        let cfg = EstimatorConfig::new(mech, setting, budget, plan.seed)
                            .zero_noise(plan.zero_noise);
                        let r = evaluate(stat, sample, ctx, &cfg, plan.trials)?;
                        let row = ResultRow {
                            dataset: plan.dataset.name.clone(),
                            statistic: stat,
                            mechanism: mech,
                            setting,
                            profile: profile.name.clone(),
                            epsilon,
                            delta: plan.delta,
                            n: sample.n(),
                            d: sample.d(),
                            trials: r.trials,
                            true_value: r.true_value,
                            true_min,
                            true_mean,
                            emse: r.emse,
                            sd_emse: r.sd_emse,
                            tmse: r.tmse,
                            sd_tmse: r.sd_tmse,
                            cmse: r.cmse,
                            sd_cmse: r.sd_cmse,
                            ci_half_width: r.ci_half_width,
                        };
                        keyed.push(((stat, mech, setting, pi, ei), row));
                    }
                }
            }
        }
    }
    keyed.sort_by_key(|a| a.0);
    Ok(keyed.into_iter().map(|(_, r)| r).collect())
}

pub fn write_csv(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Writes one chart per (dataset, statistic, mechanism, setting): EMSE against ε,
/// one line per profile, log-scaled y axis. Returns the written paths.
pub fn write_svg_charts(dir: impl AsRef<Path>, rows: &[ResultRow]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut groups: BTreeMap<(String, Statistic, Mechanism, Setting), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.dataset.clone(), r.statistic, r.mechanism, r.setting))
            .or_default()
            .push(r);
    }
    let mut written = Vec::new();
    for ((dataset, stat, mech, setting), group) in groups {
        let title = format!("{dataset}: EMSE of {stat} ({mech}, {setting})");
        let svg = render_chart(&title, &group);
        let path = dir.join(format!("{dataset}_{stat}_{mech}_{setting}.svg").to_lowercase());
        fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}

fn render_chart(title: &str, rows: &[&ResultRow]) -> String {
    let (w, h) = (560.0, 360.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;

    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in rows {
        match series.iter_mut().find(|(name, _)| *name == r.profile) {
            Some((_, pts)) => pts.push((r.epsilon, r.emse)),
            None => series.push((r.profile.clone(), vec![(r.epsilon, r.emse)])),
        }
    }
    for (_, pts) in &mut series {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let xs = rows.iter().map(|r| r.epsilon);
    let x_min = xs.clone().fold(f64::INFINITY, f64::min);
    let mut x_max = xs.fold(f64::NEG_INFINITY, f64::max);
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    let positive: Vec<f64> = rows.iter().map(|r| r.emse).filter(|v| *v > 0.0).collect();
    let (mut y_lo, mut y_hi) = positive
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v.log10()), hi.max(v.log10()))
        });
    if positive.is_empty() {
        (y_lo, y_hi) = (-1.0, 1.0);
    }
    y_lo = y_lo.floor();
    y_hi = y_hi.ceil().max(y_lo + 1.0);

    let px = |x: f64| left + (x - x_min) / (x_max - x_min) * pw;
    let py = |v: f64| top + (y_hi - v.log10()) / (y_hi - y_lo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    for r in rows {
        let _ = writeln!(
            s,
            "<!-- data profile={} epsilon={} emse={:e} sd_emse={:e} tmse={:e} -->",
            r.profile, r.epsilon, r.emse, r.sd_emse, r.tmse
        );
    }
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="13">{}</text>"#, left + pw / 2.0, xml_escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for e in (y_lo as i32)..=(y_hi as i32) {
        let y = top + (y_hi - e as f64) / (y_hi - y_lo) * ph;
        let _ = writeln!(
            s,
            r##"<line x1="{left}" x2="{}" y1="{y}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">1e{e}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0
        );
    }
    let mut eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    for e in eps {
        let x = px(e);
        let _ = writeln!(
            s,
            r#"<line x1="{x}" x2="{x}" y1="{}" y2="{}" stroke="black"/><text x="{x}" y="{}" text-anchor="middle">{e}</text>"#,
            top + ph,
            top + ph + 5.0,
            top + ph + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">epsilon</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">EMSE</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    if positive.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">all EMSE values are zero</text>"#,
            left + pw / 2.0,
            top + ph / 2.0
        );
    }
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .filter(|(_, v)| *v > 0.0)
            .map(|&(x, v)| format!("{:.2},{:.2}", px(x), py(v)))
            .collect();
        if !coords.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                coords.join(" ")
            );
        }
        let ly = top + 14.0 + 16.0 * k as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            xml_escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Percentage change of EMSE from one profile to another, averaged over ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub dataset: String,
    pub statistic: Statistic,
    pub mechanism: Mechanism,
    pub setting: Setting,
    /// `balanced-vs-skewed` or `label-count`.
    pub kind: String,
    pub comparison: String,
    pub baseline: String,
    pub variant: String,
    pub mean_pct_change: f64,
}

/// `100·(b − a)/a`; zero when both are zero.
pub fn pct_change(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        if b == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(b)
        }
    } else {
        100.0 * (b - a) / a
    }
}

fn find_profile(profiles: &[HeterogeneityProfile], labels: usize, balanced: bool) -> Option<&HeterogeneityProfile> {
    profiles
        .iter()
        .find(|p| p.label_count() == labels && p.is_balanced() == balanced)
}

/// The (kind, label, baseline, variant) pairs the plan's profiles support.
pub fn comparison_pairs(plan: &ExperimentPlan) -> Result<Vec<(String, String, String, String)>> {
    let ps = &plan.profiles;
    let mut pairs = Vec::new();
    for k in [10, 5, 2] {
        let balanced = find_profile(ps, k, true);
        let skewed = find_profile(ps, k, false);
        match (balanced, skewed) {
            (Some(a), Some(b)) => pairs.push((
                "balanced-vs-skewed".to_string(),
                format!("{k} labels"),
                a.name.clone(),
                b.name.clone(),
            )),
            (None, None) => {}
            (Some(p), None) | (None, Some(p)) => {
                return Err(Error::Plan(format!(
                    "profile '{}' has no {} partner with {k} labels",
                    p.name,
                    if p.is_balanced() { "skewed" } else { "balanced" }
                )))
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Plan("no balanced/skewed profile pairs in the plan".into()));
    }
    for (balanced, tag) in [(false, "SH"), (true, "non-SH")] {
        for (hi, lo) in [(10, 5), (5, 2)] {
            if let (Some(a), Some(b)) = (find_profile(ps, hi, balanced), find_profile(ps, lo, balanced)) {
                pairs.push((
                    "label-count".to_string(),
                    format!("{tag}: {hi}v{lo}"),
                    a.name.clone(),
                    b.name.clone(),
                ));
            }
        }
    }
    Ok(pairs)
}

/// Summarizes already computed rows into comparison rows.
pub fn compare_rows(plan: &ExperimentPlan, rows: &[ResultRow]) -> Result<Vec<ComparisonRow>> {
    let pairs = comparison_pairs(plan)?;
    let mut out = Vec::new();
    for &stat in &plan.statistics {
        for &mech in &plan.mechanisms {
            for &setting in &plan.settings {
                let emse = |profile: &str, eps: f64| {
                    rows.iter()
                        .find(|r| {
                            r.statistic == stat
                                && r.mechanism == mech
                                && r.setting == setting
                                && r.profile == profile
                                && r.epsilon == eps
                        })
                        .map(|r| r.emse)
                };
                for (kind, label, a, b) in &pairs {
                    let changes: Vec<f64> = plan
                        .epsilons
                        .iter()
                        .filter_map(|&e| Some(pct_change(emse(a, e)?, emse(b, e)?)))
                        .collect();
                    if changes.is_empty() {
                        continue;
                    }
                    out.push(ComparisonRow {
                        dataset: plan.dataset.name.clone(),
                        statistic: stat,
                        mechanism: mech,
                        setting,
                        kind: kind.clone(),
                        comparison: label.clone(),
                        baseline: a.clone(),
                        variant: b.clone(),
                        mean_pct_change: changes.iter().sum::<f64>() / changes.len() as f64,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Runs the plan and reports EMSE percentage changes between paired profiles.
pub fn run_heterogeneity_comparison(plan: &ExperimentPlan) -> Result<(Vec<ResultRow>, Vec<ComparisonRow>)> {
    comparison_pairs(plan)?;
    let rows = run_experiment(plan)?;
    let cmp = compare_rows(plan, &rows)?;
    Ok((rows, cmp))
}

/// Same as [`run_heterogeneity_comparison`] on a loaded dataset.
pub fn run_heterogeneity_comparison_on(
    plan: &ExperimentPlan,
    data: &VectorDataset,
) -> Result<(Vec<ResultRow>, Vec<ComparisonRow>)> {
    comparison_pairs(plan)?;
    let rows = run_experiment_on(plan, data)?;
    let cmp = compare_rows(plan, &rows)?;
    Ok((rows, cmp))
}

pub fn write_comparison_csv(path: impl AsRef<Path>, rows: &[ComparisonRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_pipeline::SyntheticSpec;

    fn small_plan() -> ExperimentPlan {
        let ds = DatasetDescriptor::synthetic(
            "synthetic",
            4,
            SyntheticSpec {
                pool_size: 2000,
                heterogeneity: 0.6,
                seed: 1,
            },
        );
        let profiles = HeterogeneityProfile::canonical(0.1).unwrap();
        let mut plan = ExperimentPlan::sweep(ds, profiles);
        plan.epsilons = vec![0.5, 2.0];
        plan.trials = 5;
        plan
    }

    #[test]
    fn calibration_table() {
        let rows = run_calibrate(&[0.5, 1.5], &[1e-5], &[1.0]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].ratio.unwrap() < 1.0);
        assert!(rows[1].sigma_cgm.is_none() && rows[1].ratio.is_none());
        assert!(run_calibrate(&[], &[0.1], &[1.0]).is_err());
    }

    #[test]
    fn plan_validation() {
        let mut plan = small_plan();
        assert!(plan.validate().is_ok());
        plan.epsilons.clear();
        assert!(matches!(plan.validate(), Err(Error::Plan(_))));
        let mut plan = small_plan();
        plan.split3 = vec![1.0, 1.0];
        assert!(plan.validate().is_err());
    }

    #[test]
    fn rows_cover_plan_and_are_deterministic() {
        let plan = small_plan();
        let a = run_experiment(&plan).unwrap();
        assert_eq!(a.len(), 3 * 6 * 2);
        assert_eq!(a, run_experiment(&plan).unwrap());
        assert!(a.iter().all(|r| r.true_min <= r.true_value));
    }

    #[test]
    fn unpaired_profiles_rejected() {
        let mut plan = small_plan();
        plan.profiles.remove(1);
        assert!(matches!(comparison_pairs(&plan), Err(Error::Plan(_))));
    }

    #[test]
    fn identical_pair_gives_zero_change() {
        assert_eq!(pct_change(2.0, 2.0), 0.0);
        assert_eq!(pct_change(0.0, 0.0), 0.0);
        assert_eq!(pct_change(2.0, 3.0), 50.0);
    }

    #[test]
    fn capacity_error_names_profile() {
        let mut plan = small_plan();
        plan.profiles = vec![
            HeterogeneityProfile::new("greedy", vec![1, 0], 0.9).unwrap(),
        ];
        match run_experiment(&plan) {
            Err(Error::Plan(m)) => assert!(m.contains("greedy"), "{m}"),
            other => panic!("expected plan error, got {other:?}"),
        }
    }
}
