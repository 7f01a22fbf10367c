//! Noise-free heterogeneity statistics of a vector dataset.
//!
//! Every statistic is reported as a scalar: per-vector quantities are summed
//! over coordinates and then averaged over the `n` contributions.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Lower clamp on within-vector variance before it is inverted into a weight.
pub const VARIANCE_FLOOR: f64 = 1e-9;

/// `n` contributions in `[0,1]^d`, stored row-major, each with a label.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorDataset {
    values: Vec<f64>,
    labels: Vec<u32>,
    n: usize,
    d: usize,
}

impl VectorDataset {
    pub fn new(values: Vec<f64>, labels: Vec<u32>, d: usize) -> Result<Self> {
        if d == 0 {
            return domain("dataset dimension must be at least 1");
        }
        if !values.len().is_multiple_of(d) {
            return domain(format!(
                "{} values do not form rows of length {d}",
                values.len()
            ));
        }
        let n = values.len() / d;
        if labels.len() != n {
            return domain(format!("{} labels for {n} rows", labels.len()));
        }
        if let Some(pos) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return domain(format!(
                "row {} coordinate {} is {} (outside [0, 1])",
                pos / d,
                pos % d,
                values[pos]
            ));
        }
        Ok(Self {
            values,
            labels,
            n,
            d,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u32>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return domain("rows have differing lengths");
        }
        Self::new(rows.concat(), labels, d)
    }

    /// Unlabelled rows (every label 0).
    pub fn unlabelled(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_rows(rows, vec![0; rows.len()])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.d)
    }

    /// New dataset holding the given rows in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self {
            values,
            labels,
            n: indices.len(),
            d: self.d,
        }
    }

    fn require_rows(&self) -> Result<()> {
        if self.n == 0 {
            return domain("dataset has no rows");
        }
        Ok(())
    }
}

/// Means, weights and within-vector variances shared by the weighted statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureContext {
    pub mean: Vec<f64>,
    pub weighted_mean: Vec<f64>,
    pub weights: Vec<f64>,
    pub within_variances: Vec<f64>,
}

impl MeasureContext {
    /// Inverse-variance weights `wᵢ = 1/max(sᵢ², VARIANCE_FLOOR)`.
    pub fn new(data: &VectorDataset) -> Result<Self> {
        data.require_rows()?;
        let within_variances: Vec<f64> = data.rows().map(population_variance).collect();
        let weights = within_variances
            .iter()
            .map(|s2| 1.0 / s2.max(VARIANCE_FLOOR))
            .collect();
        Self::assemble(data, weights, within_variances)
    }

    /// Context with caller-supplied weights (recorded variances are `1/wᵢ`).
    pub fn with_weights(data: &VectorDataset, weights: Vec<f64>) -> Result<Self> {
        data.require_rows()?;
        let within_variances = weights.iter().map(|w| 1.0 / w).collect();
        Self::assemble(data, weights, within_variances)
    }

    pub fn unit_weights(data: &VectorDataset) -> Result<Self> {
        Self::with_weights(data, vec![1.0; data.n()])
    }

    fn assemble(data: &VectorDataset, weights: Vec<f64>, within_variances: Vec<f64>) -> Result<Self> {
        let mean = dataset_mean(data)?;
        let weighted_mean = weighted_mean(data, &weights)?;
        Ok(Self {
            mean,
            weighted_mean,
            weights,
            within_variances,
        })
    }

    pub fn mean_weight(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.weights.len() as f64
    }

    fn check_against(&self, data: &VectorDataset) -> Result<()> {
        if self.weights.len() != data.n() {
            return domain(format!(
                "context has {} weights for {} rows",
                self.weights.len(),
                data.n()
            ));
        }
        if self.weighted_mean.len() != data.d() || self.mean.len() != data.d() {
            return domain(format!(
                "context dimension {} does not match dataset dimension {}",
                self.weighted_mean.len(),
                data.d()
            ));
        }
        Ok(())
    }
}

/// True heterogeneity statistics of one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneityReport {
    pub dispersion: f64,
    pub q_value: f64,
    pub i_squared: f64,
    pub dispersion_exponent: f64,
}

/// Computes D (at exponent `p`), Q and I² with inverse-variance weights.
pub fn measure(data: &VectorDataset, p: f64) -> Result<HeterogeneityReport> {
    let ctx = MeasureContext::new(data)?;
    let q_value = q_statistic(data, &ctx)?;
    Ok(HeterogeneityReport {
        dispersion: dispersion(data, p)?,
        q_value,
        i_squared: i_squared(q_value, data.n())?,
        dispersion_exponent: p,
    })
}

pub fn dataset_mean(data: &VectorDataset) -> Result<Vec<f64>> {
    data.require_rows()?;
    let mut acc = vec![0.0; data.d()];
    for row in data.rows() {
        for (a, x) in acc.iter_mut().zip(row) {
            *a += x;
        }
    }
    let n = data.n() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Population variance of one vector's coordinates.
pub fn within_vector_variance(vector: &[f64]) -> Result<f64> {
    if vector.is_empty() {
        return domain("within-vector variance of an empty vector");
    }
    Ok(population_variance(vector))
}

fn population_variance(v: &[f64]) -> f64 {
    let d = v.len() as f64;
    let m = v.iter().sum::<f64>() / d;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / d
}

/// `Σwᵢxᵢ / Σwᵢ`, coordinate-wise.
pub fn weighted_mean(data: &VectorDataset, weights: &[f64]) -> Result<Vec<f64>> {
    data.require_rows()?;
    if weights.len() != data.n() {
        return domain(format!("{} weights for {} rows", weights.len(), data.n()));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return domain(format!("weights must be positive and finite, got {w}"));
    }
    let mut acc = vec![0.0; data.d()];
    for (row, w) in data.rows().zip(weights) {
        for (a, x) in acc.iter_mut().zip(row) {
            *a += w * x;
        }
    }
    let total: f64 = weights.iter().sum();
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(acc)
}

/// `Σⱼ (xⱼ − cⱼ)²`. The noisy estimators call this too, so zero noise
/// reproduces the true statistics bit-for-bit.
#[inline]
pub(crate) fn sq_dev(row: &[f64], center: &[f64]) -> f64 {
    row.iter()
        .zip(center)
        .map(|(x, c)| {
            let e = x - c;
            e * e
        })
        .sum()
}

/// `(1/n)·ΣᵢΣⱼ |xᵢⱼ − μⱼ|ᵖ`.
pub fn dispersion(data: &VectorDataset, p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return domain(format!("dispersion exponent must be >= 1, got {p}"));
    }
    let mean = dataset_mean(data)?;
    let total: f64 = if p == 2.0 {
        data.rows().map(|row| sq_dev(row, &mean)).sum()
    } else {
        data.rows()
            .map(|row| {
                row.iter()
                    .zip(&mean)
                    .map(|(x, m)| (x - m).abs().powf(p))
                    .sum::<f64>()
            })
            .sum()
    };
    Ok(total / data.n() as f64)
}

/// `(1/n)·Σᵢ wᵢ·Σⱼ (xᵢⱼ − μ̄ⱼ)²`.
pub fn q_statistic(data: &VectorDataset, ctx: &MeasureContext) -> Result<f64> {
    data.require_rows()?;
    ctx.check_against(data)?;
    let total: f64 = data
        .rows()
        .zip(&ctx.weights)
        .map(|(row, w)| w * sq_dev(row, &ctx.weighted_mean))
        .sum();
    Ok(total / data.n() as f64)
}

/// `max{0, 1 − (n−1)/Q}`, with `Q` raised to `n − 1` when smaller.
pub fn i_squared(q_value: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return domain(format!("I² needs at least two contributions, got {n}"));
    }
    if !(q_value.is_finite() && q_value >= 0.0) {
        return domain(format!("Q must be finite and nonnegative, got {q_value}"));
    }
    let df = (n - 1) as f64;
    let q = q_value.max(df);
    Ok((1.0 - df / q).max(0.0))
}
