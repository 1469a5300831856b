//! Judge-score normalization, creativity scores, and the estimators behind
//! the report: ICC, effect sizes, t-tests, percentiles, OLS with HC3.

mod icc;
mod inference;
pub mod linalg;
mod regression;
mod scoring;

pub use icc::icc_3k;
pub use inference::{cohens_d, ln_gamma, regularized_incomplete_beta, t_test_independent, t_two_sided_p, TTest, TTestVariant};
pub use linalg::Matrix;
pub use regression::{compute_vif, ols_fit, standardized_betas, OlsOptions, RegressionResult, Vif};
pub use scoring::{
    creativity_scores, minmax, minmax_normalize, read_scores, score_ideas, write_scores, CreativityMode,
    NormalizationMode, NormalizedIdea, ScoreOutcome, ScoreRow,
};

use serde::Serialize;

use crate::corpus::CorpusError;

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("need at least {need} {what}, got {got}")]
    TooFew { what: &'static str, need: usize, got: usize },
    #[error("zero variance: {0}")]
    ZeroVariance(String),
    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient { column: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite input")]
    NonFinite,
    #[error("{0}")]
    Domain(String),
    #[error("idea ids not found: {}", .0.join(", "))]
    UnknownIdeas(Vec<String>),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Arithmetic mean; NaN for empty input.
pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Divide-by-(n-1) variance.
pub fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Divide-by-n standard deviation.
pub fn population_sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Relative SD below which a column counts as constant.
const CONSTANT_TOL: f64 = 1e-12;

/// (x - mean) / population SD; `None` for a constant or empty column.
pub fn zscore(x: &[f64]) -> Option<Vec<f64>> {
    if x.is_empty() {
        return None;
    }
    let m = mean(x);
    let sd = population_sd(x);
    if !(sd > CONSTANT_TOL * m.abs().max(1.0)) {
        return None;
    }
    Some(x.iter().map(|v| (v - m) / sd).collect())
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::Shape(format!("{} vs {} values", x.len(), y.len())));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance("correlation input".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Inclusive linear interpolation between closest ranks.
pub fn percentile(values: &[f64], q: f64) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::TooFew { what: "values", need: 1, got: 0 });
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(StatsError::Domain(format!("percentile {q} outside [0, 100]")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Mean of the values at or above the (100 - share)th percentile.
pub fn top_share_mean(values: &[f64], share_percent: f64) -> Result<f64, StatsError> {
    let threshold = percentile(values, 100.0 - share_percent)?;
    let top: Vec<f64> = values.iter().copied().filter(|v| *v >= threshold).collect();
    Ok(mean(&top))
}

/// N, mean and sample SD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Descriptive {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

pub fn describe(x: &[f64]) -> Descriptive {
    let sd = if x.len() >= 2 { sample_variance(x).sqrt() } else { f64::NAN };
    Descriptive { n: x.len(), mean: mean(x), sd }
}
