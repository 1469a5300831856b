use serde::Serialize;

use super::linalg::{Matrix, Qr};
use super::{mean, zscore, StatsError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OlsOptions {
    /// Report HC3 standard errors from `RegressionResult::se`.
    pub hc3: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub se_plain: Vec<f64>,
    pub se_hc3: Vec<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub n: usize,
    pub residuals: Vec<f64>,
    pub leverage: Vec<f64>,
    pub robust: bool,
}

impl RegressionResult {
    /// The standard errors selected by the fit options.
    pub fn se(&self) -> &[f64] {
        if self.robust {
            &self.se_hc3
        } else {
            &self.se_plain
        }
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.coefficients[i])
    }
}

/// Least squares via Householder QR. `x` must already contain any
/// intercept column; R² is centered when a column of ones is present.
pub fn ols_fit(y: &[f64], x: &Matrix, names: &[String], options: OlsOptions) -> Result<RegressionResult, StatsError> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(StatsError::Shape(format!("{} responses for {n} rows", y.len())));
    }
    if names.len() != p {
        return Err(StatsError::Shape(format!("{} names for {p} columns", names.len())));
    }
    if n <= p {
        return Err(StatsError::TooFew { what: "regression rows", need: p + 1, got: n });
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let qr = Qr::new(x)?;
    if let Some(j) = qr.rank_deficient_column() {
        return Err(StatsError::RankDeficient { column: names[j].clone() });
    }
    let beta = qr.solve(y);
    let fitted = x.mul_vec(&beta);
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let has_intercept = (0..p).any(|j| (0..n).all(|i| x[(i, j)] == 1.0));
    let sst: f64 = if has_intercept {
        let m = mean(y);
        y.iter().map(|v| (v - m).powi(2)).sum()
    } else {
        y.iter().map(|v| v * v).sum()
    };
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { f64::NAN };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n - usize::from(has_intercept)) as f64 / (n - p) as f64;

    let inv = qr.xtx_inverse();
    let sigma2 = ssr / (n - p) as f64;
    let se_plain: Vec<f64> = (0..p).map(|j| (sigma2 * inv[(j, j)]).sqrt()).collect();

    let leverage = qr.leverage();
    // Meat: Σ_i w_i x_i x_iᵀ with w_i = e_i² / (1 - h_ii)².
    let mut meat = Matrix::zeros(p, p);
    for i in 0..n {
        let w = residuals[i].powi(2) / (1.0 - leverage[i]).powi(2);
        let row = x.row(i);
        for a in 0..p {
            for b in 0..p {
                meat[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    let se_hc3: Vec<f64> = (0..p)
        .map(|j| {
            let mut v = 0.0;
            for a in 0..p {
                for b in 0..p {
                    v += inv[(j, a)] * meat[(a, b)] * inv[(b, j)];
                }
            }
            v.sqrt()
        })
        .collect();

    Ok(RegressionResult {
        names: names.to_vec(),
        coefficients: beta,
        se_plain,
        se_hc3,
        r_squared,
        adj_r_squared,
        n,
        residuals,
        leverage,
        robust: options.hc3,
    })
}

/// OLS on z-scored response and predictors (population SD), with an
/// intercept. Coefficients are named after the predictors, intercept first.
pub fn standardized_betas(
    y: &[f64],
    predictors: &[Vec<f64>],
    names: &[String],
    options: OlsOptions,
) -> Result<RegressionResult, StatsError> {
    if predictors.len() != names.len() {
        return Err(StatsError::Shape(format!("{} names for {} predictors", names.len(), predictors.len())));
    }
    let zy = zscore(y).ok_or_else(|| StatsError::ZeroVariance("response".into()))?;
    let mut cols = Vec::with_capacity(predictors.len());
    for (p, name) in predictors.iter().zip(names) {
        cols.push(zscore(p).ok_or_else(|| StatsError::ZeroVariance(name.clone()))?);
    }
    let x = Matrix::from_columns(&cols)?.with_intercept();
    let mut all = vec!["intercept".to_string()];
    all.extend(names.iter().cloned());
    ols_fit(&zy, &x, &all, options)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Vif {
    pub value: f64,
    /// Perfectly explained by the other columns; `value` is +∞.
    pub infinite: bool,
}

/// 1 - R² below this counts as perfect collinearity.
const COLLINEAR_TOL: f64 = 1e-12;

/// VIF_j = 1 / (1 - R²_j), regressing column j (with intercept) on the
/// others. Other columns that are themselves collinear are dropped from
/// that auxiliary regression.
pub fn compute_vif(columns: &[Vec<f64>]) -> Result<Vec<Vif>, StatsError> {
    let p = columns.len();
    if p < 2 {
        return Err(StatsError::TooFew { what: "VIF columns", need: 2, got: p });
    }
    let n = columns[0].len();
    if n <= p {
        return Err(StatsError::TooFew { what: "VIF rows", need: p + 1, got: n });
    }
    let mut out = Vec::with_capacity(p);
    for j in 0..p {
        let mut others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
        let r2 = loop {
            let cols: Vec<Vec<f64>> = others.iter().map(|&k| columns[k].clone()).collect();
            let x = Matrix::from_columns(&cols)?.with_intercept();
            let mut names = vec!["intercept".to_string()];
            names.extend(others.iter().map(|k| k.to_string()));
            match ols_fit(&columns[j], &x, &names, OlsOptions::default()) {
                Ok(fit) => break fit.r_squared,
                Err(StatsError::RankDeficient { column }) if column != "intercept" => {
                    let k: usize = column.parse().expect("numeric column name");
                    others.retain(|&o| o != k);
                    if others.is_empty() {
                        break 0.0;
                    }
                }
                Err(StatsError::RankDeficient { .. }) => {
                    return Err(StatsError::ZeroVariance(format!("column {j} is constant")))
                }
                Err(e) => return Err(e),
            }
        };
        if r2.is_nan() {
            return Err(StatsError::ZeroVariance(format!("column {j} is constant")));
        }
        if 1.0 - r2 <= COLLINEAR_TOL {
            out.push(Vif { value: f64::INFINITY, infinite: true });
        } else {
            out.push(Vif { value: 1.0 / (1.0 - r2), infinite: false });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::pearson;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let fit = ols_fit(&y, &Matrix::from_columns(&[x]).unwrap().with_intercept(), &names(2), OlsOptions::default())
            .unwrap();
        assert!(fit.coefficients[0].abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-12));
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_response_has_zero_slope() {
        let x: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let fit = ols_fit(&[4.0; 10], &Matrix::from_columns(&[x]).unwrap().with_intercept(), &names(2), OlsOptions::default())
            .unwrap();
        assert!(fit.coefficients[1].abs() < 1e-12);
        assert!((fit.coefficients[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_and_shape_errors() {
        let c = vec![1.0, 2.0, 3.0, 5.0];
        let x = Matrix::from_columns(&[c.clone(), c]).unwrap().with_intercept();
        assert!(matches!(ols_fit(&[1.0, 2.0, 3.0, 4.0], &x, &names(3), OlsOptions::default()), Err(StatsError::RankDeficient { .. })));
        let x = Matrix::from_columns(&[vec![1.0, 2.0]]).unwrap().with_intercept();
        assert!(ols_fit(&[1.0, 2.0], &x, &names(2), OlsOptions::default()).is_err());
    }

    #[test]
    fn single_predictor_beta_is_correlation_and_scale_free() {
        let x = vec![1.0, 2.0, 4.0, 3.0, 7.0, 5.0];
        let y = vec![2.0, 1.0, 5.0, 4.0, 6.0, 9.0];
        let b = standardized_betas(&y, &[x.clone()], &["x".into()], OlsOptions::default()).unwrap();
        assert!((b.coefficients[1] - pearson(&x, &y).unwrap()).abs() < 1e-12);
        let scaled: Vec<f64> = x.iter().map(|v| 10.0 * v + 3.0).collect();
        let b2 = standardized_betas(&y, &[scaled], &["x".into()], OlsOptions::default()).unwrap();
        assert!((b.coefficients[1] - b2.coefficients[1]).abs() < 1e-12);
    }

    #[test]
    fn vif_landmarks() {
        let a = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let b = vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        for v in compute_vif(&[a.clone(), b.clone()]).unwrap() {
            assert!((v.value - 1.0).abs() < 1e-12);
        }
        let v = compute_vif(&[a.clone(), a.clone(), b]).unwrap();
        assert!(v[0].infinite && v[1].infinite && !v[2].infinite);
        assert!((v[2].value - 1.0).abs() < 1e-12);
    }
}
