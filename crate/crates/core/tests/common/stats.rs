//! Textbook statistics written directly from their definitions with nalgebra.

use nalgebra::{DMatrix, DVector};

/// ICC(3,k) from a two-way ANOVA table, with the error sum of squares
/// taken as the remainder SS_total - SS_rows - SS_cols.
pub fn icc_3k_anova(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let k = m[0].len();
    let x = DMatrix::from_fn(n, k, |i, j| m[i][j]);
    let grand = x.mean();
    let ss_tot: f64 = x.iter().map(|v| (v - grand).powi(2)).sum();
    let ss_rows: f64 = (0..n).map(|i| k as f64 * (x.row(i).mean() - grand).powi(2)).sum();
    let ss_cols: f64 = (0..k).map(|j| n as f64 * (x.column(j).mean() - grand).powi(2)).sum();
    let ss_err = ss_tot - ss_rows - ss_cols;
    let msr = ss_rows / (n - 1) as f64;
    let mse = ss_err / ((n - 1) * (k - 1)) as f64;
    (msr - mse) / msr
}

pub struct Ols {
    pub beta: DVector<f64>,
    pub se_plain: DVector<f64>,
    pub se_hc3: DVector<f64>,
}

/// Normal-equation OLS with the hat-matrix HC3 sandwich.
pub fn ols(y: &[f64], x: &DMatrix<f64>) -> Ols {
    let (n, p) = x.shape();
    let y = DVector::from_column_slice(y);
    let xtx_inv = (x.transpose() * x).try_inverse().expect("full rank");
    let beta = &xtx_inv * x.transpose() * &y;
    let e = &y - x * &beta;
    let hat = x * &xtx_inv * x.transpose();
    let sigma2 = e.norm_squared() / (n - p) as f64;
    let se_plain = xtx_inv.diagonal().map(|v| (sigma2 * v).sqrt());
    let omega = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| e[i].powi(2) / (1.0 - hat[(i, i)]).powi(2)));
    let cov = &xtx_inv * x.transpose() * omega * x * &xtx_inv;
    Ols { beta, se_plain, se_hc3: cov.diagonal().map(f64::sqrt) }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Linear interpolation between order statistics at rank q(n-1)/100.
pub fn percentile(x: &[f64], q: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q / 100.0 * (s.len() - 1) as f64;
    let i = pos as usize;
    if i + 1 >= s.len() {
        return s[s.len() - 1];
    }
    s[i] + (pos - i as f64) * (s[i + 1] - s[i])
}

pub fn top_mean(x: &[f64], share: f64) -> f64 {
    let cut = percentile(x, 100.0 - share);
    let top: Vec<f64> = x.iter().copied().filter(|v| *v >= cut).collect();
    mean(&top)
}

/// Student's pooled two-sample t with df and Cohen's d (b minus a).
pub fn pooled(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let sp2 = ((na - 1.0) * var(a) + (nb - 1.0) * var(b)) / (na + nb - 2.0);
    let t = (mean(a) - mean(b)) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
    let d = (mean(b) - mean(a)) / sp2.sqrt();
    (t, na + nb - 2.0, d)
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Centered, mutually orthogonal columns: Q of the centered data.
pub fn orthogonal_columns(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = cols[0].len();
    let x = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i] - mean(&cols[j]));
    let q = x.qr().q();
    (0..cols.len()).map(|j| q.column(j).iter().copied().collect()).collect()
}
