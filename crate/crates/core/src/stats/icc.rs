use super::StatsError;

/// ICC(3,k): two-way mixed effects, consistency, average of k raters.
/// Rows are ideas, columns are judges.
pub fn icc_3k(matrix: &[Vec<f64>]) -> Result<f64, StatsError> {
    let n = matrix.len();
    if n < 2 {
        return Err(StatsError::TooFew { what: "ICC rows", need: 2, got: n });
    }
    let k = matrix[0].len();
    if k < 2 {
        return Err(StatsError::TooFew { what: "ICC judges", need: 2, got: k });
    }
    if matrix.iter().any(|r| r.len() != k) {
        return Err(StatsError::Shape("incomplete rating matrix".into()));
    }
    if matrix.iter().flatten().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (nf, kf) = (n as f64, k as f64);
    let row_means: Vec<f64> = matrix.iter().map(|r| r.iter().sum::<f64>() / kf).collect();
    let col_means: Vec<f64> = (0..k).map(|j| matrix.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    let ss_rows = kf * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_error: f64 = matrix
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, x)| (i, j, x)))
        .map(|(i, j, x)| (x - row_means[i] - col_means[j] + grand).powi(2))
        .sum();
    let ms_rows = ss_rows / (nf - 1.0);
    let ms_error = ss_error / ((nf - 1.0) * (kf - 1.0));
    if ms_rows == 0.0 {
        return Err(StatsError::ZeroVariance("between-idea variance".into()));
    }
    Ok((ms_rows - ms_error) / ms_rows)
}
