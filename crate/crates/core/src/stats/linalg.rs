use super::StatsError;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, StatsError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(StatsError::Shape("ragged rows".into()));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    /// Builds from columns of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self, StatsError> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(StatsError::Shape("columns differ in length".into()));
        }
        let mut m = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    /// Prepends a column of ones.
    pub fn with_intercept(&self) -> Self {
        let mut m = Self::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            m[(i, 0)] = 1.0;
            for j in 0..self.cols {
                m[(i, j + 1)] = self[(i, j)];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// |R_jj| below this fraction of the largest diagonal entry counts as rank loss.
const RANK_TOL: f64 = 1e-10;

/// Thin Householder QR of an n×p matrix with n ≥ p.
pub struct Qr {
    /// n×p with orthonormal columns.
    pub q: Matrix,
    /// p×p upper triangular.
    pub r: Matrix,
}

impl Qr {
    pub fn new(a: &Matrix) -> Result<Self, StatsError> {
        let (n, p) = (a.rows, a.cols);
        if n < p {
            return Err(StatsError::Shape(format!("{n} rows for {p} columns")));
        }
        let mut work = a.clone();
        let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(p);
        for k in 0..p {
            let x: Vec<f64> = (k..n).map(|i| work[(i, k)]).collect();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut v = x;
            if norm > 0.0 {
                let alpha = if v[0] >= 0.0 { -norm } else { norm };
                v[0] -= alpha;
                let vnorm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
                if vnorm > 0.0 {
                    v.iter_mut().for_each(|t| *t /= vnorm);
                }
            } else {
                v.iter_mut().for_each(|t| *t = 0.0);
            }
            for j in k..p {
                let s: f64 = (k..n).map(|i| v[i - k] * work[(i, j)]).sum();
                for i in k..n {
                    work[(i, j)] -= 2.0 * v[i - k] * s;
                }
            }
            reflectors.push(v);
        }
        let mut r = Matrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                r[(i, j)] = work[(i, j)];
            }
        }
        let mut q = Matrix::zeros(n, p);
        for j in 0..p {
            q[(j, j)] = 1.0;
        }
        for k in (0..p).rev() {
            let v = &reflectors[k];
            for j in 0..p {
                let s: f64 = (k..n).map(|i| v[i - k] * q[(i, j)]).sum();
                for i in k..n {
                    q[(i, j)] -= 2.0 * v[i - k] * s;
                }
            }
        }
        Ok(Self { q, r })
    }

    /// Index of the first column whose diagonal entry collapses, if any.
    pub fn rank_deficient_column(&self) -> Option<usize> {
        let p = self.r.cols;
        let max = (0..p).map(|j| self.r[(j, j)].abs()).fold(0.0, f64::max);
        if max == 0.0 {
            return (p > 0).then_some(0);
        }
        (0..p).find(|&j| self.r[(j, j)].abs() <= RANK_TOL * max)
    }

    /// Least-squares solution of A x ≈ b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let p = self.r.cols;
        let qtb: Vec<f64> = (0..p).map(|j| (0..self.q.rows).map(|i| self.q[(i, j)] * b[i]).sum()).collect();
        back_substitute(&self.r, &qtb)
    }

    /// (AᵀA)⁻¹ = R⁻¹ R⁻ᵀ.
    pub fn xtx_inverse(&self) -> Matrix {
        let p = self.r.cols;
        let mut rinv = Matrix::zeros(p, p);
        for j in 0..p {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            let col = back_substitute(&self.r, &e);
            for i in 0..p {
                rinv[(i, j)] = col[i];
            }
        }
        let mut out = Matrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                out[(i, j)] = (0..p).map(|k| rinv[(i, k)] * rinv[(j, k)]).sum();
            }
        }
        out
    }

    /// Diagonal of the hat matrix, the squared row norms of Q.
    pub fn leverage(&self) -> Vec<f64> {
        (0..self.q.rows).map(|i| self.q.row(i).iter().map(|v| v * v).sum()).collect()
    }
}

fn back_substitute(r: &Matrix, b: &[f64]) -> Vec<f64> {
    let p = r.cols;
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| r[(i, j)] * x[j]).sum();
        x[i] = (b[i] - s) / r[(i, i)];
    }
    x
}
