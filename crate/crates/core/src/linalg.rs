//! Dense linear least squares via Householder QR with column pivoting.
//!
//! Full-rank problems are solved from the triangular factor directly. When the
//! pivoted factorization reveals rank `r < n`, the leading `r` rows of `R` are
//! reduced once more from the right (a complete orthogonal decomposition) and
//! the minimum-norm minimizer is returned.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}×{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.as_ref().len() != cols {
                return Err(Error::DimensionMismatch("ragged rows".into()));
            }
            data.extend_from_slice(r.as_ref());
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn at(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn transpose(&self) -> Matrix {
        let mut t = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[c * self.rows + r] = self.get(r, c);
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data: t,
        }
    }
}

/// Householder reflector `I − 2vvᵀ` acting on rows `start..` of a column.
struct Reflector {
    start: usize,
    v: Vec<f64>,
}

impl Reflector {
    /// Reflector that maps column `col` of `a` (rows `start..`) onto a
    /// multiple of the first unit vector. `None` when that part is zero.
    fn annihilating(a: &Matrix, start: usize, col: usize) -> Option<Reflector> {
        let x: Vec<f64> = (start..a.rows).map(|r| a.get(r, col)).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return None;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let vn = v.iter().map(|e| e * e).sum::<f64>().sqrt();
        if vn == 0.0 {
            return None;
        }
        v.iter_mut().for_each(|e| *e /= vn);
        Some(Reflector { start, v })
    }

    fn apply_to_columns(&self, a: &mut Matrix, cols: std::ops::Range<usize>) {
        for c in cols {
            let d: f64 = self.v.iter().enumerate().map(|(i, vi)| vi * a.get(self.start + i, c)).sum();
            if d != 0.0 {
                for (i, vi) in self.v.iter().enumerate() {
                    *a.at(self.start + i, c) -= 2.0 * vi * d;
                }
            }
        }
    }

    fn apply_to_vec(&self, x: &mut [f64]) {
        let d: f64 = self.v.iter().zip(&x[self.start..]).map(|(a, b)| a * b).sum();
        for (xi, vi) in x[self.start..].iter_mut().zip(&self.v) {
            *xi -= 2.0 * vi * d;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstsqSolution {
    pub theta: Vec<f64>,
    /// Numerical rank detected by the pivoted factorization.
    pub rank: usize,
    /// ‖b − Aθ‖₂.
    pub residual_norm: f64,
}

/// Minimizes ‖b − Aθ‖₂; returns the minimum-norm minimizer when `A` is rank
/// deficient.
pub fn lstsq(a: &Matrix, b: &[f64]) -> Result<LstsqSolution> {
    let (m, n) = (a.rows, a.cols);
    if m == 0 || n == 0 {
        return Err(Error::DimensionMismatch("empty design matrix".into()));
    }
    if b.len() != m {
        return Err(Error::DimensionMismatch(format!("{m} rows but {} targets", b.len())));
    }

    let mut r = a.clone();
    let mut qtb = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let steps = m.min(n);
    let mut diag = Vec::with_capacity(steps);
    for k in 0..steps {
        // Pivot: remaining column with the largest norm below row k.
        let (best, _) = (k..n)
            .map(|c| (c, (k..m).map(|i| r.get(i, c).powi(2)).sum::<f64>()))
            .fold((k, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best != k {
            for i in 0..m {
                r.data.swap(i * n + k, i * n + best);
            }
            perm.swap(k, best);
        }
        if let Some(h) = Reflector::annihilating(&r, k, k) {
            h.apply_to_columns(&mut r, k..n);
            h.apply_to_vec(&mut qtb);
        }
        for i in k + 1..m {
            *r.at(i, k) = 0.0;
        }
        diag.push(r.get(k, k).abs());
    }

    let tol = (m.max(n) as f64) * f64::EPSILON * diag.first().copied().unwrap_or(0.0) * 10.0;
    let rank = diag.iter().take_while(|&&d| d > tol).count();

    let mut theta_p = vec![0.0; n];
    if rank == n {
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| r.get(i, j) * theta_p[j]).sum();
            theta_p[i] = (qtb[i] - s) / r.get(i, i);
        }
    } else if rank > 0 {
        // Leading rank×n block of R, reduced from the right:
        // R_topᵀ = Q₂ [L; 0]  ⇒  R_top = [Lᵀ 0] Q₂ᵀ.
        let top = Matrix {
            rows: rank,
            cols: n,
            data: r.data[..rank * n].to_vec(),
        };
        let mut rt = top.transpose();
        let mut reflectors = Vec::with_capacity(rank);
        for k in 0..rank {
            if let Some(h) = Reflector::annihilating(&rt, k, k) {
                h.apply_to_columns(&mut rt, k..rank);
                reflectors.push(h);
            }
        }
        // Solve Lᵀ w = c by forward substitution, L = upper rank×rank block of rt.
        let mut w = vec![0.0; n];
        for i in 0..rank {
            let s: f64 = (0..i).map(|j| rt.get(j, i) * w[j]).sum();
            w[i] = (qtb[i] - s) / rt.get(i, i);
        }
        // θ_p = Q₂ w, with Q₂ = H₀ H₁ … H_{r−1}.
        for h in reflectors.iter().rev() {
            h.apply_to_vec(&mut w);
        }
        theta_p = w;
    }

    let mut theta = vec![0.0; n];
    for (k, &p) in perm.iter().enumerate() {
        theta[p] = theta_p[k];
    }
    let residual_norm = a
        .mul_vec(&theta)
        .iter()
        .zip(b)
        .map(|(p, t)| (t - p).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(LstsqSolution {
        theta,
        rank,
        residual_norm,
    })
}
