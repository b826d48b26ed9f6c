//! Small dense matrices over a [`Coeff`] field, used for the exact boundary
//! algebra. Floating-point heavy lifting lives in `nalgebra`.

use nalgebra::DMatrix;

use crate::error::{dim_err, Result};
use crate::polymat::{Coeff, Poly, PolyMat};

#[derive(Clone, Debug, PartialEq)]
pub struct DMat<C> {
    rows: usize,
    cols: usize,
    data: Vec<C>,
}

impl<C: Coeff> DMat<C> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::one();
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<C>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[C] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(dim_err("matrix product", self.cols, other.rows));
        }
        Ok(Self::from_fn(self.rows, other.cols, |r, c| {
            let mut acc = C::zero();
            for k in 0..self.cols {
                let a = &self[(r, k)];
                if !a.is_zero() {
                    acc = acc + a.clone() * other[(k, c)].clone();
                }
            }
            acc
        }))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(dim_err("matrix sum", format!("{}x{}", self.rows, self.cols), format!("{}x{}", other.rows, other.cols)));
        }
        Ok(Self::from_fn(self.rows, self.cols, |r, c| self[(r, c)].clone() + other[(r, c)].clone()))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].clone())
    }

    pub fn select_rows(&self, rows: std::ops::Range<usize>) -> Self {
        let n = rows.len();
        let start = rows.start;
        Self::from_fn(n, self.cols, |r, c| self[(start + r, c)].clone())
    }

    pub fn select_cols(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |r, c| self[(r, cols[c])].clone())
    }

    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(dim_err("vstack", self.cols, other.cols));
        }
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64().abs()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.is_zero())
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| self[(r, c)].to_f64())
    }

    pub fn to_polymat(&self) -> PolyMat<C> {
        PolyMat::from_fn(self.rows, self.cols, |r, c| Poly::constant(self[(r, c)].clone()))
    }

    /// Reads a constant polynomial matrix; errors if any entry uses a variable.
    pub fn from_polymat(m: &PolyMat<C>) -> Result<Self> {
        let vals = m.constant_values()?;
        Ok(Self::from_fn(m.rows(), m.cols(), |r, c| vals[r][c].clone()))
    }

    /// Numerical rank: singular values above `rel_tol · σ_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return 0;
        }
        let sv = self.to_nalgebra().singular_values();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        if smax == 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > rel_tol * smax).count()
    }

    /// Gauss-Jordan elimination with partial pivoting (largest magnitude,
    /// ties to the lowest row). Stops after `max_pivots` pivots. Returns the
    /// reduced matrix, the accumulated row transform `J` with `J·self = reduced`,
    /// and the pivot columns.
    pub fn gauss_jordan(&self, pivot_tol: f64, max_pivots: usize) -> (Self, Self, Vec<usize>) {
        let mut a = self.clone();
        let mut j = Self::identity(self.rows);
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.cols {
            if row >= self.rows || pivots.len() >= max_pivots {
                break;
            }
            let mut best = None;
            let mut best_abs = pivot_tol;
            for r in row..self.rows {
                let v = a[(r, col)].to_f64().abs();
                if v > best_abs {
                    best_abs = v;
                    best = Some(r);
                }
            }
            let Some(p) = best else { continue };
            a.swap_rows(row, p);
            j.swap_rows(row, p);
            let inv = C::one() / a[(row, col)].clone();
            a.scale_row(row, &inv);
            j.scale_row(row, &inv);
            for r in 0..self.rows {
                if r != row {
                    let factor = a[(r, col)].clone();
                    if !factor.is_zero() {
                        a.axpy_row(r, row, &factor);
                        j.axpy_row(r, row, &factor);
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        (a, j, pivots)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    fn scale_row(&mut self, r: usize, s: &C) {
        for c in 0..self.cols {
            let v = self[(r, c)].clone() * s.clone();
            self[(r, c)] = v;
        }
    }

    // row[target] -= factor * row[source]
    fn axpy_row(&mut self, target: usize, source: usize, factor: &C) {
        for c in 0..self.cols {
            let v = self[(target, c)].clone() - factor.clone() * self[(source, c)].clone();
            self[(target, c)] = v;
        }
    }

    /// Inverse of a square matrix; `None` when singular relative to `pivot_tol`.
    pub fn inverse(&self, pivot_tol: f64) -> Option<Self> {
        if self.rows != self.cols {
            return None;
        }
        let (_, j, piv) = self.gauss_jordan(pivot_tol, self.rows);
        (piv.len() == self.rows).then_some(j)
    }

    /// One solution of `self · x = rhs` with free variables set to zero;
    /// `None` if the system is inconsistent.
    pub fn solve_any(&self, rhs: &Self, pivot_tol: f64) -> Option<Self> {
        let (_, j, piv) = self.gauss_jordan(pivot_tol, self.rows.min(self.cols));
        let jb = j.mul(rhs).ok()?;
        let scale = rhs.max_abs().max(1.0);
        for r in piv.len()..self.rows {
            if jb.row(r).iter().any(|v| !v.is_negligible(scale * 1e2)) {
                return None;
            }
        }
        let mut x = Self::zeros(self.cols, rhs.cols);
        for (k, &c) in piv.iter().enumerate() {
            for rc in 0..rhs.cols {
                x[(c, rc)] = jb[(k, rc)].clone();
            }
        }
        Some(x)
    }

    pub fn map<D: Coeff>(&self, f: impl Fn(&C) -> D) -> DMat<D> {
        DMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<C> std::ops::Index<(usize, usize)> for DMat<C> {
    type Output = C;
    fn index(&self, (r, c): (usize, usize)) -> &C {
        &self.data[r * self.cols + c]
    }
}

impl<C> std::ops::IndexMut<(usize, usize)> for DMat<C> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C {
        &mut self.data[r * self.cols + c]
    }
}

/// Multiplies a constant matrix into a polynomial matrix: `D · P`.
pub fn const_mul<C: Coeff>(d: &DMat<C>, p: &PolyMat<C>) -> Result<PolyMat<C>> {
    d.to_polymat().mul(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymat::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn inverse_and_solve() {
        let a = DMat::from_rows(2, 2, vec![q(0, 1), q(1, 1), q(1, 1), q(1, 1)]);
        let inv = a.inverse(1e-12).unwrap();
        assert_eq!(a.mul(&inv).unwrap(), DMat::identity(2));
        let sing = DMat::from_rows(2, 2, vec![q(0, 1), q(1, 1), q(0, 1), q(2, 3)]);
        assert!(sing.inverse(1e-12).is_none());
        let rhs = DMat::from_rows(2, 1, vec![q(1, 1), q(2, 3)]);
        let x = sing.solve_any(&rhs, 1e-12).unwrap();
        assert_eq!(sing.mul(&x).unwrap(), rhs);
        let bad = DMat::from_rows(2, 1, vec![q(1, 1), q(1, 1)]);
        assert!(sing.solve_any(&bad, 1e-12).is_none());
    }

    #[test]
    fn gauss_jordan_transform() {
        let g = DMat::from_rows(2, 2, vec![q(0, 1), q(-2, 1), q(0, 1), q(0, 1)]);
        let (red, j, piv) = g.gauss_jordan(1e-12, 2);
        assert_eq!(piv, vec![1]);
        assert_eq!(j.mul(&g).unwrap(), red);
        assert_eq!(red, DMat::from_rows(2, 2, vec![q(0, 1), q(1, 1), q(0, 1), q(0, 1)]));
        assert_eq!(g.rank(1e-9), 1);
    }
}
