use super::DenseVector;
use crate::{Error, Real, Result};

/// Dense row-major matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    /// Wraps row-major `data`, rejecting NaN/infinities and bad lengths.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix storage",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "matrix entries" });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Diagonal matrix from a vector.
    pub fn diag(d: &DenseVector<T>) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for i in 0..d.len() {
            m[(i, i)] = d[i];
        }
        m
    }

    /// Builds from nested rows (used by fixtures and tests).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch {
                context: "matrix rows",
                expected: c,
                got: rows.iter().map(|row| row.len()).find(|&l| l != c).unwrap_or(c),
            });
        }
        let data: Vec<T> = rows.iter().flatten().map(|&v| T::of(v)).collect();
        Self::new(r, c, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
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

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> DenseVector<T> {
        DenseVector::from_vec_unchecked((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn matvec(&self, x: &DenseVector<T>) -> DenseVector<T> {
        assert_eq!(self.cols, x.len(), "matvec length mismatch");
        DenseVector::from_vec_unchecked(
            (0..self.rows)
                .map(|i| {
                    self.row(i)
                        .iter()
                        .zip(x.as_slice())
                        .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
                })
                .collect(),
        )
    }

    /// `Aᵀ x` without forming the transpose.
    pub fn tr_matvec(&self, x: &DenseVector<T>) -> DenseVector<T> {
        assert_eq!(self.rows, x.len(), "tr_matvec length mismatch");
        let mut out = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            for (j, o) in out.iter_mut().enumerate() {
                *o += self[(i, j)] * xi;
            }
        }
        DenseVector::from_vec_unchecked(out)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sub shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn scale(&self, factor: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * factor).collect(),
        }
    }

    /// Rank-one update `self + factor * u vᵀ`, allocated fresh.
    pub fn add_outer(&self, factor: T, u: &DenseVector<T>, v: &DenseVector<T>) -> Self {
        assert_eq!(self.rows, u.len(), "outer row mismatch");
        assert_eq!(self.cols, v.len(), "outer col mismatch");
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] + factor * u[i] * v[j])
    }

    pub fn row_sums(&self) -> DenseVector<T> {
        DenseVector::from_vec_unchecked(
            (0..self.rows)
                .map(|i| self.row(i).iter().fold(T::zero(), |acc, &v| acc + v))
                .collect(),
        )
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    /// Largest absolute entry difference against `other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    /// Copies the listed columns, in order, into a new matrix.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |i, j| self[(i, cols[j])])
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self::from_fn(rows.len(), self.cols, |i, j| self[(rows[i], j)])
    }

    /// Copies the sub-block with the listed rows and columns.
    pub fn select_block(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }
}

impl<T: Real> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols, "matrix index out of range");
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols, "matrix index out of range");
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn construction_checks_shape_and_finiteness() {
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0, 2.0, f64::NAN, 0.0]).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0; 4]).is_ok());
    }

    #[test]
    fn matvec_matches_hand_computation() {
        let a = DenseMatrix::<f64>::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let x = DenseVector::from_f64s(&[1.0, -1.0]);
        assert_eq!(a.matvec(&x).as_slice(), &[-1.0, -1.0]);
        assert_eq!(a.tr_matvec(&x).as_slice(), &[-2.0, -2.0]);
    }

    #[test]
    fn matmul_and_transpose() {
        let a = DenseMatrix::<f64>::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let b = DenseMatrix::<f64>::from_rows(&[vec![2.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let ab = a.matmul(&b);
        assert_eq!(ab.row(0), &[4.0, 2.0]);
        assert_eq!(ab.row(1), &[1.0, 1.0]);
        let at = a.transpose();
        assert_eq!(at.row(0), &[1.0, 0.0]);
        assert_eq!(at.row(1), &[2.0, 1.0]);
    }

    #[test]
    fn row_sums_and_selection() {
        let a = DenseMatrix::<f64>::from_rows(&[vec![0.25, 0.75], vec![0.5, 0.5]]).unwrap();
        let sums = a.row_sums();
        assert_abs_diff_eq!(sums[0], 1.0);
        assert_abs_diff_eq!(sums[1], 1.0);
        let c = a.select_columns(&[1]);
        assert_eq!(c.rows(), 2);
        assert_eq!(c.cols(), 1);
        assert_abs_diff_eq!(c[(0, 0)], 0.75);
    }
}
