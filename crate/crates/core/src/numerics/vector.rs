use crate::{Error, Real, Result};

/// Dense vector with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseVector<T> {
    data: Vec<T>,
}

impl<T: Real> DenseVector<T> {
    /// Wraps `data`, rejecting NaN and infinities.
    pub fn new(data: Vec<T>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "vector entries" });
        }
        Ok(Self { data })
    }

    /// Builds a vector without the finite check; internal arithmetic only.
    pub(crate) fn from_vec_unchecked(data: Vec<T>) -> Self {
        Self { data }
    }

    pub fn zeros(len: usize) -> Self {
        Self { data: vec![T::zero(); len] }
    }

    pub fn ones(len: usize) -> Self {
        Self { data: vec![T::one(); len] }
    }

    pub fn constant(len: usize, value: T) -> Self {
        Self { data: vec![value; len] }
    }

    /// Converts a slice of `f64` literals (used heavily in tests and fixtures).
    pub fn from_f64s(values: &[f64]) -> Self {
        Self { data: values.iter().map(|&v| T::of(v)).collect() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn to_f64s(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.as_f64()).collect()
    }

    pub fn dot(&self, other: &Self) -> T {
        assert_eq!(self.len(), other.len(), "dot length mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn norm_inf(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn norm2(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    pub fn mean(&self) -> T {
        assert!(!self.is_empty(), "mean of empty vector");
        self.sum() / T::of(self.len() as f64)
    }

    pub fn min(&self) -> T {
        self.data.iter().fold(T::infinity(), |acc, v| acc.min(*v))
    }

    pub fn max(&self) -> T {
        self.data.iter().fold(T::neg_infinity(), |acc, v| acc.max(*v))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "add length mismatch");
        Self::from_vec_unchecked(self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "sub length mismatch");
        Self::from_vec_unchecked(self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect())
    }

    pub fn scale(&self, factor: T) -> Self {
        Self::from_vec_unchecked(self.data.iter().map(|&a| a * factor).collect())
    }

    /// In-place update `self ← self + factor · other`.
    pub fn axpy(&mut self, factor: T, other: &Self) {
        assert_eq!(self.len(), other.len(), "axpy length mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    /// Largest absolute component difference against `other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.len(), other.len(), "diff length mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    /// Clamps every component into `[lo_i, hi_i]`.
    pub fn clamp_box(&self, lo: &Self, hi: &Self) -> Self {
        assert_eq!(self.len(), lo.len(), "clamp length mismatch");
        assert_eq!(self.len(), hi.len(), "clamp length mismatch");
        Self::from_vec_unchecked(
            self.data
                .iter()
                .enumerate()
                .map(|(i, &v)| v.max(lo[i]).min(hi[i]))
                .collect(),
        )
    }
}

impl<T: Real> std::ops::Index<usize> for DenseVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T: Real> std::ops::IndexMut<usize> for DenseVector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_non_finite() {
        assert!(DenseVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(DenseVector::new(vec![f64::INFINITY]).is_err());
        assert!(DenseVector::new(vec![1.0, -2.0]).is_ok());
    }

    #[test]
    fn dot_and_norms() {
        let a = DenseVector::<f64>::from_f64s(&[3.0, -4.0]);
        let b = DenseVector::from_f64s(&[1.0, 2.0]);
        assert_abs_diff_eq!(a.dot(&b), -5.0);
        assert_abs_diff_eq!(a.norm2(), 5.0);
        assert_abs_diff_eq!(a.norm_inf(), 4.0);
    }

    #[test]
    fn mean_min_max() {
        let a = DenseVector::<f64>::from_f64s(&[0.2, 0.4, 0.9]);
        assert_abs_diff_eq!(a.mean(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a.min(), 0.2);
        assert_abs_diff_eq!(a.max(), 0.9);
    }

    #[test]
    fn clamp_box_clamps_componentwise() {
        let v = DenseVector::<f64>::from_f64s(&[-0.5, 0.5, 1.5]);
        let lo = DenseVector::zeros(3);
        let hi = DenseVector::ones(3);
        assert_eq!(v.clamp_box(&lo, &hi).as_slice(), &[0.0, 0.5, 1.0]);
    }
}
