use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense complex matrix stored as separate row-major real and imaginary
/// planes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    rows: usize,
    cols: usize,
    re: Vec<T>,
    im: Vec<T>,
}

impl<T: Scalar> ComplexMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            re: vec![T::zero(); rows * cols],
            im: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_parts(rows: usize, cols: usize, re: Vec<T>, im: Vec<T>) -> Result<Self> {
        if re.len() != rows * cols || im.len() != rows * cols {
            return Err(Error::shape(format!(
                "complex {rows}x{cols} needs {} entries per plane, got {} and {}",
                rows * cols,
                re.len(),
                im.len()
            )));
        }
        Ok(Self { rows, cols, re, im })
    }

    /// Column vector from a list of (re, im) pairs.
    pub fn column(entries: &[(T, T)]) -> Self {
        Self {
            rows: entries.len(),
            cols: 1,
            re: entries.iter().map(|e| e.0).collect(),
            im: entries.iter().map(|e| e.1).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn re(&self) -> &[T] {
        &self.re
    }

    pub fn im(&self) -> &[T] {
        &self.im
    }

    pub fn get(&self, r: usize, c: usize) -> (T, T) {
        let k = r * self.cols + c;
        (self.re[k], self.im[k])
    }

    pub fn set(&mut self, r: usize, c: usize, value: (T, T)) {
        let k = r * self.cols + c;
        self.re[k] = value.0;
        self.im[k] = value.1;
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let (a, b) = self.get(r, c);
                out.set(c, r, (a, -b));
            }
        }
        out
    }

    pub fn frobenius_sq(&self) -> T {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&a, &b)| a * a + b * b)
            .sum()
    }

    /// `self * x` for a complex vector given as separate planes.
    pub fn mul_vec(&self, x_re: &[T], x_im: &[T]) -> (Vec<T>, Vec<T>) {
        assert_eq!(x_re.len(), self.cols);
        assert_eq!(x_im.len(), self.cols);
        let mut out_re = vec![T::zero(); self.rows];
        let mut out_im = vec![T::zero(); self.rows];
        for r in 0..self.rows {
            let (mut sr, mut si) = (T::zero(), T::zero());
            for c in 0..self.cols {
                let (a, b) = self.get(r, c);
                sr = sr + a * x_re[c] - b * x_im[c];
                si = si + a * x_im[c] + b * x_re[c];
            }
            out_re[r] = sr;
            out_im[r] = si;
        }
        (out_re, out_im)
    }

    pub fn scaled(&self, k: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            re: self.re.iter().map(|&v| v * k).collect(),
            im: self.im.iter().map(|&v| v * k).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            re: self.re.iter().zip(&other.re).map(|(&a, &b)| f(a, b)).collect(),
            im: self.im.iter().zip(&other.im).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Outer product `a * b^H` of two column vectors.
    pub fn outer_conj(a: &Self, b: &Self) -> Self {
        let mut out = Self::zeros(a.re.len(), b.re.len());
        for i in 0..a.re.len() {
            for j in 0..b.re.len() {
                let (ar, ai) = (a.re[i], a.im[i]);
                let (br, bi) = (b.re[j], -b.im[j]);
                out.set(i, j, (ar * br - ai * bi, ar * bi + ai * br));
            }
        }
        out
    }
}
