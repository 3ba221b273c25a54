//! Dense row-major matrices over Z_{2^l}.
//!
//! The storage is ring agnostic. Arithmetic takes the ring explicitly and
//! always returns reduced entries.

use rand::Rng;

use crate::error::{Error, Result};
use crate::ring::Ring;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<u64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn scalar(x: u64) -> Self {
        Matrix { rows: 1, cols: 1, data: vec![x] }
    }

    pub fn random<R: Rng + ?Sized>(ring: Ring, rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| ring.random(rng)).collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[u64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: u64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn reshape(mut self, rows: usize, cols: usize) -> Result<Self> {
        if rows * cols != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot view {}x{} as {rows}x{cols}",
                self.rows, self.cols
            )));
        }
        self.rows = rows;
        self.cols = cols;
        Ok(self)
    }

    fn check_same(&self, other: &Matrix, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{op} of {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn zip_map(&self, other: &Matrix, op: &str, f: impl Fn(u64, u64) -> u64) -> Result<Matrix> {
        self.check_same(other, op)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn map(&self, f: impl Fn(u64) -> u64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| f(*x)).collect() }
    }

    pub fn add(&self, other: &Matrix, ring: Ring) -> Result<Matrix> {
        self.zip_map(other, "add", |a, b| ring.add(a, b))
    }

    pub fn sub(&self, other: &Matrix, ring: Ring) -> Result<Matrix> {
        self.zip_map(other, "sub", |a, b| ring.sub(a, b))
    }

    pub fn hadamard(&self, other: &Matrix, ring: Ring) -> Result<Matrix> {
        self.zip_map(other, "hadamard", |a, b| ring.mul(a, b))
    }

    pub fn scale(&self, k: u64, ring: Ring) -> Matrix {
        self.map(|a| ring.mul(a, k))
    }

    pub fn add_scalar(&self, k: u64, ring: Ring) -> Matrix {
        self.map(|a| ring.add(a, k))
    }

    pub fn matmul(&self, other: &Matrix, ring: Ring) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "matmul of {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let (n, d, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![0u64; n * m];
        for i in 0..n {
            let acc = &mut out[i * m..(i + 1) * m];
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == 0 {
                    continue;
                }
                let brow = &other.data[k * m..(k + 1) * m];
                for (o, b) in acc.iter_mut().zip(brow) {
                    *o = o.wrapping_add(a.wrapping_mul(*b));
                }
            }
        }
        if ring.bits() < 64 {
            for v in out.iter_mut() {
                *v = ring.reduce(*v);
            }
        }
        Ok(Matrix { rows: n, cols: m, data: out })
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0u64; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        Matrix { rows: self.cols, cols: self.rows, data: out }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &r in idx {
            data.extend_from_slice(self.row(r));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(parts: &[Matrix]) -> Result<Matrix> {
        let cols = parts.first().map_or(0, |m| m.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            if p.cols != cols {
                return Err(Error::Shape("vstack with ragged columns".into()));
            }
            rows += p.rows;
            data.extend_from_slice(&p.data);
        }
        Ok(Matrix { rows, cols, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let r = Ring::new(8).unwrap();
        let a = Matrix::from_vec(2, 2, vec![1, 2, 3, 4]).unwrap();
        let b = Matrix::from_vec(2, 1, vec![100, 100]).unwrap();
        let c = a.matmul(&b, r).unwrap();
        assert_eq!(c.data(), &[300 % 256, 700 % 256]);
        assert!(b.matmul(&b, r).is_err());
    }

    #[test]
    fn transpose_and_rows() {
        let a = Matrix::from_vec(2, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(a.transpose().data(), &[1, 4, 2, 5, 3, 6]);
        assert_eq!(a.select_rows(&[1, 1, 0]).data(), &[4, 5, 6, 4, 5, 6, 1, 2, 3]);
    }
}
