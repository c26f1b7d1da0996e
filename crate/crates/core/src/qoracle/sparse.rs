use num_complex::Complex;
use rayon::prelude::*;

use crate::scalar::Scalar;

/// Square complex matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex<T>>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Sums duplicate entries and drops exact zeros.
    pub fn from_triplets(dim: usize, mut entries: Vec<(usize, usize, Complex<T>)>) -> Self {
        entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, Complex<T>)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 = last.2 + v,
                _ => merged.push((r, c, v)),
            }
        }
        let zero = Complex::new(T::zero(), T::zero());
        merged.retain(|e| e.2 != zero);
        let mut row_ptr = vec![0usize; dim + 1];
        for e in &merged {
            row_ptr[e.0 + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            dim,
            row_ptr,
            cols: merged.iter().map(|e| e.1).collect(),
            vals: merged.iter().map(|e| e.2).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex<T>)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, Complex<T>)> {
        (0..self.dim).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().into_iter().map(|(i, j, v)| (j, i, v.conj())).collect())
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: Complex<T>, other: &Self, b: Complex<T>) -> Self {
        let mut t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (i, j, v * a)).collect();
        t.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, v * b)));
        Self::from_triplets(self.dim, t)
    }

    /// Sparse product `self · other`.
    pub fn mul(&self, other: &Self) -> Self {
        let mut t = Vec::new();
        for i in 0..self.dim {
            for (k, a) in self.row(i) {
                t.extend(other.row(k).map(|(j, b)| (i, j, a * b)));
            }
        }
        Self::from_triplets(self.dim, t)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.dim).map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<T>()).fold(T::zero(), T::max)
    }

    pub fn scale(&self, a: Complex<T>) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v = *v * a);
        out
    }

    pub fn mul_vec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        (0..self.dim)
            .map(|i| self.row(i).fold(Complex::new(T::zero(), T::zero()), |acc, (j, v)| acc + v * x[j]))
            .collect()
    }

    /// `out = self · rho` for a dense row-major `rho`.
    pub fn left_mul(&self, rho: &[Complex<T>], out: &mut [Complex<T>]) {
        let d = self.dim;
        out.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
            row.iter_mut().for_each(|v| *v = Complex::new(T::zero(), T::zero()));
            for (j, a) in self.row(i) {
                for (o, r) in row.iter_mut().zip(&rho[j * d..(j + 1) * d]) {
                    *o = *o + a * *r;
                }
            }
        });
    }

    /// `out += scale · rho · self` for a dense row-major `rho`.
    pub fn right_mul_add(&self, rho: &[Complex<T>], scale: T, out: &mut [Complex<T>]) {
        let d = self.dim;
        out.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
            for (j, r) in rho[i * d..(i + 1) * d].iter().enumerate() {
                if r.re == T::zero() && r.im == T::zero() {
                    continue;
                }
                let r = *r * scale;
                for (k, b) in self.row(j) {
                    row[k] = row[k] + r * b;
                }
            }
        });
    }

    /// `Tr(self · rho)`.
    pub fn trace_with(&self, rho: &[Complex<T>]) -> Complex<T> {
        let d = self.dim;
        (0..d).fold(Complex::new(T::zero(), T::zero()), |acc, i| {
            self.row(i).fold(acc, |acc, (j, v)| acc + v * rho[j * d + i])
        })
    }
}
