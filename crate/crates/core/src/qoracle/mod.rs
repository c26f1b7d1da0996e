//! Exact Lindblad integration on the full `4^N`-dimensional space for small N.

mod evolve;
mod operators;
mod sparse;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};

pub use evolve::{
    compare_to_meanfield, evolve, evolve_with, lindblad_rhs, ComparisonEntry, ComparisonReport, EvolveOptions,
    Liouvillian, QuantumDiagnostics, QuantumSeries,
};
pub use operators::{
    atom_state, build_operators, product_state, product_state_from_atoms, product_state_with_phase, AtomState,
    CollectiveOperators, E1, E2, G1, G2, MAX_ATOMS,
};
pub use sparse::SparseMatrix;

/// Dense row-major density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T> {
    pub n_atoms: usize,
    pub dim: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Scalar> DensityMatrix<T> {
    pub fn maximally_mixed(n: usize) -> Result<Self> {
        if !(1..=MAX_ATOMS).contains(&n) {
            return Err(Error::AtomCount(n));
        }
        let dim = 1usize << (2 * n);
        let mut data = vec![Complex::new(T::zero(), T::zero()); dim * dim];
        let w = T::one() / lit::<T>(dim as f64);
        for i in 0..dim {
            data[i * dim + i] = Complex::new(w, T::zero());
        }
        Ok(DensityMatrix { n_atoms: n, dim, data })
    }

    pub fn from_data(n: usize, data: Vec<Complex<T>>) -> Result<Self> {
        let dim = 1usize << (2 * n);
        if data.len() != dim * dim {
            return Err(Error::Dimension(format!("expected {} entries, got {}", dim * dim, data.len())));
        }
        Ok(DensityMatrix { n_atoms: n, dim, data })
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + self.get(i, i))
    }

    /// `max |ρ_ij − conj(ρ_ji)|`.
    pub fn hermiticity_error(&self) -> T {
        let mut e = T::zero();
        for i in 0..self.dim {
            for j in i..self.dim {
                e = e.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        e
    }

    pub fn min_diagonal(&self) -> T {
        (0..self.dim).map(|i| self.get(i, i).re).fold(T::infinity(), T::min)
    }

    /// Largest violation of `|ρ_ij|² ≤ ρ_ii ρ_jj`, or zero.
    pub fn minor_violation(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            let a = self.get(i, i).re;
            for j in i + 1..self.dim {
                let v = self.get(i, j).norm_sqr() - a * self.get(j, j).re;
                worst = worst.max(v);
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part, computed in `f64`.
    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim;
        let m = nalgebra::DMatrix::from_fn(d, d, |i, j| {
            let a = self.get(i, j);
            let b = self.get(j, i).conj();
            Complex::new(to_f64(a.re + b.re) * 0.5, to_f64(a.im + b.im) * 0.5)
        });
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}
