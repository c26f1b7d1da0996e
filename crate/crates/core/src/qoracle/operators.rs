use num_complex::Complex;

use crate::error::{Error, Result};
use crate::model::{BlochVector, MeanFieldState};
use crate::scalar::{lit, to_f64, Scalar};

use super::sparse::SparseMatrix;
use super::DensityMatrix;

/// Single-atom levels in basis order.
pub const E1: usize = 0;
pub const E2: usize = 1;
pub const G1: usize = 2;
pub const G2: usize = 3;

pub const MAX_ATOMS: usize = 6;

/// Collective spin operators of both branches on `(C⁴)^{⊗N}`. Atom `k`
/// contributes the digit `q_k` of the basis index `Σ q_k 4^{N−1−k}`.
#[derive(Debug, Clone)]
pub struct CollectiveOperators<T> {
    pub n_atoms: usize,
    pub dim: usize,
    pub s1_minus: SparseMatrix<T>,
    pub s2_minus: SparseMatrix<T>,
    pub s1_x: SparseMatrix<T>,
    pub s1_y: SparseMatrix<T>,
    pub s1_z: SparseMatrix<T>,
    pub s2_x: SparseMatrix<T>,
    pub s2_y: SparseMatrix<T>,
    pub s2_z: SparseMatrix<T>,
}

impl<T: Scalar> CollectiveOperators<T> {
    /// `[S^x, S^y, S^z]` of branch `j` (0-based).
    pub fn branch(&self, j: usize) -> [&SparseMatrix<T>; 3] {
        if j == 0 {
            [&self.s1_x, &self.s1_y, &self.s1_z]
        } else {
            [&self.s2_x, &self.s2_y, &self.s2_z]
        }
    }

    /// `m_j^α = (2/N) Tr(ρ S_j^α) / Tr ρ` for both branches.
    pub fn expectations(&self, rho: &DensityMatrix<T>) -> MeanFieldState<T> {
        self.moments(&rho.data, T::one() / rho.trace().re)
    }

    /// `scale · (2/N) Tr(X S_j^α)` for an arbitrary dense `X`, e.g. a
    /// traceless time derivative.
    pub fn moments(&self, x: &[Complex<T>], scale: T) -> MeanFieldState<T> {
        let scale = scale * (T::one() + T::one()) / lit::<T>(self.n_atoms as f64);
        let b = |j: usize| {
            let [sx, sy, sz] = self.branch(j);
            BlochVector::new(
                sx.trace_with(x).re * scale,
                sy.trace_with(x).re * scale,
                sz.trace_with(x).re * scale,
            )
        };
        MeanFieldState { m1: b(0), m2: b(1) }
    }
}

fn digit(index: usize, atom: usize, n: usize) -> usize {
    (index >> (2 * (n - 1 - atom))) & 3
}

fn with_digit(index: usize, atom: usize, n: usize, q: usize) -> usize {
    let shift = 2 * (n - 1 - atom);
    (index & !(3 << shift)) | (q << shift)
}

pub fn build_operators<T: Scalar>(n: usize) -> Result<CollectiveOperators<T>> {
    if !(1..=MAX_ATOMS).contains(&n) {
        return Err(Error::AtomCount(n));
    }
    let dim = 1usize << (2 * n);
    let one = Complex::new(T::one(), T::zero());
    let half: T = lit(0.5);
    let lower = |e: usize, g: usize| {
        let mut t = Vec::with_capacity(n * dim / 4);
        for idx in 0..dim {
            for k in 0..n {
                if digit(idx, k, n) == e {
                    t.push((with_digit(idx, k, n, g), idx, one));
                }
            }
        }
        SparseMatrix::from_triplets(dim, t)
    };
    let inversion = |e: usize, g: usize| {
        let t = (0..dim)
            .map(|idx| {
                let mut v = T::zero();
                for k in 0..n {
                    match digit(idx, k, n) {
                        q if q == e => v = v + half,
                        q if q == g => v = v - half,
                        _ => {}
                    }
                }
                (idx, idx, Complex::new(v, T::zero()))
            })
            .collect();
        SparseMatrix::from_triplets(dim, t)
    };
    let s1_minus = lower(E1, G1);
    let s2_minus = lower(E2, G2);
    let (hx, hy) = (Complex::new(half, T::zero()), Complex::new(T::zero(), -half));
    // s^x = (s⁺ + s⁻)/2, s^y = (s⁺ − s⁻)/(2i)
    let xy = |m: &SparseMatrix<T>| {
        let p = m.adjoint();
        (p.combine(hx, m, hx), p.combine(hy, m, -hy))
    };
    let (s1_x, s1_y) = xy(&s1_minus);
    let (s2_x, s2_y) = xy(&s2_minus);
    Ok(CollectiveOperators {
        n_atoms: n,
        dim,
        s1_z: inversion(E1, G1),
        s2_z: inversion(E2, G2),
        s1_minus,
        s2_minus,
        s1_x,
        s1_y,
        s2_x,
        s2_y,
    })
}

/// Amplitudes `(e1, e2, g1, g2)` of a single-atom pure state.
pub type AtomState<T> = [Complex<T>; 4];

/// Single-atom pure state whose branch Bloch vectors equal the target. This
/// needs `|m1| + |m2| = 1`: each branch block is then a pure two-level
/// state of weight `|m_j|`. `chi` is a relative phase on branch 2.
pub fn atom_state<T: Scalar>(target: &MeanFieldState<T>, chi: T) -> Result<AtomState<T>> {
    let (r1, r2) = (target.m1.norm(), target.m2.norm());
    let total = r1 + r2;
    if !((total - T::one()).abs() <= lit(1e-12)) {
        return Err(Error::Unrealizable(format!("|m1| + |m2| = {} but must equal 1", to_f64(total))));
    }
    let half: T = lit(0.5);
    let block = |m: BlochVector<T>, r: T| -> (Complex<T>, Complex<T>) {
        let a = ((r + m.z) * half).max(T::zero()).sqrt();
        if a > lit(1e-150) {
            (Complex::new(a, T::zero()), Complex::new(m.x, m.y) / (a + a))
        } else {
            (Complex::new(T::zero(), T::zero()), Complex::new(r.sqrt(), T::zero()))
        }
    };
    let (a1, b1) = block(target.m1, r1);
    let (a2, b2) = block(target.m2, r2);
    let phase = Complex::new(chi.cos(), chi.sin());
    Ok([a1, a2 * phase, b1, b2 * phase])
}

/// `⊗_k |a_k⟩⟨a_k|` for possibly different atom states.
pub fn product_state_from_atoms<T: Scalar>(atoms: &[AtomState<T>]) -> Result<DensityMatrix<T>> {
    let n = atoms.len();
    if !(1..=MAX_ATOMS).contains(&n) {
        return Err(Error::AtomCount(n));
    }
    let dim = 1usize << (2 * n);
    let psi: Vec<Complex<T>> = (0..dim)
        .map(|idx| {
            (0..n).fold(Complex::new(T::one(), T::zero()), |acc, k| acc * atoms[k][digit(idx, k, n)])
        })
        .collect();
    let norm = psi.iter().map(|c| c.norm_sqr()).sum::<T>();
    let mut data = Vec::with_capacity(dim * dim);
    for a in &psi {
        for b in &psi {
            data.push(*a * b.conj() / norm);
        }
    }
    Ok(DensityMatrix { n_atoms: n, dim, data })
}

/// Identical-atom product state reproducing `target` in every first moment.
pub fn product_state<T: Scalar>(n: usize, target: &MeanFieldState<T>) -> Result<DensityMatrix<T>> {
    product_state_with_phase(n, target, T::zero())
}

pub fn product_state_with_phase<T: Scalar>(n: usize, target: &MeanFieldState<T>, chi: T) -> Result<DensityMatrix<T>> {
    let a = atom_state(target, chi)?;
    product_state_from_atoms(&vec![a; n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_sector_state, SectorFamilySpec};
    use rand::{Rng, SeedableRng};

    fn random_vec(dim: usize, seed: u64) -> Vec<Complex<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..dim).map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    fn commutator_on(a: &SparseMatrix<f64>, b: &SparseMatrix<f64>, v: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let ab = a.mul_vec(&b.mul_vec(v));
        let ba = b.mul_vec(&a.mul_vec(v));
        ab.iter().zip(&ba).map(|(x, y)| x - y).collect()
    }

    #[test]
    fn single_atom_inversion() {
        let ops = build_operators::<f64>(1).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| ops.s1_z.row(i).map(|(_, v)| v.re).sum()).collect();
        assert_eq!(diag, vec![0.5, 0.0, -0.5, 0.0]);
        let diag2: Vec<f64> = (0..4).map(|i| ops.s2_z.row(i).map(|(_, v)| v.re).sum()).collect();
        assert_eq!(diag2, vec![0.0, 0.5, 0.0, -0.5]);
        assert_eq!(ops.s1_minus.triplets(), vec![(G1, E1, Complex::new(1.0, 0.0))]);
    }

    #[test]
    fn spin_algebra() {
        for n in [1, 2, 3] {
            let ops = build_operators::<f64>(n).unwrap();
            let v = random_vec(ops.dim, n as u64);
            for j in 0..2 {
                let [x, y, z] = ops.branch(j);
                let lhs = commutator_on(x, y, &v);
                let rhs = z.mul_vec(&v);
                for (a, b) in lhs.iter().zip(&rhs) {
                    assert!((a - b * Complex::new(0.0, 1.0)).norm() < 1e-12);
                }
            }
            for a in ops.branch(0) {
                for b in ops.branch(1) {
                    assert!(commutator_on(a, b, &v).iter().all(|c| c.norm() < 1e-15));
                }
            }
        }
        assert_eq!(build_operators::<f64>(0).unwrap_err().code(), "atom_count");
        assert_eq!(build_operators::<f64>(7).unwrap_err().code(), "atom_count");
    }

    #[test]
    fn ground_superposition_expectations() {
        let down = BlochVector::new(0.0, 0.0, -0.5);
        let target = MeanFieldState::new(down, down).unwrap();
        let a = atom_state(&target, 0.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(a[E1].norm() == 0.0 && a[E2].norm() == 0.0);
        assert!((a[G1].re - s).abs() < 1e-15 && (a[G2].re - s).abs() < 1e-15);

        let ops = build_operators::<f64>(3).unwrap();
        let rho = product_state(3, &target).unwrap();
        assert!((ops.s1_z.trace_with(&rho.data).re + 0.75).abs() < 1e-14);

        let ops = build_operators::<f64>(2).unwrap();
        let m = ops.expectations(&product_state(2, &target).unwrap());
        assert!(m.m1.max_abs_diff(down) < 1e-15 && m.m2.max_abs_diff(down) < 1e-15);
    }

    #[test]
    fn excited_superposition() {
        let up = BlochVector::new(0.0, 0.0, 0.5);
        let a = atom_state(&MeanFieldState::new(up, up).unwrap(), 0.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((a[E1].re - s).abs() < 1e-15 && (a[E2].re - s).abs() < 1e-15);
        let ops = build_operators::<f64>(4).unwrap();
        let m = ops.expectations(&product_state(4, &MeanFieldState::new(up, up).unwrap()).unwrap());
        assert!(m.m1.max_abs_diff(up) < 1e-14);
    }

    #[test]
    fn sector_state_expectations() {
        let target =
            build_sector_state(&SectorFamilySpec { epsilon: 0.5, eta: std::f64::consts::FRAC_1_SQRT_2 }).unwrap();
        let ops = build_operators::<f64>(3).unwrap();
        for chi in [0.0, std::f64::consts::FRAC_PI_2] {
            let m = ops.expectations(&product_state_with_phase(3, &target, chi).unwrap());
            assert!(m.m1.max_abs_diff(target.m1) < 1e-12);
            assert!(m.m2.max_abs_diff(target.m2) < 1e-12);
        }
    }

    #[test]
    fn unrealizable_target() {
        let t = MeanFieldState::unnormalized(BlochVector::new(0.0, 0.0, 0.2), BlochVector::new(0.1, 0.0, 0.0)).unwrap();
        let e = product_state(2, &t).unwrap_err();
        assert_eq!(e.code(), "unrealizable");
        assert!(e.to_string().contains("must equal 1"));
    }
}
