use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::phase::PhaseSystem;
use crate::scalar::{lit, to_f64, tol_floor, Scalar};

use super::drift::{require_running, require_two_branches};
use super::field::{check_grid, signed_freq, TorusField};

/// Coefficients of G below this magnitude are discarded before division.
pub const COEFF_FLOOR: f64 = 1e-14;
/// Smallest admissible `|m + nη|` among retained modes.
pub const DENOM_FLOOR: f64 = 1e-8;
/// Residual target `|P(s)|` of the root solve.
pub const ROOT_TOL: f64 = 1e-12;
const MAX_ITER: usize = 100;

/// `G = 1/F` on the `L×L` grid.
pub fn build_g<T: Scalar>(sys: &PhaseSystem<T>, l: usize) -> Result<TorusField<T>> {
    require_two_branches(sys)?;
    check_grid(l, 8)?;
    require_running(sys)?;
    TorusField::from_fn(l, |x, y| T::one() / sys.torus_value(&[x, y]))
}

/// Solves `(∂_x + η∂_y) U = G − G₀₀` mode by mode: `U_mn = G_mn / (i(m + nη))`,
/// `U₀₀ = 0`.
pub fn build_u<T: Scalar>(g: &TorusField<T>, eta: T) -> Result<TorusField<T>> {
    let l = g.size();
    let floor: T = lit(COEFF_FLOOR);
    let denom_floor: T = lit(DENOM_FLOOR);
    let zero = Complex::new(T::zero(), T::zero());
    let mut u = vec![zero; l * l];
    for i in 0..l {
        for j in 0..l {
            let c = g.coeffs()[i * l + j];
            // The Nyquist row and column have no signed frequency to divide by;
            // a resolved G has nothing there anyway.
            if (i == 0 && j == 0) || i == l / 2 || j == l / 2 || c.norm() < floor {
                continue;
            }
            let (m, n) = (signed_freq(i, l), signed_freq(j, l));
            let d = lit::<T>(m as f64) + eta * lit(n as f64);
            if d.abs() <= denom_floor {
                return Err(Error::QuasiResonant { m, n, denominator: to_f64(d.abs()) });
            }
            u[i * l + j] = Complex::new(c.im / d, -c.re / d);
        }
    }
    TorusField::from_coeffs(l, u, T::min_positive_value())
}

/// Conjugacy `ψ` on an `L×L` grid: at each node, the unique root of
/// `P(s) = s + ν (U(x+s, y+ηs) − U(0,0))`, found by Newton's method inside
/// a shrinking bracket.
///
/// Subtracting `U(0,0)` pins the gauge `ψ(0,0) = 0`; it is a constant shift
/// and leaves `P' = νG > 0` unchanged.
pub fn solve_psi<T: Scalar>(u: &TorusField<T>, nu: T, eta: T, l: usize) -> Result<TorusField<T>> {
    check_grid(l, 2)?;
    let u0 = u.eval(T::zero(), T::zero());
    // |U − U(0,0)| ≤ 2 Σ|U_mn| bounds the root.
    let bound = u.coeffs().iter().map(|c| c.norm()).sum::<T>() * (T::one() + T::one());
    let reach = nu * bound + lit(1e-6);
    let tol: T = tol_floor(ROOT_TOL, 16.0);
    let grid: Vec<T> = (0..l * l)
        .into_par_iter()
        .map(|k| {
            let (ix, iy) = (k / l, k % l);
            let x = TorusField::<T>::node(ix, l);
            let y = TorusField::<T>::node(iy, l);
            let p = |s: T| {
                let (v, d) = u.eval_along(x + s, y + eta * s, eta);
                (s + nu * (v - u0), T::one() + nu * d)
            };
            let (mut lo, mut hi) = (-reach, reach);
            let mut s = (-nu * (u.eval(x, y) - u0)).max(lo).min(hi);
            let mut best = T::infinity();
            for _ in 0..MAX_ITER {
                let (f, df) = p(s);
                best = best.min(f.abs());
                if f.abs() < tol {
                    return Ok(s);
                }
                if f > T::zero() {
                    hi = s;
                } else {
                    lo = s;
                }
                let newton = s - f / df;
                s = if df > T::zero() && newton > lo && newton < hi {
                    newton
                } else {
                    (lo + hi) * lit(0.5)
                };
                if hi - lo <= T::epsilon() * (T::one() + s.abs()) {
                    // Bracket collapsed to round-off; accept if P is at the
                    // floating-point floor there.
                    let (f, _) = p(s);
                    if f.abs() < tol {
                        return Ok(s);
                    }
                    best = best.min(f.abs());
                    break;
                }
            }
            Err(Error::RootNotConverged { ix, iy, residual: to_f64(best) })
        })
        .collect::<Result<_>>()?;
    TorusField::from_grid(l, grid)
}

/// Max-norm residual of `ν(1 + ∂_xψ + η∂_yψ) − F(x+ψ, y+ηψ)` on the grid,
/// with spectral derivatives.
pub fn psi_residual<T: Scalar>(psi: &TorusField<T>, sys: &PhaseSystem<T>, nu: T) -> T {
    let eta = sys.weights.as_slice()[1];
    let d = psi.derivative(T::one(), eta);
    let l = psi.size();
    let mut worst = T::zero();
    for i in 0..l {
        let x = TorusField::<T>::node(i, l);
        for j in 0..l {
            let y = TorusField::<T>::node(j, l);
            let s = psi.value(i, j);
            let lhs = nu * (T::one() + d.value(i, j));
            let rhs = sys.torus_value(&[x + s, y + eta * s]);
            worst = worst.max((lhs - rhs).abs());
        }
    }
    worst
}

/// `θ(t) = νt + ψ(νt mod 2π, ηνt mod 2π)`.
pub fn reconstruct_theta<T: Scalar>(nu: T, psi: &TorusField<T>, eta: T, times: &[T]) -> Vec<T> {
    let two_pi = T::PI() + T::PI();
    times
        .par_iter()
        .map(|&t| {
            let x = nu * t;
            let y = eta * x;
            x + psi.eval(x % two_pi, y % two_pi)
        })
        .collect()
}

/// Everything needed to turn the phase system into `θ(t)`.
#[derive(Debug, Clone)]
pub struct Conjugacy<T> {
    pub nu: T,
    pub eta: T,
    pub g: TorusField<T>,
    pub u: TorusField<T>,
    pub psi: TorusField<T>,
    pub residual: T,
}

/// Runs the full chain G → U → ψ on an `L×L` grid with `ν` from the
/// elliptic closed form.
pub fn conjugacy<T: Scalar>(sys: &PhaseSystem<T>, l: usize) -> Result<Conjugacy<T>> {
    let nu = super::drift::drift_elliptic(sys)?.nu;
    let eta = sys.weights.as_slice()[1];
    let g = build_g(sys, l)?;
    let u = build_u(&g, eta)?;
    let psi = solve_psi(&u, nu, eta, l)?;
    let residual = psi_residual(&psi, sys, nu);
    Ok(Conjugacy { nu, eta, g, u, psi, residual })
}
