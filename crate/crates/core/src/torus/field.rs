use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, tol_floor, Scalar};

/// Signed frequency of FFT index `k` on an `l`-point axis; the Nyquist
/// index maps to `+l/2`.
#[inline]
pub(crate) fn signed_freq(k: usize, l: usize) -> i64 {
    if k <= l / 2 {
        k as i64
    } else {
        k as i64 - l as i64
    }
}

pub(crate) fn check_grid(l: usize, min: usize) -> Result<()> {
    if l < min || !l.is_power_of_two() {
        return Err(Error::GridSize(l, min));
    }
    Ok(())
}

fn transpose<T: Copy>(buf: &mut [T], l: usize) {
    for i in 0..l {
        for j in i + 1..l {
            buf.swap(i * l + j, j * l + i);
        }
    }
}

fn fft2<T: Scalar>(buf: &mut [Complex<T>], l: usize, inverse: bool) {
    T::fft_batch(buf, l, inverse);
    transpose(buf, l);
    T::fft_batch(buf, l, inverse);
    transpose(buf, l);
}

#[derive(Debug, Clone, Copy)]
struct Mode<T> {
    m: i64,
    n: i64,
    fm: T,
    fn_: T,
    /// Coefficient already doubled for its conjugate partner.
    c: Complex<T>,
}

/// Real function on `[0, 2π)²` held both as an `L×L` grid (row = x,
/// column = y) and as Fourier coefficients normalized by `L²`, so that
/// `coeff(0, 0)` is the torus mean.
#[derive(Debug, Clone)]
pub struct TorusField<T> {
    size: usize,
    grid: Vec<T>,
    coeffs: Vec<Complex<T>>,
    // Upper half-plane of the retained spectrum, for off-grid evaluation.
    modes: Vec<Mode<T>>,
    max_m: usize,
    max_n: usize,
}

impl<T: Scalar> TorusField<T> {
    /// Node coordinate `2π k / L`.
    pub fn node(k: usize, l: usize) -> T {
        T::PI() * lit(2.0 * k as f64 / l as f64)
    }

    pub fn from_grid(l: usize, grid: Vec<T>) -> Result<Self> {
        check_grid(l, 2)?;
        if grid.len() != l * l {
            return Err(Error::Dimension(format!("grid has {} values, expected {}", grid.len(), l * l)));
        }
        let mut buf: Vec<Complex<T>> = grid.iter().map(|&g| Complex::new(g, T::zero())).collect();
        fft2(&mut buf, l, false);
        let norm = T::one() / lit((l * l) as f64);
        buf.iter_mut().for_each(|c| *c = *c * norm);
        Ok(Self::assemble(l, grid, buf, T::zero()))
    }

    /// Samples `f(x, y)` on the uniform grid.
    pub fn from_fn<F>(l: usize, f: F) -> Result<Self>
    where
        F: Fn(T, T) -> T + Sync,
    {
        check_grid(l, 2)?;
        let grid: Vec<T> = (0..l * l)
            .into_par_iter()
            .map(|k| f(Self::node(k / l, l), Self::node(k % l, l)))
            .collect();
        Self::from_grid(l, grid)
    }

    /// Synthesizes the grid from Hermitian-symmetric coefficients (FFT
    /// index order). Modes with `|c| <= floor` are skipped in off-grid
    /// evaluation.
    pub fn from_coeffs(l: usize, coeffs: Vec<Complex<T>>, floor: T) -> Result<Self> {
        check_grid(l, 2)?;
        if coeffs.len() != l * l {
            return Err(Error::Dimension(format!("{} coefficients, expected {}", coeffs.len(), l * l)));
        }
        let mut buf = coeffs.clone();
        fft2(&mut buf, l, true);
        let grid = buf.iter().map(|c| c.re).collect();
        Ok(Self::assemble(l, grid, coeffs, floor))
    }

    fn assemble(l: usize, grid: Vec<T>, coeffs: Vec<Complex<T>>, floor: T) -> Self {
        let floor = if floor > T::zero() {
            floor
        } else {
            // Just above the round-off level of the transform.
            let max = coeffs.iter().map(|c| c.norm()).fold(T::zero(), T::max);
            max * tol_floor::<T>(1e-15, 4.0)
        };
        let half: T = lit(0.5);
        let two = T::one() + T::one();
        let axis = |k: usize| -> Vec<(i64, T)> {
            if l > 1 && k == l / 2 {
                vec![((l / 2) as i64, half), (-((l / 2) as i64), half)]
            } else {
                vec![(signed_freq(k, l), T::one())]
            }
        };
        let mut modes = Vec::new();
        let (mut max_m, mut max_n) = (0usize, 0usize);
        for i in 0..l {
            for j in 0..l {
                let c = coeffs[i * l + j];
                if c.norm() <= floor && !(i == 0 && j == 0) {
                    continue;
                }
                for &(m, wm) in &axis(i) {
                    for &(n, wn) in &axis(j) {
                        let w = wm * wn;
                        let c = if m > 0 || (m == 0 && n > 0) {
                            c * (w * two)
                        } else if m == 0 && n == 0 {
                            c
                        } else {
                            continue;
                        };
                        max_m = max_m.max(m.unsigned_abs() as usize);
                        max_n = max_n.max(n.unsigned_abs() as usize);
                        modes.push(Mode { m, n, fm: lit(m as f64), fn_: lit(n as f64), c });
                    }
                }
            }
        }
        TorusField { size: l, grid, coeffs, modes, max_m, max_n }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn value(&self, ix: usize, iy: usize) -> T {
        self.grid[ix * self.size + iy]
    }

    /// Coefficients in FFT index order, row = m.
    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    /// Coefficient of `e^{i(mx + ny)}`; zero outside the resolved band.
    pub fn coeff(&self, m: i64, n: i64) -> Complex<T> {
        let l = self.size as i64;
        if m.abs() > l / 2 || n.abs() > l / 2 {
            return Complex::new(T::zero(), T::zero());
        }
        self.coeffs[(m.rem_euclid(l) * l + n.rem_euclid(l)) as usize]
    }

    /// Number of Fourier modes used for off-grid evaluation.
    pub fn retained_modes(&self) -> usize {
        self.modes.len()
    }

    /// Spectral value at an arbitrary point.
    pub fn eval(&self, x: T, y: T) -> T {
        self.eval_along(x, y, T::zero()).0
    }

    /// Value and directional derivative `(∂_x + η∂_y)` at `(x, y)`.
    pub fn eval_along(&self, x: T, y: T, eta: T) -> (T, T) {
        let zero = Complex::new(T::zero(), T::zero());
        let cis = |a: T| Complex::new(a.cos(), a.sin());
        let mut ex = vec![zero; self.max_m + 1];
        let mut ey = vec![zero; 2 * self.max_n + 1];
        let (sx, sy) = (cis(x), cis(y));
        ex[0] = Complex::new(T::one(), T::zero());
        for k in 1..=self.max_m {
            ex[k] = ex[k - 1] * sx;
        }
        let c = self.max_n;
        ey[c] = Complex::new(T::one(), T::zero());
        let sy_inv = sy.conj();
        for k in 1..=self.max_n {
            ey[c + k] = ey[c + k - 1] * sy;
            ey[c - k] = ey[c - k + 1] * sy_inv;
        }
        let (mut v, mut d) = (T::zero(), T::zero());
        for md in &self.modes {
            let term = md.c * ex[md.m as usize] * ey[(c as i64 + md.n) as usize];
            v = v + term.re;
            // Re(i k z) = −k Im z
            let k = md.fm + eta * md.fn_;
            d = d - k * term.im;
        }
        (v, d)
    }

    /// Spectral derivative `(a ∂_x + b ∂_y)` as a new field; Nyquist modes
    /// are dropped since their derivative is not real.
    pub fn derivative(&self, a: T, b: T) -> TorusField<T> {
        let l = self.size;
        let mut out = self.coeffs.clone();
        for i in 0..l {
            for j in 0..l {
                let k = i * l + j;
                if i == l / 2 || j == l / 2 {
                    out[k] = Complex::new(T::zero(), T::zero());
                    continue;
                }
                let w = a * lit(signed_freq(i, l) as f64) + b * lit(signed_freq(j, l) as f64);
                out[k] = out[k] * Complex::new(T::zero(), w);
            }
        }
        TorusField::from_coeffs(l, out, T::zero()).expect("size already validated")
    }

    pub fn min_max(&self) -> (T, T) {
        self.grid
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn summary(&self, pde_residual: Option<T>) -> TorusSummary {
        let (min, max) = self.min_max();
        TorusSummary {
            grid_size: self.size,
            min: to_f64(min),
            max: to_f64(max),
            pde_residual: pde_residual.map(to_f64),
        }
    }

    /// `x,y,value` rows, x-major.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,value")?;
        let l = self.size;
        for i in 0..l {
            let x = crate::io::num(Self::node(i, l));
            for j in 0..l {
                writeln!(w, "{x},{},{}", crate::io::num(Self::node(j, l)), crate::io::num(self.value(i, j)))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusSummary {
    pub grid_size: usize,
    pub min: f64,
    pub max: f64,
    pub pde_residual: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth(x: f64, y: f64) -> f64 {
        1.0 / (2.0 + x.sin() * 0.7 + (y + 0.3).cos() * 0.4)
    }

    #[test]
    fn round_trip_and_hermitian() {
        let f = TorusField::from_fn(64, smooth).unwrap();
        let g = TorusField::from_coeffs(64, f.coeffs().to_vec(), 0.0).unwrap();
        for (a, b) in f.grid().iter().zip(g.grid()) {
            assert!((a - b).abs() < 1e-13);
        }
        for m in -20..=20 {
            for n in -20..=20 {
                let (c, d) = (f.coeff(m, n), f.coeff(-m, -n));
                assert!((c - d.conj()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn off_grid_evaluation_is_spectral() {
        let f = TorusField::from_fn(64, smooth).unwrap();
        for &(x, y) in &[(0.123, 4.56), (3.3, 0.01), (-1.0, 7.5)] {
            assert!((f.eval(x, y) - smooth(x, y)).abs() < 1e-12);
        }
        // on-grid evaluation reproduces the node value
        let (x, y) = (TorusField::<f64>::node(5, 64), TorusField::<f64>::node(17, 64));
        assert!((f.eval(x, y) - f.value(5, 17)).abs() < 1e-13);
    }

    #[test]
    fn nyquist_mode_evaluates_as_cosine() {
        let l = 8;
        let f = TorusField::from_fn(l, |x: f64, _| (4.0 * x).cos()).unwrap();
        assert!((f.coeff(4, 0).re - 1.0).abs() < 1e-14);
        for x in [0.1f64, 0.7, 2.0] {
            assert!((f.eval(x, 0.0) - (4.0 * x).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn directional_derivative() {
        let eta = 0.6;
        let f = TorusField::from_fn(64, smooth).unwrap();
        let d = f.derivative(1.0, eta);
        let h = 1e-5;
        for &(x, y) in &[(0.4, 1.9), (5.0, 2.2)] {
            let fd = (smooth(x + h, y + eta * h) - smooth(x - h, y - eta * h)) / (2.0 * h);
            assert!((d.eval(x, y) - fd).abs() < 1e-8);
            assert!((f.eval_along(x, y, eta).1 - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn mean_is_zero_coefficient() {
        let f = TorusField::from_fn(32, |x: f64, y: f64| 3.0 + x.cos() * y.sin()).unwrap();
        assert!((f.coeff(0, 0).re - 3.0).abs() < 1e-15);
        assert!((f.coeff(1, 1).norm() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert_eq!(TorusField::<f64>::from_grid(6, vec![0.0; 36]).unwrap_err().code(), "grid_size");
        assert_eq!(TorusField::<f64>::from_grid(8, vec![0.0; 10]).unwrap_err().code(), "dimension");
    }

    #[test]
    fn single_precision() {
        let f = TorusField::<f32>::from_fn(32, |x, y| (x + y).sin()).unwrap();
        assert!((f.eval(0.3, 0.4) - 0.7f32.sin()).abs() < 1e-5);
    }

    #[test]
    fn csv_rows() {
        let f = TorusField::from_fn(4, |x: f64, _| x).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 17);
        assert!(text.starts_with("x,y,value\n"));
    }
}
