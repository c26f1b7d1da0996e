use serde::Serialize;

use crate::error::{Error, Result};
use crate::phase::PhaseSystem;
use crate::scalar::{lit, to_f64, tol_floor, Scalar};

use super::field::{check_grid, TorusField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftMethod {
    Quadrature,
    Elliptic,
    Birkhoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftResult<T> {
    pub nu: T,
    pub method: DriftMethod,
    pub modulus_squared: Option<T>,
    pub elliptic_k: Option<T>,
    pub grid_size: Option<usize>,
}

pub(crate) fn require_two_branches<T: Scalar>(sys: &PhaseSystem<T>) -> Result<()> {
    if sys.branches() != 2 {
        return Err(Error::BranchCount(sys.branches()));
    }
    Ok(())
}

pub(crate) fn require_running<T: Scalar>(sys: &PhaseSystem<T>) -> Result<()> {
    let margin = sys.torus_margin();
    if !(margin > T::zero()) {
        return Err(Error::NotRunning(to_f64(margin)));
    }
    Ok(())
}

/// `ν = 1 / ⟨1/F⟩` by the rectangle rule on an `L×L` torus grid.
pub fn drift_quadrature<T: Scalar>(sys: &PhaseSystem<T>, l: usize) -> Result<DriftResult<T>> {
    require_two_branches(sys)?;
    check_grid(l, 64)?;
    require_running(sys)?;
    let rows: Vec<T> = (0..l)
        .map(|i| {
            let x = TorusField::<T>::node(i, l);
            (0..l).map(|j| T::one() / sys.torus_value(&[x, TorusField::<T>::node(j, l)])).sum::<T>()
        })
        .collect();
    let mean = rows.into_iter().sum::<T>() / lit((l * l) as f64);
    Ok(DriftResult {
        nu: T::one() / mean,
        method: DriftMethod::Quadrature,
        modulus_squared: None,
        elliptic_k: None,
        grid_size: Some(l),
    })
}

/// Arithmetic–geometric mean, iterated to relative `1e-15` (or the working
/// precision if coarser).
pub fn agm<T: Scalar>(mut a: T, mut b: T) -> T {
    let tol: T = tol_floor(1e-15, 2.0);
    for _ in 0..64 {
        if (a - b).abs() <= tol * a.abs() {
            break;
        }
        let half: T = lit(0.5);
        (a, b) = ((a + b) * half, (a * b).sqrt());
    }
    a
}

/// Complete elliptic integral of the first kind `K(k)` from `k²`.
pub fn elliptic_k<T: Scalar>(k2: T) -> T {
    T::FRAC_PI_2() / agm(T::one(), (T::one() - k2).sqrt())
}

/// Closed form `ν = π √(ω_φ² − (A₁−A₂)²) / (2K(k))`, with
/// `k² = 4A₁A₂ / (ω_φ² − (A₁−A₂)²)`.
pub fn drift_elliptic<T: Scalar>(sys: &PhaseSystem<T>) -> Result<DriftResult<T>> {
    require_two_branches(sys)?;
    require_running(sys)?;
    let (a1, a2) = (sys.amplitudes[0].abs(), sys.amplitudes[1].abs());
    let w = sys.omega_phi;
    let d = w * w - (a1 - a2) * (a1 - a2);
    let four: T = lit(4.0);
    let k2 = four * a1 * a2 / d;
    let k = elliptic_k(k2);
    Ok(DriftResult {
        nu: T::PI() * d.sqrt() / (k + k),
        method: DriftMethod::Elliptic,
        modulus_squared: Some(k2),
        elliptic_k: Some(k),
        grid_size: None,
    })
}

/// Least-squares slope of the unwrapped lift over the final 90% of the
/// window.
pub fn drift_birkhoff<T: Scalar>(thetas: &[T], times: &[T]) -> Result<DriftResult<T>> {
    if thetas.len() != times.len() {
        return Err(Error::LengthMismatch(format!("{} phases for {} times", thetas.len(), times.len())));
    }
    if let Some(k) = thetas.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonMonotone(k + 1));
    }
    let start = thetas.len() / 10;
    let (ts, ys) = (&times[start..], &thetas[start..]);
    if ts.len() < 2 {
        return Err(Error::TooShort(format!("{} samples in the fit window", ts.len())));
    }
    let n: T = lit(ts.len() as f64);
    let tm = ts.iter().copied().sum::<T>() / n;
    let ym = ys.iter().copied().sum::<T>() / n;
    let (mut sty, mut stt) = (T::zero(), T::zero());
    for (t, y) in ts.iter().zip(ys) {
        sty = sty + (*t - tm) * (*y - ym);
        stt = stt + (*t - tm) * (*t - tm);
    }
    Ok(DriftResult {
        nu: sty / stt,
        method: DriftMethod::Birkhoff,
        modulus_squared: None,
        elliptic_k: None,
        grid_size: None,
    })
}
