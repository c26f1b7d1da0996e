//! The reduced scalar phase flow, its regime classification and the sector
//! thresholds of the interference-cancelled initial-state family.

use std::io::Write;

use serde::Serialize;

use crate::dynamics::IntegratorMeta;
use crate::error::{Error, Result};
use crate::model::{BranchWeights, SectorFamilySpec};
use crate::ode::integrate_uniform;
use crate::scalar::{lit, to_f64, Scalar};

/// `θ' = ω_φ − Σ_j A_j cos(c_j θ + φ_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSystem<T> {
    pub omega_phi: T,
    pub weights: BranchWeights<T>,
    pub amplitudes: Vec<T>,
    pub offsets: Vec<T>,
}

impl<T: Scalar> PhaseSystem<T> {
    pub fn new(omega_phi: T, weights: BranchWeights<T>, amplitudes: Vec<T>, offsets: Vec<T>) -> Result<Self> {
        if weights.len() != amplitudes.len() || weights.len() != offsets.len() {
            return Err(Error::LengthMismatch(format!(
                "weights {}, amplitudes {}, offsets {}",
                weights.len(),
                amplitudes.len(),
                offsets.len()
            )));
        }
        if !omega_phi.is_finite() || amplitudes.iter().chain(&offsets).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("phase system"));
        }
        Ok(PhaseSystem { omega_phi, weights, amplitudes, offsets })
    }

    /// Two-branch system with weights `(1, eta)`.
    pub fn two_branch(omega_phi: T, eta: T, amplitudes: [T; 2], offsets: [T; 2]) -> Self {
        PhaseSystem {
            omega_phi,
            weights: BranchWeights::two_branch(eta),
            amplitudes: amplitudes.to_vec(),
            offsets: offsets.to_vec(),
        }
    }

    pub fn branches(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn rhs(&self, theta: T) -> T {
        phase_rhs(theta, self)
    }

    /// Lifted field `F(x_1, …, x_d) = ω_φ − Σ_j A_j cos(x_j + φ_j)` on the
    /// d-torus; the flow samples it along `x_j = c_j θ`.
    pub fn torus_value(&self, angles: &[T]) -> T {
        let mut f = self.omega_phi;
        for ((a, o), x) in self.amplitudes.iter().zip(&self.offsets).zip(angles) {
            f = f - *a * (*x + *o).cos();
        }
        f
    }

    /// Torus infimum `ω_φ − Σ|A_j|`.
    pub fn torus_margin(&self) -> T {
        self.omega_phi - self.amplitudes.iter().map(|a| a.abs()).sum::<T>()
    }
}

pub fn phase_rhs<T: Scalar>(theta: T, sys: &PhaseSystem<T>) -> T {
    let mut f = sys.omega_phi;
    for ((a, c), o) in sys.amplitudes.iter().zip(sys.weights.as_slice()).zip(&sys.offsets) {
        f = f - *a * (*c * theta + *o).cos();
    }
    f
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Running,
    Pinned,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeVerdict<T> {
    pub kind: Regime,
    /// Minimum of the phase velocity over the accessible set.
    pub margin: T,
}

/// Half-width of the band classified as marginal.
pub const MARGINAL_BAND: f64 = 1e-12;

/// Largest denominator accepted when recognising a weight as rational.
const MAX_DENOMINATOR: i64 = 64;

/// `p/q` with `q ≤ MAX_DENOMINATOR` within 1e-12, via continued fractions.
fn as_rational(x: f64) -> Option<(i64, i64)> {
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut v = x;
    for _ in 0..32 {
        let a = v.floor();
        if a.abs() > 1e12 {
            return None;
        }
        let a = a as i64;
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > MAX_DENOMINATOR {
            return None;
        }
        if (x - h2 as f64 / k2 as f64).abs() <= 1e-12 {
            return Some((h2, k2));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = v - a as f64;
        if frac == 0.0 {
            return None;
        }
        v = 1.0 / frac;
    }
    None
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Integer frequencies `n_j` with `c_j θ = n_j u` under `θ = Q u`, when all
/// weights are rational.
fn commensurate_frequencies<T: Scalar>(weights: &[T]) -> Option<Vec<i64>> {
    let fracs: Vec<(i64, i64)> = weights.iter().map(|c| as_rational(to_f64(*c))).collect::<Option<_>>()?;
    let q = fracs.iter().fold(1i64, |l, &(_, d)| l / gcd(l, d) * d);
    Some(fracs.iter().map(|&(n, d)| n * (q / d)).collect())
}

/// Exact minimum of `ω_φ − Σ A_j cos(n_j u + φ_j)` over one period in `u`.
fn periodic_minimum<T: Scalar>(sys: &PhaseSystem<T>, freqs: &[i64]) -> T {
    let eval = |u: f64| {
        let mut f = to_f64(sys.omega_phi);
        for ((a, o), n) in sys.amplitudes.iter().zip(&sys.offsets).zip(freqs) {
            f -= to_f64(*a) * (*n as f64 * u + to_f64(*o)).cos();
        }
        f
    };
    let nmax = freqs.iter().map(|n| n.unsigned_abs()).max().unwrap_or(0) as usize;
    let samples = 64 * (nmax + 1) + 256;
    let du = std::f64::consts::TAU / samples as f64;
    let vals: Vec<f64> = (0..samples).map(|k| eval(k as f64 * du)).collect();
    let mut best = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    for k in 0..samples {
        let (prev, next) = (vals[(k + samples - 1) % samples], vals[(k + 1) % samples]);
        if vals[k] <= prev && vals[k] <= next {
            // golden-section refinement inside the neighbouring cells
            let (mut lo, mut hi) = ((k as f64 - 1.0) * du, (k as f64 + 1.0) * du);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut x1 = hi - g * (hi - lo);
            let mut x2 = lo + g * (hi - lo);
            let (mut f1, mut f2) = (eval(x1), eval(x2));
            for _ in 0..80 {
                if f1 < f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - g * (hi - lo);
                    f1 = eval(x1);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + g * (hi - lo);
                    f2 = eval(x2);
                }
            }
            best = best.min(f1).min(f2);
        }
    }
    lit(best)
}

/// Running when the phase velocity stays positive on the accessible set.
///
/// Commensurate (all-rational) weights, which include the single-branch
/// case, use the exact minimum over one common period; otherwise the orbit
/// is dense on the torus and the infimum `ω_φ − Σ|A_j|` applies.
pub fn classify_regime<T: Scalar>(sys: &PhaseSystem<T>) -> RegimeVerdict<T> {
    let margin = if sys.amplitudes.iter().all(|a| *a == T::zero()) {
        sys.omega_phi
    } else if let Some(freqs) = commensurate_frequencies(sys.weights.as_slice()) {
        periodic_minimum(sys, &freqs)
    } else {
        sys.torus_margin()
    };
    let band: T = lit(MARGINAL_BAND);
    let kind = if margin > band {
        Regime::Running
    } else if margin < -band {
        Regime::Pinned
    } else {
        Regime::Marginal
    };
    RegimeVerdict { kind, margin }
}

/// Drive above which every member of the sector family runs:
/// `2 ε η / (1 + η) · κ`.
pub fn sector_threshold<T: Scalar>(spec: &SectorFamilySpec<T>, kappa: T) -> Result<T> {
    let spec = spec.validate()?;
    let two = T::one() + T::one();
    Ok(two * spec.epsilon * spec.eta / (T::one() + spec.eta) * kappa)
}

#[derive(Debug, Clone)]
pub struct PhaseTrajectory<T> {
    pub times: Vec<T>,
    /// Unwrapped lift θ(t).
    pub thetas: Vec<T>,
    pub meta: IntegratorMeta,
}

impl<T: Scalar> PhaseTrajectory<T> {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,theta")?;
        for (t, th) in self.times.iter().zip(&self.thetas) {
            writeln!(w, "{},{}", crate::io::num(*t), crate::io::num(*th))?;
        }
        Ok(())
    }
}

pub fn integrate_phase<T: Scalar>(
    theta0: T,
    sys: &PhaseSystem<T>,
    t_end: T,
    dt_out: T,
    tol: T,
) -> Result<PhaseTrajectory<T>> {
    let (times, raw, stats) =
        integrate_uniform(|_, y: &[T], dy: &mut [T]| dy[0] = phase_rhs(y[0], sys), &[theta0], t_end, dt_out, tol)?;
    Ok(PhaseTrajectory {
        times,
        thetas: raw.into_iter().map(|v| v[0]).collect(),
        meta: IntegratorMeta { integrator: "dopri5", tol: to_f64(tol), stats },
    })
}
