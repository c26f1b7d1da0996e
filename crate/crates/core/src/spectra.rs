//! Torus lifts of the Bloch components, their discrete line spectrum
//! `Ω_mn = (m + ηn)ν`, and an FFT peak finder for cross-checking against
//! sampled time series.

use std::io::Write;

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BranchWeights, InvariantFrame};
use crate::scalar::{lit, to_f64, Scalar};
use crate::torus::TorusField;

/// Display threshold relative to the strongest line.
pub const DEFAULT_REL_THRESHOLD: f64 = 0.005;
/// Lines closer than this (in frequency) are reported as quasi-resonant.
pub const COLLISION_TOL: f64 = 1e-10;
/// Shortest series accepted by [`timeseries_peaks`].
pub const MIN_SERIES_LEN: usize = 1 << 14;
/// Half-width, in bins, of the neighbourhood a spectral peak must dominate.
/// The Hann main lobe spans ±2 bins; its sidelobes sit at ±2.5, ±3.5, …
/// and would otherwise register as peaks of their own.
pub const PEAK_NEIGHBOURHOOD: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    /// `r_j sin(angle)`, the out-of-plane component.
    Z,
    /// `r_j cos(angle)`, along the in-plane direction orthogonal to the field.
    Perp,
}

/// Lift of one Bloch component of branch `branch` to the torus. The branch
/// angle `c_j θ + φ_j` becomes `x + ψ + φ_1` on branch 1 and
/// `y + ηψ + φ_2` on branch 2; along the orbit `y = ηx` the latter equals
/// `η(x + ψ) + φ_2`.
pub fn torus_observable<T: Scalar>(
    psi: &TorusField<T>,
    frame: &InvariantFrame<T>,
    weights: &BranchWeights<T>,
    branch: usize,
    component: Component,
) -> Result<TorusField<T>> {
    if branch >= frame.r.len().min(weights.len()).min(2) {
        return Err(Error::BranchIndex(branch));
    }
    let l = psi.size();
    let (r, off, c) = (frame.r[branch], frame.varphi[branch], weights.as_slice()[branch]);
    let mut grid = Vec::with_capacity(l * l);
    for i in 0..l {
        let x = TorusField::<T>::node(i, l);
        for j in 0..l {
            let base = if branch == 0 { x } else { TorusField::<T>::node(j, l) };
            let ang = base + c * psi.value(i, j) + off;
            grid.push(match component {
                Component::Z => r * ang.sin(),
                Component::Perp => r * ang.cos(),
            });
        }
    }
    TorusField::from_grid(l, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumLine<T> {
    pub m: i64,
    pub n: i64,
    pub frequency: T,
    pub amplitude: T,
    pub phase: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineSpectrum<T> {
    pub eta: T,
    pub nu: T,
    pub lines: Vec<SpectrumLine<T>>,
    /// Pairs of reported lines whose frequencies collide within
    /// [`COLLISION_TOL`].
    pub warnings: Vec<String>,
}

impl<T: Scalar> LineSpectrum<T> {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        use crate::io::num;
        writeln!(w, "m,n,frequency,amplitude,phase")?;
        for l in &self.lines {
            writeln!(w, "{},{},{},{},{}", l.m, l.n, num(l.frequency), num(l.amplitude), num(l.phase))?;
        }
        Ok(())
    }
}

/// One-sided line spectrum of `q`: every resolved mode except `(0,0)` with
/// `|Q_mn| ≥ rel_threshold · max|Q_mn|`, one line per conjugate pair, sorted
/// by frequency. The pair is represented by the member with positive
/// frequency `(m + ηn)ν`, so all reported frequencies are positive.
pub fn line_spectrum<T: Scalar>(q: &TorusField<T>, eta: T, nu: T, rel_threshold: T) -> LineSpectrum<T> {
    let l = q.size() as i64;
    let h = l / 2;
    let mut cands: Vec<(i64, i64, Complex<T>)> = Vec::new();
    for m in -(h - 1)..h {
        for n in -(h - 1)..h {
            if m == 0 && n == 0 {
                continue;
            }
            let f = lit::<T>(m as f64) + eta * lit(n as f64);
            let upper = m > 0 || (m == 0 && n > 0);
            let keep = if f > T::zero() {
                true
            } else if f < T::zero() {
                false
            } else {
                upper
            };
            if keep {
                cands.push((m, n, q.coeff(m, n)));
            }
        }
    }
    let max = cands.iter().map(|c| c.2.norm()).fold(T::zero(), T::max);
    let cut = max * rel_threshold;
    let mut lines: Vec<SpectrumLine<T>> = cands
        .into_iter()
        .filter(|c| max > T::zero() && c.2.norm() >= cut)
        .map(|(m, n, c)| SpectrumLine {
            m,
            n,
            frequency: (lit::<T>(m as f64) + eta * lit(n as f64)) * nu,
            amplitude: c.norm(),
            phase: c.im.atan2(c.re),
        })
        .collect();
    lines.sort_by(|a, b| a.frequency.partial_cmp(&b.frequency).unwrap().then(a.m.cmp(&b.m)));
    let tol: T = lit(COLLISION_TOL);
    let warnings = lines
        .windows(2)
        .filter(|w| (w[1].frequency - w[0].frequency).abs() < tol)
        .map(|w| {
            format!(
                "quasi-resonant lines ({}, {}) and ({}, {}) at frequency {:e}",
                w[0].m,
                w[0].n,
                w[1].m,
                w[1].n,
                to_f64(w[0].frequency)
            )
        })
        .collect();
    LineSpectrum { eta, nu, lines, warnings }
}

/// `m,n,amplitude` over the square `|m|, |n| ≤ k`.
pub fn write_lattice_csv<T: Scalar, W: Write>(q: &TorusField<T>, k: i64, mut w: W) -> std::io::Result<()> {
    writeln!(w, "m,n,amplitude")?;
    for m in -k..=k {
        for n in -k..=k {
            writeln!(w, "{m},{n},{}", crate::io::num(q.coeff(m, n).norm()))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak<T> {
    /// Cycles per unit time.
    pub frequency: T,
    /// Magnitude of the complex exponential coefficient at that frequency,
    /// comparable to `|Q_mn|`.
    pub amplitude: T,
}

/// Largest `count` peaks of the Hann-windowed spectrum of a uniformly
/// sampled series.
///
/// A peak is a bin that dominates its ±[`PEAK_NEIGHBOURHOOD`] neighbours.
/// Its frequency is refined by a parabola through the log-magnitudes of the
/// three central bins and its amplitude is re-evaluated at the refined
/// frequency.
pub fn timeseries_peaks<T: Scalar>(times: &[T], signal: &[T], count: usize) -> Result<Vec<Peak<T>>> {
    let n = signal.len();
    if times.len() != n {
        return Err(Error::LengthMismatch(format!("{} samples for {} times", n, times.len())));
    }
    if n < MIN_SERIES_LEN || !n.is_power_of_two() {
        return Err(Error::SeriesLength(n, MIN_SERIES_LEN));
    }
    let dt = times[1] - times[0];
    let tol = dt * lit(1e-6);
    if !(dt > T::zero()) {
        return Err(Error::NonUniformSampling(1));
    }
    for (k, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > tol {
            return Err(Error::NonUniformSampling(k + 1));
        }
    }

    let two_pi = T::PI() + T::PI();
    let window: Vec<T> = (0..n)
        .map(|k| lit::<T>(0.5) * (T::one() - (two_pi * lit(k as f64 / n as f64)).cos()))
        .collect();
    let wsum = window.iter().copied().sum::<T>();
    let mut buf: Vec<Complex<T>> = signal.iter().zip(&window).map(|(x, w)| Complex::new(*x * *w, T::zero())).collect();
    T::fft_batch(&mut buf, n, false);
    let mag: Vec<T> = buf[..n / 2].iter().map(|c| c.norm()).collect();

    let span = T::from(n).unwrap() * dt;
    let dtft = |f: T| -> T {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (k, (x, w)) in signal.iter().zip(&window).enumerate() {
            let ph = -two_pi * f * dt * lit(k as f64);
            acc = acc + Complex::new(ph.cos(), ph.sin()) * (*x * *w);
        }
        acc.norm() / wsum
    };

    let r = PEAK_NEIGHBOURHOOD;
    let mut peaks: Vec<(usize, T)> = (1..n / 2 - 1)
        .filter(|&k| {
            let lo = k.saturating_sub(r);
            let hi = (k + r).min(n / 2 - 1);
            (lo..=hi).all(|j| j == k || mag[j] < mag[k])
        })
        .map(|k| (k, mag[k]))
        .collect();
    peaks.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    peaks.truncate(count);

    Ok(peaks
        .into_iter()
        .map(|(k, _)| {
            let (a, b, c) = (mag[k - 1].ln(), mag[k].ln(), mag[k + 1].ln());
            let den = a - b - b + c;
            let delta = if den < T::zero() { lit::<T>(0.5) * (a - c) / den } else { T::zero() };
            let f = (lit::<T>(k as f64) + delta) / span;
            Peak { frequency: f, amplitude: dtft(f) }
        })
        .collect())
}
