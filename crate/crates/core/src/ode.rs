//! Adaptive Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! Shared by the mean-field, phase and tangent-space integrations. The
//! integrator never modifies the state on its own; callers that need a
//! projection (tangent dynamics) do so through the per-step hook.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Hairer's fourth-order continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Smallest admissible step before the run is declared degenerate.
pub const STEP_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Last step size proposed by the controller, useful to warm-start a
    /// continuation run.
    pub last_h: f64,
}

impl StepStats {
    pub fn merge(&mut self, other: &StepStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.rhs_evals += other.rhs_evals;
        self.last_h = other.last_h;
    }
}

/// Dormand–Prince 5(4) controller settings.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5<T> {
    pub rtol: T,
    pub atol: T,
    pub max_steps: usize,
    /// Optional warm-start step.
    pub h_init: Option<T>,
    /// Upper bound on the step size (defaults to the whole horizon).
    pub h_max: Option<T>,
}

impl<T: Scalar> Dopri5<T> {
    /// Relative tolerance `tol` with an absolute floor of `1e-3 · tol` for
    /// components passing through zero.
    pub fn new(tol: T) -> Self {
        Dopri5 {
            rtol: tol,
            atol: tol * lit(1e-3),
            max_steps: 50_000_000,
            h_init: None,
            h_max: None,
        }
    }

    pub fn with_h_init(mut self, h: Option<T>) -> Self {
        self.h_init = h;
        self
    }

    pub fn with_h_max(mut self, h: T) -> Self {
        self.h_max = Some(h);
        self
    }

    /// Integrates `y' = rhs(t, y)` from `t0` to `t_end`, overwriting `y` with
    /// the final state.
    ///
    /// `samples` must be ascending and inside `[t0, t_end]`; each one is
    /// reported through `on_sample` from the dense interpolant. `on_step` runs
    /// after every accepted step and may edit the state in place; it must
    /// return `true` when it did so.
    #[allow(clippy::too_many_arguments)]
    pub fn solve<F, S, H>(
        &self,
        mut rhs: F,
        t0: T,
        y: &mut [T],
        t_end: T,
        samples: &[T],
        mut on_sample: S,
        mut on_step: H,
    ) -> Result<StepStats>
    where
        F: FnMut(T, &[T], &mut [T]),
        S: FnMut(T, &[T]),
        H: FnMut(T, &mut [T]) -> bool,
    {
        let n = y.len();
        let zero = T::zero();
        if !(t_end > t0) {
            return Err(Error::InvalidRequest(format!(
                "t_end ({}) must exceed t0 ({})",
                to_f64(t_end),
                to_f64(t0)
            )));
        }
        if !(self.rtol > zero) || !(self.atol > zero) {
            return Err(Error::InvalidRequest("tolerance must be positive".into()));
        }

        let mut stats = StepStats::default();
        let h_floor: T = lit(STEP_FLOOR);
        let h_max = self.h_max.unwrap_or(t_end - t0);
        let mut next_sample = 0;
        while next_sample < samples.len() && samples[next_sample] <= t0 {
            on_sample(samples[next_sample], y);
            next_sample += 1;
        }

        let mut k1 = vec![zero; n];
        let mut k2 = vec![zero; n];
        let mut k3 = vec![zero; n];
        let mut k4 = vec![zero; n];
        let mut k5 = vec![zero; n];
        let mut k6 = vec![zero; n];
        let mut k7 = vec![zero; n];
        let mut ytmp = vec![zero; n];
        let mut ynew = vec![zero; n];
        let mut dense = vec![[zero; 5]; n];
        let mut yout = vec![zero; n];

        rhs(t0, y, &mut k1);
        stats.rhs_evals += 1;

        let mut h = match self.h_init {
            Some(h) if h > zero => h,
            _ => {
                let h = self.initial_step(&mut rhs, t0, y, &k1, h_max, &mut ytmp, &mut k2);
                stats.rhs_evals += 1;
                h
            }
        };
        if h > h_max {
            h = h_max;
        }

        let safe: T = lit(0.9);
        let fac_min: T = lit(0.2);
        let fac_max: T = lit(10.0);
        let beta: T = lit(0.04);
        let expo: T = lit(0.2 - 0.04 * 0.75);
        let mut fac_old: T = lit(1e-4);
        let mut t = t0;
        let mut last = false;
        let mut rejected_prev = false;

        while !last {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(Error::StepBudget(self.max_steps));
            }
            if t + lit::<T>(1.01) * h >= t_end {
                h = t_end - t;
                last = true;
            }
            if h < h_floor {
                // A remaining sliver shorter than the floor is rounding noise.
                if last && t_end - t < h_floor {
                    break;
                }
                return Err(Error::StepUnderflow { t: to_f64(t), h: to_f64(h) });
            }

            let hh = |c: f64| h * lit::<T>(c);
            for i in 0..n {
                ytmp[i] = y[i] + hh(A21) * k1[i];
            }
            rhs(t + hh(C2), &ytmp, &mut k2);
            for i in 0..n {
                ytmp[i] = y[i] + h * (lit::<T>(A31) * k1[i] + lit::<T>(A32) * k2[i]);
            }
            rhs(t + hh(C3), &ytmp, &mut k3);
            for i in 0..n {
                ytmp[i] = y[i]
                    + h * (lit::<T>(A41) * k1[i] + lit::<T>(A42) * k2[i] + lit::<T>(A43) * k3[i]);
            }
            rhs(t + hh(C4), &ytmp, &mut k4);
            for i in 0..n {
                ytmp[i] = y[i]
                    + h * (lit::<T>(A51) * k1[i]
                        + lit::<T>(A52) * k2[i]
                        + lit::<T>(A53) * k3[i]
                        + lit::<T>(A54) * k4[i]);
            }
            rhs(t + hh(C5), &ytmp, &mut k5);
            for i in 0..n {
                ytmp[i] = y[i]
                    + h * (lit::<T>(A61) * k1[i]
                        + lit::<T>(A62) * k2[i]
                        + lit::<T>(A63) * k3[i]
                        + lit::<T>(A64) * k4[i]
                        + lit::<T>(A65) * k5[i]);
            }
            let t_new = if last { t_end } else { t + h };
            rhs(t_new, &ytmp, &mut k6);
            for i in 0..n {
                ynew[i] = y[i]
                    + h * (lit::<T>(A71) * k1[i]
                        + lit::<T>(A73) * k3[i]
                        + lit::<T>(A74) * k4[i]
                        + lit::<T>(A75) * k5[i]
                        + lit::<T>(A76) * k6[i]);
            }
            rhs(t_new, &ynew, &mut k7);
            stats.rhs_evals += 6;

            // every component must meet its own bound
            let mut err = zero;
            for i in 0..n {
                let e = h
                    * (lit::<T>(E1) * k1[i]
                        + lit::<T>(E3) * k3[i]
                        + lit::<T>(E4) * k4[i]
                        + lit::<T>(E5) * k5[i]
                        + lit::<T>(E6) * k6[i]
                        + lit::<T>(E7) * k7[i]);
                let sc = self.atol + self.rtol * y[i].abs().max(ynew[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                stats.rejected += 1;
                last = false;
                h = h * lit::<T>(0.1);
                rejected_prev = true;
                continue;
            }

            let fac11 = err.powf(expo);
            if err <= T::one() {
                // accepted
                let mut fac = fac11 / fac_old.powf(beta);
                fac = (fac / safe).max(T::one() / fac_max).min(T::one() / fac_min);
                fac_old = err.max(lit(1e-4));
                let mut h_new = h / fac;
                if h_new > h_max {
                    h_new = h_max;
                }
                if rejected_prev && h_new > h {
                    h_new = h;
                }
                rejected_prev = false;

                let have_samples = next_sample < samples.len() && samples[next_sample] <= t_new;
                if have_samples {
                    for i in 0..n {
                        let ydiff = ynew[i] - y[i];
                        let bspl = h * k1[i] - ydiff;
                        dense[i] = [
                            y[i],
                            ydiff,
                            bspl,
                            ydiff - h * k7[i] - bspl,
                            h * (lit::<T>(D1) * k1[i]
                                + lit::<T>(D3) * k3[i]
                                + lit::<T>(D4) * k4[i]
                                + lit::<T>(D5) * k5[i]
                                + lit::<T>(D6) * k6[i]
                                + lit::<T>(D7) * k7[i]),
                        ];
                    }
                    while next_sample < samples.len() && samples[next_sample] <= t_new {
                        let ts = samples[next_sample];
                        let th = (ts - t) / h;
                        let th1 = T::one() - th;
                        for i in 0..n {
                            let r = &dense[i];
                            yout[i] = r[0] + th * (r[1] + th1 * (r[2] + th * (r[3] + th1 * r[4])));
                        }
                        on_sample(ts, &yout);
                        next_sample += 1;
                    }
                }

                y.copy_from_slice(&ynew);
                std::mem::swap(&mut k1, &mut k7);
                t = t_new;
                stats.accepted += 1;
                if on_step(t, y) {
                    rhs(t, y, &mut k1);
                    stats.rhs_evals += 1;
                }
                stats.last_h = to_f64(h_new);
                h = h_new;
            } else {
                stats.rejected += 1;
                last = false;
                rejected_prev = true;
                h = h / (T::one() / fac_min).min(fac11 / safe);
                if h < h_floor {
                    return Err(Error::StepUnderflow { t: to_f64(t), h: to_f64(h) });
                }
            }
        }

        // Samples that sit on t_end but slipped past because of rounding.
        while next_sample < samples.len() {
            on_sample(samples[next_sample], y);
            next_sample += 1;
        }
        Ok(stats)
    }

    #[allow(clippy::too_many_arguments)]
    fn initial_step<F>(
        &self,
        rhs: &mut F,
        t0: T,
        y: &[T],
        f0: &[T],
        h_max: T,
        y1: &mut [T],
        f1: &mut [T],
    ) -> T
    where
        F: FnMut(T, &[T], &mut [T]),
    {
        let n = lit::<T>(y.len().max(1) as f64);
        let mut dnf = T::zero();
        let mut dny = T::zero();
        for i in 0..y.len() {
            let sk = self.atol + self.rtol * y[i].abs();
            dnf = dnf + (f0[i] / sk).powi(2);
            dny = dny + (y[i] / sk).powi(2);
        }
        dnf = (dnf / n).sqrt();
        dny = (dny / n).sqrt();
        let tiny: T = lit(1e-5);
        let mut h = if dnf <= tiny || dny <= tiny {
            lit(1e-6)
        } else {
            dny / dnf * lit::<T>(0.01)
        };
        h = h.min(h_max);
        for i in 0..y.len() {
            y1[i] = y[i] + h * f0[i];
        }
        rhs(t0 + h, y1, f1);
        let mut der2 = T::zero();
        for i in 0..y.len() {
            let sk = self.atol + self.rtol * y[i].abs();
            der2 = der2 + ((f1[i] - f0[i]) / sk).powi(2);
        }
        der2 = (der2 / n).sqrt() / h;
        let der12 = der2.max(dnf);
        let h1 = if der12 <= lit(1e-15) {
            (h * lit::<T>(1e-3)).max(lit(1e-6))
        } else {
            (lit::<T>(0.01) / der12).powf(lit(0.2))
        };
        (h * lit::<T>(100.0)).min(h1).min(h_max)
    }
}

/// Uniform output grid `0, dt, 2 dt, ...` up to and including `t_end`
/// (within a relative slack of 1e-9 of a step).
pub fn uniform_samples<T: Scalar>(t0: T, t_end: T, dt: T) -> Vec<T> {
    let span = to_f64(t_end - t0) / to_f64(dt);
    let count = (span + 1e-9).floor() as usize;
    (0..=count).map(|k| t0 + dt * lit::<T>(k as f64)).collect()
}

/// Integrates and records the state at a uniform grid of output times.
pub fn integrate_uniform<T, F>(
    rhs: F,
    y0: &[T],
    t_end: T,
    dt_out: T,
    tol: T,
) -> Result<(Vec<T>, Vec<Vec<T>>, StepStats)>
where
    T: Scalar,
    F: FnMut(T, &[T], &mut [T]),
{
    if !(t_end > T::zero()) || !(dt_out > T::zero()) || !(tol > T::zero()) {
        return Err(Error::InvalidRequest(
            "t_end, dt_out and tol must all be positive".into(),
        ));
    }
    let samples = uniform_samples(T::zero(), t_end, dt_out);
    let mut times = Vec::with_capacity(samples.len());
    let mut states = Vec::with_capacity(samples.len());
    let mut y = y0.to_vec();
    let stats = Dopri5::new(tol).solve(
        rhs,
        T::zero(),
        &mut y,
        t_end,
        &samples,
        |t, s| {
            times.push(t);
            states.push(s.to_vec());
        },
        |_, _| false,
    )?;
    Ok((times, states, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let (times, states, stats) =
            integrate_uniform(|_, y: &[f64], dy: &mut [f64]| dy[0] = -y[0], &[1.0], 5.0, 0.25, 1e-10)
                .unwrap();
        assert_eq!(times.len(), 21);
        for (t, s) in times.iter().zip(&states) {
            assert!((s[0] - (-t).exp()).abs() < 1e-9, "t={t}");
        }
        assert!(stats.accepted > 0);
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let (times, states, _) = integrate_uniform(
            |_, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            &[0.0, 1.0],
            20.0,
            0.1,
            1e-11,
        )
        .unwrap();
        for (t, s) in times.iter().zip(&states) {
            assert!((s[0] - t.sin()).abs() < 1e-8);
            assert!((s[1] - t.cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_field_is_exact() {
        let (_, states, _) =
            integrate_uniform(|_, _: &[f64], dy: &mut [f64]| dy.fill(0.0), &[0.3, -0.2], 10.0, 1.0, 1e-8)
                .unwrap();
        for s in states {
            assert_eq!(s, vec![0.3, -0.2]);
        }
    }

    #[test]
    fn finite_time_blowup_reports_underflow() {
        // y' = y^2 from y(0) = 1 blows up at t = 1.
        let err = integrate_uniform(|_, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0], &[1.0], 2.0, 0.5, 1e-8)
            .unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { .. } | Error::StepBudget(_)), "{err:?}");
    }

    #[test]
    fn rejects_bad_request() {
        assert!(integrate_uniform(|_, _: &[f64], _: &mut [f64]| {}, &[0.0], -1.0, 0.1, 1e-8).is_err());
        assert!(integrate_uniform(|_, _: &[f64], _: &mut [f64]| {}, &[0.0], 1.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn runs_in_single_precision() {
        let (_, states, _) =
            integrate_uniform(|_, y: &[f32], dy: &mut [f32]| dy[0] = -y[0], &[1.0f32], 1.0, 0.5, 1e-5)
                .unwrap();
        assert!((states[2][0] - (-1.0f32).exp()).abs() < 1e-4);
    }
}
