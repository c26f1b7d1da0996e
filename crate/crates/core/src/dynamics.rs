//! Mean-field equations of motion on S² × S² and their conservation laws.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::model::{effective_field, BlochVector, MeanFieldState, ModelParams};
use crate::ode::{integrate_uniform, StepStats};
use crate::scalar::Scalar;

/// `ṁ_j = c_j Ω × m_j`.
pub fn meanfield_rhs<T: Scalar>(
    s: &MeanFieldState<T>,
    p: &ModelParams<T>,
) -> (BlochVector<T>, BlochVector<T>) {
    let omega = effective_field(s, p).vector();
    (omega.cross(s.m1), omega.cross(s.m2) * p.eta)
}

/// Flat-slice form of [`meanfield_rhs`] for the integrator.
pub(crate) fn rhs_into<T: Scalar>(p: &ModelParams<T>, y: &[T], dy: &mut [T]) {
    let (d1, d2) = meanfield_rhs(&MeanFieldState::from_slice(y), p);
    dy[..3].copy_from_slice(&d1.to_array());
    dy[3..6].copy_from_slice(&d2.to_array());
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegratorMeta {
    pub integrator: &'static str,
    pub tol: f64,
    pub stats: StepStats,
}

#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<MeanFieldState<T>>,
    pub meta: IntegratorMeta,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Writes `t,m1x,m1y,m1z,m2x,m2y,m2z` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,m1x,m1y,m1z,m2x,m2y,m2z")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(w, "{}", crate::io::num(*t))?;
            for v in s.to_array() {
                write!(w, ",{}", crate::io::num(v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Integrates the mean-field flow with the adaptive 5(4) pair, sampling the
/// dense output every `dt_out`. No projection onto the spheres is applied.
pub fn integrate<T: Scalar>(
    s0: &MeanFieldState<T>,
    p: &ModelParams<T>,
    t_end: T,
    dt_out: T,
    tol: T,
) -> Result<Trajectory<T>> {
    let (times, raw, stats) =
        integrate_uniform(|_, y: &[T], dy: &mut [T]| rhs_into(p, y, dy), &s0.to_array(), t_end, dt_out, tol)?;
    Ok(Trajectory {
        times,
        states: raw.iter().map(|v| MeanFieldState::from_slice(v)).collect(),
        meta: IntegratorMeta {
            integrator: "dopri5",
            tol: crate::scalar::to_f64(tol),
            stats,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationReport<T> {
    pub max_radius_drift: T,
    pub max_phi_drift: T,
    pub max_total_drift: T,
}

/// Field angle measured as a deviation from `phi0`, wrapped into (−π, π].
fn angle_gap<T: Scalar>(phi: T, phi0: T) -> T {
    let d = phi - phi0;
    let two_pi = T::PI() + T::PI();
    let wrapped = d - two_pi * (d / two_pi).round();
    wrapped.abs()
}

pub fn conservation_report<T: Scalar>(traj: &Trajectory<T>, p: &ModelParams<T>) -> ConservationReport<T> {
    let Some(first) = traj.states.first() else {
        return ConservationReport {
            max_radius_drift: T::zero(),
            max_phi_drift: T::zero(),
            max_total_drift: T::zero(),
        };
    };
    let r0 = [first.m1.norm(), first.m2.norm()];
    let f0 = effective_field(first, p);
    let phi0 = f0.omega_y.atan2(f0.omega_x);
    let mut rep = ConservationReport {
        max_radius_drift: T::zero(),
        max_phi_drift: T::zero(),
        max_total_drift: T::zero(),
    };
    for s in &traj.states {
        let r = [s.m1.norm(), s.m2.norm()];
        for j in 0..2 {
            rep.max_radius_drift = rep.max_radius_drift.max((r[j] - r0[j]).abs());
        }
        rep.max_total_drift = rep.max_total_drift.max((r[0] + r[1] - T::one()).abs());
        let f = effective_field(s, p);
        if f.norm() > T::zero() {
            let phi = f.omega_y.atan2(f.omega_x);
            rep.max_phi_drift = rep.max_phi_drift.max(angle_gap(phi, phi0));
        }
    }
    rep
}
