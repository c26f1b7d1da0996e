//! Maximal Lyapunov exponent of the mean-field flow with perturbations kept
//! tangent to the two Bloch spheres.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::rhs_into;
use crate::error::{Error, Result};
use crate::model::{effective_field, BlochVector, MeanFieldState, ModelParams, FROZEN_RADIUS};
use crate::ode::Dopri5;
use crate::scalar::{lit, to_f64, Scalar};

pub type Matrix6<T> = [[T; 6]; 6];

/// Perturbations of `m1` and `m2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TangentVector<T> {
    pub v1: BlochVector<T>,
    pub v2: BlochVector<T>,
}

impl<T: Scalar> TangentVector<T> {
    pub fn from_slice(v: &[T]) -> Self {
        TangentVector {
            v1: BlochVector::new(v[0], v[1], v[2]),
            v2: BlochVector::new(v[3], v[4], v[5]),
        }
    }

    pub fn to_array(&self) -> [T; 6] {
        [self.v1.x, self.v1.y, self.v1.z, self.v2.x, self.v2.y, self.v2.z]
    }

    pub fn norm(&self) -> T {
        (self.v1.dot(self.v1) + self.v2.dot(self.v2)).sqrt()
    }
}

fn skew<T: Scalar>(a: BlochVector<T>) -> [[T; 3]; 3] {
    let z = T::zero();
    [[z, -a.z, a.y], [a.z, z, -a.x], [-a.y, a.x, z]]
}

/// Analytic derivative of the mean-field vector field with respect to
/// `(m1, m2)`: `J_jk = c_j (δ_jk [Ω]_× − c_k [m_j]_× D)` where
/// `D = ∂Ω/∂m̃`.
pub fn jacobian<T: Scalar>(s: &MeanFieldState<T>, p: &ModelParams<T>) -> Matrix6<T> {
    let omega = skew(effective_field(s, p).vector());
    let z = T::zero();
    let d = [[z, -p.kappa, z], [p.kappa, z, z], [z, z, z]];
    let c = [T::one(), p.eta];
    let mut jac = [[z; 6]; 6];
    for j in 0..2 {
        let mj = skew(s.branch(j));
        for k in 0..2 {
            for a in 0..3 {
                for b in 0..3 {
                    let mut v = z;
                    for e in 0..3 {
                        v = v + mj[a][e] * d[e][b];
                    }
                    let mut entry = -c[k] * v;
                    if j == k {
                        entry = entry + omega[a][b];
                    }
                    jac[3 * j + a][3 * k + b] = c[j] * entry;
                }
            }
        }
    }
    jac
}

/// `J v` without forming the matrix.
pub fn jacobian_vector_product<T: Scalar>(
    s: &MeanFieldState<T>,
    p: &ModelParams<T>,
    v: &TangentVector<T>,
) -> TangentVector<T> {
    let omega = effective_field(s, p).vector();
    let dm = v.v1 + v.v2 * p.eta;
    let domega = BlochVector::new(-p.kappa * dm.y, p.kappa * dm.x, T::zero());
    TangentVector {
        v1: omega.cross(v.v1) + domega.cross(s.m1),
        v2: (omega.cross(v.v2) + domega.cross(s.m2)) * p.eta,
    }
}

fn project_branch<T: Scalar>(m: BlochVector<T>, v: BlochVector<T>) -> BlochVector<T> {
    let r2 = m.dot(m);
    if r2.sqrt() < lit(FROZEN_RADIUS) {
        return v;
    }
    v - m * (v.dot(m) / r2)
}

/// Removes the radial part of each branch perturbation. A branch with zero
/// radius has no radial direction and passes through unchanged.
pub fn tangent_project<T: Scalar>(s: &MeanFieldState<T>, v: &TangentVector<T>) -> TangentVector<T> {
    TangentVector { v1: project_branch(s.m1, v.v1), v2: project_branch(s.m2, v.v2) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovOptions<T> {
    pub renorm_interval: T,
    pub tol: T,
    /// Project the tangent vector back onto the sphere tangent spaces after
    /// every accepted step.
    pub project: bool,
}

impl<T: Scalar> Default for LyapunovOptions<T> {
    fn default() -> Self {
        LyapunovOptions { renorm_interval: T::one(), tol: lit(1e-10), project: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovTrace<T> {
    pub times: Vec<T>,
    pub lambda_max: Vec<T>,
    pub renorm_interval: T,
    pub seed: u64,
}

impl<T: Scalar> LyapunovTrace<T> {
    pub fn last(&self) -> Option<(T, T)> {
        Some((*self.times.last()?, *self.lambda_max.last()?))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,lambda_max")?;
        for (t, l) in self.times.iter().zip(&self.lambda_max) {
            writeln!(w, "{},{}", crate::io::num(*t), crate::io::num(*l))?;
        }
        Ok(())
    }
}

/// Finite-time maximal exponent with default options.
pub fn max_lyapunov<T: Scalar>(
    s0: &MeanFieldState<T>,
    p: &ModelParams<T>,
    t_end: T,
    renorm_interval: T,
    seed: u64,
) -> Result<LyapunovTrace<T>> {
    let opts = LyapunovOptions { renorm_interval, ..Default::default() };
    max_lyapunov_with(s0, p, t_end, seed, &opts)
}

/// Co-integrates the state and one tangent vector, renormalizing the
/// tangent every `renorm_interval` and accumulating the log growth.
///
/// Branches with zero weight `c_j` do not move and carry no dynamics, so
/// their tangent components are held at zero.
pub fn max_lyapunov_with<T: Scalar>(
    s0: &MeanFieldState<T>,
    p: &ModelParams<T>,
    t_end: T,
    seed: u64,
    opts: &LyapunovOptions<T>,
) -> Result<LyapunovTrace<T>> {
    if !(t_end > T::zero()) || !(opts.renorm_interval > T::zero()) || !(opts.tol > T::zero()) {
        return Err(Error::InvalidRequest("t_end, renorm_interval and tol must be positive".into()));
    }
    let active = [true, p.eta != T::zero()];
    let mask = |v: TangentVector<T>| TangentVector {
        v1: v.v1,
        v2: if active[1] { v.v2 } else { BlochVector::zero() },
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v0 = [T::zero(); 6];
    for x in v0.iter_mut() {
        *x = lit(rng.random_range(-1.0..1.0));
    }
    let mut v = mask(TangentVector::from_slice(&v0));
    if opts.project {
        v = tangent_project(s0, &v);
    }
    let n0 = v.norm();
    if !(n0 > T::zero()) {
        return Err(Error::TangentUnderflow(0.0));
    }
    let v = TangentVector::from_slice(&v.to_array().map(|x| x / n0));

    let mut y = [T::zero(); 12];
    y[..6].copy_from_slice(&s0.to_array());
    y[6..].copy_from_slice(&v.to_array());

    let rhs = |_: T, y: &[T], dy: &mut [T]| {
        rhs_into(p, &y[..6], &mut dy[..6]);
        let s = MeanFieldState::from_slice(&y[..6]);
        let jv = jacobian_vector_product(&s, p, &TangentVector::from_slice(&y[6..]));
        dy[6..].copy_from_slice(&jv.to_array());
    };
    let fix = |y: &mut [T]| {
        let s = MeanFieldState::from_slice(&y[..6]);
        let mut v = mask(TangentVector::from_slice(&y[6..]));
        if opts.project {
            v = tangent_project(&s, &v);
        }
        y[6..].copy_from_slice(&v.to_array());
    };

    let mut solver = Dopri5::new(opts.tol);
    let tiny: T = T::min_positive_value().sqrt();
    let (mut t, mut sum_log) = (T::zero(), T::zero());
    let mut trace = LyapunovTrace {
        times: Vec::new(),
        lambda_max: Vec::new(),
        renorm_interval: opts.renorm_interval,
        seed,
    };
    let intervals = (to_f64(t_end / opts.renorm_interval) + 1e-9).floor() as usize;
    for k in 1..=intervals {
        let t_next = opts.renorm_interval * lit(k as f64);
        let stats = solver.solve(
            rhs,
            t,
            &mut y,
            t_next,
            &[],
            |_, _| {},
            |_, y| {
                fix(y);
                true
            },
        )?;
        solver = solver.with_h_init(T::from(stats.last_h));
        t = t_next;
        let g = TangentVector::from_slice(&y[6..]).norm();
        if !(g > tiny) || !g.is_finite() {
            return Err(Error::TangentUnderflow(to_f64(t)));
        }
        sum_log = sum_log + g.ln();
        for x in y[6..].iter_mut() {
            *x = *x / g;
        }
        trace.times.push(t);
        trace.lambda_max.push(sum_log / t);
    }
    Ok(trace)
}

/// Largest real part among the eigenvalues of the Jacobian restricted to the
/// tangent plane of the first sphere, for a state whose second branch is
/// inert (`η = 0` or `m2 = 0`).
pub fn tangential_growth_rate<T: Scalar>(s: &MeanFieldState<T>, p: &ModelParams<T>) -> T {
    let jac = jacobian(s, p);
    let m = s.m1;
    // Orthonormal basis of the plane orthogonal to m1.
    let seed = if m.x.abs() < lit::<T>(0.9) * m.norm() {
        BlochVector::new(T::one(), T::zero(), T::zero())
    } else {
        BlochVector::new(T::zero(), T::one(), T::zero())
    };
    let u = project_branch(m, seed);
    let e1 = u * (T::one() / u.norm());
    let w = m.cross(e1);
    let e2 = w * (T::one() / w.norm());
    let apply = |v: BlochVector<T>| {
        let a = v.to_array();
        let mut out = [T::zero(); 3];
        for (i, o) in out.iter_mut().enumerate() {
            for k in 0..3 {
                *o = *o + jac[i][k] * a[k];
            }
        }
        BlochVector::from_array(out)
    };
    let (j1, j2) = (apply(e1), apply(e2));
    let (a, b, c, d) = (e1.dot(j1), e1.dot(j2), e2.dot(j1), e2.dot(j2));
    let half_tr = (a + d) * lit(0.5);
    let disc = half_tr * half_tr - (a * d - b * c);
    if disc >= T::zero() {
        half_tr + disc.sqrt()
    } else {
        half_tr
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::meanfield_rhs;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn random_state(rng: &mut ChaCha8Rng) -> MeanFieldState<f64> {
        let mut v = [0.0; 6];
        v.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        MeanFieldState::new(BlochVector::new(v[0], v[1], v[2]), BlochVector::new(v[3], v[4], v[5])).unwrap()
    }

    fn rhs_flat(s: &MeanFieldState<f64>, p: &ModelParams<f64>) -> [f64; 6] {
        let (a, b) = meanfield_rhs(s, p);
        [a.x, a.y, a.z, b.x, b.y, b.z]
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for _ in 0..100 {
            let s = random_state(&mut rng);
            let p = ModelParams::new(rng.random_range(0.0..2.0), rng.random_range(0.2..2.0), rng.random_range(-1.0..1.0));
            let jac = jacobian(&s, &p);
            let base = s.to_array();
            for k in 0..6 {
                let (mut up, mut dn) = (base, base);
                up[k] += h;
                dn[k] -= h;
                let fu = rhs_flat(&MeanFieldState::from_slice(&up), &p);
                let fd = rhs_flat(&MeanFieldState::from_slice(&dn), &p);
                for i in 0..6 {
                    let fdiff = (fu[i] - fd[i]) / (2.0 * h);
                    assert!((jac[i][k] - fdiff).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn jacobian_vector_product_agrees_with_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let s = random_state(&mut rng);
            let p = ModelParams::new(1.2, 1.0, 0.37);
            let mut raw = [0.0; 6];
            raw.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
            let v = TangentVector::from_slice(&raw);
            let jv = jacobian_vector_product(&s, &p, &v).to_array();
            let jac = jacobian(&s, &p);
            for i in 0..6 {
                let m: f64 = (0..6).map(|k| jac[i][k] * raw[k]).sum();
                assert!((m - jv[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn jacobian_at_origin_is_linear_part() {
        let s = MeanFieldState::unnormalized(BlochVector::zero(), BlochVector::zero()).unwrap();
        let p = ModelParams::new(1.5, 1.0, 0.5);
        let jac = jacobian(&s, &p);
        // Ω = (ω, 0, 0): only the drive rotation survives.
        assert_eq!(jac[1][2], -1.5);
        assert_eq!(jac[2][1], 1.5);
        assert_eq!(jac[4][5], -0.75);
        assert_eq!(jac[0][3], 0.0);
        let nonzero = jac.iter().flatten().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 4);
    }

    #[test]
    fn projection_properties() {
        let s = MeanFieldState::new(BlochVector::new(0.1f64, 0.2, -0.3), BlochVector::new(0.4, 0.0, 0.1)).unwrap();
        let radial = TangentVector { v1: s.m1 * 2.0, v2: s.m2 * -0.5 };
        assert!(tangent_project(&s, &radial).norm() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let mut raw = [0.0; 6];
            raw.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
            let v = TangentVector::from_slice(&raw);
            let once = tangent_project(&s, &v);
            let twice = tangent_project(&s, &once);
            assert!(once.v1.max_abs_diff(twice.v1) < 1e-15 && once.v2.max_abs_diff(twice.v2) < 1e-15);
            assert!(once.norm() <= v.norm() + 1e-15);
            assert!(once.v1.dot(s.m1).abs() < 1e-15 && once.v2.dot(s.m2).abs() < 1e-15);
        }

        let frozen = MeanFieldState::new(BlochVector::new(0.0, 0.0, 1.0), BlochVector::zero()).unwrap();
        let v = TangentVector { v1: BlochVector::new(1.0, 0.0, 0.0), v2: BlochVector::new(0.3, 0.2, 0.1) };
        assert_eq!(tangent_project(&frozen, &v), v);
    }

    #[test]
    fn pure_rotation_has_zero_exponent() {
        // Interference-cancelled sector: m̃ stays zero and the motion is a
        // rigid rotation about x.
        let s = crate::model::build_sector_state(&crate::model::SectorFamilySpec { epsilon: 0.0, eta: 1.0 }).unwrap();
        let p = ModelParams::new(1.3f64, 1.0, 1.0);
        let tr = max_lyapunov(&s, &p, 200.0, 1.0, 9).unwrap();
        for (t, l) in tr.times.iter().zip(&tr.lambda_max).skip(10) {
            assert!((t * l).abs() < 5.0, "t={t} λ={l}");
        }
    }

    #[test]
    fn trace_bookkeeping_and_seeds() {
        let s = MeanFieldState::new(BlochVector::new(0.0, 0.0, -0.5), BlochVector::new(0.0, 0.0, -0.5)).unwrap();
        let p = ModelParams::new(1.2, 1.0, FRAC_1_SQRT_2);
        let a = max_lyapunov(&s, &p, 100.0, 0.5, 1).unwrap();
        let b = max_lyapunov(&s, &p, 100.0, 0.5, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.times.len(), 200);
        assert_eq!(a.times[0], 0.5);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,lambda_max\n"));
        assert_eq!(max_lyapunov(&s, &p, 100.0, 0.0, 1).unwrap_err().code(), "invalid_request");
    }
}
