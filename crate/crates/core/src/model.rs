//! Physical parameters, mean-field states and the invariant-frame reduction.

use std::ops::{Add, Mul, Neg, Sub};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::phase::PhaseSystem;
use crate::scalar::{lit, to_f64, Scalar};

/// Drive, collective dissipation and branch weight of one model instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams<T> {
    pub omega: T,
    pub kappa: T,
    pub eta: T,
    /// Atom number, only read by the finite-N oracle.
    pub n_atoms: Option<usize>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn new(omega: T, kappa: T, eta: T) -> Self {
        ModelParams { omega, kappa, eta, n_atoms: None }
    }

    pub fn with_atoms(mut self, n: usize) -> Self {
        self.n_atoms = Some(n);
        self
    }

    /// Returns the parameters unchanged if every invariant holds.
    pub fn validate(self) -> Result<Self> {
        for (name, v) in [("omega", self.omega), ("kappa", self.kappa), ("eta", self.eta)] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        if self.kappa <= T::zero() {
            return Err(Error::NonPositiveKappa(to_f64(self.kappa)));
        }
        if self.omega < T::zero() {
            return Err(Error::NegativeDrive(to_f64(self.omega)));
        }
        if self.eta.abs() > T::one() {
            return Err(Error::BranchWeightTooLarge(to_f64(self.eta.abs())));
        }
        Ok(self)
    }

    pub fn weights(&self) -> BranchWeights<T> {
        BranchWeights::two_branch(self.eta)
    }

    /// Weight `c_j` of branch `j` (0-based).
    #[inline]
    pub fn weight(&self, branch: usize) -> T {
        if branch == 0 {
            T::one()
        } else {
            self.eta
        }
    }
}

/// Relative transition weights `c_j`; the first is the reference and equals 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchWeights<T>(Vec<T>);

impl<T: Scalar> BranchWeights<T> {
    pub fn new(c: Vec<T>) -> Result<Self> {
        match c.first() {
            None => Err(Error::InvalidBranchWeights("empty weight list".into())),
            Some(c0) if *c0 != T::one() => Err(Error::InvalidBranchWeights(format!(
                "leading weight must be exactly 1 (got {})",
                to_f64(*c0)
            ))),
            _ if c.iter().any(|w| !w.is_finite()) => {
                Err(Error::InvalidBranchWeights("non-finite weight".into()))
            }
            _ => Ok(BranchWeights(c)),
        }
    }

    pub fn two_branch(eta: T) -> Self {
        BranchWeights(vec![T::one(), eta])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Intensive magnetization `(m^x, m^y, m^z)` of one transition branch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BlochVector<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> BlochVector<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        BlochVector { x, y, z }
    }

    pub fn zero() -> Self {
        BlochVector::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_array(a: [T; 3]) -> Self {
        BlochVector::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        BlochVector::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn max_abs_diff(self, o: Self) -> T {
        (self.x - o.x).abs().max((self.y - o.y).abs()).max((self.z - o.z).abs())
    }
}

impl<T: Scalar> Add for BlochVector<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        BlochVector::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Scalar> Sub for BlochVector<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        BlochVector::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Scalar> Mul<T> for BlochVector<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        BlochVector::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Scalar> Neg for BlochVector<T> {
    type Output = Self;
    fn neg(self) -> Self {
        BlochVector::new(-self.x, -self.y, -self.z)
    }
}

/// Mean-field phase-space point: one Bloch vector per branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanFieldState<T> {
    pub m1: BlochVector<T>,
    pub m2: BlochVector<T>,
}

impl<T: Scalar> MeanFieldState<T> {
    /// Builds a state rescaled so that `|m1| + |m2| = 1`.
    pub fn new(m1: BlochVector<T>, m2: BlochVector<T>) -> Result<Self> {
        Self::normalize(m1, m2).map(|(s, _)| s)
    }

    /// Like [`MeanFieldState::new`] but also returns the original radius sum.
    pub fn normalize(m1: BlochVector<T>, m2: BlochVector<T>) -> Result<(Self, T)> {
        let s = Self::unnormalized(m1, m2)?;
        let scale = m1.norm() + m2.norm();
        if scale <= T::zero() {
            return Err(Error::ZeroState);
        }
        if (scale - T::one()).abs() <= T::epsilon() {
            return Ok((s, scale));
        }
        let inv = T::one() / scale;
        Ok((MeanFieldState { m1: m1 * inv, m2: m2 * inv }, scale))
    }

    /// Accepts the vectors as given (finite components only). Used where the
    /// radius sum is not the unit convention, e.g. finite-N expectations.
    pub fn unnormalized(m1: BlochVector<T>, m2: BlochVector<T>) -> Result<Self> {
        if !m1.is_finite() || !m2.is_finite() {
            return Err(Error::NonFinite("state"));
        }
        Ok(MeanFieldState { m1, m2 })
    }

    pub fn from_slice(v: &[T]) -> Self {
        MeanFieldState {
            m1: BlochVector::new(v[0], v[1], v[2]),
            m2: BlochVector::new(v[3], v[4], v[5]),
        }
    }

    pub fn to_array(&self) -> [T; 6] {
        [self.m1.x, self.m1.y, self.m1.z, self.m2.x, self.m2.y, self.m2.z]
    }

    pub fn branch(&self, j: usize) -> BlochVector<T> {
        if j == 0 {
            self.m1
        } else {
            self.m2
        }
    }

    /// Interference-weighted transverse dipole `(m̃^x, m̃^y)`.
    pub fn mtilde(&self, eta: T) -> (T, T) {
        (self.m1.x + eta * self.m2.x, self.m1.y + eta * self.m2.y)
    }

    pub fn total_radius(&self) -> T {
        self.m1.norm() + self.m2.norm()
    }
}

/// Self-consistent precession field `Ω = (ω − κ m̃^y, κ m̃^x, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveField<T> {
    pub omega_x: T,
    pub omega_y: T,
    pub mtilde_x: T,
    pub mtilde_y: T,
}

impl<T: Scalar> EffectiveField<T> {
    pub fn vector(&self) -> BlochVector<T> {
        BlochVector::new(self.omega_x, self.omega_y, T::zero())
    }

    pub fn norm(&self) -> T {
        self.omega_x.hypot(self.omega_y)
    }
}

pub fn effective_field<T: Scalar>(s: &MeanFieldState<T>, p: &ModelParams<T>) -> EffectiveField<T> {
    let (mx, my) = s.mtilde(p.eta);
    EffectiveField {
        omega_x: p.omega - p.kappa * my,
        omega_y: p.kappa * mx,
        mtilde_x: mx,
        mtilde_y: my,
    }
}

/// Conserved field angle plus per-branch geometry in the rotated basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantFrame<T> {
    pub phi: T,
    pub a: Vec<T>,
    pub r: Vec<T>,
    pub varphi: Vec<T>,
}

impl<T: Scalar> InvariantFrame<T> {
    /// Unit vector along the conserved field direction.
    pub fn e_par(&self) -> BlochVector<T> {
        BlochVector::new(self.phi.cos(), self.phi.sin(), T::zero())
    }

    pub fn e_perp(&self) -> BlochVector<T> {
        BlochVector::new(-self.phi.sin(), self.phi.cos(), T::zero())
    }

    /// Bloch vector of branch `j` at phase `theta`, with branch angle
    /// `c_j θ + φ_j`.
    pub fn branch_at(&self, j: usize, weight: T, theta: T) -> BlochVector<T> {
        let ang = weight * theta + self.varphi[j];
        let ez = BlochVector::new(T::zero(), T::zero(), T::one());
        self.e_par() * self.a[j] + self.e_perp() * (self.r[j] * ang.cos()) + ez * (self.r[j] * ang.sin())
    }

    /// Full two-branch state at phase `theta`.
    pub fn state_at(&self, p: &ModelParams<T>, theta: T) -> MeanFieldState<T> {
        MeanFieldState {
            m1: self.branch_at(0, T::one(), theta),
            m2: self.branch_at(1, p.eta, theta),
        }
    }
}

/// Radius below which a branch is treated as frozen on the field axis.
pub const FROZEN_RADIUS: f64 = 1e-12;
/// Smallest field magnitude for which the conserved angle is defined.
pub const FIELD_FLOOR: f64 = 1e-14;

pub fn compute_frame<T: Scalar>(s0: &MeanFieldState<T>, p: &ModelParams<T>) -> Result<InvariantFrame<T>> {
    let field = effective_field(s0, p);
    let norm = field.norm();
    if !(norm > lit(FIELD_FLOOR)) {
        return Err(Error::DegenerateField(to_f64(norm)));
    }
    let phi = field.omega_y.atan2(field.omega_x);
    let (sin_phi, cos_phi) = phi.sin_cos();
    let mut a = Vec::with_capacity(2);
    let mut r = Vec::with_capacity(2);
    let mut varphi = Vec::with_capacity(2);
    for m in [s0.m1, s0.m2] {
        let aj = m.x * cos_phi + m.y * sin_phi;
        let perp = m.y * cos_phi - m.x * sin_phi;
        // |m|² − a² loses precision near the axis; perp² + z² does not.
        let rj = perp.hypot(m.z);
        let vj = if rj < lit(FROZEN_RADIUS) { T::zero() } else { m.z.atan2(perp) };
        a.push(aj);
        r.push(rj);
        varphi.push(vj);
    }
    Ok(InvariantFrame { phi, a, r, varphi })
}

/// Scalar phase flow `θ' = ω cos φ − Σ κ c_j r_j cos(c_j θ + φ_j)`.
pub fn reduce_to_phase<T: Scalar>(
    frame: &InvariantFrame<T>,
    p: &ModelParams<T>,
    w: &BranchWeights<T>,
) -> Result<PhaseSystem<T>> {
    let c = w.as_slice();
    if c.len() != frame.r.len() {
        return Err(Error::LengthMismatch(format!(
            "{} weights for {} branches",
            c.len(),
            frame.r.len()
        )));
    }
    let amplitudes = c.iter().zip(&frame.r).map(|(&cj, &rj)| p.kappa * cj * rj).collect();
    PhaseSystem::new(p.omega * frame.phi.cos(), w.clone(), amplitudes, frame.varphi.clone())
}

/// Member of the interference-cancelled family of initial states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectorFamilySpec<T> {
    pub epsilon: T,
    pub eta: T,
}

impl<T: Scalar> SectorFamilySpec<T> {
    pub fn validate(self) -> Result<Self> {
        if !self.epsilon.is_finite() || !self.eta.is_finite() {
            return Err(Error::NonFinite("sector"));
        }
        if self.epsilon < T::zero() || self.epsilon > T::one() {
            return Err(Error::EpsilonOutOfRange(to_f64(self.epsilon)));
        }
        if self.eta <= T::zero() {
            return Err(Error::NonPositiveEta(to_f64(self.eta)));
        }
        Ok(self)
    }

    /// Radii `(η/(1+η), 1/(1+η))`.
    pub fn radii(&self) -> (T, T) {
        let d = T::one() + self.eta;
        (self.eta / d, T::one() / d)
    }
}

pub fn build_sector_state<T: Scalar>(spec: &SectorFamilySpec<T>) -> Result<MeanFieldState<T>> {
    let spec = spec.validate()?;
    let (r1, r2) = spec.radii();
    let eps = spec.epsilon;
    let tr = (T::one() - eps * eps).max(T::zero()).sqrt();
    MeanFieldState::unnormalized(
        BlochVector::new(r1 * tr, T::zero(), r1 * eps),
        BlochVector::new(-r2 * tr, T::zero(), r2 * eps),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn fig1() -> (MeanFieldState<f64>, ModelParams<f64>) {
        let down = BlochVector::new(0.0, 0.0, -0.5);
        (
            MeanFieldState::new(down, down).unwrap(),
            ModelParams::new(1.2, 1.0, FRAC_1_SQRT_2),
        )
    }

    #[test]
    fn validate_accepts_and_rejects() {
        assert!(ModelParams::new(1.2, 1.0, FRAC_1_SQRT_2).validate().is_ok());
        assert!(ModelParams::new(1.0, 1.0, 0.0).validate().is_ok());
        let e = ModelParams::new(1.0, 1.0, 1.5).validate().unwrap_err();
        assert_eq!(e, Error::BranchWeightTooLarge(1.5));
        assert!(e.to_string().contains("branch weight exceeds 1"));
        assert_eq!(ModelParams::new(1.0, 0.0, 0.5).validate().unwrap_err().code(), "non_positive_kappa");
        assert_eq!(ModelParams::new(-1.0, 1.0, 0.5).validate().unwrap_err().code(), "negative_drive");
        assert_eq!(ModelParams::new(f64::NAN, 1.0, 0.5).validate().unwrap_err().code(), "non_finite");
    }

    #[test]
    fn branch_weights_require_unit_reference() {
        assert!(BranchWeights::new(vec![1.0, 0.3, 0.7]).is_ok());
        assert!(BranchWeights::<f64>::new(vec![]).is_err());
        assert!(BranchWeights::new(vec![0.9, 0.3]).is_err());
    }

    #[test]
    fn sector_states() {
        let s = build_sector_state(&SectorFamilySpec { epsilon: 1.0, eta: 1.0 }).unwrap();
        assert_eq!(s.m1, BlochVector::new(0.0, 0.0, 0.5));
        assert_eq!(s.m2, BlochVector::new(0.0, 0.0, 0.5));

        let s = build_sector_state(&SectorFamilySpec { epsilon: 0.0, eta: 1.0 }).unwrap();
        assert_eq!(s.m1, BlochVector::new(0.5, 0.0, 0.0));
        assert_eq!(s.m2, BlochVector::new(-0.5, 0.0, 0.0));
        assert_eq!(s.mtilde(1.0).0, 0.0);

        let eta = FRAC_1_SQRT_2;
        let s = build_sector_state(&SectorFamilySpec { epsilon: 0.5, eta }).unwrap();
        let (r1, r2) = (eta / (1.0 + eta), 1.0 / (1.0 + eta));
        let t = (0.75f64).sqrt();
        assert!(s.m1.max_abs_diff(BlochVector::new(r1 * t, 0.0, r1 * 0.5)) < 1e-16);
        assert!(s.m2.max_abs_diff(BlochVector::new(-r2 * t, 0.0, r2 * 0.5)) < 1e-16);
        let (mx, my) = s.mtilde(eta);
        assert!(mx.abs() < 1e-15 && my.abs() < 1e-15);

        assert_eq!(
            build_sector_state(&SectorFamilySpec { epsilon: 0.5, eta: 0.0 }).unwrap_err().code(),
            "non_positive_eta"
        );
        assert_eq!(
            build_sector_state(&SectorFamilySpec { epsilon: 1.5, eta: 0.5 }).unwrap_err().code(),
            "epsilon_out_of_range"
        );
    }

    #[test]
    fn effective_field_examples() {
        let (s, p) = fig1();
        let f = effective_field(&s, &p);
        assert_eq!((f.omega_x, f.omega_y), (1.2, 0.0));

        let up_y = BlochVector::new(0.0, 0.5, 0.0);
        let s = MeanFieldState::new(up_y, up_y).unwrap();
        let f = effective_field(&s, &p);
        assert!((f.omega_x - (1.2 - (1.0 + FRAC_1_SQRT_2) / 2.0)).abs() < 1e-15);
        assert_eq!(f.omega_y, 0.0);
        assert_eq!(f.vector().z, 0.0);
    }

    #[test]
    fn fig1_frame() {
        let (s, p) = fig1();
        let f = compute_frame(&s, &p).unwrap();
        assert_eq!(f.phi, 0.0);
        assert_eq!(f.a, vec![0.0, 0.0]);
        assert!((f.r[0] - 0.5).abs() < 1e-15 && (f.r[1] - 0.5).abs() < 1e-15);
        assert!((f.varphi[0] + FRAC_PI_2).abs() < 1e-15);
        assert!((f.varphi[1] + FRAC_PI_2).abs() < 1e-15);

        let up = BlochVector::new(0.0, 0.0, 0.5);
        let f = compute_frame(&MeanFieldState::new(up, up).unwrap(), &p).unwrap();
        assert!((f.varphi[0] - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn frozen_branch_gets_zero_offset() {
        let p = ModelParams::new(1.2, 1.0, 0.5);
        let s = MeanFieldState::new(BlochVector::new(1.0, 0.0, 0.0), BlochVector::zero()).unwrap();
        let f = compute_frame(&s, &p).unwrap();
        assert_eq!(f.r[1], 0.0);
        assert_eq!(f.varphi[1], 0.0);
    }

    #[test]
    fn degenerate_field_is_rejected() {
        // m̃^y = ω/κ and m̃^x = 0 cancel the field entirely.
        let p = ModelParams::new(0.5, 1.0, 0.0);
        let s = MeanFieldState::new(BlochVector::new(0.0, 0.5, 0.0), BlochVector::new(0.0, 0.0, 0.5)).unwrap();
        assert_eq!(compute_frame(&s, &p).unwrap_err().code(), "degenerate_field");
    }

    #[test]
    fn reduce_fig1() {
        let (s, p) = fig1();
        let f = compute_frame(&s, &p).unwrap();
        let sys = reduce_to_phase(&f, &p, &p.weights()).unwrap();
        assert_eq!(sys.omega_phi, 1.2);
        assert!((sys.amplitudes[0] - 0.5).abs() < 1e-15);
        assert!((sys.amplitudes[1] - 0.5 * FRAC_1_SQRT_2).abs() < 1e-15);

        let flat = InvariantFrame { phi: 0.0, a: vec![0.5, 0.5], r: vec![0.0, 0.0], varphi: vec![0.0, 0.0] };
        let sys = reduce_to_phase(&flat, &p, &p.weights()).unwrap();
        assert_eq!(sys.amplitudes, vec![0.0, 0.0]);

        let two_level = ModelParams::new(1.2, 1.0, 0.0);
        let sys = reduce_to_phase(&f, &two_level, &two_level.weights()).unwrap();
        assert_eq!(sys.amplitudes[1], 0.0);
    }

    #[test]
    fn normalization_records_scale() {
        let (s, scale) =
            MeanFieldState::normalize(BlochVector::new(0.0f64, 0.0, 1.0), BlochVector::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(scale, 2.0);
        assert!((s.total_radius() - 1.0f64).abs() < 1e-15);
        assert_eq!(
            MeanFieldState::normalize(BlochVector::<f64>::zero(), BlochVector::zero()).unwrap_err(),
            Error::ZeroState
        );
    }
}
