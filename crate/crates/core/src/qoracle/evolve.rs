use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::model::{MeanFieldState, ModelParams};
use crate::ode::uniform_samples;
use crate::scalar::{lit, to_f64, Scalar};

use super::operators::CollectiveOperators;
use super::sparse::SparseMatrix;
use super::DensityMatrix;

const POSITIVITY_TOL: f64 = 1e-6;
const MAX_STEPS_PER_OUTPUT: usize = 1 << 16;

/// Generator `ρ ↦ −i[H, ρ] + γ D[L]ρ` with `H = ω(S1x + ηS2x)`,
/// `L = S1⁻ + ηS2⁻` and `γ = 2κ/N`.
#[derive(Debug, Clone)]
pub struct Liouvillian<T> {
    dim: usize,
    gamma: T,
    /// `−iH − (γ/2) L†L`
    a: SparseMatrix<T>,
    l: SparseMatrix<T>,
    l_dag: SparseMatrix<T>,
}

impl<T: Scalar> Liouvillian<T> {
    pub fn new(ops: &CollectiveOperators<T>, p: &ModelParams<T>) -> Self {
        let c = |x: T| Complex::new(x, T::zero());
        let h = ops.s1_x.combine(c(p.omega), &ops.s2_x, c(p.omega * p.eta));
        let l = ops.s1_minus.combine(c(T::one()), &ops.s2_minus, c(p.eta));
        let l_dag = l.adjoint();
        let gamma = (p.kappa + p.kappa) / lit::<T>(ops.n_atoms as f64);
        let a = h.combine(Complex::new(T::zero(), -T::one()), &l_dag.mul(&l), c(-gamma * lit(0.5)));
        Liouvillian { dim: ops.dim, gamma, a, l, l_dag }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Upper bound on the generator's norm, used to seed the step size.
    pub fn rate_bound(&self) -> T {
        let two = T::one() + T::one();
        two * self.a.norm_inf() + self.gamma * self.l.norm_inf() * self.l_dag.norm_inf()
    }

    /// `out = rhs(ρ)` for Hermitian `ρ`, with two scratch buffers. The
    /// result is formed as `X + X†` with `X = Aρ + (γ/2)LρL†`, so it is
    /// Hermitian to the last bit.
    pub fn apply(&self, rho: &[Complex<T>], out: &mut [Complex<T>], x: &mut [Complex<T>], y: &mut [Complex<T>]) {
        let d = self.dim;
        self.a.left_mul(rho, x);
        self.l.left_mul(rho, y);
        self.l_dag.right_mul_add(y, self.gamma * lit(0.5), x);
        let x: &[Complex<T>] = x;
        out.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
            for (j, o) in row.iter_mut().enumerate() {
                *o = x[i * d + j] + x[j * d + i].conj();
            }
        });
    }
}

pub fn lindblad_rhs<T: Scalar>(
    rho: &DensityMatrix<T>,
    ops: &CollectiveOperators<T>,
    p: &ModelParams<T>,
) -> Result<DensityMatrix<T>> {
    if rho.dim != ops.dim {
        return Err(Error::Dimension(format!("density matrix {} vs operators {}", rho.dim, ops.dim)));
    }
    let liou = Liouvillian::new(ops, p);
    let zero = Complex::new(T::zero(), T::zero());
    let n = rho.data.len();
    let (mut out, mut x, mut y) = (vec![zero; n], vec![zero; n], vec![zero; n]);
    liou.apply(&rho.data, &mut out, &mut x, &mut y);
    Ok(DensityMatrix { n_atoms: rho.n_atoms, dim: rho.dim, data: out })
}

struct Rk4<'a, T> {
    liou: &'a Liouvillian<T>,
    k: Vec<Complex<T>>,
    acc: Vec<Complex<T>>,
    tmp: Vec<Complex<T>>,
    x: Vec<Complex<T>>,
    y: Vec<Complex<T>>,
}

impl<'a, T: Scalar> Rk4<'a, T> {
    fn new(liou: &'a Liouvillian<T>) -> Self {
        let n = liou.dim * liou.dim;
        let z = || vec![Complex::new(T::zero(), T::zero()); n];
        Rk4 { liou, k: z(), acc: z(), tmp: z(), x: z(), y: z() }
    }

    fn step(&mut self, rho: &mut Vec<Complex<T>>, h: T) {
        let half = h * lit(0.5);
        let stages = [(h / lit(6.0), half), (h / lit(3.0), half), (h / lit(3.0), h), (h / lit(6.0), T::zero())];
        for (s, &(w, next)) in stages.iter().enumerate() {
            let src = if s == 0 { &rho[..] } else { &self.tmp[..] };
            self.liou.apply(src, &mut self.k, &mut self.x, &mut self.y);
            let (k, r) = (&self.k, &rho[..]);
            if s == 0 {
                self.acc.par_iter_mut().zip(r).zip(k).for_each(|((a, r), k)| *a = *r + *k * w);
            } else {
                self.acc.par_iter_mut().zip(k).for_each(|(a, k)| *a = *a + *k * w);
            }
            if s < 3 {
                self.tmp.par_iter_mut().zip(r).zip(k).for_each(|((t, r), k)| *t = *r + *k * next);
            }
        }
        std::mem::swap(rho, &mut self.acc);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Fixed step; chosen automatically by step halving when `None`.
    pub dt: Option<f64>,
    /// Bound on the observable change under step halving, over the full run.
    pub change_tol: f64,
    /// Full eigenvalue positivity checks are done up to this dimension.
    pub eigen_max_dim: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { dt: None, change_tol: 1e-8, eigen_max_dim: 64 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QuantumDiagnostics {
    pub n_atoms: usize,
    pub dim: usize,
    pub dt: f64,
    pub steps_per_output: usize,
    pub halving_change: Option<f64>,
    pub max_trace_deviation: f64,
    pub max_hermiticity_error: f64,
    pub min_diagonal: f64,
    pub min_eigenvalue: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct QuantumSeries<T> {
    pub n_atoms: usize,
    pub times: Vec<T>,
    pub states: Vec<MeanFieldState<T>>,
    pub diagnostics: QuantumDiagnostics,
    pub final_state: DensityMatrix<T>,
}

impl<T: Scalar> QuantumSeries<T> {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,m1x,m1y,m1z,m2x,m2y,m2z,N")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(w, "{}", crate::io::num(*t))?;
            for v in s.to_array() {
                write!(w, ",{}", crate::io::num(v))?;
            }
            writeln!(w, ",{}", self.n_atoms)?;
        }
        Ok(())
    }
}

pub fn evolve<T: Scalar>(
    rho0: &DensityMatrix<T>,
    ops: &CollectiveOperators<T>,
    p: &ModelParams<T>,
    t_end: T,
    dt_out: T,
) -> Result<QuantumSeries<T>> {
    evolve_with(rho0, ops, p, t_end, dt_out, &EvolveOptions::default())
}

/// Runs `outputs` sampling intervals with `k` RK4 steps each and returns the
/// observables at every sample (including the initial one).
fn run_observables<T: Scalar>(
    liou: &Liouvillian<T>,
    ops: &CollectiveOperators<T>,
    rho0: &[Complex<T>],
    dt_out: T,
    k: usize,
    outputs: usize,
) -> Vec<[T; 6]> {
    let mut rk = Rk4::new(liou);
    let mut rho = rho0.to_vec();
    let h = dt_out / lit::<T>(k as f64);
    let d = ops.dim;
    let obs = |rho: &Vec<Complex<T>>| {
        let tr = (0..d).map(|i| rho[i * d + i].re).sum::<T>();
        ops.moments(rho, T::one() / tr).to_array()
    };
    let mut out = vec![obs(&rho)];
    for _ in 0..outputs {
        for _ in 0..k {
            rk.step(&mut rho, h);
        }
        out.push(obs(&rho));
    }
    out
}

fn max_change<T: Scalar>(a: &[[T; 6]], b: &[[T; 6]]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(u, v)| u.iter().zip(v).map(|(x, y)| to_f64((*x - *y).abs())))
        .fold(0.0, f64::max)
}

/// Fixed-step RK4 on the dense density matrix. Unless `opts.dt` is set, the
/// step is halved until a probe run over `[0, min(1, t_end)]` changes by less
/// than `change_tol` scaled by the probe fraction of the horizon.
pub fn evolve_with<T: Scalar>(
    rho0: &DensityMatrix<T>,
    ops: &CollectiveOperators<T>,
    p: &ModelParams<T>,
    t_end: T,
    dt_out: T,
    opts: &EvolveOptions,
) -> Result<QuantumSeries<T>> {
    if rho0.dim != ops.dim {
        return Err(Error::Dimension(format!("density matrix {} vs operators {}", rho0.dim, ops.dim)));
    }
    if !(t_end > T::zero()) || !(dt_out > T::zero()) || dt_out > t_end {
        return Err(Error::InvalidRequest("need 0 < dt_out <= t_end".into()));
    }
    let times = uniform_samples(T::zero(), t_end, dt_out);
    let outputs = times.len() - 1;
    let liou = Liouvillian::new(ops, p);

    let (k, halving_change) = match opts.dt {
        Some(h) => {
            if !(h > 0.0) {
                return Err(Error::InvalidRequest("dt must be positive".into()));
            }
            (((to_f64(dt_out) / h).ceil() as usize).max(1), None)
        }
        None => {
            let h0 = 2.0 / to_f64(liou.rate_bound()).max(1e-300);
            let mut k = ((to_f64(dt_out) / h0).ceil() as usize).max(1);
            let probe_outputs = ((1.0f64.min(to_f64(t_end)) / to_f64(dt_out)).ceil() as usize).clamp(1, outputs);
            let t_probe = to_f64(dt_out) * probe_outputs as f64;
            let tol = opts.change_tol * (t_probe / to_f64(t_end)).min(1.0);
            let mut coarse = run_observables(&liou, ops, &rho0.data, dt_out, k, probe_outputs);
            loop {
                if k > MAX_STEPS_PER_OUTPUT {
                    return Err(Error::StepBudget(k * outputs));
                }
                let fine = run_observables(&liou, ops, &rho0.data, dt_out, 2 * k, probe_outputs);
                let change = max_change(&coarse, &fine);
                if change < tol {
                    break (k, Some(change));
                }
                coarse = fine;
                k *= 2;
            }
        }
    };

    let h = dt_out / lit::<T>(k as f64);
    let mut rk = Rk4::new(&liou);
    let mut rho = DensityMatrix { n_atoms: rho0.n_atoms, dim: rho0.dim, data: rho0.data.clone() };
    let mut diag = QuantumDiagnostics {
        n_atoms: ops.n_atoms,
        dim: ops.dim,
        dt: to_f64(h),
        steps_per_output: k,
        halving_change,
        max_trace_deviation: 0.0,
        max_hermiticity_error: 0.0,
        min_diagonal: f64::INFINITY,
        min_eigenvalue: None,
    };
    let mut states = Vec::with_capacity(times.len());
    for (s, t) in times.iter().enumerate() {
        if s > 0 {
            for _ in 0..k {
                rk.step(&mut rho.data, h);
            }
        }
        check_sample(&rho, to_f64(*t), opts, &mut diag)?;
        states.push(ops.expectations(&rho));
    }
    Ok(QuantumSeries { n_atoms: ops.n_atoms, times, states, diagnostics: diag, final_state: rho })
}

fn check_sample<T: Scalar>(rho: &DensityMatrix<T>, t: f64, opts: &EvolveOptions, diag: &mut QuantumDiagnostics) -> Result<()> {
    let tr = rho.trace();
    diag.max_trace_deviation = diag.max_trace_deviation.max(to_f64((tr - Complex::new(T::one(), T::zero())).norm()));
    diag.max_hermiticity_error = diag.max_hermiticity_error.max(to_f64(rho.hermiticity_error()));
    let min_diag = to_f64(rho.min_diagonal());
    diag.min_diagonal = diag.min_diagonal.min(min_diag);
    let fail = |detail: String| Err(Error::Positivity { t, detail: format!("{detail} (step too large?)") });
    if min_diag < -POSITIVITY_TOL {
        return fail(format!("diagonal entry {min_diag:e}"));
    }
    let minor = to_f64(rho.minor_violation());
    if minor > POSITIVITY_TOL {
        return fail(format!("2x2 minor violated by {minor:e}"));
    }
    if rho.dim <= opts.eigen_max_dim {
        let ev = rho.min_eigenvalue();
        diag.min_eigenvalue = Some(diag.min_eigenvalue.map_or(ev, |m| m.min(ev)));
        if ev < -POSITIVITY_TOL {
            return fail(format!("minimum eigenvalue {ev:e}"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonEntry {
    pub n_atoms: usize,
    pub max_deviation_m1z: f64,
    pub max_deviation_any: f64,
    pub max_trace_deviation: f64,
    pub max_hermiticity_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub t_end: f64,
    pub entries: Vec<ComparisonEntry>,
    /// Whether `max_deviation_m1z` strictly decreases with N.
    pub monotone_m1z: bool,
}

/// Maximum deviations of each finite-N series from the mean-field curve,
/// sampled on the same time grid.
pub fn compare_to_meanfield<T: Scalar>(series: &[QuantumSeries<T>], mf: &Trajectory<T>) -> Result<ComparisonReport> {
    let mut entries = Vec::with_capacity(series.len());
    for s in series {
        if s.times.len() != mf.times.len()
            || s.times.iter().zip(&mf.times).any(|(a, b)| to_f64((*a - *b).abs()) > 1e-9)
        {
            return Err(Error::LengthMismatch(format!(
                "N = {} series has {} samples, mean-field {}",
                s.n_atoms,
                s.times.len(),
                mf.times.len()
            )));
        }
        let mut dz = 0.0f64;
        let mut dany = 0.0f64;
        for (q, m) in s.states.iter().zip(&mf.states) {
            dz = dz.max(to_f64((q.m1.z - m.m1.z).abs()));
            for (a, b) in q.to_array().iter().zip(m.to_array()) {
                dany = dany.max(to_f64((*a - b).abs()));
            }
        }
        entries.push(ComparisonEntry {
            n_atoms: s.n_atoms,
            max_deviation_m1z: dz,
            max_deviation_any: dany,
            max_trace_deviation: s.diagnostics.max_trace_deviation,
            max_hermiticity_error: s.diagnostics.max_hermiticity_error,
        });
    }
    entries.sort_by_key(|e| e.n_atoms);
    let monotone_m1z = entries.windows(2).all(|w| w[1].max_deviation_m1z < w[0].max_deviation_m1z);
    Ok(ComparisonReport {
        t_end: mf.times.last().map_or(0.0, |t| to_f64(*t)),
        entries,
        monotone_m1z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::meanfield_rhs;
    use crate::model::{build_sector_state, BlochVector, SectorFamilySpec};
    use crate::qoracle::{build_operators, product_state, E1, G1};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};

    type C = Complex<f64>;

    fn random_hermitian(dim: usize, seed: u64) -> Vec<C> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = vec![C::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            m[i * dim + i] = C::new(rng.random_range(-1.0..1.0), 0.0);
            for j in i + 1..dim {
                let v = C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[i * dim + j] = v;
                m[j * dim + i] = v.conj();
            }
        }
        m
    }

    fn dense(m: &SparseMatrix<f64>) -> DMatrix<C> {
        let d = m.dim();
        let mut out = DMatrix::zeros(d, d);
        for (i, j, v) in m.triplets() {
            out[(i, j)] = v;
        }
        out
    }

    fn dense_rhs(ops: &CollectiveOperators<f64>, p: &ModelParams<f64>, rho: &DMatrix<C>) -> DMatrix<C> {
        let h = dense(&ops.s1_x) * C::new(p.omega, 0.0) + dense(&ops.s2_x) * C::new(p.omega * p.eta, 0.0);
        let l = dense(&ops.s1_minus) + dense(&ops.s2_minus) * C::new(p.eta, 0.0);
        let ld = l.adjoint();
        let gamma = 2.0 * p.kappa / ops.n_atoms as f64;
        let i = C::new(0.0, 1.0);
        let comm = &h * rho - rho * &h;
        let ldl = &ld * &l;
        let diss = &l * rho * &ld - (&ldl * rho + rho * &ldl) * C::new(0.5, 0.0);
        comm * (-i) + diss * C::new(gamma, 0.0)
    }

    fn params(omega: f64, eta: f64) -> ModelParams<f64> {
        ModelParams::new(omega, 1.0, eta)
    }

    #[test]
    fn trace_preserved_for_mixed_state() {
        let ops = build_operators::<f64>(2).unwrap();
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        let d = lindblad_rhs(&rho, &ops, &params(0.0, 0.7)).unwrap();
        assert!(d.trace().norm() < 1e-15);
    }

    #[test]
    fn excited_population_decay_rate() {
        let ops = build_operators::<f64>(1).unwrap();
        let mut data = vec![C::new(0.0, 0.0); 16];
        data[E1 * 4 + E1] = C::new(1.0, 0.0);
        let rho = DensityMatrix::from_data(1, data).unwrap();
        for eta in [0.0, 0.5, 1.0] {
            let d = lindblad_rhs(&rho, &ops, &params(0.0, eta)).unwrap();
            assert!((d.get(E1, E1).re + 2.0).abs() < 1e-15);
            assert!((d.get(G1, G1).re - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_dense_reference_and_stays_hermitian() {
        for n in [1, 2] {
            let ops = build_operators::<f64>(n).unwrap();
            let p = params(1.2, std::f64::consts::FRAC_1_SQRT_2);
            let dim = ops.dim;
            let raw = random_hermitian(dim, 7 + n as u64);
            let rho = DensityMatrix::from_data(n, raw.clone()).unwrap();
            let fast = lindblad_rhs(&rho, &ops, &p).unwrap();
            assert_eq!(fast.hermiticity_error(), 0.0);
            let reference = dense_rhs(&ops, &p, &DMatrix::from_row_slice(dim, dim, &raw));
            for i in 0..dim {
                for j in 0..dim {
                    assert!((fast.get(i, j) - reference[(i, j)]).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn single_atom_matches_dense_propagator() {
        let ops = build_operators::<f64>(1).unwrap();
        let p = params(1.3, 0.0);
        let target = MeanFieldState::unnormalized(BlochVector::new(0.6, 0.0, -0.8), BlochVector::zero()).unwrap();
        let rho0 = product_state(1, &target).unwrap();
        let opts = EvolveOptions { change_tol: 1e-13, ..Default::default() };
        let series = evolve_with(&rho0, &ops, &p, 6.0, 0.5, &opts).unwrap();

        // Column-stacked superoperator of the dense generator, exponentiated.
        let d = 4;
        let mut gen = DMatrix::<C>::zeros(d * d, d * d);
        for c in 0..d * d {
            let mut e = DMatrix::<C>::zeros(d, d);
            e[(c % d, c / d)] = C::new(1.0, 0.0);
            let col = dense_rhs(&ops, &p, &e);
            for r in 0..d * d {
                gen[(r, c)] = col[(r % d, r / d)];
            }
        }
        let r0 = DMatrix::from_row_slice(d, d, &rho0.data);
        let v0 = DMatrix::from_fn(d * d, 1, |r, _| r0[(r % d, r / d)]);
        for (t, s) in series.times.iter().zip(&series.states) {
            let v = (&gen * C::new(*t, 0.0)).exp() * &v0;
            // ⟨S1z⟩ = (ρ_e1e1 − ρ_g1g1)/2, m = 2⟨S⟩ for N = 1
            let mz = v[(E1 + d * E1, 0)].re - v[(G1 + d * G1, 0)].re;
            assert!((s.m1.z - mz).abs() < 1e-10, "t = {t}: {} vs {mz}", s.m1.z);
        }
        assert!(series.states[4].m1.z != series.states[0].m1.z);
    }

    #[test]
    fn trace_over_long_run() {
        let n = 2;
        let ops = build_operators::<f64>(n).unwrap();
        let p = params(1.2, std::f64::consts::FRAC_1_SQRT_2);
        let down = BlochVector::new(0.0, 0.0, -0.5);
        let rho0 = product_state(n, &MeanFieldState::new(down, down).unwrap()).unwrap();
        let s = evolve(&rho0, &ops, &p, 30.0, 0.25).unwrap();
        assert!(s.diagnostics.max_trace_deviation < 1e-10);
        assert_eq!(s.diagnostics.max_hermiticity_error, 0.0);
        assert!(s.diagnostics.min_eigenvalue.unwrap() > -1e-8);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,m1x,m1y,m1z,m2x,m2y,m2z,N\n"));
        assert!(text.lines().nth(1).unwrap().ends_with(",2"));
    }

    #[test]
    fn initial_slope_approaches_meanfield_as_one_over_n() {
        let eta = std::f64::consts::FRAC_1_SQRT_2;
        let p = params(1.2, eta);
        let target = build_sector_state(&SectorFamilySpec { epsilon: 0.5, eta }).unwrap();
        let (d1, d2) = meanfield_rhs(&target, &p);
        let mf = MeanFieldState::unnormalized(d1, d2).unwrap().to_array();
        let mut scaled = Vec::new();
        for n in 2..=5 {
            let ops = build_operators::<f64>(n).unwrap();
            let rho = product_state(n, &target).unwrap();
            let d = lindblad_rhs(&rho, &ops, &p).unwrap();
            assert!(d.trace().norm() < 1e-13);
            let slope = ops.moments(&d.data, 1.0);
            let dev = slope.to_array().iter().zip(&mf).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            scaled.push(dev * n as f64);
        }
        assert!(scaled[0] > 1e-3);
        for s in &scaled {
            assert!((s - scaled[0]).abs() < 1e-9 * scaled[0], "{scaled:?}");
        }
    }

    #[test]
    fn invalid_requests() {
        let ops = build_operators::<f64>(1).unwrap();
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        assert_eq!(lindblad_rhs(&rho, &ops, &params(1.0, 0.5)).unwrap_err().code(), "dimension");
        let rho = DensityMatrix::maximally_mixed(1).unwrap();
        assert!(evolve(&rho, &ops, &params(1.0, 0.5), 1.0, 2.0).is_err());
    }
}
