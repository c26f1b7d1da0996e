use std::io::Write;

use clap::ValueEnum;
use serde::Serialize;
use tqc_core::dynamics::{conservation_report, integrate, Trajectory};
use tqc_core::io::num;
use tqc_core::lyapunov::{max_lyapunov, LyapunovTrace};
use tqc_core::model::{compute_frame, reduce_to_phase, InvariantFrame, MeanFieldState};
use tqc_core::phase::{classify_regime, integrate_phase, PhaseSystem, RegimeVerdict};
use tqc_core::qoracle::{build_operators, compare_to_meanfield, evolve, product_state, ComparisonReport, QuantumSeries};
use tqc_core::spectra::{line_spectrum, timeseries_peaks, torus_observable, Component, LineSpectrum};
use tqc_core::torus::{conjugacy, drift_birkhoff, drift_elliptic, drift_quadrature, reconstruct_theta, Conjugacy, DriftResult};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::Outputs;
use crate::svg::{self, Labels, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Reduce,
    Drift,
    Psi,
    Spectrum,
    Lyapunov,
    Quantum,
    Figures,
}

pub fn run(cmd: Command, cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    match cmd {
        Command::Simulate => simulate(cfg, out),
        Command::Reduce => reduce(cfg, out),
        Command::Drift => drift(cfg, out),
        Command::Psi => psi(cfg, out),
        Command::Spectrum => spectrum(cfg, out),
        Command::Lyapunov => lyapunov(cfg, out),
        Command::Quantum => quantum(cfg, out),
        Command::Figures => figures(cfg, out),
    }
}

struct Reduced {
    state: MeanFieldState<f64>,
    frame: InvariantFrame<f64>,
    sys: PhaseSystem<f64>,
}

fn reduced(cfg: &RunConfig) -> CliResult<Reduced> {
    let state = cfg.initial_state()?;
    let frame = compute_frame(&state, &cfg.params)?;
    let sys = reduce_to_phase(&frame, &cfg.params, &cfg.params.weights())?;
    Ok(Reduced { state, frame, sys })
}

fn kt(cfg: &RunConfig, t: f64) -> f64 {
    cfg.params.kappa * t
}

fn write_svg(out: &mut Outputs, name: &str, svg: CliResult<String>) -> CliResult<()> {
    out.write(name, svg?.as_bytes())
}

fn component_plot(cfg: &RunConfig, traj: &Trajectory<f64>, title: &str) -> CliResult<String> {
    let pick = |f: fn(&MeanFieldState<f64>) -> f64| -> Vec<(f64, f64)> {
        traj.times.iter().zip(&traj.states).map(|(t, s)| (kt(cfg, *t), f(s))).collect()
    };
    svg::line_plot(
        &Labels { title, x: "κt", y: "m_j^z" },
        &[Series { label: "m1z", points: pick(|s| s.m1.z) }, Series { label: "m2z", points: pick(|s| s.m2.z) }],
    )
}

fn simulate(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let n = &cfg.numerics;
    let state = cfg.initial_state()?;
    let traj = integrate(&state, &cfg.params, n.t_end, n.dt_out, n.tol)?;
    out.csv("trajectory.csv", |w| traj.write_csv(w))?;
    out.json("conservation.json", &conservation_report(&traj, &cfg.params))?;
    write_svg(out, "trajectory.svg", component_plot(cfg, &traj, "mean-field trajectory"))
}

#[derive(Serialize)]
struct ReduceReport<'a> {
    frame: &'a InvariantFrame<f64>,
    omega_phi: f64,
    amplitudes: &'a [f64],
    regime: RegimeVerdict<f64>,
}

fn reduce(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let n = &cfg.numerics;
    let r = reduced(cfg)?;
    out.json(
        "frame.json",
        &ReduceReport {
            frame: &r.frame,
            omega_phi: r.sys.omega_phi,
            amplitudes: &r.sys.amplitudes,
            regime: classify_regime(&r.sys),
        },
    )?;
    let phase = integrate_phase(0.0, &r.sys, n.t_end, n.dt_out, n.tol)?;
    out.csv("phase.csv", |w| phase.write_csv(w))?;
    let pts = phase.times.iter().zip(&phase.thetas).map(|(t, th)| (kt(cfg, *t), *th)).collect();
    write_svg(
        out,
        "phase.svg",
        svg::line_plot(&Labels { title: "phase flow", x: "κt", y: "θ" }, &[Series { label: "θ", points: pts }]),
    )
}

#[derive(Serialize)]
struct DriftReport {
    omega_phi: f64,
    amplitudes: Vec<f64>,
    estimates: Vec<DriftResult<f64>>,
}

fn drift_estimates(cfg: &RunConfig, sys: &PhaseSystem<f64>) -> CliResult<Vec<DriftResult<f64>>> {
    let n = &cfg.numerics;
    let quad = drift_quadrature(sys, n.grid)?;
    let ell = drift_elliptic(sys)?;
    let phase = integrate_phase(0.0, sys, n.birkhoff_t_end, 0.1, n.tol)?;
    let birk = drift_birkhoff(&phase.thetas, &phase.times)?;
    Ok(vec![quad, ell, birk])
}

fn drift(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let r = reduced(cfg)?;
    let estimates = drift_estimates(cfg, &r.sys)?;
    out.json("drift.json", &DriftReport { omega_phi: r.sys.omega_phi, amplitudes: r.sys.amplitudes.clone(), estimates })
}

#[derive(Serialize)]
struct PsiReport {
    nu: f64,
    eta: f64,
    residual: f64,
    summary: tqc_core::torus::TorusSummary,
}

fn psi_plot(c: &Conjugacy<f64>) -> CliResult<String> {
    svg::torus_heat_map(
        &Labels { title: "ψ(x, y) over four unit cells", x: "x = νt", y: "y = ηνt" },
        c.psi.size(),
        c.psi.grid(),
        2,
    )
}

fn psi(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let r = reduced(cfg)?;
    let c = conjugacy(&r.sys, cfg.numerics.grid)?;
    out.csv("psi.csv", |w| c.psi.write_csv(w))?;
    out.json(
        "psi_summary.json",
        &PsiReport { nu: c.nu, eta: c.eta, residual: c.residual, summary: c.psi.summary(Some(c.residual)) },
    )?;
    write_svg(out, "psi.svg", psi_plot(&c))
}

fn lines_for(cfg: &RunConfig, r: &Reduced) -> CliResult<(Conjugacy<f64>, tqc_core::torus::TorusField<f64>, LineSpectrum<f64>)> {
    let c = conjugacy(&r.sys, cfg.numerics.grid)?;
    let q = torus_observable(&c.psi, &r.frame, &cfg.params.weights(), cfg.numerics.observable_branch - 1, Component::Z)?;
    let spec = line_spectrum(&q, cfg.params.eta, c.nu, cfg.numerics.line_threshold);
    Ok((c, q, spec))
}

fn lattice_entries(q: &tqc_core::torus::TorusField<f64>, k: i64) -> Vec<(i64, i64, f64)> {
    (-k..=k).flat_map(|m| (-k..=k).map(move |n| (m, n, q.coeff(m, n).norm()))).collect()
}

fn stem(spec: &LineSpectrum<f64>) -> CliResult<String> {
    let pts: Vec<(f64, f64)> = spec.lines.iter().map(|l| (l.frequency, l.amplitude)).collect();
    svg::stem_plot(&Labels { title: "spectral lines above threshold", x: "Ω_mn / κ", y: "|Q_mn|" }, &pts)
}

fn lattice_svg(q: &tqc_core::torus::TorusField<f64>, k: i64) -> CliResult<String> {
    svg::lattice_map(&Labels { title: "log10 |Q_mn|", x: "m", y: "n" }, &lattice_entries(q, k), -14.0)
}

#[derive(Serialize)]
struct PeakReport {
    angular_frequency: f64,
    amplitude: f64,
}

#[derive(Serialize)]
struct SpectrumReport<'a> {
    nu: f64,
    eta: f64,
    branch: usize,
    threshold: f64,
    lines: usize,
    warnings: &'a [String],
    timeseries_peaks: Vec<PeakReport>,
}

fn spectrum(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let n = &cfg.numerics;
    let r = reduced(cfg)?;
    let (c, q, spec) = lines_for(cfg, &r)?;
    out.csv("lines.csv", |w| spec.write_csv(w))?;
    out.csv("lattice.csv", |w| tqc_core::spectra::write_lattice_csv(&q, n.lattice_k, w))?;

    let samples = (n.spectrum_t_end / n.spectrum_dt).round() as usize;
    if !samples.is_power_of_two() {
        return Err(CliError::invalid(
            "numerics.spectrum_t_end",
            format!("spectrum_t_end / spectrum_dt = {samples} must be a power of two"),
        ));
    }
    let traj = integrate(&r.state, &cfg.params, n.spectrum_dt * (samples - 1) as f64, n.spectrum_dt, n.tol)?;
    let branch = n.observable_branch;
    let signal: Vec<f64> = traj.states.iter().map(|s| s.branch(branch - 1).z).collect();
    let peaks = timeseries_peaks(&traj.times, &signal, n.peaks)?;
    out.json(
        "spectrum.json",
        &SpectrumReport {
            nu: c.nu,
            eta: cfg.params.eta,
            branch,
            threshold: n.line_threshold,
            lines: spec.lines.len(),
            warnings: &spec.warnings,
            timeseries_peaks: peaks
                .iter()
                .map(|p| PeakReport { angular_frequency: std::f64::consts::TAU * p.frequency, amplitude: p.amplitude })
                .collect(),
        },
    )?;
    write_svg(out, "lines.svg", stem(&spec))?;
    write_svg(out, "lattice.svg", lattice_svg(&q, n.lattice_k))
}

fn lyapunov(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let n = &cfg.numerics;
    let state = cfg.initial_state()?;
    let trace = max_lyapunov(&state, &cfg.params, n.lyapunov_t_end, n.renorm_interval, n.seed)?;
    out.csv("lyapunov.csv", |w| trace.write_csv(w))?;
    write_svg(out, "lyapunov.svg", lyapunov_plot(cfg, &[("λ_M", &trace)]))
}

fn lyapunov_plot(cfg: &RunConfig, traces: &[(&str, &LyapunovTrace<f64>)]) -> CliResult<String> {
    let k = cfg.params.kappa;
    let series = traces
        .iter()
        .map(|(label, tr)| Series {
            label,
            points: tr.times.iter().zip(&tr.lambda_max).map(|(t, l)| (k * t, l / k)).collect(),
        })
        .collect::<Vec<_>>();
    svg::line_plot(&Labels { title: "maximal Lyapunov exponent", x: "κt", y: "λ_M / κ" }, &series)
}

struct QuantumRun {
    meanfield: Trajectory<f64>,
    series: Vec<QuantumSeries<f64>>,
    report: ComparisonReport,
}

fn quantum_run(cfg: &RunConfig) -> CliResult<QuantumRun> {
    let n = &cfg.numerics;
    let state = cfg.initial_state()?;
    let meanfield = integrate(&state, &cfg.params, n.quantum_t_end, n.quantum_dt_out, n.tol.min(1e-11))?;
    let mut series = Vec::new();
    for atoms in cfg.atom_counts() {
        let ops = build_operators::<f64>(atoms)?;
        let rho0 = product_state(atoms, &state)?;
        series.push(evolve(&rho0, &ops, &cfg.params, n.quantum_t_end, n.quantum_dt_out)?);
    }
    let report = compare_to_meanfield(&series, &meanfield)?;
    Ok(QuantumRun { meanfield, series, report })
}

fn quantum_plot(cfg: &RunConfig, q: &QuantumRun) -> CliResult<String> {
    let labels: Vec<String> = q.series.iter().map(|s| format!("N = {}", s.n_atoms)).collect();
    let mut series: Vec<Series> = q
        .series
        .iter()
        .zip(&labels)
        .map(|(s, label)| Series {
            label,
            points: s.times.iter().zip(&s.states).map(|(t, m)| (kt(cfg, *t), m.m1.z)).collect(),
        })
        .collect();
    series.push(Series {
        label: "mean field",
        points: q.meanfield.times.iter().zip(&q.meanfield.states).map(|(t, m)| (kt(cfg, *t), m.m1.z)).collect(),
    });
    svg::line_plot(&Labels { title: "finite-N m1z vs mean field", x: "κt", y: "m1z" }, &series)
}

#[derive(Serialize)]
struct QuantumReport<'a> {
    comparison: &'a ComparisonReport,
    diagnostics: Vec<&'a tqc_core::qoracle::QuantumDiagnostics>,
}

fn quantum(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let q = quantum_run(cfg)?;
    for s in &q.series {
        out.csv(&format!("quantum_N{}.csv", s.n_atoms), |w| s.write_csv(w))?;
    }
    out.json(
        "quantum_report.json",
        &QuantumReport { comparison: &q.report, diagnostics: q.series.iter().map(|s| &s.diagnostics).collect() },
    )?;
    write_svg(out, "quantum.svg", quantum_plot(cfg, &q))
}

/// Initial conditions overlaid in the Lyapunov panel.
pub const LYAPUNOV_PANEL_STATES: [[f64; 6]; 4] = [
    [0.0, 0.0, -0.5, 0.0, 0.0, -0.5],
    [0.0, 0.5, 0.0, 0.0, 0.0, 0.5],
    [0.5, 0.0, 0.0, 0.0, 0.5, 0.0],
    [0.0, 0.0, 0.5, 0.0, 0.0, -0.5],
];

#[derive(Serialize)]
struct FiguresSummary<'a> {
    nu: f64,
    psi_residual: f64,
    reconstruction_max_error: f64,
    drift: Vec<DriftResult<f64>>,
    spectral_lines: usize,
    spectral_warnings: &'a [String],
    lyapunov_final: Vec<f64>,
    quantum: &'a ComparisonReport,
}

fn figures(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let n = &cfg.numerics;
    let r = reduced(cfg)?;
    let (c, q, spec) = lines_for(cfg, &r)?;

    // ψ field
    out.csv("fig1b_psi.csv", |w| c.psi.write_csv(w))?;
    write_svg(out, "fig1b_psi.svg", psi_plot(&c))?;

    // ψ along the orbit and the reconstructed phase
    let phase = integrate_phase(0.0, &r.sys, n.reconstruct_t_end, n.dt_out, n.tol)?;
    let recon = reconstruct_theta(c.nu, &c.psi, c.eta, &phase.times);
    let tau = std::f64::consts::TAU;
    out.csv("fig1c_psi_flow.csv", |w| {
        writeln!(w, "t,x,y,psi")?;
        for t in &phase.times {
            let x = (c.nu * t) % tau;
            let y = (c.eta * c.nu * t) % tau;
            writeln!(w, "{},{},{},{}", num(*t), num(x), num(y), num(c.psi.eval(x, y)))?;
        }
        Ok(())
    })?;
    let flow: Vec<(f64, f64)> = phase
        .times
        .iter()
        .map(|t| (kt(cfg, *t), c.psi.eval((c.nu * t) % tau, (c.eta * c.nu * t) % tau)))
        .collect();
    write_svg(
        out,
        "fig1c_psi_flow.svg",
        svg::line_plot(&Labels { title: "ψ along the torus flow", x: "κt", y: "ψ(νt, ηνt)" }, &[Series { label: "ψ", points: flow }]),
    )?;
    let mut recon_err = 0.0f64;
    out.csv("fig1d_theta_compare.csv", |w| {
        writeln!(w, "t,theta_direct,theta_torus,difference")?;
        for ((t, a), b) in phase.times.iter().zip(&phase.thetas).zip(&recon) {
            recon_err = recon_err.max((a - b).abs());
            writeln!(w, "{},{},{},{}", num(*t), num(*a), num(*b), num(a - b))?;
        }
        Ok(())
    })?;
    let pts = |v: &[f64]| phase.times.iter().zip(v).map(|(t, y)| (kt(cfg, *t), *y)).collect::<Vec<_>>();
    write_svg(
        out,
        "fig1d_theta_compare.svg",
        svg::line_plot(
            &Labels { title: "direct vs torus phase", x: "κt", y: "θ" },
            &[Series { label: "direct", points: pts(&phase.thetas) }, Series { label: "νt + ψ", points: pts(&recon) }],
        ),
    )?;

    // finite N
    let qrun = quantum_run(cfg)?;
    out.csv("fig2a_m1z.csv", |w| {
        write!(w, "t,m1z_meanfield")?;
        for s in &qrun.series {
            write!(w, ",m1z_N{}", s.n_atoms)?;
        }
        writeln!(w)?;
        for (k, t) in qrun.meanfield.times.iter().enumerate() {
            write!(w, "{},{}", num(*t), num(qrun.meanfield.states[k].m1.z))?;
            for s in &qrun.series {
                write!(w, ",{}", num(s.states[k].m1.z))?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    write_svg(out, "fig2a_m1z.svg", quantum_plot(cfg, &qrun))?;

    // spectrum
    out.csv("fig2c_lattice.csv", |w| tqc_core::spectra::write_lattice_csv(&q, n.lattice_k, w))?;
    write_svg(out, "fig2c_lattice.svg", lattice_svg(&q, n.lattice_k))?;
    out.csv("fig2d_lines.csv", |w| spec.write_csv(w))?;
    write_svg(out, "fig2d_lines.svg", stem(&spec))?;

    // Lyapunov exponents
    let traces = LYAPUNOV_PANEL_STATES
        .iter()
        .map(|ic| max_lyapunov(&MeanFieldState::from_slice(ic), &cfg.params, n.lyapunov_t_end, n.renorm_interval, n.seed))
        .collect::<Result<Vec<_>, _>>()?;
    out.csv("fig2e_lyapunov.csv", |w| {
        writeln!(w, "t,lambda_ic1,lambda_ic2,lambda_ic3,lambda_ic4")?;
        for (k, t) in traces[0].times.iter().enumerate() {
            write!(w, "{}", num(*t))?;
            for tr in &traces {
                write!(w, ",{}", num(tr.lambda_max[k]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    let names = ["ic1", "ic2", "ic3", "ic4"];
    let labelled: Vec<(&str, &LyapunovTrace<f64>)> = names.iter().copied().zip(&traces).collect();
    write_svg(out, "fig2e_lyapunov.svg", lyapunov_plot(cfg, &labelled))?;

    out.json(
        "figures_summary.json",
        &FiguresSummary {
            nu: c.nu,
            psi_residual: c.residual,
            reconstruction_max_error: recon_err,
            drift: drift_estimates(cfg, &r.sys)?,
            spectral_lines: spec.lines.len(),
            spectral_warnings: &spec.warnings,
            lyapunov_final: traces.iter().filter_map(|t| t.last().map(|(_, l)| l)).collect(),
            quantum: &qrun.report,
        },
    )
}
