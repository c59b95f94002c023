//! Single runs, the Mach continuation and the fluid-only acoustic run.

use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;

use crate::coupled::{energy_ledger_update, CoupledSolver, CoupledState, EnergyLedger};
use crate::error::Result;
use crate::fluid::{FluidSolver, FluidState};
use crate::grid::{Grid, Sym2};
use crate::helmholtz::{fit_frequency, neumann_eigenbasis, AcousticTrace};
use crate::params::ModelParams;
use crate::scalar::Real;

use super::config::RunConfig;
use super::init::{initial_data, InitialData};
use super::output::{eps_tag, write_acoustic, write_ledger, write_report, write_state_fields};

/// Relative tolerance of the energy monitor.
pub const ENERGY_TOLERANCE: f64 = 1e-6;
/// Metrics below `10 ×` this are treated as zero when forming orders.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

/// Cell-count fractions of `{ρ ∈ [ρ̄/2, 2ρ̄]}` and of its complement.
pub fn essential_residual_split<T: Real>(rho: &[T], rho_bar: T) -> (T, T) {
    let two = T::one() + T::one();
    let ess = rho.iter().filter(|&&r| r >= rho_bar / two && r <= two * rho_bar).count();
    let n = T::from_usize_lossy(rho.len());
    let e = T::from_usize_lossy(ess) / n;
    (e, T::one() - e)
}

/// Diagnostics recorded at every sample time.
#[derive(Clone, Debug)]
pub struct Sample {
    pub time: f64,
    pub rho_dev_l2: f64,
    pub div_l2: f64,
    pub solenoidal: (Vec<f64>, Vec<f64>),
    pub rho_p: Vec<f64>,
    pub residual_fraction: f64,
}

/// Everything a single run produces.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// `None` for the incompressible reference.
    pub epsilon: Option<f64>,
    pub samples: Vec<Sample>,
    pub ledger: EnergyLedger<f64>,
    pub trace: AcousticTrace<f64>,
    /// Macro step between ledger and trace entries.
    pub dt: f64,
    pub mass_drift: f64,
    pub polymer_mass_drift: f64,
    pub final_state: CoupledState<f64>,
}

impl RunOutcome {
    /// Fitted angular frequency of the `(1,0)` mode, if tracked and oscillating.
    pub fn fitted_omega(&self) -> Option<f64> {
        let n = self.trace.modes.iter().position(|&m| m == (1, 0))?;
        let b: Vec<f64> = self.trace.samples.iter().map(|s| s[n].0).collect();
        if b.len() < 8 {
            return None;
        }
        fit_frequency(&b, self.dt).ok()
    }
}

/// `√(p′(ρ̄) π²) / ε`, the `(1,0)` acoustic frequency.
pub fn theory_omega(params: &ModelParams<f64>) -> f64 {
    let dp = params.c_p * params.gamma * params.rho_bar.powf(params.gamma - 1.0);
    (dp * std::f64::consts::PI.powi(2)).sqrt() / params.epsilon
}

fn relative_drift(now: f64, start: f64) -> f64 {
    (now - start).abs() / start.abs().max(f64::MIN_POSITIVE)
}

fn build_solver(cfg: &RunConfig, params: ModelParams<f64>) -> Result<CoupledSolver<f64>> {
    let mut s = CoupledSolver::new(params, Grid::square(cfg.cells), cfg.n_radial, cfg.n_angular)?;
    s.set_limiter(cfg.limiter);
    s.safety = cfg.safety;
    Ok(s)
}

/// Sample count and macro step: `T` is split into samples of roughly
/// `sample_interval`, each into equal steps no longer than `dt_max`.
pub fn schedule(cfg: &RunConfig) -> (usize, usize, f64) {
    let n_samples = ((cfg.final_time / cfg.sample_interval).round() as usize).max(1);
    let interval = cfg.final_time / n_samples as f64;
    let n_sub = (interval / cfg.dt_max).ceil().max(1.0) as usize;
    (n_samples, n_sub, interval / n_sub as f64)
}

/// One run from shared initial data. `epsilon = None` runs the
/// incompressible reference. Files go to `out` when given.
pub fn run_single(cfg: &RunConfig, data: &InitialData<f64>, epsilon: Option<f64>, out: Option<&Path>) -> Result<RunOutcome> {
    let params = cfg.params.with_epsilon(epsilon.unwrap_or(cfg.params.epsilon));
    let mut solver = build_solver(cfg, params.clone())?;
    let g = solver.grid;
    let mut state = match epsilon {
        Some(_) => data.state(&solver)?,
        None => data.reference_state(&solver),
    };
    let tag = epsilon.map(eps_tag).unwrap_or_else(|| "ref".into());
    let basis = neumann_eigenbasis(&g, cfg.tracked_modes)?;
    let mut trace = AcousticTrace::new(&basis, cfg.tracked_modes);
    let mut ledger = EnergyLedger::new(ENERGY_TOLERANCE);
    let (n_samples, n_sub, dt) = schedule(cfg);
    let mass0 = g.integrate(&state.fluid.rho);
    let pmass0 = solver.fp.total_mass(&state.psi);

    let sample = |solver: &CoupledSolver<f64>, s: &CoupledState<f64>| {
        let dev: Vec<f64> = s.fluid.rho.iter().map(|&r| r - params.rho_bar).collect();
        Sample {
            time: s.time,
            rho_dev_l2: g.l2_norm(&dev),
            div_l2: g.l2_norm(&solver.divergence(&s.fluid)),
            solenoidal: solver.solenoidal_velocity(&s.fluid),
            rho_p: s.rho_p.clone(),
            residual_fraction: essential_residual_split(&s.fluid.rho, params.rho_bar).1,
        }
    };
    let compressible = epsilon.is_some();
    let mut samples = vec![sample(&solver, &state)];
    if compressible {
        energy_ledger_update(&solver, &state, &mut ledger)?;
        trace.push(state.time, &basis.mode_coefficients(&state.fluid, &params));
    }
    let dump = |k: usize, s: &CoupledState<f64>| -> Result<()> {
        match out {
            Some(dir) if cfg.output_stride > 0 && k.is_multiple_of(cfg.output_stride) => write_state_fields(dir, &tag, k, &g, s),
            _ => Ok(()),
        }
    };
    dump(0, &state)?;
    for k in 1..=n_samples {
        for _ in 0..n_sub {
            if compressible {
                solver.coupled_step(&mut state, dt)?;
                energy_ledger_update(&solver, &state, &mut ledger)?;
                trace.push(state.time, &basis.mode_coefficients(&state.fluid, &params));
            } else {
                solver.incompressible_step(&mut state, dt)?;
            }
        }
        samples.push(sample(&solver, &state));
        dump(k, &state)?;
    }
    let outcome = RunOutcome {
        epsilon,
        samples,
        mass_drift: relative_drift(g.integrate(&state.fluid.rho), mass0),
        polymer_mass_drift: relative_drift(solver.fp.total_mass(&state.psi), pmass0),
        ledger,
        trace,
        dt,
        final_state: state,
    };
    if let (Some(dir), true) = (out, compressible) {
        write_ledger(&dir.join(format!("ledger_{tag}.csv")), &outcome.ledger)?;
        write_acoustic(&dir.join(format!("acoustic_{tag}.csv")), &outcome.trace)?;
    }
    info!("run {tag} finished at t = {}", outcome.final_state.time);
    Ok(outcome)
}

/// Shared initial data for `cfg`.
pub fn prepare(cfg: &RunConfig) -> Result<InitialData<f64>> {
    let solver = build_solver(cfg, cfg.params.clone())?;
    initial_data(cfg.recipe, cfg.amplitude, &solver, cfg.seed)
}

/// Single compressible run at `cfg.params.epsilon` with file output.
pub fn simulate(cfg: &RunConfig) -> Result<RunOutcome> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    cfg.write_effective()?;
    let data = prepare(cfg)?;
    run_single(cfg, &data, Some(cfg.params.epsilon), Some(&cfg.output_dir))
}

/// Per-ε metrics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunMetrics {
    /// `sup_t ‖ρ_ε − ρ̄‖_{L²}` over the samples.
    pub sup_rho_dev: f64,
    /// `‖div u_ε‖_{L²(0,T;L²)}` (trapezoid in time, spectral divergence).
    pub div_l2l2: f64,
    /// `‖H[u_ε] − U‖_{L²(0,T;L²)}`.
    pub velocity_error: f64,
    /// `‖ϱ_ε − ϱ_ref‖_{L²(0,T;L²)}`.
    pub polymer_density_error: f64,
    pub fitted_omega: Option<f64>,
    pub residual_fraction: f64,
    pub energy_monitor: bool,
    pub mass_drift: f64,
    pub polymer_mass_drift: f64,
}

/// One report row.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub epsilon: f64,
    /// `ok` or the failure reason.
    pub status: String,
    pub metrics: Option<RunMetrics>,
    /// Empirical orders against the previous row, in metric order
    /// (density deviation, divergence, velocity error, polymer density error).
    pub orders: Option<[Option<f64>; 4]>,
    pub theory_omega: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ReportRow>,
}

fn l2_in_time(samples: &[Sample], f: impl Fn(usize, &Sample) -> f64) -> f64 {
    let mut acc = 0.0;
    for (i, w) in samples.windows(2).enumerate() {
        let (a, b) = (f(i, &w[0]), f(i + 1, &w[1]));
        acc += 0.5 * (w[1].time - w[0].time) * (a * a + b * b);
    }
    acc.sqrt()
}

fn diff_l2(g: &Grid<f64>, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    g.l2_norm(&d)
}

/// Metrics of a compressible run against the reference.
pub fn metrics(grid: &Grid<f64>, run: &RunOutcome, reference: &RunOutcome) -> RunMetrics {
    let r = &reference.samples;
    let s = &run.samples;
    RunMetrics {
        sup_rho_dev: s.iter().fold(0.0, |m, x| m.max(x.rho_dev_l2)),
        div_l2l2: l2_in_time(s, |_, x| x.div_l2),
        velocity_error: l2_in_time(s, |i, x| {
            let (ux, uy) = &x.solenoidal;
            let (vx, vy) = &r[i].solenoidal;
            diff_l2(grid, ux, vx).hypot(diff_l2(grid, uy, vy))
        }),
        polymer_density_error: l2_in_time(s, |i, x| diff_l2(grid, &x.rho_p, &r[i].rho_p)),
        fitted_omega: run.fitted_omega(),
        residual_fraction: s.iter().fold(0.0, |m, x| m.max(x.residual_fraction)),
        energy_monitor: run.ledger.all_pass(),
        mass_drift: run.mass_drift,
        polymer_mass_drift: run.polymer_mass_drift,
    }
}

/// `log(m_prev / m) / log(ε_prev / ε)`, or `None` when either metric is
/// within `10 ×` the solver tolerance.
pub fn empirical_order(m_prev: f64, m: f64, eps_prev: f64, eps: f64) -> Option<f64> {
    let floor = 10.0 * SOLVER_TOLERANCE;
    (m_prev > floor && m > floor).then(|| (m_prev / m).ln() / (eps_prev / eps).ln())
}

fn fill_orders(rows: &mut [ReportRow]) {
    for i in 1..rows.len() {
        let (prev, cur) = (&rows[i - 1], &rows[i]);
        if let (Some(a), Some(b)) = (prev.metrics, cur.metrics) {
            let (e0, e1) = (prev.epsilon, cur.epsilon);
            rows[i].orders = Some([
                empirical_order(a.sup_rho_dev, b.sup_rho_dev, e0, e1),
                empirical_order(a.div_l2l2, b.div_l2l2, e0, e1),
                empirical_order(a.velocity_error, b.velocity_error, e0, e1),
                empirical_order(a.polymer_density_error, b.polymer_density_error, e0, e1),
            ]);
        }
    }
}

/// Outcomes of a continuation: the reference and one entry per ε.
#[derive(Clone, Debug)]
pub struct ContinuationRuns {
    pub reference: std::result::Result<RunOutcome, String>,
    pub runs: Vec<(f64, std::result::Result<RunOutcome, String>)>,
}

/// Reference run plus one compressible run per ε, concurrently, from the
/// same initial data. Ledgers and traces go to `out` when given.
pub fn continuation_runs(cfg: &RunConfig, out: Option<&Path>) -> Result<ContinuationRuns> {
    let data = prepare(cfg)?;
    let jobs: Vec<Option<f64>> = std::iter::once(None).chain(cfg.epsilon_list.iter().copied().map(Some)).collect();
    let mut results: Vec<std::result::Result<RunOutcome, String>> =
        jobs.par_iter().map(|&e| run_single(cfg, &data, e, out).map_err(|e| e.to_string())).collect();
    let reference = results.remove(0);
    Ok(ContinuationRuns { reference, runs: cfg.epsilon_list.iter().copied().zip(results).collect() })
}

/// Single-threaded report assembly.
pub fn assemble_report(cfg: &RunConfig, runs: &ContinuationRuns) -> ConvergenceReport {
    let grid = Grid::square(cfg.cells);
    let mut rows: Vec<ReportRow> = runs
        .runs
        .iter()
        .map(|(eps, res)| {
            let theory = theory_omega(&cfg.params.with_epsilon(*eps));
            let (status, metrics) = match (&runs.reference, res) {
                (Ok(r), Ok(run)) => ("ok".to_string(), Some(metrics(&grid, run, r))),
                (Err(e), _) => (format!("reference failed: {e}"), None),
                (_, Err(e)) => (format!("failed: {e}"), None),
            };
            if metrics.is_none() {
                warn!("epsilon {eps}: {status}");
            }
            ReportRow { epsilon: *eps, status, metrics, orders: None, theory_omega: theory }
        })
        .collect();
    fill_orders(&mut rows);
    ConvergenceReport { rows }
}

/// [`continuation_runs`] plus [`assemble_report`]; with `write` set, the
/// effective config, report, ledgers and traces go to the output directory.
pub fn run_continuation(cfg: &RunConfig, write: bool) -> Result<ConvergenceReport> {
    let out = write.then_some(cfg.output_dir.as_path());
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        cfg.write_effective()?;
    }
    let runs = continuation_runs(cfg, out)?;
    let report = assemble_report(cfg, &runs);
    if let Some(dir) = out {
        write_report(dir, &report)?;
    }
    Ok(report)
}

/// Fluid-only acoustic experiment.
#[derive(Clone, Debug)]
pub struct AcousticRun {
    pub trace: AcousticTrace<f64>,
    pub fitted_omega: f64,
    pub theory_omega: f64,
}

/// Fluid-only run from `ρ = ρ̄ + ε A cos(πx)`, `u = 0`, sampled at least
/// `per_period` times per `(1,0)` period; fits the `(1,0)` frequency.
pub fn acoustic_run(params: &ModelParams<f64>, cells: usize, final_time: f64, amplitude: f64, safety: f64) -> Result<AcousticRun> {
    let g = Grid::square(cells);
    let solver = FluidSolver::new(g, params.clone())?;
    let pi = std::f64::consts::PI;
    let rho = g.sample(|x, _| params.rho_bar + params.epsilon * amplitude * (pi * x).cos());
    let zero = vec![0.0; g.cells()];
    let mut state = FluidState::from_primitive(rho, &zero, &zero);
    let tau = vec![Sym2::zero(); g.cells()];
    let theory = theory_omega(params);
    let per_period = 32.0;
    let sample_dt = 2.0 * pi / theory / per_period;
    let steps_per_sample = (sample_dt / (safety * solver.stable_dt(&state))).ceil().max(1.0) as usize;
    let n_samples = (final_time / sample_dt).ceil() as usize;
    let dt = sample_dt / steps_per_sample as f64;
    let basis = neumann_eigenbasis(&g, 2)?;
    let mut trace = AcousticTrace::new(&basis, 2);
    trace.push(0.0, &basis.mode_coefficients(&state, params));
    for k in 1..=n_samples {
        for _ in 0..steps_per_sample {
            solver.fluid_step(&mut state, &tau, &zero, dt)?;
        }
        trace.push(k as f64 * sample_dt, &basis.mode_coefficients(&state, params));
    }
    let n = trace.modes.iter().position(|&m| m == (1, 0)).expect("(1,0) is among the first two modes");
    let b: Vec<f64> = trace.samples.iter().map(|s| s[n].0).collect();
    Ok(AcousticRun { fitted_omega: fit_frequency(&b, sample_dt)?, theory_omega: theory, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_of_constant_fields() {
        assert_eq!(essential_residual_split(&[1.0; 16], 1.0), (1.0, 0.0));
        assert_eq!(essential_residual_split(&[3.0; 16], 1.0), (0.0, 1.0));
        assert_eq!(essential_residual_split(&[0.5, 2.0, 0.49, 2.01], 1.0), (0.5, 0.5));
    }

    proptest! {
        #[test]
        fn order_reproduces_ratio(m0 in 1e-6f64..1.0, r in 0.05f64..1.0, e0 in 0.1f64..0.9, q in 0.2f64..0.9) {
            let (m1, e1) = (m0 * r, e0 * q);
            let p = empirical_order(m0, m1, e0, e1).unwrap();
            prop_assert!(((e1 / e0).powf(p) - m1 / m0).abs() < 1e-12);
        }
    }

    #[test]
    fn orders_skip_tiny_metrics() {
        assert_eq!(empirical_order(1e-10, 1e-11, 0.2, 0.1), None);
        assert!((empirical_order(0.4, 0.1, 0.2, 0.1).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn schedule_divides_final_time() {
        let cfg = RunConfig { final_time: 0.5, sample_interval: 0.01, dt_max: 0.003, ..RunConfig::default() };
        let (n, sub, dt) = schedule(&cfg);
        assert_eq!((n, sub), (50, 4));
        assert!((n as f64 * sub as f64 * dt - 0.5).abs() < 1e-14);
    }

    #[test]
    fn fluid_only_frequency_at_coarse_resolution() {
        let p = ModelParams { epsilon: 0.2, ..ModelParams::default() };
        let run = acoustic_run(&p, 16, 0.6, 0.5, 0.4).unwrap();
        assert!((run.fitted_omega / run.theory_omega - 1.0).abs() < 0.05, "{} vs {}", run.fitted_omega, run.theory_omega);
    }
}
