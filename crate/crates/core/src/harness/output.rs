//! Plain-text writers: CSV tables and field dumps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::coupled::{CoupledState, EnergyLedger};
use crate::error::Result;
use crate::grid::Grid;
use crate::helmholtz::AcousticTrace;

use super::run::ConvergenceReport;

/// Short tag used in file names, e.g. `0.05`.
pub fn eps_tag(epsilon: f64) -> String {
    format!("{epsilon}")
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_field(dir: &Path, name: &str, step: usize, grid: &Grid<f64>, values: &[f64]) -> Result<PathBuf> {
    let mut s = format!("{} {}\n", grid.nx, grid.ny);
    for row in values.chunks(grid.nx) {
        let line: Vec<String> = row.iter().map(|&v| num(v)).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    let path = dir.join(format!("field_{name}_{step:06}.dat"));
    std::fs::write(&path, s)?;
    Ok(path)
}

/// Reads a field dump back: `(nx, ny, values)`.
pub fn read_field(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut it = text.split_whitespace();
    let bad = || crate::error::Error::Config(format!("malformed field file {}", path.display()));
    let nx: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
    let ny: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
    let values: Vec<f64> = it.map(|t| t.parse().map_err(|_| bad())).collect::<Result<_>>()?;
    if values.len() != nx * ny {
        return Err(bad());
    }
    Ok((nx, ny, values))
}

/// Dumps `ρ`, `u`, `ϱ` and `τ1` for one sample.
pub fn write_state_fields(dir: &Path, tag: &str, step: usize, grid: &Grid<f64>, s: &CoupledState<f64>) -> Result<()> {
    let (ux, uy) = s.fluid.velocity();
    let txx: Vec<f64> = s.tau1.iter().map(|t| t.xx).collect();
    let txy: Vec<f64> = s.tau1.iter().map(|t| t.xy).collect();
    let tyy: Vec<f64> = s.tau1.iter().map(|t| t.yy).collect();
    for (name, v) in
        [("rho", &s.fluid.rho), ("ux", &ux), ("uy", &uy), ("rho_p", &s.rho_p), ("tau_xx", &txx), ("tau_xy", &txy), ("tau_yy", &tyy)]
    {
        write_field(dir, &format!("{name}_{tag}"), step, grid, v)?;
    }
    Ok(())
}

pub fn write_ledger(path: &Path, ledger: &EnergyLedger<f64>) -> Result<()> {
    let mut s = String::from(
        "time,kinetic,pressure,entropy,interaction,viscous_deviatoric,viscous_bulk,x_fisher,q_fisher,density_gradient,energy,cumulative_dissipation,monitor,monitor_exp\n",
    );
    for r in &ledger.samples {
        let t = &r.terms;
        let cols = [
            r.time,
            t.kinetic,
            t.pressure,
            t.entropy,
            t.interaction,
            t.viscous_deviatoric,
            t.viscous_bulk,
            t.x_fisher,
            t.q_fisher,
            t.density_gradient,
            t.energy(),
            r.cumulative,
        ];
        let line: Vec<String> = cols.iter().map(|&v| num(v)).collect();
        writeln!(s, "{},{},{}", line.join(","), r.monitor, r.monitor_exp).unwrap();
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn write_acoustic(path: &Path, trace: &AcousticTrace<f64>) -> Result<()> {
    let mut s = String::from("t,k,l,b,a\n");
    for (t, row) in trace.times.iter().zip(&trace.samples) {
        for (&(k, l), &(b, a)) in trace.modes.iter().zip(row) {
            writeln!(s, "{},{k},{l},{},{}", num(*t), num(b), num(a)).unwrap();
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub const REPORT_HEADER: &str = "epsilon,status,sup_rho_dev_l2,empirical_order_rho,div_u_l2l2,empirical_order_div,solenoidal_velocity_error_l2l2,empirical_order_velocity,polymer_density_error_l2l2,empirical_order_polymer_density,fitted_omega_10,theory_omega_10,residual_fraction_max,energy_monitor,mass_drift,polymer_mass_drift";

pub fn report_csv(report: &ConvergenceReport) -> String {
    let mut s = format!("{REPORT_HEADER}\n");
    for r in &report.rows {
        let m = &r.metrics;
        let o = |i: usize| opt(r.orders.map(|o| o[i]).and_then(|v| v));
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            eps_tag(r.epsilon),
            r.status.replace(',', ";"),
            opt(m.map(|m| m.sup_rho_dev)),
            o(0),
            opt(m.map(|m| m.div_l2l2)),
            o(1),
            opt(m.map(|m| m.velocity_error)),
            o(2),
            opt(m.map(|m| m.polymer_density_error)),
            o(3),
            opt(m.and_then(|m| m.fitted_omega)),
            num(r.theory_omega),
            opt(m.map(|m| m.residual_fraction)),
            m.map(|m| m.energy_monitor.to_string()).unwrap_or_default(),
            opt(m.map(|m| m.mass_drift)),
            opt(m.map(|m| m.polymer_mass_drift)),
        )
        .unwrap();
    }
    s
}

pub fn write_report(dir: &Path, report: &ConvergenceReport) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("report.csv");
    std::fs::write(&path, report_csv(report))?;
    Ok(path)
}
