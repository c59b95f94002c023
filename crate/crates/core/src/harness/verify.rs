//! Identity checks run by the `verify` subcommand.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fene::{build_maxwellian, maxwellian_gradient_identity_check, verify_assumptions, FenePotential, QGrid};
use crate::fokker_planck::FokkerPlanck;
use crate::grid::Grid;
use crate::helmholtz::{neumann_eigenbasis, nyquist_modes};

use super::config::RunConfig;

/// One named check: `value` must not exceed `limit`.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit }
    }

    pub fn pass(&self) -> bool {
        self.value <= self.limit
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass() { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<40} {:.3e} (limit {:.1e})", self.name, self.value, self.limit)
    }
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Configuration-space checks for every spring of `cfg`.
pub fn fene_suite(cfg: &RunConfig) -> Result<Vec<Check>> {
    let p = &cfg.params;
    let grid = QGrid::uniform(&p.b, p.dim, cfg.n_radial, cfg.n_angular)?;
    let pots: Vec<FenePotential<f64>> = p.b.iter().map(|&b| FenePotential::new(b)).collect();
    let maxw = build_maxwellian(&pots, &grid)?;
    let mut out = vec![Check::new("maxwellian normalisation", (maxw.integrate(&vec![1.0; grid.len()]) - 1.0).abs(), 1e-10)];
    let report = verify_assumptions(&maxw, &grid);
    for (i, s) in report.springs.iter().enumerate() {
        let b = p.b[i];
        out.push(Check::new(format!("spring {i} rim exponent vs b/2"), (s.theta / (b / 2.0) - 1.0).abs(), 0.05));
        let ok = s.rim_decay_ok && s.force_bound_ok && s.moments_finite;
        out.push(Check::new(format!("spring {i} potential assumptions"), if ok { 0.0 } else { 1.0 }, 0.0));
    }
    let coarse = maxwellian_gradient_identity_check(&maxw, &grid, 1e-2, 0.1);
    out.push(Check::new("maxwellian gradient identity", coarse, 1e-2));

    if p.dim == 2 {
        let fp = FokkerPlanck::new(p, Grid::square(8), cfg.n_radial, cfg.n_angular)?;
        for i in 0..p.b.len() {
            let one = fp.kramers_identity_check(i, |q| (1.0, vec![[0.0; 3]; q.len()]));
            let r2 = fp.kramers_identity_check(i, |q| {
                let v = q[i];
                let mut g = vec![[0.0; 3]; q.len()];
                g[i] = [2.0 * v[0], 2.0 * v[1], 2.0 * v[2]];
                (v[0] * v[0] + v[1] * v[1] + v[2] * v[2], g)
            });
            let qx = fp.kramers_identity_check(i, |q| {
                let mut g = vec![[0.0; 3]; q.len()];
                g[i][0] = 1.0;
                (q[i][0], g)
            });
            out.push(Check::new(format!("kramers identity spring {i}"), one.max(r2).max(qx), 1e-8));
        }
    }
    Ok(out)
}

/// Helmholtz projection algebra on `fields` seeded random fields.
pub fn helmholtz_suite(cells: usize, fields: usize, seed: u64) -> Result<Vec<Check>> {
    let g = Grid::<f64>::square(cells);
    let n = g.cells();
    let b = neumann_eigenbasis(&g, nyquist_modes(&g))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut idem, mut orth, mut div) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..fields {
        let mut f = || (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (vx, vy, wx, wy) = (f(), f(), f(), f());
        let hv = b.helmholtz_project(&vx, &vy);
        let hw = b.helmholtz_project(&wx, &wy);
        let (sx, sy) = &hv.solenoidal;
        let (gx, gy) = &hw.gradient;
        let ip: f64 = (0..n).map(|k| sx[k] * gx[k] + sy[k] * gy[k]).sum::<f64>() * g.cell_area();
        orth = orth.max(ip.abs());
        let again = b.solenoidal(sx, sy);
        idem = idem.max(max_abs((0..n).map(|k| again.0[k] - sx[k])).max(max_abs((0..n).map(|k| again.1[k] - sy[k]))));
        div = div.max(max_abs(b.divergence(sx, sy)));
    }
    let hc = b.helmholtz_project(&vec![1.0; n], &vec![0.0; n]);
    let constant = max_abs(hc.solenoidal.0.iter().chain(&hc.solenoidal.1).copied());
    Ok(vec![
        Check::new("helmholtz idempotence", idem, 1e-10),
        Check::new("helmholtz orthogonality", orth, 1e-10),
        Check::new("helmholtz divergence of H[v]", div, 1e-10),
        Check::new("constant field is a pure gradient", constant, 1e-10),
    ])
}

/// Both suites for `cfg`.
pub fn verify(cfg: &RunConfig) -> Result<Vec<Check>> {
    let mut out = fene_suite(cfg)?;
    out.extend(helmholtz_suite(cfg.cells, 20, cfg.seed)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_suite_passes() {
        let cfg = RunConfig { cells: 16, ..RunConfig::default() };
        for c in verify(&cfg).unwrap() {
            assert!(c.pass(), "{c}");
        }
    }

    #[test]
    fn two_spring_chain_passes_kramers() {
        let mut cfg = RunConfig { n_radial: 10, n_angular: 8, cells: 8, ..RunConfig::default() };
        cfg.params.b = vec![4.0, 6.0];
        cfg.params.rouse = super::super::config::rouse_matrix(2);
        for c in fene_suite(&cfg).unwrap() {
            assert!(c.pass(), "{c}");
        }
    }
}
