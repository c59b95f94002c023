//! Lie splitting of the fluid and Fokker–Planck solvers, the energy ledger and
//! the incompressible reference solver.

use crate::error::{Error, Result};
use crate::fluid::{pressure_potential, FluidSolver, FluidState, Limiter};
use crate::fokker_planck::{ConfigDistribution, FokkerPlanck};
use crate::grid::{Grid, Sym2};
use crate::helmholtz::{neumann_eigenbasis, SpectralBasis};
use crate::params::ModelParams;
use crate::scalar::{c, Real};

/// Fluid, kinetic and derived polymer fields at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledState<T> {
    pub fluid: FluidState<T>,
    pub psi: ConfigDistribution<T>,
    /// `ϱ = ∫ M ψ̂`, refreshed after every step.
    pub rho_p: Vec<T>,
    pub tau1: Vec<Sym2<T>>,
    pub time: T,
}

/// Coupled compressible solver plus the incompressible reference.
#[derive(Clone, Debug)]
pub struct CoupledSolver<T> {
    pub params: ModelParams<T>,
    pub grid: Grid<T>,
    pub fluid: FluidSolver<T>,
    pub fp: FokkerPlanck<T>,
    /// Fraction of each sub-solver's stability limit actually used.
    pub safety: T,
    /// Pressure-free solver used by the incompressible reference.
    incompressible: FluidSolver<T>,
    transforms: SpectralBasis<T>,
}

impl<T: Real> CoupledSolver<T> {
    pub fn new(params: ModelParams<T>, grid: Grid<T>, n_radial: usize, n_angular: usize) -> Result<Self> {
        let fluid = FluidSolver::new(grid, params.clone())?;
        let fp = FokkerPlanck::new(&params, grid, n_radial, n_angular)?;
        let incompressible = FluidSolver::new(grid, ModelParams { c_p: T::zero(), ..params.clone() })?;
        let transforms = neumann_eigenbasis(&grid, 0)?;
        Ok(Self { params, grid, fluid, fp, safety: c(0.4), incompressible, transforms })
    }

    pub fn set_limiter(&mut self, limiter: Limiter) {
        self.fluid.limiter = limiter;
        self.incompressible.limiter = limiter;
    }

    /// Builds a state and its derived polymer fields.
    pub fn state(&self, fluid: FluidState<T>, psi: ConfigDistribution<T>) -> CoupledState<T> {
        let mut s = CoupledState { fluid, psi, rho_p: Vec::new(), tau1: Vec::new(), time: T::zero() };
        self.refresh(&mut s);
        s
    }

    /// Global equilibrium `(ρ̄, 0, ψ̂ ≡ 1)`.
    pub fn equilibrium(&self) -> CoupledState<T> {
        self.state(FluidState::at_rest(self.grid.cells(), self.params.rho_bar), self.fp.equilibrium())
    }

    fn refresh(&self, s: &mut CoupledState<T>) {
        s.rho_p = self.fp.number_density(&s.psi);
        s.tau1 = self.fp.tau1(&s.psi);
    }

    fn fp_limit(&self, fluid: &FluidState<T>) -> T {
        let (ux, uy) = fluid.velocity();
        let grads = self.grid.velocity_gradient(&ux, &uy);
        self.fp.stable_dt(&ux, &uy, &grads)
    }

    fn substeps(&self, dt: T, limit: T) -> usize {
        let n = (dt / (self.safety * limit)).ceil().to_f64_lossy();
        if n.is_finite() {
            (n as usize).max(1)
        } else {
            1
        }
    }

    /// Advances by `dt`: the step is split into Fokker–Planck substeps within
    /// their stability limit, each preceded by as many fluid substeps as the
    /// fluid limit requires (τ1, ϱ frozen), then ψ̂ is advanced with frozen
    /// `u`, `∇u` and the polymer fields are refreshed.
    pub fn coupled_step(&mut self, s: &mut CoupledState<T>, dt: T) -> Result<()> {
        let n_fp = self.substeps(dt, self.fp_limit(&s.fluid));
        let h = dt / T::from_usize_lossy(n_fp);
        for _ in 0..n_fp {
            let n_f = self.substeps(h, self.fluid.stable_dt(&s.fluid));
            let hf = h / T::from_usize_lossy(n_f);
            for _ in 0..n_f {
                self.fluid.fluid_step(&mut s.fluid, &s.tau1, &s.rho_p, hf)?;
            }
            let (ux, uy) = s.fluid.velocity();
            let grads = self.grid.velocity_gradient(&ux, &uy);
            self.fp.fp_step(&mut s.psi, &ux, &uy, &grads, h)?;
            self.refresh(s);
            s.time += h;
        }
        Ok(())
    }

    /// Projection of a momentum field at density `ρ̄` onto its solenoidal part.
    fn project(&self, f: &mut FluidState<T>) -> Result<()> {
        let rb = self.params.rho_bar;
        let (ux, uy) = f.velocity();
        let (sx, sy) = self.transforms.solenoidal(&ux, &uy);
        let div = self.transforms.divergence(&sx, &sy);
        let worst = div.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        if worst > c(1e-8) {
            return Err(Error::ProjectionResidual(worst.to_f64_lossy()));
        }
        f.rho.iter_mut().for_each(|r| *r = rb);
        f.mx = sx.into_iter().map(|u| rb * u).collect();
        f.my = sy.into_iter().map(|u| rb * u).collect();
        Ok(())
    }

    /// Incompressible limit step: SSP-RK2 momentum update at density `ρ̄`
    /// without pressure, projected after every stage, then the same
    /// Fokker–Planck step as [`CoupledSolver::coupled_step`].
    pub fn incompressible_step(&mut self, s: &mut CoupledState<T>, dt: T) -> Result<()> {
        let n_fp = self.substeps(dt, self.fp_limit(&s.fluid));
        let h = dt / T::from_usize_lossy(n_fp);
        let half = c::<T>(0.5);
        for _ in 0..n_fp {
            let n_f = self.substeps(h, self.incompressible.stable_dt(&s.fluid));
            let hf = h / T::from_usize_lossy(n_f);
            let polymer = self.incompressible.polymer_tensor(&s.tau1, &s.rho_p);
            for _ in 0..n_f {
                let r0 = self.incompressible.residual(&s.fluid, &polymer, s.time, None)?;
                let mut s1 = s.fluid.clone();
                axpy_momentum(&mut s1, hf, &r0);
                self.project(&mut s1)?;
                let r1 = self.incompressible.residual(&s1, &polymer, s.time, None)?;
                axpy_momentum(&mut s1, hf, &r1);
                for (a, b) in s.fluid.mx.iter_mut().zip(&s1.mx) {
                    *a = half * (*a + *b);
                }
                for (a, b) in s.fluid.my.iter_mut().zip(&s1.my) {
                    *a = half * (*a + *b);
                }
                self.project(&mut s.fluid)?;
            }
            let (ux, uy) = s.fluid.velocity();
            let grads = self.grid.velocity_gradient(&ux, &uy);
            self.fp.fp_step(&mut s.psi, &ux, &uy, &grads, h)?;
            self.refresh(s);
            s.time += h;
        }
        Ok(())
    }

    /// Mean-free potential `Φ` of the gradient part of the pressure-free
    /// momentum right-hand side, `∇Φ = H⊥[R]`. A pressure with
    /// `ε⁻² ∇p = ∇Φ` removes the leading acoustic forcing.
    pub fn pressure_balance(&self, s: &CoupledState<T>) -> Result<Vec<T>> {
        let polymer = self.incompressible.polymer_tensor(&s.tau1, &s.rho_p);
        let r = self.incompressible.residual(&s.fluid, &polymer, s.time, None)?;
        Ok(self.transforms.helmholtz_project(&r.mx, &r.my).potential)
    }

    /// Spectral divergence of the velocity.
    pub fn divergence(&self, fluid: &FluidState<T>) -> Vec<T> {
        let (ux, uy) = fluid.velocity();
        self.transforms.divergence(&ux, &uy)
    }

    /// Solenoidal part of the velocity.
    pub fn solenoidal_velocity(&self, fluid: &FluidState<T>) -> (Vec<T>, Vec<T>) {
        let (ux, uy) = fluid.velocity();
        self.transforms.solenoidal(&ux, &uy)
    }

    /// The four energy and five dissipation terms at the current state.
    pub fn energy_terms(&self, s: &CoupledState<T>) -> Result<EnergyTerms<T>> {
        let p = &self.params;
        let g = &self.grid;
        let eps2 = p.epsilon * p.epsilon;
        let f = &s.fluid;
        let kin: Vec<T> =
            (0..g.cells()).map(|k| c::<T>(0.5) * (f.mx[k] * f.mx[k] + f.my[k] * f.my[k]) / f.rho[k]).collect();
        let pot = pressure_potential(p, &f.rho)?;
        let ef = self.fp.entropy_fisher(&s.psi);
        let (ux, uy) = f.velocity();
        let (shear, bulk) = self.fluid.viscous_dissipation(&ux, &uy);
        let mut grad2 = T::zero();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                if i + 1 < g.nx {
                    let d = s.rho_p[g.idx(i + 1, j)] - s.rho_p[k];
                    grad2 += d * d * g.hy / g.hx;
                }
                if j + 1 < g.ny {
                    let d = s.rho_p[g.idx(i, j + 1)] - s.rho_p[k];
                    grad2 += d * d * g.hx / g.hy;
                }
            }
        }
        let rp2: Vec<T> = s.rho_p.iter().map(|&r| r * r).collect();
        let fr = p.polymer_fraction;
        Ok(EnergyTerms {
            kinetic: g.integrate(&kin),
            pressure: g.integrate(&pot) / eps2,
            entropy: fr * (ef.entropy + g.integrate(&vec![T::one(); g.cells()])),
            interaction: p.xi_bar * g.integrate(&rp2),
            viscous_deviatoric: shear,
            viscous_bulk: bulk,
            x_fisher: fr * ef.x_fisher,
            q_fisher: fr * ef.q_fisher,
            density_gradient: c::<T>(2.0) * p.delta * p.xi_bar * grad2,
        })
    }
}

fn axpy_momentum<T: Real>(s: &mut FluidState<T>, a: T, r: &FluidState<T>) {
    for (x, y) in s.mx.iter_mut().zip(&r.mx) {
        *x += a * *y;
    }
    for (x, y) in s.my.iter_mut().zip(&r.my) {
        *x += a * *y;
    }
}

/// Energy and dissipation terms of the coupled system at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyTerms<T> {
    pub kinetic: T,
    pub pressure: T,
    /// `(1−β) ∫∫ M (F(ψ̂) + 1)`, zero at equilibrium.
    pub entropy: T,
    pub interaction: T,
    pub viscous_deviatoric: T,
    pub viscous_bulk: T,
    pub x_fisher: T,
    pub q_fisher: T,
    pub density_gradient: T,
}

impl<T: Real> EnergyTerms<T> {
    pub fn energy(&self) -> T {
        self.kinetic + self.pressure + self.entropy + self.interaction
    }

    pub fn dissipation(&self) -> T {
        self.viscous_deviatoric + self.viscous_bulk + self.x_fisher + self.q_fisher + self.density_gradient
    }

    pub fn dissipation_terms(&self) -> [T; 5] {
        [self.viscous_deviatoric, self.viscous_bulk, self.x_fisher, self.q_fisher, self.density_gradient]
    }
}

/// One ledger row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LedgerSample<T> {
    pub time: T,
    pub terms: EnergyTerms<T>,
    /// `Σ dt · D` up to this sample (right-endpoint rule).
    pub cumulative: T,
    /// `E(t) + ∫D ≤ E(0) + tol·|E(0)|`.
    pub monitor: bool,
    /// The weaker form with an `e^t` growth factor on `|E(0)|`.
    pub monitor_exp: bool,
}

/// Time series of energy terms with the energy-inequality monitor.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyLedger<T> {
    pub tolerance: T,
    pub samples: Vec<LedgerSample<T>>,
}

impl<T: Real> EnergyLedger<T> {
    pub fn new(tolerance: T) -> Self {
        Self { tolerance, samples: Vec::new() }
    }

    pub fn initial_energy(&self) -> Option<T> {
        self.samples.first().map(|s| s.terms.energy())
    }

    /// True when every sample satisfies the sharp monitor and has
    /// nonnegative dissipation terms.
    pub fn all_pass(&self) -> bool {
        self.samples.iter().all(|s| s.monitor && s.terms.dissipation_terms().iter().all(|&d| d >= T::zero()))
    }
}

/// Appends a sample for `state`; the cumulative dissipation grows by
/// `(t − t_prev) · D(t)`.
pub fn energy_ledger_update<T: Real>(
    solver: &CoupledSolver<T>,
    state: &CoupledState<T>,
    ledger: &mut EnergyLedger<T>,
) -> Result<LedgerSample<T>> {
    let terms = solver.energy_terms(state)?;
    let (cumulative, e0, t0) = match ledger.samples.last() {
        Some(last) => (
            last.cumulative + (state.time - last.time) * terms.dissipation(),
            ledger.samples[0].terms.energy(),
            ledger.samples[0].time,
        ),
        None => (T::zero(), terms.energy(), state.time),
    };
    let lhs = terms.energy() + cumulative;
    let slack = ledger.tolerance * e0.abs();
    let growth = ((state.time - t0).exp() - T::one()) * e0.abs();
    let sample = LedgerSample {
        time: state.time,
        terms,
        cumulative,
        monitor: lhs <= e0 + slack,
        monitor_exp: lhs <= e0 + growth + slack,
    };
    ledger.samples.push(sample);
    Ok(sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn solver(n: usize, p: ModelParams<f64>) -> CoupledSolver<f64> {
        CoupledSolver::new(p, Grid::square(n), 12, 8).unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    fn stirred(s: &CoupledSolver<f64>, amp: f64) -> CoupledState<f64> {
        let g = s.grid;
        let ux = g.sample(|x, y| amp * (PI * x).sin() * (PI * y).cos());
        let uy = g.sample(|x, y| -amp * (PI * x).cos() * (PI * y).sin());
        let rho = g.sample(|x, y| 1.0 + 0.01 * (PI * x).cos() * (PI * y).cos());
        let psi = s.fp.distribution(|x, _, q| 1.0 + 0.3 * (PI * x).cos() * (1.0 - (q[0][0].powi(2) + q[0][1].powi(2)) / 4.0));
        s.state(FluidState::from_primitive(rho, &ux, &uy), psi)
    }

    #[test]
    fn equilibrium_is_a_fixed_point_with_closed_form_energy() {
        let mut s = solver(8, ModelParams::default());
        let mut st = s.equilibrium();
        let start = st.clone();
        for _ in 0..100 {
            s.coupled_step(&mut st, 1e-3).unwrap();
        }
        assert!(max_diff(&st.fluid.rho, &start.fluid.rho) < 1e-12);
        assert!(max_diff(&st.fluid.mx, &start.fluid.mx) < 1e-12);
        assert!(max_diff(&st.psi.values, &start.psi.values) < 1e-12);
        for t in &st.tau1 {
            assert!((t.xx + 0.5).abs() < 1e-8 && (t.yy + 0.5).abs() < 1e-8 && t.xy.abs() < 1e-8);
        }
        let e = s.energy_terms(&st).unwrap();
        assert!((e.energy() - 0.1).abs() < 1e-10, "{}", e.energy());
        assert!(e.dissipation().abs() < 1e-20);
    }

    #[test]
    fn rigid_rotation_has_no_interior_viscous_stress() {
        let p = ModelParams::default();
        let g = Grid::<f64>::square(8);
        let ux = g.sample(|_, y| -(y - 0.5));
        let uy = g.sample(|x, _| x - 0.5);
        let st = crate::fluid::stress_field(&g, &p, &ux, &uy);
        for j in 1..7 {
            for i in 1..7 {
                assert!(st[g.idx(i, j)].frob2() < 1e-24);
            }
        }
    }

    #[test]
    fn without_polymer_the_fluid_decouples_bit_for_bit() {
        let p = ModelParams { xi_bar: 0.0, polymer_fraction: 0.0, ..ModelParams::default() };
        let mut s = solver(8, p);
        let mut st = stirred(&s, 0.5);
        let mut alone = st.fluid.clone();
        let dt = 2e-3;
        for _ in 0..5 {
            // replay the substep schedule of the coupled step
            let n_fp = s.substeps(dt, s.fp_limit(&st.fluid));
            let h = dt / n_fp as f64;
            let mut shadow = alone.clone();
            for _ in 0..n_fp {
                let n_f = s.substeps(h, s.fluid.stable_dt(&shadow));
                for _ in 0..n_f {
                    s.fluid.fluid_step(&mut shadow, &st.tau1, &st.rho_p, h / n_f as f64).unwrap();
                }
            }
            alone = shadow;
            s.coupled_step(&mut st, dt).unwrap();
            assert_eq!(st.fluid, alone);
        }
    }

    #[test]
    fn stirred_run_conserves_and_satisfies_energy_monitor() {
        let mut s = solver(8, ModelParams::default());
        let mut st = stirred(&s, 0.5);
        let mut ledger = EnergyLedger::new(1e-6);
        energy_ledger_update(&s, &st, &mut ledger).unwrap();
        let m0 = s.grid.integrate(&st.fluid.rho);
        let p0 = s.fp.total_mass(&st.psi);
        for _ in 0..40 {
            s.coupled_step(&mut st, 2.5e-3).unwrap();
            energy_ledger_update(&s, &st, &mut ledger).unwrap();
            let rp = s.fp.number_density(&st.psi);
            assert!(max_diff(&rp, &st.rho_p) < 1e-10);
        }
        assert!(((s.grid.integrate(&st.fluid.rho) - m0) / m0).abs() < 1e-12);
        assert!(((s.fp.total_mass(&st.psi) - p0) / p0).abs() < 1e-12);
        assert!(ledger.all_pass(), "{:?}", ledger.samples.iter().find(|x| !x.monitor));
        assert!(ledger.samples.iter().all(|x| x.monitor_exp));
        let last = ledger.samples.last().unwrap();
        assert!(last.cumulative > 0.0);
    }

    #[test]
    fn incompressible_reference_stays_solenoidal() {
        let mut s = solver(8, ModelParams::default());
        let mut eq = s.equilibrium();
        let start = eq.clone();
        s.incompressible_step(&mut eq, 1e-2).unwrap();
        assert!(max_diff(&eq.fluid.mx, &start.fluid.mx) < 1e-14);
        let mut st = stirred(&s, 0.5);
        st.fluid.rho = vec![1.0; 64];
        let (ux, uy) = st.fluid.velocity();
        let (sx, sy) = s.transforms.solenoidal(&ux, &uy);
        st.fluid = FluidState::from_primitive(vec![1.0; 64], &sx, &sy);
        for _ in 0..10 {
            s.incompressible_step(&mut st, 5e-3).unwrap();
            let d = s.divergence(&st.fluid);
            assert!(d.iter().all(|v| v.abs() < 1e-10));
            assert!(st.fluid.rho.iter().all(|&r| r == 1.0));
        }
    }

    #[test]
    fn stokes_mode_decays_at_viscous_rate() {
        let p = ModelParams { polymer_fraction: 0.0, xi_bar: 0.0, ..ModelParams::default() };
        let mut s = CoupledSolver::new(p.clone(), Grid::square(32), 8, 8).unwrap();
        let g = s.grid;
        let amp = 0.1;
        let ux = g.sample(|x, y| amp * (PI * x).sin() * (PI * y).cos());
        let uy = g.sample(|x, y| -amp * (PI * x).cos() * (PI * y).sin());
        let mut st = s.state(FluidState::from_primitive(vec![1.0; g.cells()], &ux, &uy), s.fp.equilibrium());
        let k0 = s.energy_terms(&st).unwrap().kinetic;
        let t = 0.05;
        for _ in 0..10 {
            s.incompressible_step(&mut st, t / 10.0).unwrap();
        }
        let rate = -(s.energy_terms(&st).unwrap().kinetic / k0).ln() / t;
        let oracle = 2.0 * p.mu_s * PI * PI;
        assert!(((rate - oracle) / oracle).abs() < 0.05, "{rate} vs {oracle}");
    }
}
