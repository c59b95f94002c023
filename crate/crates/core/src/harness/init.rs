//! Well-prepared initial data `ρ₀ = ρ̄ + ε r₀`, solenoidal `u₀`, `ψ̂₀ ≥ 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coupled::{CoupledSolver, CoupledState};
use crate::error::{Error, Result};
use crate::fluid::FluidState;
use crate::fokker_planck::ConfigDistribution;
use crate::scalar::{c, Real};

/// Initial-data family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Recipe {
    /// `r₀` chosen so that `ε⁻²∇p(ρ₀)` cancels the gradient part of the
    /// remaining momentum forcing at `t = 0`.
    #[default]
    Balanced,
    /// `r₀ = A cos(πx)`: deliberately excites the (1,0) acoustic mode.
    Acoustic,
    /// Seeded random stream function, balanced density.
    Random,
}

impl Recipe {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "balanced" => Some(Recipe::Balanced),
            "acoustic" => Some(Recipe::Acoustic),
            "random" => Some(Recipe::Random),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Recipe::Balanced => "balanced",
            Recipe::Acoustic => "acoustic",
            Recipe::Random => "random",
        }
    }
}

/// The ε-independent part of the data, shared by every run of a continuation.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialData<T> {
    pub ux: Vec<T>,
    pub uy: Vec<T>,
    pub psi: ConfigDistribution<T>,
    /// `r₀ / ε` for balanced recipes, `r₀` itself for the acoustic one.
    density_profile: Vec<T>,
    scales_with_epsilon: bool,
    pub amplitude: T,
}

/// Stream-function coefficients `c_kl` of `Σ c_kl sin(kπx) sin(lπy)`.
fn stream_modes<T: Real>(recipe: Recipe, seed: u64) -> Vec<(usize, usize, T)> {
    match recipe {
        Recipe::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut modes = Vec::new();
            for k in 1..=3 {
                for l in 1..=3 {
                    let w: f64 = rng.gen_range(-1.0..1.0);
                    modes.push((k, l, c::<T>(w / (k * k + l * l) as f64)));
                }
            }
            modes
        }
        _ => vec![(1, 1, T::one()), (2, 1, c(0.5))],
    }
}

/// Builds `u₀`, `ψ̂₀` and the density profile for `solver`'s grids.
pub fn initial_data<T: Real>(recipe: Recipe, amplitude: T, solver: &CoupledSolver<T>, seed: u64) -> Result<InitialData<T>> {
    let g = solver.grid;
    let pi = T::PI();
    let modes = stream_modes::<T>(recipe, seed);
    let ux = g.sample(|x, y| {
        modes.iter().fold(T::zero(), |s, &(k, l, a)| {
            let (kf, lf) = (T::from_usize_lossy(k), T::from_usize_lossy(l));
            s - amplitude * a * lf * pi * (kf * pi * x).sin() * (lf * pi * y).cos()
        })
    });
    let uy = g.sample(|x, y| {
        modes.iter().fold(T::zero(), |s, &(k, l, a)| {
            let (kf, lf) = (T::from_usize_lossy(k), T::from_usize_lossy(l));
            s + amplitude * a * kf * pi * (kf * pi * x).cos() * (lf * pi * y).sin()
        })
    });
    let rb = solver.params.rho_bar;
    let (ux, uy) = solver.solenoidal_velocity(&FluidState::from_primitive(vec![rb; g.cells()], &ux, &uy));

    let b1 = solver.params.b[0];
    let psi = solver.fp.distribution(|x, y, q| {
        let r2 = q[0][0] * q[0][0] + q[0][1] * q[0][1] + q[0][2] * q[0][2];
        let h = (T::one() - r2 / b1) * (T::one() + q[0][0] * q[0][1] / b1);
        (T::one() + amplitude * (pi * x).cos() * (pi * y).cos() * h).max(T::zero())
    });

    let (density_profile, scales_with_epsilon) = match recipe {
        Recipe::Acoustic => (g.sample(|x, _| amplitude * (pi * x).cos()), false),
        _ => {
            let s = solver.state(FluidState::from_primitive(vec![rb; g.cells()], &ux, &uy), psi.clone());
            let phi = solver.pressure_balance(&s)?;
            let p = &solver.params;
            let dp = p.c_p * p.gamma * rb.powf(p.gamma - T::one());
            let mean = g.mean(&phi);
            (phi.iter().map(|&v| (v - mean) / dp).collect(), true)
        }
    };
    Ok(InitialData { ux, uy, psi, density_profile, scales_with_epsilon, amplitude })
}

impl<T: Real> InitialData<T> {
    /// `r₀` at Mach number `epsilon`, mean-free.
    pub fn r0(&self, epsilon: T) -> Vec<T> {
        if self.scales_with_epsilon {
            self.density_profile.iter().map(|&v| epsilon * v).collect()
        } else {
            self.density_profile.clone()
        }
    }

    /// Compressible state for `solver` (its ε is used).
    pub fn state(&self, solver: &CoupledSolver<T>) -> Result<CoupledState<T>> {
        let p = &solver.params;
        let r0 = self.r0(p.epsilon);
        let sup = r0.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        if sup > self.amplitude {
            return Err(Error::InvalidParams(format!(
                "density perturbation {} exceeds the amplitude {}",
                sup.to_f64_lossy(),
                self.amplitude.to_f64_lossy()
            )));
        }
        let rho: Vec<T> = r0.iter().map(|&r| p.rho_bar + p.epsilon * r).collect();
        let min = rho.iter().fold(T::infinity(), |m, &v| m.min(v));
        if min <= T::zero() {
            return Err(Error::NonpositiveDensity(min.to_f64_lossy()));
        }
        Ok(solver.state(FluidState::from_primitive(rho, &self.ux, &self.uy), self.psi.clone()))
    }

    /// Incompressible reference state: same `u₀`, `ψ̂₀`, density `ρ̄`.
    pub fn reference_state(&self, solver: &CoupledSolver<T>) -> CoupledState<T> {
        let rho = vec![solver.params.rho_bar; solver.grid.cells()];
        solver.state(FluidState::from_primitive(rho, &self.ux, &self.uy), self.psi.clone())
    }
}

/// Compressible well-prepared state at `solver`'s Mach number. Amplitude
/// zero yields the global equilibrium.
pub fn well_prepared_init<T: Real>(recipe: Recipe, amplitude: T, solver: &CoupledSolver<T>, seed: u64) -> Result<CoupledState<T>> {
    if amplitude == T::zero() {
        return Ok(solver.equilibrium());
    }
    initial_data(recipe, amplitude, solver, seed)?.state(solver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::params::ModelParams;

    fn solver() -> CoupledSolver<f64> {
        CoupledSolver::new(ModelParams::default(), Grid::square(16), 12, 8).unwrap()
    }

    #[test]
    fn zero_amplitude_is_equilibrium() {
        let s = solver();
        assert_eq!(well_prepared_init(Recipe::Balanced, 0.0, &s, 0).unwrap(), s.equilibrium());
    }

    #[test]
    fn velocity_is_discretely_solenoidal_and_tangential() {
        let s = solver();
        for recipe in [Recipe::Balanced, Recipe::Random] {
            let st = well_prepared_init(recipe, 0.5, &s, 7).unwrap();
            let div = s.divergence(&st.fluid);
            assert!(div.iter().all(|d| d.abs() < 1e-10));
            let (ux, uy) = st.fluid.velocity();
            let (fx, fy) = s.grid.face_velocities(&ux, &uy);
            let g = s.grid;
            for j in 0..g.ny {
                assert_eq!(fx[j * (g.nx + 1)], 0.0);
                assert_eq!(fx[j * (g.nx + 1) + g.nx], 0.0);
            }
            assert!(fy[..g.nx].iter().all(|&v| v == 0.0));
            assert!(ux.iter().any(|v| v.abs() > 0.1));
        }
    }

    #[test]
    fn density_perturbation_is_mean_free_and_bounded() {
        let s = solver();
        for recipe in [Recipe::Balanced, Recipe::Acoustic, Recipe::Random] {
            let data = initial_data(recipe, 0.5, &s, 3).unwrap();
            let r0 = data.r0(0.1);
            assert!(s.grid.integrate(&r0).abs() < 1e-14, "{recipe:?}");
            assert!(r0.iter().all(|v| v.abs() <= 0.5));
            assert!(data.psi.min() >= 0.0);
        }
    }

    #[test]
    fn cosine_profile_integrates_to_zero() {
        let g = Grid::<f64>::square(32);
        let r0 = g.sample(|x, _| (std::f64::consts::PI * x).cos());
        assert!(g.integrate(&r0).abs() < 1e-15);
    }

    #[test]
    fn oversized_amplitude_is_rejected() {
        let p = ModelParams { epsilon: 0.9, ..ModelParams::default() };
        let s = CoupledSolver::new(p, Grid::square(8), 12, 8).unwrap();
        assert!(well_prepared_init(Recipe::Acoustic, 2.0, &s, 0).is_err());
    }

    #[test]
    fn random_recipe_is_seed_deterministic() {
        let s = solver();
        let a = initial_data(Recipe::Random, 0.5, &s, 11).unwrap();
        let b = initial_data(Recipe::Random, 0.5, &s, 11).unwrap();
        let c = initial_data(Recipe::Random, 0.5, &s, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.ux, c.ux);
    }
}
