//! Compressible Navier–Stokes–Fokker–Planck solver for dilute FENE polymer
//! fluids with slip walls, plus a Mach-number continuation harness that
//! compares the compressible runs against an incompressible reference.
//!
//! Numerical code is generic over [`Real`]; the aliases below fix `f64`.

pub mod coupled;
pub mod error;
pub mod fene;
pub mod fluid;
pub mod fokker_planck;
pub mod grid;
pub mod harness;
pub mod helmholtz;
pub mod linalg;
pub mod params;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ModelParams = params::ModelParams<f64>;
pub type QGrid = fene::QGrid<f64>;
pub type Maxwellian = fene::Maxwellian<f64>;
pub type FenePotential = fene::FenePotential<f64>;
pub type Grid = grid::Grid<f64>;
pub type CoupledSolver = coupled::CoupledSolver<f64>;
pub type CoupledState = coupled::CoupledState<f64>;
pub type FluidSolver = fluid::FluidSolver<f64>;
pub type FluidState = fluid::FluidState<f64>;
pub type FokkerPlanck = fokker_planck::FokkerPlanck<f64>;
pub type ConfigDistribution = fokker_planck::ConfigDistribution<f64>;
pub type SpectralBasis = helmholtz::SpectralBasis<f64>;
