//! Dimensionless model parameters and the Rouse connectivity matrix.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::{c, Real};

/// All dimensionless constants of the scaled system (De = Re = 1, no body force).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    /// Mach number ε.
    pub epsilon: T,
    /// Adiabatic exponent γ of `p = c_p ρ^γ`.
    pub gamma: T,
    pub c_p: T,
    /// Shear viscosity μS.
    pub mu_s: T,
    /// Bulk viscosity μB.
    pub mu_b: T,
    /// Polymer viscosity fraction `1 - β = η_p / (η_s + η_p)`.
    pub polymer_fraction: T,
    /// Center-of-mass diffusion δ.
    pub delta: T,
    /// Interaction coefficient ξ̄.
    pub xi_bar: T,
    /// Static density ρ̄.
    pub rho_bar: T,
    /// Extensibility limits `b_i`, one per spring.
    pub b: Vec<T>,
    /// Rouse matrix `A` (K×K).
    pub rouse: DenseMatrix<T>,
    /// Physical dimension d; the configuration space of each spring has the same dimension.
    pub dim: usize,
}

impl<T: Real> Default for ModelParams<T> {
    fn default() -> Self {
        Self {
            epsilon: c(0.1),
            gamma: c(2.0),
            c_p: c(1.0),
            mu_s: c(1.0),
            mu_b: c(0.1),
            polymer_fraction: c(0.5),
            delta: c(0.1),
            xi_bar: c(0.1),
            rho_bar: c(1.0),
            b: vec![c(4.0)],
            rouse: DenseMatrix::from_rows(&[vec![c(2.0)]]),
            dim: 2,
        }
    }
}

/// Outcome of [`validate`]: an empty violation list means the parameters are admissible.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport<T> {
    pub violations: Vec<String>,
    /// Smallest Rouse eigenvalue, when the matrix is square and symmetric.
    pub a0: Option<T>,
}

impl<T> ValidationReport<T> {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Effective coefficients of the scaled momentum and Fokker–Planck equations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledNumbers<T> {
    /// Prefactor `1/ε²` of the pressure gradient.
    pub pressure_prefactor: T,
    /// Coefficient of `∇ϱ²` in the momentum equation; `ξ̃ = ξ̄ε²` cancels against `1/Ma²`.
    pub interaction: T,
    pub deborah: T,
    pub reynolds: T,
    pub body_force: T,
}

impl<T: Real> ModelParams<T> {
    pub fn springs(&self) -> usize {
        self.b.len()
    }

    /// Same parameters at a different Mach number.
    pub fn with_epsilon(&self, epsilon: T) -> Self {
        Self { epsilon, ..self.clone() }
    }

    /// Validates and returns `self`, or an error listing every violation.
    pub fn checked(self) -> Result<Self> {
        let report = validate(&self);
        if report.is_valid() {
            Ok(self)
        } else {
            Err(Error::InvalidParams(report.violations.join("; ")))
        }
    }
}

/// Checks every admissibility constraint and reports all violations.
pub fn validate<T: Real>(p: &ModelParams<T>) -> ValidationReport<T> {
    let mut v = Vec::new();
    let zero = T::zero();
    let one = T::one();
    if !(p.gamma > c(1.5)) {
        v.push(format!("γ ≤ 3/2 (γ = {})", p.gamma));
    }
    if !(p.c_p > zero) {
        v.push(format!("c_p must be positive (c_p = {})", p.c_p));
    }
    if !(p.mu_s > zero) {
        v.push(format!("μS must be positive (μS = {})", p.mu_s));
    }
    if !(p.mu_b >= zero) {
        v.push(format!("μB must be nonnegative (μB = {})", p.mu_b));
    }
    if !(p.delta > zero) {
        v.push(format!("δ must be positive (δ = {})", p.delta));
    }
    if !(p.rho_bar > zero) {
        v.push(format!("ρ̄ must be positive (ρ̄ = {})", p.rho_bar));
    }
    if !(p.xi_bar >= zero) {
        v.push(format!("ξ̄ must be nonnegative (ξ̄ = {})", p.xi_bar));
    }
    if !(p.epsilon > zero && p.epsilon < one) {
        v.push(format!("ε must lie in (0,1) (ε = {})", p.epsilon));
    }
    if !(p.polymer_fraction > zero && p.polymer_fraction < one) {
        v.push(format!("1−β must lie in (0,1) (1−β = {})", p.polymer_fraction));
    }
    if p.dim != 2 && p.dim != 3 {
        v.push(format!("dimension must be 2 or 3 (d = {})", p.dim));
    }
    if p.b.is_empty() {
        v.push("at least one spring is required".to_string());
    }
    for (i, &bi) in p.b.iter().enumerate() {
        if !(bi > c(2.0)) {
            v.push(format!("b_{} ≤ 2 (b_{} = {}); Maxwellian exponent b/2 must exceed 1", i + 1, i + 1, bi));
        }
    }
    let mut a0 = None;
    if p.rouse.dim() != p.b.len() {
        v.push(format!(
            "Rouse matrix is {}×{} but there are {} springs",
            p.rouse.dim(),
            p.rouse.dim(),
            p.b.len()
        ));
    }
    match rouse_min_eigenvalue(&p.rouse) {
        Ok(ev) => {
            if !(ev > zero) {
                v.push(format!("Rouse matrix not positive definite (a0 = {ev})"));
            }
            a0 = Some(ev);
        }
        Err(e) => v.push(e.to_string()),
    }
    ValidationReport { violations: v, a0 }
}

/// Coefficients entering the scaled equations.
pub fn scaled_numbers<T: Real>(p: &ModelParams<T>) -> ScaledNumbers<T> {
    ScaledNumbers {
        pressure_prefactor: T::one() / (p.epsilon * p.epsilon),
        interaction: p.xi_bar,
        deborah: T::one(),
        reynolds: T::one(),
        body_force: T::zero(),
    }
}

/// Smallest eigenvalue `a0` of the (symmetric) Rouse matrix.
pub fn rouse_min_eigenvalue<T: Real>(a: &DenseMatrix<T>) -> Result<T> {
    if a.dim() == 0 {
        return Err(Error::InvalidParams("empty Rouse matrix".into()));
    }
    if !a.is_symmetric(c(1e-12)) {
        return Err(Error::NotSymmetric);
    }
    Ok(a.symmetric_eigenvalues()[0])
}
