//! Post-processing of runs: convergence fits, spectral diagnostics and
//! entanglement witnesses.

mod fit;
mod witness;

pub use fit::{
    correlation, fit_extrapolation, fit_extrapolation_records, fit_power, fit_power_pairs,
    fit_power_records, ExtrapolationFit, PowerFit, DEFAULT_STRIDE, MIN_POINTS,
};
pub use witness::{
    build_witness, max_eigenvalue, max_sep_overlap, SeparableOverlap, Witness, WitnessReport,
    DEFAULT_RESTARTS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{commutator_norm, eig_hermitian_unchecked, DensityMatrix};

/// Combined fit report written by the `fit` command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub stride: u64,
    pub f: f64,
    pub r2: f64,
}

impl FitReport {
    pub fn new(ext: &ExtrapolationFit, power: &PowerFit) -> Self {
        Self {
            a: ext.a,
            b: ext.b,
            r: ext.r,
            stride: ext.subsample_stride,
            f: power.f,
            r2: power.r2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Frobenius norm of [ρ₀, ρ₁].
    pub commutator_norm: f64,
    /// Ascending spectrum of ρ₀.
    pub spectrum0: Vec<f64>,
    /// Ascending spectrum of ρ₁.
    pub spectrum1: Vec<f64>,
    /// Σ (λ_i(ρ₀) - λ_i(ρ₁))² over the sorted spectra. Equals D² when the
    /// two states commute, and never exceeds it otherwise.
    pub spectral_d2: f64,
}

pub fn diagnostics(rho0: &DensityMatrix, rho1: &DensityMatrix) -> Result<Diagnostics> {
    if rho0.dims() != rho1.dims() {
        return Err(Error::Dimension(format!(
            "dims differ: {:?} vs {:?}",
            rho0.dims(),
            rho1.dims()
        )));
    }
    let spectrum0: Vec<f64> = eig_hermitian_unchecked(rho0.matrix())
        .values
        .iter()
        .copied()
        .collect();
    let spectrum1: Vec<f64> = eig_hermitian_unchecked(rho1.matrix())
        .values
        .iter()
        .copied()
        .collect();
    let spectral_d2 = spectrum0
        .iter()
        .zip(&spectrum1)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(Diagnostics {
        commutator_norm: commutator_norm(rho0.matrix(), rho1.matrix()),
        spectrum0,
        spectrum1,
        spectral_d2,
    })
}
