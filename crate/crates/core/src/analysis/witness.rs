//! Entanglement witnesses from an approximate closest separable state.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    contract_party, eig_hermitian, eig_hermitian_unchecked, hermitian_defect, hs_inner_unchecked,
    identity, quadratic_form, ComplexMatrix, DensityMatrix, PureState, HERMITIAN_TOL,
};
use crate::states::{Sampler, SamplerConfig};

pub const DEFAULT_RESTARTS: usize = 64;
/// Alternating ascent stops once a sweep gains less than this.
pub const ASCENT_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 10_000;

/// Best product-state overlap found for an operator.
#[derive(Debug, Clone)]
pub struct SeparableOverlap {
    /// ⟨φ|M|φ⟩ at the best product state found (a lower bound on the maximum).
    pub value: f64,
    pub factors: Vec<PureState>,
    /// Restart that produced the best value.
    pub restart: usize,
}

#[derive(Debug, Clone)]
pub struct Witness {
    /// W = (ρ₀ - ρ₁) - λ I
    pub operator: ComplexMatrix,
    /// Largest product-state overlap of ρ₀ - ρ₁ found.
    pub lambda: f64,
    /// Tr[ρ₀(ρ₀ - ρ₁)]
    pub value_rho0: f64,
    pub dims: Vec<usize>,
}

impl Witness {
    /// Tr[ρ₀ W] > 0.
    pub fn entangled(&self) -> bool {
        self.value_rho0 > self.lambda
    }

    pub fn margin(&self) -> f64 {
        self.value_rho0 - self.lambda
    }

    pub fn report(&self) -> WitnessReport {
        WitnessReport {
            lambda: self.lambda,
            value_rho0: self.value_rho0,
            entangled: self.entangled(),
            margin: self.margin(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub lambda: f64,
    pub value_rho0: f64,
    pub entangled: bool,
    pub margin: f64,
}

/// Top eigenvector of the operator seen by `party` when every other party
/// is fixed to its factor.
fn best_response(
    m: &ComplexMatrix,
    dims: &[usize],
    factors: &[PureState],
    party: usize,
) -> Result<PureState> {
    let mut reduced = m.clone();
    let mut reduced_dims = dims.to_vec();
    // contract from the last party down so earlier indices stay valid
    for other in (0..dims.len()).rev().filter(|&p| p != party) {
        reduced = contract_party(&reduced, other, &factors[other], &reduced_dims)?;
        reduced_dims.remove(other);
    }
    let eig = eig_hermitian_unchecked(&reduced);
    let top = eig.vectors.column(eig.vectors.ncols() - 1).into_owned();
    PureState::normalized(top)
}

fn overlap(m: &ComplexMatrix, factors: &[PureState]) -> Result<f64> {
    Ok(quadratic_form(m, PureState::product(factors)?.amplitudes()))
}

/// Alternating best-response ascent from one starting product state.
fn ascend(
    m: &ComplexMatrix,
    dims: &[usize],
    mut factors: Vec<PureState>,
) -> Result<(f64, Vec<PureState>)> {
    let mut value = overlap(m, &factors)?;
    for _ in 0..MAX_SWEEPS {
        for party in 0..dims.len() {
            factors[party] = best_response(m, dims, &factors, party)?;
        }
        let next = overlap(m, &factors)?;
        let gain = next - value;
        value = value.max(next);
        if gain < ASCENT_TOL {
            break;
        }
    }
    Ok((value, factors))
}

/// Maximizes ⟨φ|M|φ⟩ over product states |φ⟩ by multistart alternating
/// ascent. The result is a lower bound on the true maximum.
///
/// Restarts run in parallel; restart `i` draws its start from stream `i` of
/// `seed`, and ties keep the lowest restart index.
pub fn max_sep_overlap(
    m: &ComplexMatrix,
    dims: &[usize],
    restarts: usize,
    seed: u64,
) -> Result<SeparableOverlap> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension("operator is not square".into()));
    }
    if hermitian_defect(m) > HERMITIAN_TOL {
        return Err(Error::Validation("operator is not Hermitian".into()));
    }
    if dims.len() < 2 || dims.iter().any(|&d| d < 2) {
        return Err(Error::Dimension(format!(
            "need at least two parties of dimension >= 2, got {dims:?}"
        )));
    }
    if dims.iter().product::<usize>() != m.nrows() {
        return Err(Error::Dimension(format!(
            "dims {dims:?} do not match operator size {}",
            m.nrows()
        )));
    }
    if restarts == 0 {
        return Err(Error::Parameter("restarts must be >= 1".into()));
    }
    let cfg = SamplerConfig::seeded(seed);
    let results = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let mut sampler = Sampler::with_stream(cfg, i as u64);
            let start = sampler.sample_product_factors(dims)?;
            ascend(m, dims, start)
        })
        .collect::<Result<Vec<_>>>()?;
    let (restart, (value, factors)) = results
        .into_iter()
        .enumerate()
        .reduce(|best, cur| if cur.1 .0 > best.1 .0 { cur } else { best })
        .expect("restarts >= 1");
    Ok(SeparableOverlap {
        value,
        factors,
        restart,
    })
}

/// Builds W = (ρ₀ - ρ₁) - λ I with λ the best product-state overlap of ρ₀ - ρ₁.
pub fn build_witness(
    rho0: &DensityMatrix,
    rho1: &DensityMatrix,
    restarts: usize,
    seed: u64,
) -> Result<Witness> {
    if rho0.dims() != rho1.dims() {
        return Err(Error::Dimension(format!(
            "dims differ: {:?} vs {:?}",
            rho0.dims(),
            rho1.dims()
        )));
    }
    let diff = rho0.matrix() - rho1.matrix();
    let lambda = max_sep_overlap(&diff, rho0.dims(), restarts, seed)?.value;
    let operator = &diff - identity(diff.nrows()).scale(lambda);
    Ok(Witness {
        value_rho0: hs_inner_unchecked(rho0.matrix(), &diff),
        lambda,
        operator,
        dims: rho0.dims().to_vec(),
    })
}

/// Largest eigenvalue of a Hermitian operator, an upper bound on any
/// product-state overlap.
pub fn max_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    let eig = eig_hermitian(m)?;
    Ok(eig.values[eig.values.len() - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::outer;
    use crate::states::{bell, css_max_entangled};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    #[test]
    fn identity_and_projector() {
        let r = max_sep_overlap(&identity(4), &[2, 2], 4, 1).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);

        let p01 = outer(&PureState::basis(4, 1).unwrap().into_amplitudes());
        let r = max_sep_overlap(&p01, &[2, 2], 8, 1).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.factors[0].amplitudes()[0].norm(), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.factors[1].amplitudes()[1].norm(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn bell_minus_werner() {
        let diff = bell().matrix() - css_max_entangled(2).unwrap().matrix();
        let r = max_sep_overlap(&diff, &[2, 2], DEFAULT_RESTARTS, 7).unwrap();
        assert_abs_diff_eq!(r.value, 1.0 / 6.0, epsilon = 1e-9);
    }

    #[test]
    fn witness_examples() {
        let w =
            build_witness(&bell(), &css_max_entangled(2).unwrap(), DEFAULT_RESTARTS, 3).unwrap();
        assert_abs_diff_eq!(w.lambda, 1.0 / 6.0, epsilon = 1e-9);
        assert_abs_diff_eq!(w.value_rho0, 0.5, epsilon = 1e-12);
        assert!(w.entangled());
        assert_abs_diff_eq!(w.margin(), 1.0 / 3.0, epsilon = 1e-9);

        let same = build_witness(&bell(), &bell(), 4, 3).unwrap();
        assert_eq!(same.lambda, 0.0);
        assert_eq!(same.value_rho0, 0.0);
        assert!(!same.entangled());
    }

    #[test]
    fn rejects_bad_operators() {
        let mut m = identity(4);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(
            max_sep_overlap(&m, &[2, 2], 4, 0),
            Err(Error::Validation(_))
        ));
        assert!(max_sep_overlap(&identity(4), &[4], 4, 0).is_err());
        assert!(max_sep_overlap(&identity(4), &[2, 3], 4, 0).is_err());
        assert!(max_sep_overlap(&identity(4), &[2, 2], 0, 0).is_err());
        let d3 = DensityMatrix::maximally_mixed(&[3, 3]).unwrap();
        assert!(build_witness(&bell(), &d3, 4, 0).is_err());
    }

    #[test]
    fn deterministic_across_calls() {
        let diff = bell().matrix() - css_max_entangled(2).unwrap().matrix();
        let a = max_sep_overlap(&diff, &[2, 2], 16, 5).unwrap();
        let b = max_sep_overlap(&diff, &[2, 2], 16, 5).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.restart, b.restart);
    }

    /// Max over product states with a qubit first party: 1-degree Bloch grid
    /// on the qubit and an exact top eigenvalue on the second party.
    fn grid_max(m: &ComplexMatrix, d2: usize) -> f64 {
        use std::f64::consts::PI;
        let mut best = f64::NEG_INFINITY;
        for it in 0..=180 {
            let theta = it as f64 * PI / 180.0;
            for ip in 0..360 {
                let phi = ip as f64 * PI / 180.0;
                let v = [
                    Complex64::new((theta / 2.0).cos(), 0.0),
                    Complex64::from_polar((theta / 2.0).sin(), phi),
                ];
                let reduced = ComplexMatrix::from_fn(d2, d2, |i, j| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for a in 0..2 {
                        for b in 0..2 {
                            acc += v[a].conj() * v[b] * m[(a * d2 + i, b * d2 + j)];
                        }
                    }
                    acc
                });
                best = best.max(max_eigenvalue(&reduced).unwrap());
            }
        }
        best
    }

    fn random_difference(dims: &[usize], seed: u64) -> ComplexMatrix {
        let n: usize = dims.iter().product();
        let mut s = Sampler::new(SamplerConfig::seeded(seed));
        let mut a = ComplexMatrix::zeros(n, n);
        for _ in 0..2 {
            a += s.sample_pure(n).unwrap().projector();
        }
        let mut b = ComplexMatrix::zeros(n, n);
        for _ in 0..3 {
            b += s.sample_product(dims).unwrap().into_matrix();
        }
        a.unscale(2.0) - b.unscale(3.0)
    }

    #[test]
    fn ascent_agrees_with_grid() {
        for (dims, seed) in [
            ([2usize, 2], 11u64),
            ([2, 2], 12),
            ([2, 3], 13),
            ([2, 3], 14),
        ] {
            let m = random_difference(&dims, seed);
            let ascent = max_sep_overlap(&m, &dims, DEFAULT_RESTARTS, 1)
                .unwrap()
                .value;
            let grid = grid_max(&m, dims[1]);
            // the grid is itself a lower bound, so only the eigenvalue caps it
            assert!(ascent >= grid - 1e-9, "{dims:?}: {ascent} < {grid}");
            assert!(ascent <= grid + 1e-3, "{dims:?}: {ascent} vs {grid}");
            assert!(ascent <= max_eigenvalue(&m).unwrap() + 1e-12);
        }
    }

    #[test]
    fn witness_is_sound_on_product_states() {
        let dims = [2usize, 3];
        let mut s = Sampler::new(SamplerConfig::seeded(21));
        let rho0 = DensityMatrix::from_pure(dims.to_vec(), &s.sample_pure(6).unwrap()).unwrap();
        let rho1 = DensityMatrix::maximally_mixed(&dims).unwrap();
        let w = build_witness(&rho0, &rho1, DEFAULT_RESTARTS, 2).unwrap();
        for _ in 0..1000 {
            let phi = s.sample_product_vector(&dims).unwrap();
            assert!(crate::linalg::quadratic_form(&w.operator, &phi) <= 1e-9);
        }
    }
}
