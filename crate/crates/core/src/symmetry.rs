//! Finite separability-preserving symmetry groups and twirling.
//!
//! Groups are generated from local unitaries and permutations of
//! equal-dimension parties. Both map product states to product states, so
//! the twirl of a separable state stays separable.

use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{frobenius_dist_sq, identity, kron, ComplexMatrix, DensityMatrix};

pub const UNITARY_TOL: f64 = 1e-10;
/// Matrix distance below which two group elements are the same.
pub const DEDUP_TOL: f64 = 1e-9;
/// Default cap on the closure size.
pub const DEFAULT_CAP: usize = 1024;

/// A separability-preserving generator.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// `perm[k]` is the input party that ends up at position `k`.
    Permutation(Vec<usize>),
    /// One unitary per party, applied as their tensor product.
    Local(Vec<ComplexMatrix>),
}

impl Generator {
    /// The full-space unitary for subsystem `dims`.
    pub fn matrix(&self, dims: &[usize]) -> Result<ComplexMatrix> {
        match self {
            Generator::Permutation(perm) => permutation_matrix(perm, dims),
            Generator::Local(factors) => {
                if factors.len() != dims.len() {
                    return Err(Error::Dimension(format!(
                        "{} local factors for {} parties",
                        factors.len(),
                        dims.len()
                    )));
                }
                let mut full = identity(1);
                for (u, &d) in factors.iter().zip(dims) {
                    if u.shape() != (d, d) {
                        return Err(Error::Dimension(format!(
                            "local factor is {:?}, party dimension is {d}",
                            u.shape()
                        )));
                    }
                    check_unitary(u)?;
                    full = kron(&full, u);
                }
                Ok(full)
            }
        }
    }
}

fn check_unitary(u: &ComplexMatrix) -> Result<()> {
    let n = u.nrows();
    let defect = (u * u.adjoint() - identity(n)).norm();
    if defect > UNITARY_TOL {
        return Err(Error::Validation(format!(
            "generator is not unitary (defect {defect:e})"
        )));
    }
    Ok(())
}

fn permutation_matrix(perm: &[usize], dims: &[usize]) -> Result<ComplexMatrix> {
    let parties = dims.len();
    if perm.len() != parties {
        return Err(Error::Dimension(format!(
            "permutation has {} entries for {parties} parties",
            perm.len()
        )));
    }
    let mut seen = vec![false; parties];
    for &p in perm {
        if p >= parties || std::mem::replace(&mut seen[p], true) {
            return Err(Error::Parameter(format!("{perm:?} is not a permutation")));
        }
    }
    for (k, &p) in perm.iter().enumerate() {
        if dims[k] != dims[p] {
            return Err(Error::Dimension(format!(
                "permutation moves party {p} (dim {}) onto party {k} (dim {})",
                dims[p], dims[k]
            )));
        }
    }
    let n: usize = dims.iter().product();
    let mut m = ComplexMatrix::zeros(n, n);
    let mut digits = vec![0usize; parties];
    for input in 0..n {
        let mut rem = input;
        for k in (0..parties).rev() {
            digits[k] = rem % dims[k];
            rem /= dims[k];
        }
        let output = (0..parties).fold(0, |acc, k| acc * dims[k] + digits[perm[k]]);
        m[(output, input)] = Complex64::new(1.0, 0.0);
    }
    Ok(m)
}

impl FromStr for Generator {
    type Err = Error;

    /// `perm:0,2,1` or `local:<file>,<file>,...` where each file holds a
    /// unitary in the state-file JSON layout.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, body) = s
            .split_once(':')
            .ok_or_else(|| Error::Parameter(format!("bad symmetry `{s}`")))?;
        match kind {
            "perm" => {
                let perm = body
                    .split(',')
                    .map(|t| t.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Parameter(format!("bad permutation `{body}`")))?;
                Ok(Generator::Permutation(perm))
            }
            "local" => {
                let factors = body
                    .split(',')
                    .map(|path| crate::io::read_operator(path.trim()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Generator::Local(factors))
            }
            _ => Err(Error::Parameter(format!("unknown symmetry kind `{kind}`"))),
        }
    }
}

/// Equal up to a global phase.
fn same_up_to_phase(a: &ComplexMatrix, b: &ComplexMatrix) -> bool {
    // Tr[B† A]
    let overlap: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| y.conj() * x).sum();
    let mag = overlap.norm();
    if mag == 0.0 {
        return false;
    }
    let phase = overlap / mag;
    frobenius_dist_sq(a, &b.map(|z| z * phase)).sqrt() <= DEDUP_TOL
}

/// A finite group of separability-preserving unitaries.
#[derive(Debug, Clone)]
pub struct SymmetryGroup {
    dims: Vec<usize>,
    elements: Vec<ComplexMatrix>,
}

impl SymmetryGroup {
    /// The trivial group {I}.
    pub fn trivial(dims: &[usize]) -> Self {
        let n = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            elements: vec![identity(n)],
        }
    }

    /// Multiplicative closure of `generators` together with the identity.
    /// Elements that differ only by a global phase are merged.
    pub fn closure(generators: &[Generator], dims: &[usize], cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(Error::Parameter("closure cap must be >= 1".into()));
        }
        let gens = generators
            .iter()
            .map(|g| g.matrix(dims))
            .collect::<Result<Vec<_>>>()?;
        let mut group = Self::trivial(dims);
        let mut frontier = 0;
        while frontier < group.elements.len() {
            let current = group.elements[frontier].clone();
            for g in &gens {
                let candidate = g * &current;
                if !group
                    .elements
                    .iter()
                    .any(|e| same_up_to_phase(e, &candidate))
                {
                    if group.elements.len() == cap {
                        return Err(Error::Capacity { cap });
                    }
                    group.elements.push(candidate);
                }
            }
            frontier += 1;
        }
        Ok(group)
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    fn check_dims(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dims() != self.dims.as_slice() {
            return Err(Error::Dimension(format!(
                "group acts on {:?}, state has dims {:?}",
                self.dims,
                rho.dims()
            )));
        }
        Ok(())
    }

    /// Group average (1/k) Σ U ρ U†.
    pub fn twirl(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_dims(rho)?;
        Ok(DensityMatrix::from_parts_unchecked(
            self.dims.clone(),
            self.twirl_matrix(rho.matrix()),
        ))
    }

    pub(crate) fn twirl_matrix(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let n = m.nrows();
        let mut acc = ComplexMatrix::zeros(n, n);
        for u in &self.elements {
            acc += u * m * u.adjoint();
        }
        acc.unscale(self.elements.len() as f64)
    }

    /// Largest squared distance between `rho0` and one of its images.
    pub fn invariance_check(&self, rho0: &DensityMatrix) -> Result<f64> {
        self.check_dims(rho0)?;
        Ok(self
            .elements
            .iter()
            .map(|u| frobenius_dist_sq(rho0.matrix(), &(u * rho0.matrix() * u.adjoint())))
            .fold(0.0, f64::max))
    }
}
