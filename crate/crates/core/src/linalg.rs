//! Dense complex Hermitian kernel.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. All sizes in this crate are
//! small (the largest routine case is a 16x16 four-qubit operator), so every
//! routine is a straightforward dense loop.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Hermiticity tolerance, max |M_ij - conj(M_ji)|.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Allowed deviation of the trace from one.
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;
/// Allowed deviation of a pure state's norm from one.
pub const NORM_TOL: f64 = 1e-12;

/// Largest entrywise deviation from Hermiticity.
pub fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "matrix is not square: {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

fn check_hermitian(m: &ComplexMatrix, tol: f64) -> Result<()> {
    let defect = hermitian_defect(m);
    if defect > tol {
        return Err(Error::Validation(format!(
            "matrix is not Hermitian (defect {defect:e})"
        )));
    }
    Ok(())
}

/// Hilbert-Schmidt inner product Tr[A B] of two Hermitian matrices.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let n = check_square(a)?;
    if b.shape() != a.shape() {
        return Err(Error::Dimension(format!(
            "shape mismatch: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    check_hermitian(a, HERMITIAN_TOL)?;
    check_hermitian(b, HERMITIAN_TOL)?;
    debug_assert_eq!(n, b.nrows());
    Ok(hs_inner_unchecked(a, b))
}

/// Tr[A B] for Hermitian operands without shape or symmetry checks.
///
/// Uses Tr[A B] = sum_ij A_ij conj(B_ij), valid when B is Hermitian.
#[inline]
pub fn hs_inner_unchecked(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// Squared Hilbert-Schmidt distance Tr[(A - B)^2].
pub fn hsd_sq(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::Dimension(format!(
            "subsystem dims differ: {:?} vs {:?}",
            a.dims, b.dims
        )));
    }
    Ok(frobenius_dist_sq(&a.matrix, &b.matrix))
}

/// Sum of |A_ij - B_ij|^2 for equally shaped matrices.
pub fn frobenius_dist_sq(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum()
}

/// Tensor product A ⊗ B.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues in ascending order.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: ComplexMatrix,
}

pub fn eig_hermitian(m: &ComplexMatrix) -> Result<HermitianEigen> {
    check_square(m)?;
    check_hermitian(m, HERMITIAN_TOL)?;
    Ok(eig_hermitian_unchecked(m))
}

pub(crate) fn eig_hermitian_unchecked(m: &ComplexMatrix) -> HermitianEigen {
    // Symmetrize so rounding-level asymmetry never reaches the solver.
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermitianEigen { values, vectors }
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(eig_hermitian(m)?.values.iter().copied().collect())
}

fn check_dims(dims: &[usize], size: usize) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::Dimension(format!("invalid subsystem dims {dims:?}")));
    }
    let total: usize = dims.iter().product();
    if total != size {
        return Err(Error::Dimension(format!(
            "dims {dims:?} imply size {total}, matrix has size {size}"
        )));
    }
    Ok(())
}

/// Splits the dims around `party` into (left size, party dim, right size).
fn split_at_party(dims: &[usize], party: usize) -> Result<(usize, usize, usize)> {
    if party >= dims.len() {
        return Err(Error::Dimension(format!(
            "party {party} out of range for {} parties",
            dims.len()
        )));
    }
    let left = dims[..party].iter().product();
    let right = dims[party + 1..].iter().product();
    Ok((left, dims[party], right))
}

/// Contracts one party of `m` with the pure state `state`, yielding the
/// operator `(I ⊗ <b| ⊗ I) M (I ⊗ |b> ⊗ I)` on the remaining parties.
pub fn contract_party(
    m: &ComplexMatrix,
    party: usize,
    state: &PureState,
    dims: &[usize],
) -> Result<ComplexMatrix> {
    let n = check_square(m)?;
    check_dims(dims, n)?;
    let (left, dp, right) = split_at_party(dims, party)?;
    if state.dim() != dp {
        return Err(Error::Dimension(format!(
            "state has dimension {}, party {party} has dimension {dp}",
            state.dim()
        )));
    }
    let b = state.amplitudes();
    let rest = left * right;
    let full = |l: usize, j: usize, r: usize| (l * dp + j) * right + r;
    let mut out = ComplexMatrix::zeros(rest, rest);
    for lc in 0..left {
        for rc in 0..right {
            let col = lc * right + rc;
            for lr in 0..left {
                for rr in 0..right {
                    let row = lr * right + rr;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in 0..dp {
                        let bj = b[j].conj();
                        for jc in 0..dp {
                            acc += bj * m[(full(lr, j, rr), full(lc, jc, rc))] * b[jc];
                        }
                    }
                    out[(row, col)] = acc;
                }
            }
        }
    }
    Ok(out)
}

/// Partial transpose of `m` on one party. Entries are only permuted.
pub fn partial_transpose_matrix(
    m: &ComplexMatrix,
    dims: &[usize],
    party: usize,
) -> Result<ComplexMatrix> {
    let n = check_square(m)?;
    check_dims(dims, n)?;
    let (_, dp, right) = split_at_party(dims, party)?;
    let mut out = ComplexMatrix::zeros(n, n);
    for col in 0..n {
        let (cl, cj, cr) = (col / (dp * right), (col / right) % dp, col % right);
        for row in 0..n {
            let (rl, rj, rr) = (row / (dp * right), (row / right) % dp, row % right);
            let new_row = (rl * dp + cj) * right + rr;
            let new_col = (cl * dp + rj) * right + cr;
            out[(new_row, new_col)] = m[(row, col)];
        }
    }
    Ok(out)
}

pub fn partial_transpose(m: &DensityMatrix, party: usize) -> Result<ComplexMatrix> {
    partial_transpose_matrix(&m.matrix, &m.dims, party)
}

/// Smallest eigenvalue over the partial transposes of every single party.
pub fn min_ppt_eigenvalue(m: &DensityMatrix) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for party in 0..m.dims.len() {
        let pt = partial_transpose(m, party)?;
        worst = worst.min(eig_hermitian_unchecked(&pt).values[0]);
    }
    Ok(worst)
}

/// Frobenius norm of the commutator [A, B].
pub fn commutator_norm(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a * b - b * a).norm()
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Outer product |v><v|.
pub fn outer(v: &ComplexVector) -> ComplexMatrix {
    v * v.adjoint()
}

/// Quadratic form <v|M|v> for Hermitian M.
#[inline]
pub fn quadratic_form(m: &ComplexMatrix, v: &ComplexVector) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for j in 0..n {
        let col = m.column(j);
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..n {
            s += v[i].conj() * col[i];
        }
        acc += (s * v[j]).re;
    }
    acc
}

/// A unit-norm state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: ComplexVector,
}

impl PureState {
    pub fn new(amplitudes: ComplexVector) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Dimension("empty state vector".into()));
        }
        let norm_sq = amplitudes.norm_squared();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::Validation(format!(
                "state norm squared is {norm_sq}, expected 1"
            )));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(amplitudes: ComplexVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Degenerate("cannot normalize a zero vector".into()));
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(norm),
        })
    }

    /// Computational basis vector |index>.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::Dimension(format!("basis index {index} >= {dim}")));
        }
        let mut v = ComplexVector::zeros(dim);
        v[index] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> ComplexVector {
        self.amplitudes
    }

    pub fn projector(&self) -> ComplexMatrix {
        outer(&self.amplitudes)
    }

    /// Tensor product of several states, first factor most significant.
    pub fn product(factors: &[PureState]) -> Result<Self> {
        let (first, rest) = factors
            .split_first()
            .ok_or_else(|| Error::Dimension("empty product".into()))?;
        let amplitudes = rest.iter().fold(first.amplitudes.clone(), |acc, f| {
            acc.kronecker(&f.amplitudes)
        });
        Ok(Self { amplitudes })
    }
}

/// A validated density matrix with its subsystem structure.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(dims: Vec<usize>, matrix: ComplexMatrix) -> Result<Self> {
        let n = check_square(&matrix)?;
        check_dims(&dims, n)?;
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::Dimension(format!(
                "every subsystem needs dimension >= 2, got {dims:?}"
            )));
        }
        check_hermitian(&matrix, HERMITIAN_TOL)?;
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Validation(format!("trace is {tr}, expected 1")));
        }
        let min_eig = eig_hermitian_unchecked(&matrix).values[0];
        if min_eig < -PSD_TOL {
            return Err(Error::Validation(format!(
                "not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self { dims, matrix })
    }

    /// Skips validation. Callers guarantee the invariants by construction.
    pub(crate) fn from_parts_unchecked(dims: Vec<usize>, matrix: ComplexMatrix) -> Self {
        Self { dims, matrix }
    }

    /// Maximally mixed state I/D.
    pub fn maximally_mixed(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d < 2) {
            return Err(Error::Dimension(format!("invalid dims {dims:?}")));
        }
        let n: usize = dims.iter().product();
        Ok(Self {
            dims: dims.to_vec(),
            matrix: identity(n).unscale(n as f64),
        })
    }

    pub fn from_pure(dims: Vec<usize>, state: &PureState) -> Result<Self> {
        check_dims(&dims, state.dim())?;
        Ok(Self {
            dims,
            matrix: state.projector(),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total Hilbert space dimension.
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn purity(&self) -> f64 {
        hs_inner_unchecked(&self.matrix, &self.matrix)
    }

    /// Applies U ρ U†.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        Self {
            dims: self.dims.clone(),
            matrix: u * &self.matrix * u.adjoint(),
        }
    }
}
