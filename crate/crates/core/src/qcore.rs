//! Finite-dimensional states and operators.
//!
//! Every type validates on construction and is immutable afterwards, so the
//! numerical routines downstream never re-check Hermiticity, positivity or
//! normalization.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Tolerance on `max |M - M^dagger|` for observables and density operators.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Tolerance on unit norm, unit trace and eigenvalue positivity.
pub const STATE_TOL: f64 = 1e-12;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

fn check_square_finite(m: &ComplexMatrix) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    for col in 0..m.ncols() {
        for row in 0..m.nrows() {
            let z = m[(row, col)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFiniteEntry { row, col });
            }
        }
    }
    Ok(())
}

/// Largest entry of `|M - M^dagger|`.
pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// A normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: ComplexVector,
}

impl PureState {
    /// Wraps `amplitudes`, which must already have unit norm.
    pub fn new(amplitudes: ComplexVector) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidParameter("state must have dimension >= 1".into()));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("state has non-finite amplitudes".into()));
        }
        let norm_sqr = amplitudes.norm_squared();
        if (norm_sqr - 1.0).abs() > STATE_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(Self { amplitudes })
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(amplitudes: ComplexVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized {
                norm_sqr: norm * norm,
            });
        }
        Self::new(amplitudes.unscale(norm))
    }

    pub fn from_slice(amplitudes: &[C64]) -> Result<Self> {
        Self::normalized(ComplexVector::from_column_slice(amplitudes))
    }

    /// Computational basis vector `|k>`.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim, "basis index {k} out of range for dimension {dim}");
        let mut v = ComplexVector::zeros(dim);
        v[k] = ONE;
        Self { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    /// `<self|other>`, antilinear in `self`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        check_dims(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|self><self|` as a raw matrix.
    pub fn outer(&self) -> ComplexMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    pub fn projector(&self) -> DensityOperator {
        make_density(self.outer()).expect("outer product of a normalized state is a density operator")
    }

    /// Seeded Haar-like random state: normalized standard complex Gaussian vector.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        loop {
            let v = ComplexVector::from_fn(dim, |_, _| complex_gaussian(rng));
            if let Ok(s) = Self::normalized(v) {
                return s;
            }
        }
    }
}

/// Hermitian, positive semi-definite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

/// Validates `matrix` as a density operator.
///
/// Checks run in the order Hermiticity, trace, positivity; positivity uses a
/// full Hermitian eigendecomposition so the error can report the most negative
/// eigenvalue.
pub fn make_density(matrix: ComplexMatrix) -> Result<DensityOperator> {
    check_square_finite(&matrix)?;
    let deviation = hermitian_deviation(&matrix);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let trace = matrix.trace();
    if (trace.re - 1.0).abs() > STATE_TOL {
        return Err(Error::TraceNotOne { trace: trace.re });
    }
    let min_eigenvalue = SymmetricEigen::new(matrix.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eigenvalue < -STATE_TOL {
        return Err(Error::NotPositive { min_eigenvalue });
    }
    Ok(DensityOperator { matrix })
}

impl DensityOperator {
    /// Diagonal mixture `sum_i w_i |i><i|`.
    pub fn from_diagonal(weights: &[f64]) -> Result<Self> {
        make_density(ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
            weights.len(),
            weights.iter().map(|&w| C64::new(w, 0.0)),
        )))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// `Tr[rho^2]`.
    pub fn purity(&self) -> f64 {
        trace_of_product(&self.matrix, &self.matrix).re
    }

    /// Zeroes every off-diagonal element.
    pub fn diagonal_part(&self) -> DensityOperator {
        let diag = ComplexMatrix::from_diagonal(&self.matrix.diagonal());
        DensityOperator { matrix: diag }
    }
}

/// Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    matrix: ComplexMatrix,
}

pub fn make_observable(matrix: ComplexMatrix) -> Result<Observable> {
    check_square_finite(&matrix)?;
    let deviation = hermitian_deviation(&matrix);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(Observable { matrix })
}

impl Observable {
    pub fn identity(dim: usize) -> Self {
        Observable {
            matrix: ComplexMatrix::identity(dim, dim),
        }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Observable {
            matrix: ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
                values.len(),
                values.iter().map(|&v| C64::new(v, 0.0)),
            )),
        }
    }

    /// Polarization observable `|0><0| - |1><1|`.
    pub fn polarization() -> Self {
        Self::diagonal(&[1.0, -1.0])
    }

    /// `|a><a| - |b><b|` embedded in dimension `dim`.
    pub fn difference_of_projectors(dim: usize, a: usize, b: usize) -> Self {
        let mut values = vec![0.0; dim];
        values[a] = 1.0;
        values[b] = -1.0;
        Self::diagonal(&values)
    }

    pub fn projector(state: &PureState) -> Self {
        Observable {
            matrix: state.outer(),
        }
    }

    /// `H = (G + G^dagger)/2` with `G` a standard complex Gaussian matrix.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let g = ComplexMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
        let h = (&g + g.adjoint()).scale(0.5);
        Observable { matrix: h }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Real linear combination `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Observable, beta: f64) -> Result<Observable> {
        check_dims(self.dim(), other.dim())?;
        Ok(Observable {
            matrix: self.matrix.scale(alpha) + other.matrix.scale(beta),
        })
    }

    /// Eigenvalues (ascending) and the matching orthonormal eigenvectors as columns.
    pub fn eigen(&self) -> (Vec<f64>, ComplexMatrix) {
        let eig = SymmetricEigen::new(self.matrix.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = ComplexMatrix::from_fn(self.dim(), self.dim(), |r, c| {
            eig.eigenvectors[(r, order[c])]
        });
        (values, vectors)
    }

    /// Largest eigenvalue modulus.
    pub fn spectral_norm(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

/// Convex mixture of pure states with explicit weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDecomposition {
    weights: Vec<f64>,
    components: Vec<PureState>,
}

impl MixtureDecomposition {
    pub fn new(weights: Vec<f64>, components: Vec<PureState>) -> Result<Self> {
        if weights.len() != components.len() || weights.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("mixture weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {total}")));
        }
        let dim = components[0].dim();
        for c in &components[1..] {
            check_dims(dim, c.dim())?;
        }
        Ok(Self {
            weights,
            components,
        })
    }

    pub fn single(state: PureState) -> Self {
        Self {
            weights: vec![1.0],
            components: vec![state],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[PureState] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// `sum_i p_i |psi_i><psi_i|`.
    pub fn to_density(&self) -> DensityOperator {
        let dim = self.dim();
        let mut m = ComplexMatrix::zeros(dim, dim);
        for (w, c) in self.weights.iter().zip(&self.components) {
            m += c.outer().scale(*w);
        }
        // Summation can leave the trace a few ulps off; the weights already sum to one.
        make_density(m).expect("convex combination of projectors is a density operator")
    }
}

/// `Tr[A B]` without forming the product.
pub fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `Tr[rho O]`, real for valid inputs.
pub fn expectation(state: &DensityOperator, obs: &Observable) -> Result<f64> {
    check_dims(state.dim(), obs.dim())?;
    let value = trace_of_product(state.matrix(), obs.matrix());
    debug_assert!(
        value.im.abs() <= HERMITIAN_TOL * (1.0 + value.re.abs()),
        "Tr[rho O] has imaginary residue {}",
        value.im
    );
    Ok(value.re)
}

/// `Tr[rho |a><a|]`, computed as the expectation of the projector.
pub fn transition_probability(state: &DensityOperator, target: &PureState) -> Result<f64> {
    check_dims(state.dim(), target.dim())?;
    Ok(expectation(state, &Observable::projector(target))?.clamp(0.0, 1.0))
}

/// Complex number with independent `N(0, 1/2)` real and imaginary parts.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im).scale(std::f64::consts::FRAC_1_SQRT_2)
}

pub(crate) fn ensure_dims(expected: usize, found: usize) -> Result<()> {
    check_dims(expected, found)
}
