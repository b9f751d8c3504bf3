//! Dense spectral toolkit for Hermitian and skew-Hermitian matrices.
//!
//! Everything else in the crate sits on top of [`eig_hermitian`]: matrix
//! functions, positivity tests, and the divided-difference kernels in
//! [`crate::entfun`] all go through a sorted, unitary eigendecomposition.
//! Storage is dense; the largest objects handled are 400×400 superoperators.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Eigenvalues at or below this are zero for entropy and singular for logs
/// and inverses.
pub const EIG_FLOOR: f64 = 1e-12;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// A Hermitian matrix, symmetrized as `(a + a†)/2` on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRecord", into = "MatrixRecord")]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(a: CMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return invalid(format!("matrix is not square: {}x{}", a.nrows(), a.ncols()));
        }
        if a.nrows() == 0 {
            return invalid("matrix has dimension 0");
        }
        if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("matrix has non-finite entries");
        }
        Ok(Self::symmetrize(a))
    }

    /// Symmetrizes without validation. Callers guarantee a square finite input.
    pub(crate) fn symmetrize(a: CMatrix) -> Self {
        let adj = a.adjoint();
        HermitianMatrix((a + adj) * c(0.5))
    }

    pub fn identity(dim: usize) -> Self {
        HermitianMatrix(CMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix(CMatrix::zeros(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        HermitianMatrix(CMatrix::from_fn(n, n, |i, j| if i == j { c(diag[i]) } else { ZERO }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// Real diagonal, useful in tests against closed forms.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)].re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scale(&self, s: f64) -> Self {
        HermitianMatrix(&self.0 * c(s))
    }

    pub fn add(&self, other: &Self) -> Self {
        HermitianMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        HermitianMatrix(&self.0 - &other.0)
    }
}

impl TryFrom<MatrixRecord> for HermitianMatrix {
    type Error = Error;
    fn try_from(rec: MatrixRecord) -> Result<Self> {
        HermitianMatrix::new(rec.to_matrix()?)
    }
}

impl From<HermitianMatrix> for MatrixRecord {
    fn from(h: HermitianMatrix) -> MatrixRecord {
        MatrixRecord::from_matrix(&h.0)
    }
}

/// Serialized form of a complex matrix: row-major `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixRecord {
    pub fn from_matrix(a: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(a.len());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let z = a[(i, j)];
                data.push([z.re, z.im]);
            }
        }
        MatrixRecord { rows: a.nrows(), cols: a.ncols(), data }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.data.len() != self.rows * self.cols {
            return invalid(format!(
                "matrix record holds {} entries, expected {}x{}",
                self.data.len(),
                self.rows,
                self.cols
            ));
        }
        Ok(CMatrix::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.data[i * self.cols + j];
            C64::new(re, im)
        }))
    }
}

/// Eigenvalues in ascending order with the matching unitary eigenvector matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl Spectrum {
    /// `U f(Λ) U†` for a real scalar function.
    pub fn map_real(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        self.map_complex(|x| c(f(x)))
    }

    /// `U f(Λ) U†` for a complex scalar function.
    pub fn map_complex(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let fj = f(lam);
            for z in scaled.column_mut(j).iter_mut() {
                *z *= fj;
            }
        }
        scaled * u.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map_real(|x| x)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    /// Rewrites `f` in the eigenbasis: `U† f U`.
    pub fn to_eigenbasis(&self, f: &CMatrix) -> CMatrix {
        self.eigenvectors.adjoint() * f * &self.eigenvectors
    }

    /// Inverse of [`Spectrum::to_eigenbasis`].
    pub fn from_eigenbasis(&self, f: &CMatrix) -> CMatrix {
        &self.eigenvectors * f * self.eigenvectors.adjoint()
    }
}

pub fn eig_hermitian(a: &HermitianMatrix) -> Result<Spectrum> {
    if a.0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    Ok(eig_unchecked(&a.0))
}

/// Eigendecomposition of a matrix already known to be Hermitian and finite.
pub(crate) fn eig_unchecked(a: &CMatrix) -> Spectrum {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    Spectrum { eigenvalues, eigenvectors }
}

/// Scalar functions available to [`matrix_function`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MatrixFunction {
    Exp,
    Log,
    Power(f64),
}

impl MatrixFunction {
    fn needs_positive(self) -> bool {
        match self {
            MatrixFunction::Exp => false,
            MatrixFunction::Log => true,
            MatrixFunction::Power(s) => !(s >= 0.0 && s.fract() == 0.0),
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            MatrixFunction::Exp => x.exp(),
            MatrixFunction::Log => x.ln(),
            MatrixFunction::Power(s) if s.fract() == 0.0 && s.abs() < i32::MAX as f64 => {
                x.powi(s as i32)
            }
            MatrixFunction::Power(s) => x.powf(s),
        }
    }
}

pub fn matrix_function(a: &HermitianMatrix, f: MatrixFunction) -> Result<HermitianMatrix> {
    let spec = eig_hermitian(a)?;
    spectral_function(&spec, f)
}

/// [`matrix_function`] on a precomputed spectrum.
pub fn spectral_function(spec: &Spectrum, f: MatrixFunction) -> Result<HermitianMatrix> {
    if f.needs_positive() && spec.min() <= EIG_FLOOR {
        return Err(Error::SingularMatrix { eigenvalue: spec.min(), floor: EIG_FLOOR });
    }
    Ok(HermitianMatrix::symmetrize(spec.map_real(|x| f.apply(x))))
}

pub fn min_eigenvalue(a: &HermitianMatrix) -> f64 {
    eig_unchecked(&a.0).min()
}

/// Smallest eigenvalue of the Hermitian part of an arbitrary square matrix.
pub fn min_eigenvalue_of(a: &CMatrix) -> f64 {
    eig_unchecked(&HermitianMatrix::symmetrize(a.clone()).0).min()
}

/// `exp(a)` for skew-Hermitian `a`, computed as `exp(i h)` with `h = -i a`.
pub fn expm_skew(a: &CMatrix) -> CMatrix {
    let h = HermitianMatrix::symmetrize(a * (-I));
    let spec = eig_unchecked(&h.0);
    spec.map_complex(|x| C64::from_polar(1.0, x))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Trace inner product `tr(a† b)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Trace norm of the Hermitian part of `a`.
pub fn trace_norm(a: &CMatrix) -> f64 {
    let spec = eig_unchecked(&HermitianMatrix::symmetrize(a.clone()).0);
    spec.eigenvalues.iter().map(|x| x.abs()).sum()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Column-stacking vectorization: entry `(j, k)` goes to index `k * dim + j`.
pub fn vec_col(a: &CMatrix) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_column_slice(a.as_slice())
}

pub fn unvec_col(v: &nalgebra::DVector<C64>, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// Partial trace over the first factor of `C^m ⊗ C^n`.
pub fn partial_trace_first(a: &CMatrix, m: usize, n: usize) -> CMatrix {
    assert_eq!(a.nrows(), m * n);
    CMatrix::from_fn(n, n, |p, q| (0..m).map(|i| a[(i * n + p, i * n + q)]).sum())
}

/// Partial trace over the second factor of `C^m ⊗ C^n`.
pub fn partial_trace_second(a: &CMatrix, m: usize, n: usize) -> CMatrix {
    assert_eq!(a.nrows(), m * n);
    CMatrix::from_fn(m, m, |i, j| (0..n).map(|p| a[(i * n + p, j * n + p)]).sum())
}

/// Random matrix generators used by tests, diagnostics and the optimizer.
pub mod random {
    use super::*;

    pub fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }

    pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| gaussian_complex(rng))
    }

    /// GUE-like Hermitian matrix.
    pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> HermitianMatrix {
        HermitianMatrix::symmetrize(ginibre(rng, dim, dim))
    }

    /// Random density matrix `(1 - w) G G†/tr + w I/d`; `w > 0` keeps it
    /// strictly positive.
    pub fn density<R: Rng + ?Sized>(rng: &mut R, dim: usize, mix: f64) -> HermitianMatrix {
        let g = ginibre(rng, dim, dim);
        let gg = &g * g.adjoint();
        let tr = gg.trace().re;
        let rho = gg * c((1.0 - mix) / tr) + identity(dim) * c(mix / dim as f64);
        HermitianMatrix::symmetrize(rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_spectrum() {
        let s = eig_hermitian(&HermitianMatrix::identity(3)).unwrap();
        assert_eq!(s.eigenvalues.len(), 3);
        for x in s.eigenvalues {
            assert!((x - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_spectrum_is_sorted_and_permuted() {
        let s = eig_hermitian(&HermitianMatrix::from_real_diagonal(&[2.0, 1.0])).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((s.eigenvalues[1] - 2.0).abs() < 1e-14);
        // eigenvector for 1 is e_2, for 2 is e_1 (up to phase)
        assert!((s.eigenvectors[(1, 0)].norm() - 1.0).abs() < 1e-12);
        assert!((s.eigenvectors[(0, 1)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random::hermitian(&mut rng, 6);
        let s = eig_hermitian(&a).unwrap();
        let res = frobenius(&(s.reconstruct() - a.matrix()));
        assert!(res < 1e-10 * frobenius(a.matrix()));
        let u = &s.eigenvectors;
        assert!(frobenius(&(u.adjoint() * u - identity(6))) < 1e-10);
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn non_finite_rejected() {
        let mut a = CMatrix::identity(2, 2);
        a[(0, 1)] = c(f64::NAN);
        assert!(matches!(HermitianMatrix::new(a), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn construction_symmetrizes() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(0.0), c(3.0)]);
        let h = HermitianMatrix::new(a).unwrap();
        assert_eq!(h.matrix()[(0, 1)], c(1.0));
        assert_eq!(h.matrix()[(1, 0)], c(1.0));
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = matrix_function(&HermitianMatrix::zeros(3), MatrixFunction::Exp).unwrap();
        assert!(frobenius(&(e.matrix() - identity(3))) < 1e-15);
    }

    #[test]
    fn log_of_exponential_diagonal() {
        let e = std::f64::consts::E;
        let l = matrix_function(&HermitianMatrix::from_real_diagonal(&[e, e * e]), MatrixFunction::Log)
            .unwrap();
        let d = l.diagonal();
        assert!((d[0] - 1.0).abs() < 1e-14 && (d[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn powers_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random::density(&mut rng, 5, 0.05);
        let a = matrix_function(&rho, MatrixFunction::Power(0.3)).unwrap();
        let b = matrix_function(&rho, MatrixFunction::Power(0.7)).unwrap();
        assert!(max_abs(&(a.matrix() * b.matrix() - rho.matrix())) < 1e-9);
    }

    #[test]
    fn log_of_singular_fails() {
        let r = matrix_function(&HermitianMatrix::from_real_diagonal(&[1.0, 0.0]), MatrixFunction::Log);
        assert!(matches!(r, Err(Error::SingularMatrix { .. })));
        // integer powers of singular matrices are fine
        assert!(matrix_function(&HermitianMatrix::from_real_diagonal(&[1.0, 0.0]), MatrixFunction::Power(2.0))
            .is_ok());
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert!((min_eigenvalue(&HermitianMatrix::identity(4)) - 1.0).abs() < 1e-14);
        assert!((min_eigenvalue(&HermitianMatrix::from_real_diagonal(&[-1.0, 5.0])) + 1.0).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random::ginibre(&mut rng, 5, 5);
        assert!(min_eigenvalue_of(&(a.adjoint() * &a)) >= -1e-12);
    }

    #[test]
    fn skew_exponential_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random::hermitian(&mut rng, 4);
        let u = expm_skew(&(h.matrix() * I));
        assert!(frobenius(&(u.adjoint() * &u - identity(4))) < 1e-12);
    }

    #[test]
    fn partial_traces_of_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random::density(&mut rng, 2, 0.1);
        let b = random::density(&mut rng, 3, 0.1);
        let ab = kron(a.matrix(), b.matrix());
        assert!(max_abs(&(partial_trace_first(&ab, 2, 3) - b.matrix())) < 1e-14);
        assert!(max_abs(&(partial_trace_second(&ab, 2, 3) - a.matrix())) < 1e-14);
    }

    fn arb_hermitian(max_dim: usize) -> impl Strategy<Value = HermitianMatrix> {
        (1..=max_dim, any::<u64>()).prop_map(|(d, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random::hermitian(&mut rng, d)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn eig_reconstructs(a in arb_hermitian(8)) {
            let s = eig_hermitian(&a).unwrap();
            let scale = s.eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
            prop_assert!(max_abs(&(s.reconstruct() - a.matrix())) <= 1e-10 * scale);
        }

        #[test]
        fn exp_then_log_round_trips(a in arb_hermitian(6)) {
            // spectrum of a GUE sample of size ≤ 6 stays well inside [-20, 20]
            let e = matrix_function(&a, MatrixFunction::Exp).unwrap();
            let l = matrix_function(&e, MatrixFunction::Log).unwrap();
            prop_assert!(max_abs(&(l.matrix() - a.matrix())) < 1e-8);
        }

        #[test]
        fn min_eigenvalue_shifts(a in arb_hermitian(6), t in -10.0f64..10.0) {
            let shifted = HermitianMatrix::symmetrize(a.matrix() + identity(a.dim()) * c(t));
            prop_assert!((min_eigenvalue(&shifted) - min_eigenvalue(&a) - t).abs() < 1e-10);
        }
    }
}
