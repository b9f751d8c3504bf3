//! Transferred Lindblad generators and their quantum Markov semigroups.
//!
//! The generator is `L(ρ) = [A_X,[A_X,ρ]] + [A_Y,[A_Y,ρ]]` with
//! `A_V = V_m ⊗ I_n` skew-Hermitian, which makes `L` self-adjoint and
//! negative semidefinite for the trace inner product. Superoperators are
//! dense matrices in the column-stacking basis: the matrix unit `e_{jk}`
//! (0-based) sits at index `k * dim + j`.

use std::sync::OnceLock;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numkit::{
    c, eig_unchecked, identity, kron, min_eigenvalue, unvec_col, vec_col, CMatrix, HermitianMatrix,
    MatrixRecord, Spectrum, C64, ONE, ZERO,
};
use crate::su2repr::{Direction, IrrepGenerators};

/// Tolerances used when validating densities.
pub const PSD_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;

/// Positive semidefinite, trace-one matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HermitianMatrix", into = "HermitianMatrix")]
pub struct DensityMatrix(HermitianMatrix);

impl DensityMatrix {
    pub fn new(h: HermitianMatrix) -> Result<Self> {
        let tr = h.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return invalid(format!("density trace is {tr}, expected 1"));
        }
        let lo = min_eigenvalue(&h);
        if lo < -PSD_TOL {
            return invalid(format!("density is not PSD (min eigenvalue {lo:e})"));
        }
        Ok(DensityMatrix(h))
    }

    /// Validates after dividing by the trace.
    pub fn normalized(h: HermitianMatrix) -> Result<Self> {
        let tr = h.trace();
        if !(tr > 0.0) {
            return invalid(format!("cannot normalize a matrix with trace {tr}"));
        }
        DensityMatrix::new(h.scale(1.0 / tr))
    }

    pub fn from_matrix(a: CMatrix) -> Result<Self> {
        DensityMatrix::new(HermitianMatrix::new(a)?)
    }

    /// Wraps a matrix produced by a trace-preserving positive map.
    pub(crate) fn trusted(a: CMatrix) -> Self {
        DensityMatrix(HermitianMatrix::symmetrize(a))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix(HermitianMatrix::identity(dim).scale(1.0 / dim as f64))
    }

    pub fn diagonal(p: &[f64]) -> Result<Self> {
        DensityMatrix::new(HermitianMatrix::from_real_diagonal(p))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        self.0.matrix()
    }

    pub fn hermitian(&self) -> &HermitianMatrix {
        &self.0
    }
}

impl TryFrom<HermitianMatrix> for DensityMatrix {
    type Error = Error;
    fn try_from(h: HermitianMatrix) -> Result<Self> {
        DensityMatrix::new(h)
    }
}

impl From<DensityMatrix> for HermitianMatrix {
    fn from(d: DensityMatrix) -> HermitianMatrix {
        d.0
    }
}

/// Representation data carried by generators built from an irrep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Amplified {
    pub rep_dim: usize,
    pub amplification: usize,
}

/// Linear map on `dim × dim` matrices stored as a `dim² × dim²` matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SuperoperatorRecord", into = "SuperoperatorRecord")]
pub struct Superoperator {
    dim: usize,
    structure: Option<Amplified>,
    matrix: CMatrix,
    spectrum: OnceLock<Spectrum>,
}

/// JSON form of a [`Superoperator`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuperoperatorRecord {
    pub dim: usize,
    pub basis: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<Amplified>,
    pub matrix: MatrixRecord,
}

pub const BASIS_TAG: &str = "column-stacking";

impl From<Superoperator> for SuperoperatorRecord {
    fn from(s: Superoperator) -> Self {
        SuperoperatorRecord {
            dim: s.dim,
            basis: BASIS_TAG.to_string(),
            structure: s.structure,
            matrix: MatrixRecord::from_matrix(&s.matrix),
        }
    }
}

impl TryFrom<SuperoperatorRecord> for Superoperator {
    type Error = Error;
    fn try_from(r: SuperoperatorRecord) -> Result<Self> {
        if r.basis != BASIS_TAG {
            return invalid(format!("unsupported superoperator basis {:?}", r.basis));
        }
        let m = r.matrix.to_matrix()?;
        if m.nrows() != r.dim * r.dim || m.ncols() != r.dim * r.dim {
            return invalid("superoperator matrix does not match dim²");
        }
        Ok(Superoperator::from_parts(r.dim, r.structure, m))
    }
}

impl Superoperator {
    fn from_parts(dim: usize, structure: Option<Amplified>, matrix: CMatrix) -> Self {
        Superoperator { dim, structure, matrix, spectrum: OnceLock::new() }
    }

    /// Builds the matrix of an arbitrary linear map by applying it to matrix units.
    pub fn from_map(dim: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        let d2 = dim * dim;
        let mut matrix = CMatrix::zeros(d2, d2);
        let mut unit = CMatrix::zeros(dim, dim);
        for k in 0..dim {
            for j in 0..dim {
                unit[(j, k)] = ONE;
                let image = f(&unit);
                matrix.column_mut(k * dim + j).copy_from(&vec_col(&image));
                unit[(j, k)] = ZERO;
            }
        }
        Superoperator::from_parts(dim, None, matrix)
    }

    pub fn identity(dim: usize) -> Self {
        Superoperator::from_parts(dim, None, identity(dim * dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn structure(&self) -> Option<Amplified> {
        self.structure
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        unvec_col(&(&self.matrix * vec_col(rho)), self.dim)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Superoperator) -> Superoperator {
        Superoperator::from_parts(self.dim, self.structure, &self.matrix * &other.matrix)
    }

    /// Eigendecomposition of the (Hermitian) superoperator matrix, cached.
    pub fn spectrum(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| {
            eig_unchecked(&HermitianMatrix::symmetrize(self.matrix.clone()).into_matrix())
        })
    }

    /// Largest deviation of the matrix from its adjoint, i.e. of
    /// `⟨a, L b⟩ = ⟨L a, b⟩` over matrix units.
    pub fn asymmetry(&self) -> f64 {
        crate::numkit::max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    /// Applies `exp(t L)` through the cached spectrum.
    fn exp_apply(&self, t: f64, rho: &CMatrix) -> CMatrix {
        let spec = self.spectrum();
        let u = &spec.eigenvectors;
        let mut coeffs = u.adjoint() * vec_col(rho);
        for (z, &lam) in coeffs.iter_mut().zip(&spec.eigenvalues) {
            *z *= (t * lam).exp();
        }
        unvec_col(&(u * coeffs), self.dim)
    }

    /// `exp(t L)` as a superoperator.
    pub fn exp(&self, t: f64) -> Superoperator {
        let spec = self.spectrum();
        let m = spec.map_real(|lam| (t * lam).exp());
        Superoperator::from_parts(self.dim, self.structure, m)
    }

    fn kernel_tolerance(&self) -> f64 {
        let spec = self.spectrum();
        1e-9 * spec.min().abs().max(spec.max().abs()).max(1.0)
    }
}

/// `ρ ↦ [A_X,[A_X,ρ]] + [A_Y,[A_Y,ρ]]` on `(m n) × (m n)` matrices with
/// `A_V = V_m ⊗ I_n`; `n = 1` is the bare generator.
pub fn lindblad_generator(gen: &IrrepGenerators, amplification: usize) -> Result<Superoperator> {
    if amplification == 0 {
        return invalid("amplification must be at least 1");
    }
    let ops = amplified_generators(gen, amplification);
    let dim = gen.dim() * amplification;
    let mut s = Superoperator::from_map(dim, |rho| double_commutator_sum(&ops, rho));
    s.structure = Some(Amplified { rep_dim: gen.dim(), amplification });
    Ok(s)
}

/// `(X_m ⊗ I_n, Y_m ⊗ I_n)`.
pub fn amplified_generators(gen: &IrrepGenerators, amplification: usize) -> [CMatrix; 2] {
    let id = identity(amplification);
    Direction::HORIZONTAL.map(|d| kron(gen.get(d), &id))
}

fn double_commutator_sum(ops: &[CMatrix], rho: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
    for a in ops {
        let inner = a * rho - rho * a;
        out += a * &inner - &inner * a;
    }
    out
}

/// Applies the generator directly through commutators, without the superoperator.
pub fn apply_lindbladian(gen: &IrrepGenerators, amplification: usize, rho: &CMatrix) -> CMatrix {
    double_commutator_sum(&amplified_generators(gen, amplification), rho)
}

pub fn evolve(l: &Superoperator, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if !(t >= 0.0) {
        return invalid(format!("evolution time must be nonnegative, got {t}"));
    }
    if rho.dim() != l.dim() {
        return invalid(format!("state dim {} does not match generator dim {}", rho.dim(), l.dim()));
    }
    if t == 0.0 {
        return Ok(rho.clone());
    }
    Ok(DensityMatrix::trusted(l.exp_apply(t, rho.matrix())))
}

/// `exp(t L)` applied to an arbitrary matrix (not necessarily a state).
pub fn evolve_matrix(l: &Superoperator, a: &CMatrix, t: f64) -> CMatrix {
    l.exp_apply(t, a)
}

/// Spectral projection onto `ker L`, the semigroup limit `E`.
pub fn fixed_point_projection(l: &Superoperator) -> Superoperator {
    let spec = l.spectrum();
    let tol = l.kernel_tolerance();
    let m = spec.map_real(|lam| if lam.abs() <= tol { 1.0 } else { 0.0 });
    Superoperator::from_parts(l.dim, l.structure, m)
}

/// Closed form of `E` for generators built by [`lindblad_generator`] with
/// `m ≥ 2`: `ρ ↦ (I_m/m) ⊗ tr₁(ρ)`.
pub fn conditional_expectation(rep_dim: usize, amplification: usize, rho: &CMatrix) -> CMatrix {
    let reduced = crate::numkit::partial_trace_first(rho, rep_dim, amplification);
    kron(&(identity(rep_dim) * c(1.0 / rep_dim as f64)), &reduced)
}

/// Complete-positivity and trace-preservation diagnostics of `exp(t L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpReport {
    pub choi_min_eig: f64,
    pub trace_defect: f64,
}

/// Choi matrix `Σ_{jk} e_{jk} ⊗ Φ(e_{jk})`.
pub fn choi_matrix(channel: &Superoperator) -> CMatrix {
    let d = channel.dim;
    let mut choi = CMatrix::zeros(d * d, d * d);
    for j in 0..d {
        for k in 0..d {
            let col = DVector::from(channel.matrix.column(k * d + j));
            let image = unvec_col(&col, d);
            choi.view_mut((j * d, k * d), (d, d)).copy_from(&image);
        }
    }
    choi
}

pub fn verify_cp(l: &Superoperator, t: f64) -> Result<CpReport> {
    if !(t > 0.0) {
        return invalid(format!("CP check needs t > 0, got {t}"));
    }
    let channel = l.exp(t);
    let choi = choi_matrix(&channel);
    let choi_min_eig = crate::numkit::min_eigenvalue_of(&choi);
    let d = l.dim;
    let mut trace_defect: f64 = 0.0;
    for j in 0..d {
        for k in 0..d {
            let col = DVector::from(channel.matrix.column(k * d + j));
            let tr: C64 = (0..d).map(|i| col[i * d + i]).sum();
            let want = if j == k { 1.0 } else { 0.0 };
            trace_defect = trace_defect.max((tr - c(want)).norm());
        }
    }
    Ok(CpReport { choi_min_eig, trace_defect })
}

/// Smallest nonzero eigenvalue of `-L`.
///
/// The kernel of an irreducible transferred generator is `I_m ⊗ M_n`, of
/// dimension `n²`; any other kernel size, or a generator with no nonzero
/// eigenvalue at all, is reported as degenerate.
pub fn spectral_gap(l: &Superoperator) -> Result<f64> {
    let spec = l.spectrum();
    let tol = l.kernel_tolerance();
    let kernel = spec.eigenvalues.iter().filter(|x| x.abs() <= tol).count();
    if let Some(s) = l.structure {
        let expected = s.amplification * s.amplification;
        if kernel != expected {
            return Err(Error::DegenerateGenerator(format!(
                "kernel dimension {kernel}, expected {expected}"
            )));
        }
    }
    spec.eigenvalues
        .iter()
        .filter(|x| x.abs() > tol)
        .map(|x| -x)
        .filter(|x| *x > 0.0)
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::DegenerateGenerator("generator has no nonzero eigenvalue".into()))
}
