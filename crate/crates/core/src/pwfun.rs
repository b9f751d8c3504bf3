//! Band-limited functions on SU(2) in Peter–Weyl coefficients.
//!
//! A function with values in `M_n` is stored as blocks `A_m`, `m = 1..=m_max`,
//! each an `(m n) × (m n)` matrix indexed `(a, α)` with `a` in the
//! representation slot and `α` in the value slot (`kron` ordering
//! `M_m ⊗ M_n`). It evaluates as
//!
//! `f(g) = Σ_m tr₁[A_m (π_m(g) ⊗ I_n)]`,
//!
//! i.e. `f(g)_{αβ} = Σ_{m,a,c} A_m[(a,α),(c,β)] π_m(g)_{ca}`. With this
//! pairing the Haar inner product is `⟨f, h⟩ = Σ_m (1/m) tr(A_m† B_m)` and
//! the mean is `A_1`.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numkit::{c, hs_inner, identity, kron, random, CMatrix, MatrixRecord, C64, ZERO};
use crate::su2repr::{build_generators, horizontal_eigenvalues, pi_m, Direction, GroupElement, IrrepGenerators};

/// Generators for every band `1..=m_max`, index `m - 1`.
#[derive(Debug, Clone)]
pub struct GeneratorFamily(Vec<IrrepGenerators>);

impl GeneratorFamily {
    pub fn new(m_max: usize) -> Result<Self> {
        if m_max == 0 {
            return invalid("band must be at least 1");
        }
        Ok(GeneratorFamily((1..=m_max).map(|m| build_generators(m).expect("m ≥ 1")).collect()))
    }

    pub fn m_max(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, m: usize) -> &IrrepGenerators {
        &self.0[m - 1]
    }
}

/// Number of scalar coefficients in bands `1..=m_max`: `Σ m²`.
pub fn band_size(m_max: usize) -> usize {
    m_max * (m_max + 1) * (2 * m_max + 1) / 6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BandLimitedRecord", into = "BandLimitedRecord")]
pub struct BandLimitedFunction {
    m_max: usize,
    value_dim: usize,
    coeffs: Vec<CMatrix>,
}

/// JSON form of a [`BandLimitedFunction`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandLimitedRecord {
    pub m_max: usize,
    pub value_dim: usize,
    pub coeffs: Vec<MatrixRecord>,
}

impl From<BandLimitedFunction> for BandLimitedRecord {
    fn from(f: BandLimitedFunction) -> Self {
        BandLimitedRecord {
            m_max: f.m_max,
            value_dim: f.value_dim,
            coeffs: f.coeffs.iter().map(MatrixRecord::from_matrix).collect(),
        }
    }
}

impl TryFrom<BandLimitedRecord> for BandLimitedFunction {
    type Error = Error;
    fn try_from(r: BandLimitedRecord) -> Result<Self> {
        let coeffs = r.coeffs.iter().map(MatrixRecord::to_matrix).collect::<Result<Vec<_>>>()?;
        BandLimitedFunction::new(r.value_dim, coeffs)
    }
}

impl BandLimitedFunction {
    /// `coeffs[m-1]` must be `(m n) × (m n)`.
    pub fn new(value_dim: usize, coeffs: Vec<CMatrix>) -> Result<Self> {
        if value_dim == 0 || coeffs.is_empty() {
            return invalid("band-limited function needs value_dim ≥ 1 and at least one band");
        }
        for (i, a) in coeffs.iter().enumerate() {
            let d = (i + 1) * value_dim;
            if a.shape() != (d, d) {
                return invalid(format!("band {} block is {:?}, expected {d}×{d}", i + 1, a.shape()));
            }
            if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return invalid("non-finite coefficient");
            }
        }
        Ok(BandLimitedFunction { m_max: coeffs.len(), value_dim, coeffs })
    }

    pub fn zeros(m_max: usize, value_dim: usize) -> Self {
        let coeffs = (1..=m_max).map(|m| CMatrix::zeros(m * value_dim, m * value_dim)).collect();
        BandLimitedFunction { m_max, value_dim, coeffs }
    }

    pub fn constant(value: &CMatrix, m_max: usize) -> Self {
        let mut f = BandLimitedFunction::zeros(m_max, value.nrows());
        f.coeffs[0] = value.clone();
        f
    }

    /// The scalar function `g ↦ π_m(g)[row, col]`.
    pub fn matrix_entry(m: usize, row: usize, col: usize, m_max: usize) -> Result<Self> {
        if m > m_max || row >= m || col >= m {
            return invalid("matrix entry outside the band");
        }
        let mut f = BandLimitedFunction::zeros(m_max, 1);
        f.coeffs[m - 1][(col, row)] = c(1.0);
        Ok(f)
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    pub fn block(&self, m: usize) -> &CMatrix {
        &self.coeffs[m - 1]
    }

    fn map_blocks(&self, f: impl Fn(usize, &CMatrix) -> CMatrix) -> Self {
        let coeffs = self.coeffs.iter().enumerate().map(|(i, a)| f(i + 1, a)).collect();
        BandLimitedFunction { m_max: self.m_max, value_dim: self.value_dim, coeffs }
    }

    /// Pads with zero blocks up to `m_max` (no-op if already that large).
    pub fn with_band(&self, m_max: usize) -> Self {
        let mut out = self.clone();
        for m in self.m_max + 1..=m_max {
            out.coeffs.push(CMatrix::zeros(m * self.value_dim, m * self.value_dim));
        }
        out.m_max = out.coeffs.len();
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let band = self.m_max.max(other.m_max);
        let (a, b) = (self.with_band(band), other.with_band(band));
        a.map_blocks(|m, x| x + &b.coeffs[m - 1])
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map_blocks(|_, x| x * s)
    }

    /// `Σ_m (1/m) tr(A_m† B_m)`, the Haar integral of `tr(f(g)† h(g))`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .enumerate()
            .map(|(i, (a, b))| hs_inner(a, b) / (i + 1) as f64)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    /// The coefficient of `g ↦ f(g)†`.
    pub fn adjoint(&self, fam: &GeneratorFamily) -> Self {
        let n = self.value_dim;
        self.map_blocks(|m, a| {
            let j = kron(&fam.get(m).conjugator(), &identity(n));
            let j_inv = j.adjoint();
            &j_inv * value_partial_transpose(&a.map(|z| z.conj()), m, n) * &j
        })
    }

    /// `(f + f†)/2`; for scalars this is the real part.
    pub fn hermitian_part(&self, fam: &GeneratorFamily) -> Self {
        self.add(&self.adjoint(fam)).scale(c(0.5))
    }

    pub fn evaluate(&self, fam: &GeneratorFamily, g: &GroupElement) -> CMatrix {
        let n = self.value_dim;
        let mut out = CMatrix::zeros(n, n);
        for (i, a) in self.coeffs.iter().enumerate() {
            let m = i + 1;
            let p = pi_m(fam.get(m), g);
            for ai in 0..m {
                for ci in 0..m {
                    let w = p[(ci, ai)];
                    for al in 0..n {
                        for be in 0..n {
                            out[(al, be)] += a[(ai * n + al, ci * n + be)] * w;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn evaluate_scalar(&self, fam: &GeneratorFamily, g: &GroupElement) -> C64 {
        self.evaluate(fam, g)[(0, 0)]
    }

    /// Left-invariant derivative `d/dt f(g exp(tV))|₀`: `A_m ↦ (V_m ⊗ I_n) A_m`.
    pub fn vector_field(&self, fam: &GeneratorFamily, dir: Direction) -> Self {
        let id = identity(self.value_dim);
        self.map_blocks(|m, a| kron(fam.get(m).get(dir), &id) * a)
    }

    /// `(X² + Y²) f`.
    pub fn sub_laplacian(&self) -> Self {
        let n = self.value_dim;
        self.map_blocks(|m, a| scale_rows(a, &horizontal_eigenvalues(m), n, |h| h))
    }

    /// `P_t = exp(t (X² + Y²))`, diagonal on coefficients.
    pub fn heat_semigroup(&self, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return invalid(format!("heat semigroup time must be nonnegative, got {t}"));
        }
        let n = self.value_dim;
        Ok(self.map_blocks(|m, a| scale_rows(a, &horizontal_eigenvalues(m), n, |h| (t * h).exp())))
    }

    /// Haar mean `∫ f dμ`.
    pub fn mean(&self) -> CMatrix {
        self.coeffs[0].clone()
    }

    /// `⟨Xf, Xf⟩ + ⟨Yf, Yf⟩`.
    pub fn dirichlet_form(&self, fam: &GeneratorFamily) -> f64 {
        Direction::HORIZONTAL
            .iter()
            .map(|&d| {
                let v = self.vector_field(fam, d);
                v.inner(&v).re
            })
            .sum()
    }

    /// Coefficients as a `Σm² × n²` matrix: row `(m, a, c)`, column `α n + β`.
    pub fn to_design_coeffs(&self) -> CMatrix {
        let n = self.value_dim;
        let mut out = CMatrix::zeros(band_size(self.m_max), n * n);
        let mut row = 0;
        for (i, a) in self.coeffs.iter().enumerate() {
            let m = i + 1;
            for ai in 0..m {
                for ci in 0..m {
                    for al in 0..n {
                        for be in 0..n {
                            out[(row, al * n + be)] = a[(ai * n + al, ci * n + be)];
                        }
                    }
                    row += 1;
                }
            }
        }
        out
    }

    pub fn from_design_coeffs(x: &CMatrix, m_max: usize, value_dim: usize) -> Self {
        let n = value_dim;
        let mut f = BandLimitedFunction::zeros(m_max, n);
        let mut row = 0;
        for m in 1..=m_max {
            let a = &mut f.coeffs[m - 1];
            for ai in 0..m {
                for ci in 0..m {
                    for al in 0..n {
                        for be in 0..n {
                            a[(ai * n + al, ci * n + be)] = x[(row, al * n + be)];
                        }
                    }
                    row += 1;
                }
            }
        }
        f
    }

    /// Scalar function with Gaussian coefficients, real-valued and of unit norm.
    pub fn random_real<R: Rng + ?Sized>(rng: &mut R, fam: &GeneratorFamily, m_max: usize) -> Self {
        BandLimitedFunction::random_hermitian(rng, fam, m_max, 1)
    }

    /// `M_n`-valued function with Hermitian values, unit norm.
    pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, fam: &GeneratorFamily, m_max: usize, n: usize) -> Self {
        let coeffs = (1..=m_max).map(|m| random::ginibre(rng, m * n, m * n)).collect();
        let f = BandLimitedFunction { m_max, value_dim: n, coeffs }.hermitian_part(fam);
        let norm = f.norm();
        f.scale(c(1.0 / norm))
    }
}

fn scale_rows(a: &CMatrix, weights: &[f64], n: usize, w: impl Fn(f64) -> f64) -> CMatrix {
    let mut out = a.clone();
    for (j, &h) in weights.iter().enumerate() {
        let s = w(h);
        for al in 0..n {
            out.row_mut(j * n + al).scale_mut(s);
        }
    }
    out
}

/// `exp(t h_a)` for every design row `(m, a, c)`, `h` the horizontal symbol.
pub fn design_heat_weights(m_max: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(band_size(m_max));
    for m in 1..=m_max {
        for h in horizontal_eigenvalues(m) {
            out.extend(std::iter::repeat((t * h).exp()).take(m));
        }
    }
    out
}

/// Design row of the identity element: `π_m(e)[c, a] = δ_{ac}`.
pub fn identity_design_row(m_max: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(band_size(m_max));
    for m in 1..=m_max {
        for a in 0..m {
            for ci in 0..m {
                out.push(if a == ci { c(1.0) } else { ZERO });
            }
        }
    }
    out
}

/// Transposes the value slot of an `(m n) × (m n)` matrix.
fn value_partial_transpose(a: &CMatrix, m: usize, n: usize) -> CMatrix {
    let mut out = CMatrix::zeros(m * n, m * n);
    for ai in 0..m {
        for ci in 0..m {
            for al in 0..n {
                for be in 0..n {
                    out[(ai * n + al, ci * n + be)] = a[(ai * n + be, ci * n + al)];
                }
            }
        }
    }
    out
}

/// The smallest nonzero eigenvalue of `-(X² + Y²)` on bands `≤ m_max`.
pub fn classical_spectral_gap(m_max: usize) -> Result<f64> {
    (1..=m_max)
        .flat_map(horizontal_eigenvalues)
        .map(|h| -h)
        .filter(|&h| h > 1e-12)
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::DegenerateGenerator("band 1 has only constants".into()))
}

/// Points with their values, one `n × n` matrix per point.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub points: Vec<GroupElement>,
    pub values: Vec<CMatrix>,
}

impl SampledField {
    pub fn new(points: Vec<GroupElement>, values: Vec<CMatrix>) -> Result<Self> {
        if points.len() != values.len() {
            return invalid(format!("{} points but {} values", points.len(), values.len()));
        }
        if let Some(v) = values.first() {
            if values.iter().any(|w| w.shape() != v.shape() || w.nrows() != w.ncols()) {
                return invalid("field values must be square and of equal size");
            }
        }
        Ok(SampledField { points, values })
    }

    pub fn value_dim(&self) -> usize {
        self.values.first().map_or(1, |v| v.nrows())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Values as an `N × n²` matrix, row `k` = point `k`, column `α n + β`.
    pub fn value_matrix(&self) -> CMatrix {
        let n = self.value_dim();
        CMatrix::from_fn(self.len(), n * n, |k, col| self.values[k][(col / n, col % n)])
    }
}

/// A point set with every `π_m(g)`, `m ≤ m_max`, flattened into the design
/// matrix `Φ[k, (m,a,c)] = π_m(g_k)[c, a]`.
#[derive(Debug, Clone)]
pub struct PointCache {
    points: Vec<GroupElement>,
    m_max: usize,
    design: CMatrix,
}

impl PointCache {
    pub fn new(fam: &GeneratorFamily, points: Vec<GroupElement>, m_max: usize) -> Result<Self> {
        if m_max > fam.m_max() {
            return invalid(format!("family only has bands up to {}", fam.m_max()));
        }
        let k = band_size(m_max);
        let rows: Vec<Vec<C64>> = points
            .par_iter()
            .map(|g| {
                let mut row = Vec::with_capacity(k);
                for m in 1..=m_max {
                    let p = pi_m(fam.get(m), g);
                    for a in 0..m {
                        for ci in 0..m {
                            row.push(p[(ci, a)]);
                        }
                    }
                }
                row
            })
            .collect();
        let design = CMatrix::from_fn(points.len(), k, |i, j| rows[i][j]);
        Ok(PointCache { points, m_max, design })
    }

    pub fn points(&self) -> &[GroupElement] {
        &self.points
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn design(&self) -> &CMatrix {
        &self.design
    }

    /// Values at every point as an `N × n²` matrix (see [`SampledField::value_matrix`]).
    pub fn evaluate_matrix(&self, f: &BandLimitedFunction) -> Result<CMatrix> {
        if f.m_max > self.m_max {
            return invalid(format!("function band {} exceeds cached band {}", f.m_max, self.m_max));
        }
        let k = band_size(f.m_max);
        Ok(self.design.columns(0, k) * f.to_design_coeffs())
    }

    pub fn evaluate(&self, f: &BandLimitedFunction) -> Result<Vec<CMatrix>> {
        let n = f.value_dim;
        let vals = self.evaluate_matrix(f)?;
        Ok((0..self.len()).map(|k| CMatrix::from_fn(n, n, |a, b| vals[(k, a * n + b)])).collect())
    }

    pub fn evaluate_scalar(&self, f: &BandLimitedFunction) -> Result<DVector<C64>> {
        if f.value_dim != 1 {
            return invalid("scalar evaluation of a matrix-valued function");
        }
        Ok(self.evaluate_matrix(f)?.column(0).into_owned())
    }

    /// `Γ(f, h)(g) = Σ_{V ∈ {X,Y}} (Vf)(g)† (Vh)(g)` at every cached point.
    pub fn gamma(&self, fam: &GeneratorFamily, f: &BandLimitedFunction, h: &BandLimitedFunction) -> Result<SampledField> {
        if f.value_dim != h.value_dim {
            return invalid("Γ needs functions with equal value dimension");
        }
        let n = f.value_dim;
        let mut values = vec![CMatrix::zeros(n, n); self.len()];
        for dir in Direction::HORIZONTAL {
            let vf = self.evaluate(&f.vector_field(fam, dir))?;
            let vh = self.evaluate(&h.vector_field(fam, dir))?;
            for (out, (a, b)) in values.iter_mut().zip(vf.iter().zip(&vh)) {
                *out += a.adjoint() * b;
            }
        }
        SampledField::new(self.points.clone(), values)
    }

    /// Scalar `Γ(f, h)` as a vector over the cached points.
    pub fn gamma_scalar(&self, fam: &GeneratorFamily, f: &BandLimitedFunction, h: &BandLimitedFunction) -> Result<DVector<C64>> {
        let mut out = DVector::from_element(self.len(), ZERO);
        for dir in Direction::HORIZONTAL {
            let vf = self.evaluate_scalar(&f.vector_field(fam, dir))?;
            let vh = self.evaluate_scalar(&h.vector_field(fam, dir))?;
            out += vf.zip_map(&vh, |a, b| a.conj() * b);
        }
        Ok(out)
    }
}

/// Fit result with the relative residual `‖Φx − b‖ / ‖b‖`.
#[derive(Debug, Clone)]
pub struct BandFit {
    pub function: BandLimitedFunction,
    pub relative_residual: f64,
}

/// Least-squares projector onto bands `≤ m_max` for a fixed point set,
/// factored once and reused for many right-hand sides.
#[derive(Debug, Clone)]
pub struct BandProjector {
    cache: PointCache,
    q: CMatrix,
    r: CMatrix,
}

impl BandProjector {
    /// `ridge` is a Tikhonov weight added as `√ridge · I` rows below `Φ`.
    pub fn new(cache: PointCache, ridge: f64) -> Result<Self> {
        if !(ridge >= 0.0) {
            return invalid("ridge must be nonnegative");
        }
        let (rows, k) = cache.design.shape();
        if rows < k {
            return invalid(format!("{rows} points cannot determine {k} coefficients"));
        }
        let mut aug = CMatrix::zeros(rows + k, k);
        aug.rows_mut(0, rows).copy_from(&cache.design);
        for j in 0..k {
            aug[(rows + j, j)] = c(ridge.sqrt());
        }
        let qr = aug.qr();
        let q = qr.q().rows(0, rows).into_owned();
        let r = qr.r();
        if (0..k).any(|j| r[(j, j)].norm() < 1e-12) {
            return Err(Error::SingularMatrix { eigenvalue: 0.0, floor: 1e-12 });
        }
        Ok(BandProjector { cache, q, r })
    }

    pub fn cache(&self) -> &PointCache {
        &self.cache
    }

    /// The linear map `values ↦ coefficients` as a `Σm² × N` matrix.
    pub fn fit_operator(&self) -> CMatrix {
        self.r.solve_upper_triangular(&self.q.adjoint()).expect("diagonal checked at construction")
    }

    /// Fits an `N × n²` block of values (see [`SampledField::value_matrix`]).
    pub fn fit_matrix(&self, values: &CMatrix, value_dim: usize) -> Result<BandFit> {
        if values.nrows() != self.cache.len() || values.ncols() != value_dim * value_dim {
            return invalid("value block does not match the point set");
        }
        let rhs = self.q.adjoint() * values;
        let x = self.r.solve_upper_triangular(&rhs).ok_or(Error::SingularMatrix { eigenvalue: 0.0, floor: 1e-12 })?;
        let fitted = self.cache.design() * &x;
        let b_norm = values.norm();
        let relative_residual = if b_norm == 0.0 { 0.0 } else { (fitted - values).norm() / b_norm };
        Ok(BandFit {
            function: BandLimitedFunction::from_design_coeffs(&x, self.cache.m_max, value_dim),
            relative_residual,
        })
    }

    pub fn fit_scalar(&self, values: &DVector<C64>) -> Result<BandFit> {
        let block = CMatrix::from_column_slice(values.len(), 1, values.as_slice());
        self.fit_matrix(&block, 1)
    }
}

/// Minimum number of points [`project_band`] accepts: `2 Σ_m m² n²`.
pub fn min_points(m_max: usize, value_dim: usize) -> usize {
    2 * band_size(m_max) * value_dim * value_dim
}

/// Least-squares projection of sampled values onto bands `≤ m_max`.
pub fn project_band(fam: &GeneratorFamily, samples: &SampledField, m_max: usize, ridge: f64) -> Result<BandFit> {
    let n = samples.value_dim();
    let need = min_points(m_max, n);
    if samples.len() < need {
        return invalid(format!("{} points, need at least {need} for band {m_max}", samples.len()));
    }
    let cache = PointCache::new(fam, samples.points.clone(), m_max)?;
    BandProjector::new(cache, ridge)?.fit_matrix(&samples.value_matrix(), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{max_abs, min_eigenvalue_of, I};
    use crate::su2repr::haar_sample;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fam() -> GeneratorFamily {
        GeneratorFamily::new(8).unwrap()
    }

    fn rand_f(seed: u64, m_max: usize, n: usize) -> BandLimitedFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BandLimitedFunction::random_hermitian(&mut rng, &fam(), m_max, n)
    }

    fn rand_complex(seed: u64, m_max: usize, n: usize) -> BandLimitedFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (1..=m_max).map(|m| random::ginibre(&mut rng, m * n, m * n)).collect();
        BandLimitedFunction::new(n, coeffs).unwrap()
    }

    fn coeff_diff(a: &BandLimitedFunction, b: &BandLimitedFunction) -> f64 {
        a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| max_abs(&(x - y))).fold(0.0, f64::max)
    }

    #[test]
    fn band_sizes() {
        assert_eq!(band_size(1), 1);
        assert_eq!(band_size(4), 30);
        assert_eq!(band_size(7), 140);
    }

    #[test]
    fn evaluate_examples() {
        let fam = fam();
        let cst = BandLimitedFunction::constant(&CMatrix::from_element(1, 1, C64::new(2.0, -1.0)), 3);
        for g in haar_sample(1, 5) {
            assert!((cst.evaluate_scalar(&fam, &g) - C64::new(2.0, -1.0)).norm() < 1e-14);
        }
        for g in haar_sample(2, 10) {
            let mat = g.to_matrix();
            for r in 0..2 {
                for col in 0..2 {
                    let f = BandLimitedFunction::matrix_entry(2, r, col, 2).unwrap();
                    assert!((f.evaluate_scalar(&fam, &g) - mat[(r, col)]).norm() < 1e-12);
                }
            }
        }
        let f = rand_f(3, 4, 1);
        for g in haar_sample(4, 20) {
            assert!(f.evaluate_scalar(&fam, &g).im.abs() < 1e-10);
        }
    }

    #[test]
    fn adjoint_coefficients() {
        let fam = fam();
        for n in 1..=3 {
            let f = rand_complex(10 + n as u64, 3, n);
            let fa = f.adjoint(&fam);
            for g in haar_sample(5, 10) {
                let want = f.evaluate(&fam, &g).adjoint();
                assert!(max_abs(&(fa.evaluate(&fam, &g) - want)) < 1e-12);
            }
            let h = rand_f(20 + n as u64, 3, n);
            for g in haar_sample(6, 10) {
                let v = h.evaluate(&fam, &g);
                assert!(max_abs(&(&v - v.adjoint())) < 1e-12);
            }
        }
    }

    #[test]
    fn cache_matches_pointwise() {
        let fam = fam();
        let f = rand_complex(30, 4, 2);
        let pts = haar_sample(7, 25);
        let cache = PointCache::new(&fam, pts.clone(), 5).unwrap();
        for (g, v) in pts.iter().zip(cache.evaluate(&f).unwrap()) {
            assert!(max_abs(&(f.evaluate(&fam, g) - v)) < 1e-12);
        }
    }

    #[test]
    fn vector_field_finite_differences() {
        let fam = fam();
        let f = rand_complex(40, 4, 2);
        let h = 1e-5;
        for dir in Direction::ALL {
            let vf = f.vector_field(&fam, dir);
            for g in haar_sample(8, 10) {
                let plus = f.evaluate(&fam, &g.mul(&GroupElement::exp(dir, h)));
                let minus = f.evaluate(&fam, &g.mul(&GroupElement::exp(dir, -h)));
                let fd = (plus - minus) / c(2.0 * h);
                assert!(max_abs(&(fd - vf.evaluate(&fam, &g))) < 1e-6);
            }
        }
        let cst = BandLimitedFunction::constant(&identity(2), 3);
        assert!(cst.vector_field(&fam, Direction::X).norm() == 0.0);
    }

    #[test]
    fn z_derivative_of_entry() {
        let fam = fam();
        let f = BandLimitedFunction::matrix_entry(2, 0, 0, 2).unwrap();
        let zf = f.vector_field(&fam, Direction::Z);
        for g in haar_sample(9, 10) {
            // (π(g) Z)_{00} = i π(g)_{00}
            let want = I * g.to_matrix()[(0, 0)];
            assert!((zf.evaluate_scalar(&fam, &g) - want).norm() < 1e-12);
        }
    }

    #[test]
    fn bracket_on_coefficients() {
        let fam = fam();
        let f = rand_complex(41, 5, 2);
        let xy = f.vector_field(&fam, Direction::Y).vector_field(&fam, Direction::X);
        let yx = f.vector_field(&fam, Direction::X).vector_field(&fam, Direction::Y);
        let z2 = f.vector_field(&fam, Direction::Z).scale(c(2.0));
        assert!(coeff_diff(&xy.add(&yx.scale(c(-1.0))), &z2) < 1e-9);
    }

    #[test]
    fn heat_examples() {
        let fam = fam();
        let f = rand_complex(50, 4, 1);
        assert_eq!(f.heat_semigroup(0.0).unwrap(), f);
        let cst = BandLimitedFunction::constant(&CMatrix::from_element(1, 1, c(3.0)), 4);
        assert_eq!(cst.heat_semigroup(5.0).unwrap(), cst);
        let t = 0.7;
        for r in 0..2 {
            let e = BandLimitedFunction::matrix_entry(2, r, 1 - r, 2).unwrap();
            let pe = e.heat_semigroup(t).unwrap();
            for g in haar_sample(10, 5) {
                let want = e.evaluate_scalar(&fam, &g) * (-2.0 * t).exp();
                assert!((pe.evaluate_scalar(&fam, &g) - want).norm() < 1e-12);
            }
        }
        assert!(f.heat_semigroup(-1.0).is_err());
        assert_eq!(f.heat_semigroup(2.0).unwrap().mean(), f.mean());
    }

    #[test]
    fn heat_is_exponential_of_sub_laplacian() {
        // d/dt P_t f = (X² + Y²) P_t f, and X² + Y² agrees with the vector fields.
        let fam = fam();
        let f = rand_complex(51, 4, 2);
        let x2 = f.vector_field(&fam, Direction::X).vector_field(&fam, Direction::X);
        let y2 = f.vector_field(&fam, Direction::Y).vector_field(&fam, Direction::Y);
        assert!(coeff_diff(&x2.add(&y2), &f.sub_laplacian()) < 1e-10);
        let (t, h) = (0.3, 1e-5);
        let d = f.heat_semigroup(t + h).unwrap().add(&f.heat_semigroup(t - h).unwrap().scale(c(-1.0)));
        let d = d.scale(c(1.0 / (2.0 * h)));
        assert!(coeff_diff(&d, &f.heat_semigroup(t).unwrap().sub_laplacian()) < 1e-6);
    }

    #[test]
    fn mean_examples() {
        let fam = fam();
        let e3 = BandLimitedFunction::matrix_entry(3, 1, 2, 3).unwrap();
        assert_eq!(e3.mean()[(0, 0)], ZERO);
        let cache = PointCache::new(&fam, haar_sample(11, 100_000), 3).unwrap();
        let vals = cache.evaluate_scalar(&e3).unwrap();
        let n = vals.len() as f64;
        let mean = vals.sum() / n;
        let var = vals.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
        assert!(mean.norm() < 3.0 * (var / n).sqrt());

        let f = rand_f(52, 3, 1);
        let vals = cache.evaluate_scalar(&f).unwrap();
        let mc = vals.sum() / n;
        let var = vals.iter().map(|v| (v - mc).norm_sqr()).sum::<f64>() / (n - 1.0);
        assert!((mc - f.mean()[(0, 0)]).norm() < 3.0 * (var / n).sqrt());
    }

    #[test]
    fn schur_inner_product_against_monte_carlo() {
        let fam = fam();
        let f = rand_complex(53, 3, 2);
        let h = rand_complex(54, 3, 2);
        let cache = PointCache::new(&fam, haar_sample(12, 100_000), 3).unwrap();
        let fv = cache.evaluate(&f).unwrap();
        let hv = cache.evaluate(&h).unwrap();
        let samples: Vec<C64> = fv.iter().zip(&hv).map(|(a, b)| hs_inner(a, b)).collect();
        let n = samples.len() as f64;
        let mc = samples.iter().sum::<C64>() / n;
        let var = samples.iter().map(|v| (v - mc).norm_sqr()).sum::<f64>() / (n - 1.0);
        assert!((mc - f.inner(&h)).norm() < 4.0 * (var / n).sqrt());
    }

    #[test]
    fn gamma_examples() {
        let fam = fam();
        let cache = PointCache::new(&fam, haar_sample(13, 50), 4).unwrap();
        let cst = BandLimitedFunction::constant(&CMatrix::from_element(1, 1, c(1.0)), 4);
        let g0 = cache.gamma(&fam, &cst, &cst).unwrap();
        assert!(g0.values.iter().all(|v| max_abs(v) == 0.0));
        let f = rand_f(60, 4, 1);
        let gf = cache.gamma_scalar(&fam, &f, &f).unwrap();
        assert!(gf.iter().all(|v| v.re >= -1e-12 && v.im.abs() < 1e-12));
        // tuple (f_1, f_2, f_3) → matrix [Γ(f_i, f_j)] is PSD pointwise
        let fs: Vec<_> = (0..3).map(|i| rand_f(61 + i, 4, 1)).collect();
        let mut mats = vec![CMatrix::zeros(3, 3); cache.len()];
        for i in 0..3 {
            for j in 0..3 {
                let v = cache.gamma_scalar(&fam, &fs[i], &fs[j]).unwrap();
                for (k, m) in mats.iter_mut().enumerate() {
                    m[(i, j)] = v[k];
                }
            }
        }
        assert!(mats.iter().all(|m| min_eigenvalue_of(m) >= -1e-12));
        let h = rand_f(64, 4, 2);
        let gh = cache.gamma(&fam, &h, &h).unwrap();
        assert!(gh.values.iter().all(|m| min_eigenvalue_of(m) >= -1e-12));
    }

    #[test]
    fn project_recovers_band_limited() {
        let fam = fam();
        for n in [1, 2] {
            let f = rand_complex(70 + n as u64, 3, n);
            let pts = haar_sample(14, 4 * band_size(3) * n * n);
            let cache = PointCache::new(&fam, pts.clone(), 3).unwrap();
            let field = SampledField::new(pts, cache.evaluate(&f).unwrap()).unwrap();
            let fit = project_band(&fam, &field, 3, 0.0).unwrap();
            assert!(coeff_diff(&fit.function, &f) < 1e-8 * max_abs(&f.to_design_coeffs()));
            assert!(fit.relative_residual < 1e-10);
        }
        let pts = haar_sample(15, 100);
        let zero = SampledField::new(pts.clone(), vec![CMatrix::zeros(1, 1); 100]).unwrap();
        let fit = project_band(&fam, &zero, 3, 1e-10).unwrap();
        assert!(fit.function.norm() == 0.0 && fit.relative_residual == 0.0);
        let few = SampledField::new(pts[..50].to_vec(), vec![CMatrix::zeros(1, 1); 50]).unwrap();
        assert!(matches!(project_band(&fam, &few, 4, 0.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn gamma_is_exactly_representable_at_double_band() {
        let fam = fam();
        let m_max = 3;
        let band = 2 * m_max - 1;
        let f = rand_f(80, m_max, 1);
        let pts = haar_sample(16, 4 * band_size(band));
        let cache = PointCache::new(&fam, pts.clone(), band).unwrap();
        let gamma = cache.gamma(&fam, &f, &f).unwrap();
        let fit = project_band(&fam, &gamma, band, 1e-10).unwrap();
        assert!(fit.relative_residual < 1e-6);
        let lower = project_band(&fam, &gamma, band - 1, 1e-10).unwrap();
        assert!(lower.relative_residual > 1e-4);
        // Γ(f) integrates to the Dirichlet form
        assert!((fit.function.mean()[(0, 0)].re - f.dirichlet_form(&fam)).abs() < 1e-8);
    }

    #[test]
    fn design_helpers_match_functions() {
        let fam = fam();
        let f = rand_complex(95, 4, 1);
        let t = 0.37;
        let w = design_heat_weights(4, t);
        let x = f.to_design_coeffs();
        let weighted = CMatrix::from_fn(x.nrows(), 1, |i, _| x[(i, 0)] * w[i]);
        let direct = f.heat_semigroup(t).unwrap().to_design_coeffs();
        assert!(max_abs(&(weighted - direct)) < 1e-14);
        let e = identity_design_row(4);
        let at_e: C64 = e.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        assert!((at_e - f.evaluate_scalar(&fam, &GroupElement::IDENTITY)).norm() < 1e-13);
    }

    #[test]
    fn classical_gap() {
        assert!(classical_spectral_gap(1).is_err());
        for m_max in 2..=8 {
            assert_eq!(classical_spectral_gap(m_max).unwrap(), 2.0);
        }
    }

    #[test]
    fn ergodicity_rate() {
        let f = rand_f(90, 4, 1);
        let mean = BandLimitedFunction::constant(&f.mean(), 4);
        let d0 = f.add(&mean.scale(c(-1.0))).norm();
        for t in [0.5, 1.0, 2.0] {
            let dt = f.heat_semigroup(t).unwrap().add(&mean.scale(c(-1.0))).norm();
            assert!(dt <= (-2.0 * t).exp() * d0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn serde_round_trip() {
        let f = rand_complex(91, 3, 2);
        let back: BandLimitedFunction = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
        let bad = r#"{"m_max":1,"value_dim":2,"coeffs":[{"rows":1,"cols":1,"data":[[0,0]]}]}"#;
        assert!(serde_json::from_str::<BandLimitedFunction>(bad).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn semigroup_law(seed in 0u64..10_000, s in 0.0f64..2.0, t in 0.0f64..2.0) {
            let f = rand_complex(seed, 4, 2);
            let two = f.heat_semigroup(s).unwrap().heat_semigroup(t).unwrap();
            let one = f.heat_semigroup(s + t).unwrap();
            prop_assert!(coeff_diff(&two, &one) < 1e-12);
        }

        #[test]
        fn heat_symmetry(seed in 0u64..10_000, t in 0.0f64..2.0) {
            let f = rand_complex(seed, 4, 2);
            let h = rand_complex(seed + 1, 4, 2);
            let lhs = f.heat_semigroup(t).unwrap().inner(&h);
            let rhs = f.inner(&h.heat_semigroup(t).unwrap());
            prop_assert!((lhs - rhs).norm() < 1e-10);
        }

        #[test]
        fn dirichlet_positivity(seed in 0u64..10_000) {
            let fam = fam();
            let f = rand_complex(seed, 5, 2);
            let lhs = -f.inner(&f.sub_laplacian()).re;
            let rhs = f.dirichlet_form(&fam);
            prop_assert!(rhs >= -1e-10);
            prop_assert!((lhs - rhs).abs() < 1e-10 * rhs.max(1.0));
        }
    }
}
