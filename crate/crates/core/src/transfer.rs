//! The coherent embedding `α(ρ)(g) = π(g) ρ π(g)†` and checks that it
//! carries the horizontal heat semigroup on SU(2) to `S_t = exp(t L)`.
//!
//! With `π(g · exp(tV)) = π(g) exp(t V_m)`, the left-invariant derivatives
//! of `F = α(ρ)` are `(V F)(g) = π(g)[V_m, ρ]π(g)†` and
//! `(V² F)(g) = π(g)[V_m,[V_m, ρ]]π(g)†`, so `(X² + Y²)α(ρ) = α(L ρ)`.
//! Equality at `t = 0` and of the generators gives `α(S_t ρ) = (P_t ⊗ id) α(ρ)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entfun::{fisher_information, relative_entropy, PositiveSpectrum};
use crate::error::{invalid, Result};
use crate::numkit::{c, frobenius, hs_inner, identity, kron, CMatrix, HermitianMatrix};
use crate::qms::{conditional_expectation, evolve, lindblad_generator, DensityMatrix, Superoperator};
use crate::su2repr::{pi_m, Direction, GroupElement, IrrepGenerators};

/// Step of the first-derivative central differences.
pub const FIRST_STEP: f64 = 1e-5;
/// Step of the five-point second-derivative stencil.
pub const SECOND_STEP: f64 = 1e-3;
/// Step of the time derivative in [`semigroup_transference_check`].
pub const TIME_STEP: f64 = 1e-4;

/// `g ↦ (π_m(g) ⊗ I_n) ρ (π_m(g) ⊗ I_n)†`.
#[derive(Debug, Clone)]
pub struct CoherentEmbedding {
    gen: IrrepGenerators,
    amplification: usize,
    rho: CMatrix,
}

impl CoherentEmbedding {
    /// Any square matrix of size `m·n`; Hermitian input gives Hermitian values.
    pub fn new(gen: &IrrepGenerators, amplification: usize, rho: &CMatrix) -> Result<Self> {
        let d = gen.dim() * amplification;
        if amplification == 0 || rho.nrows() != d || rho.ncols() != d {
            return invalid(format!("expected a {d}×{d} matrix, got {}×{}", rho.nrows(), rho.ncols()));
        }
        Ok(CoherentEmbedding { gen: gen.clone(), amplification, rho: rho.clone() })
    }

    pub fn m(&self) -> usize {
        self.gen.dim()
    }

    pub fn amplification(&self) -> usize {
        self.amplification
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    fn unitary(&self, g: &GroupElement) -> CMatrix {
        let p = pi_m(&self.gen, g);
        if self.amplification == 1 { p } else { kron(&p, &identity(self.amplification)) }
    }

    pub fn at(&self, g: &GroupElement) -> CMatrix {
        let u = self.unitary(g);
        &u * &self.rho * u.adjoint()
    }

    /// `(V F)(g)` from `π(g)[V, ρ]π(g)†`.
    pub fn derivative(&self, g: &GroupElement, dir: Direction) -> CMatrix {
        let u = self.unitary(g);
        let v = self.amplified(dir);
        &u * (&v * &self.rho - &self.rho * &v) * u.adjoint()
    }

    /// `(V² F)(g)` by the product rule on `π ρ π†`:
    /// `π(V²ρ + 2 V ρ V† + ρ (V²)†)π†`.
    pub fn second_derivative(&self, g: &GroupElement, dir: Direction) -> CMatrix {
        let u = self.unitary(g);
        let v = self.amplified(dir);
        let v2 = &v * &v;
        let inner = &v2 * &self.rho + (&v * &self.rho * v.adjoint()) * c(2.0) + &self.rho * v2.adjoint();
        &u * inner * u.adjoint()
    }

    /// `(X² + Y²) F` at `g`.
    pub fn horizontal_laplacian(&self, g: &GroupElement) -> CMatrix {
        Direction::HORIZONTAL.iter().map(|&d| self.second_derivative(g, d)).fold(
            CMatrix::zeros(self.rho.nrows(), self.rho.ncols()),
            |acc, x| acc + x,
        )
    }

    /// Central difference of `t ↦ F(g exp(tV))`.
    pub fn derivative_fd(&self, g: &GroupElement, dir: Direction, h: f64) -> CMatrix {
        let f = |t: f64| self.at(&g.mul(&GroupElement::exp(dir, t)));
        (f(h) - f(-h)) * c(0.5 / h)
    }

    /// Five-point second difference of `t ↦ F(g exp(tV))`.
    pub fn second_derivative_fd(&self, g: &GroupElement, dir: Direction, h: f64) -> CMatrix {
        let f = |t: f64| self.at(&g.mul(&GroupElement::exp(dir, t)));
        (f(-2.0 * h) * c(-1.0) + f(-h) * c(16.0) + f(0.0) * c(-30.0) + f(h) * c(16.0) + f(2.0 * h) * c(-1.0))
            * c(1.0 / (12.0 * h * h))
    }

    fn amplified(&self, dir: Direction) -> CMatrix {
        let v = self.gen.get(dir);
        if self.amplification == 1 { v.clone() } else { kron(v, &identity(self.amplification)) }
    }
}

/// `α(ρ)` for a density matrix at its own amplification `dim / m`.
pub fn embed(gen: &IrrepGenerators, rho: &DensityMatrix) -> Result<CoherentEmbedding> {
    let m = gen.dim();
    if rho.dim() % m != 0 {
        return invalid(format!("state dim {} is not a multiple of {m}", rho.dim()));
    }
    CoherentEmbedding::new(gen, rho.dim() / m, rho.matrix())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTransferenceReport {
    /// Product-rule derivatives against `π[V,ρ]π†` and `α(L ρ)`.
    pub max_residual_exact: f64,
    /// Central differences of `α(ρ)(g exp(tV))` against the same targets.
    pub max_residual_fd_first: f64,
    pub max_residual_fd_second: f64,
    /// `‖ρ‖_F`, the scale for the finite-difference residuals.
    pub scale: f64,
    pub points: usize,
}

impl GeneratorTransferenceReport {
    pub fn max_residual_fd(&self) -> f64 {
        self.max_residual_fd_first.max(self.max_residual_fd_second)
    }
}

/// Checks `V α(ρ) = α([V, ρ])` and `(X² + Y²) α(ρ) = α(L ρ)` at every point.
pub fn generator_transference_check(
    gen: &IrrepGenerators,
    amplification: usize,
    rho: &CMatrix,
    points: &[GroupElement],
) -> Result<GeneratorTransferenceReport> {
    let l = lindblad_generator(gen, amplification)?;
    generator_check_with(&l, gen, amplification, rho, points)
}

fn generator_check_with(
    l: &Superoperator,
    gen: &IrrepGenerators,
    amplification: usize,
    rho: &CMatrix,
    points: &[GroupElement],
) -> Result<GeneratorTransferenceReport> {
    let emb = CoherentEmbedding::new(gen, amplification, rho)?;
    let l_rho = CoherentEmbedding::new(gen, amplification, &l.apply(rho))?;
    let commutators: Vec<CoherentEmbedding> = Direction::HORIZONTAL
        .iter()
        .map(|&d| {
            let v = emb.amplified(d);
            CoherentEmbedding::new(gen, amplification, &(&v * rho - rho * &v))
        })
        .collect::<Result<_>>()?;
    let per_point: Vec<[f64; 3]> = points
        .par_iter()
        .map(|g| {
            let target = l_rho.at(g);
            let mut exact = frobenius(&(emb.horizontal_laplacian(g) - &target));
            let mut first: f64 = 0.0;
            let mut second = CMatrix::zeros(rho.nrows(), rho.ncols());
            for (k, &d) in Direction::HORIZONTAL.iter().enumerate() {
                let want = commutators[k].at(g);
                exact = exact.max(frobenius(&(emb.derivative(g, d) - &want)));
                first = first.max(frobenius(&(emb.derivative_fd(g, d, FIRST_STEP) - &want)));
                second += emb.second_derivative_fd(g, d, SECOND_STEP);
            }
            [exact, first, frobenius(&(second - target))]
        })
        .collect();
    let max = |k: usize| per_point.iter().map(|r| r[k]).fold(0.0, f64::max);
    Ok(GeneratorTransferenceReport {
        max_residual_exact: max(0),
        max_residual_fd_first: max(1),
        max_residual_fd_second: max(2),
        scale: frobenius(rho),
        points: points.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupStep {
    pub t: f64,
    /// `max_g ‖(X² + Y²) α(S_t ρ)(g) − α(L S_t ρ)(g)‖`, the derivative-matching residual.
    pub residual: f64,
    /// `max_g ‖∂_t α(S_t ρ)(g) − (X² + Y²) α(S_t ρ)(g)‖` with `∂_t` by finite differences.
    pub residual_time_fd: f64,
    /// `max_g ‖α(S_t ρ)(g) − α(S_t ρ)(e')‖` over points: zero for fixed points.
    pub variation_from_start: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupTransferenceReport {
    /// `max_g ‖α(S_0 ρ)(g) − α(ρ)(g)‖`.
    pub initial_residual: f64,
    pub steps: Vec<SemigroupStep>,
    pub points: usize,
}

impl SemigroupTransferenceReport {
    pub fn max_residual(&self) -> f64 {
        self.steps.iter().map(|s| s.residual).fold(self.initial_residual, f64::max)
    }
}

/// Derivative matching along `t ↦ α(S_t ρ)`.
pub fn semigroup_transference_check(
    gen: &IrrepGenerators,
    rho: &DensityMatrix,
    t_grid: &[f64],
    points: &[GroupElement],
) -> Result<SemigroupTransferenceReport> {
    if t_grid.iter().any(|t| !(*t >= 0.0)) {
        return invalid("times must be nonnegative");
    }
    let n = embed(gen, rho)?.amplification();
    let l = lindblad_generator(gen, n)?;
    let start = embed(gen, rho)?;
    let at_zero = embed(gen, &evolve(&l, rho, 0.0)?)?;
    let initial_residual = points.iter().map(|g| frobenius(&(at_zero.at(g) - start.at(g)))).fold(0.0, f64::max);
    let steps = t_grid
        .iter()
        .map(|&t| {
            let rho_t = evolve(&l, rho, t)?;
            let generator = generator_check_with(&l, gen, n, rho_t.matrix(), points)?;
            let emb_t = embed(gen, &rho_t)?;
            // fourth-order central difference, or the one-sided fourth-order stencil near 0
            let h = TIME_STEP;
            let stencil: Vec<(f64, f64)> = if t >= 2.0 * h {
                [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)].iter().map(|&(k, w)| (t + k * h, w / 12.0)).collect()
            } else {
                [-25.0, 48.0, -36.0, 16.0, -3.0].iter().enumerate().map(|(k, &w)| (t + k as f64 * h, w / 12.0)).collect()
            };
            let terms = stencil
                .iter()
                .map(|&(s, w)| Ok((embed(gen, &evolve(&l, rho, s)?)?, w / h)))
                .collect::<Result<Vec<_>>>()?;
            let residual_time_fd = points
                .iter()
                .map(|g| {
                    let dt = terms.iter().fold(CMatrix::zeros(rho.dim(), rho.dim()), |acc, (e, w)| acc + e.at(g) * c(*w));
                    frobenius(&(dt - emb_t.horizontal_laplacian(g)))
                })
                .fold(0.0, f64::max);
            let variation_from_start = points
                .iter()
                .map(|g| frobenius(&(emb_t.at(g) - start.at(g))))
                .fold(0.0, f64::max);
            Ok(SemigroupStep { t, residual: generator.max_residual_exact, residual_time_fd, variation_from_start })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SemigroupTransferenceReport { initial_residual, steps, points: points.len() })
}

/// Largest `|D(α(S_t ρ)(g) ‖ E ρ) − D(S_t ρ ‖ E ρ)|` over points.
pub fn entropy_transference_check(
    gen: &IrrepGenerators,
    rho: &DensityMatrix,
    t: f64,
    points: &[GroupElement],
) -> Result<f64> {
    let n = embed(gen, rho)?.amplification();
    let l = lindblad_generator(gen, n)?;
    let rho_t = evolve(&l, rho, t)?;
    let sigma = DensityMatrix::from_matrix(conditional_expectation(gen.dim(), n, rho.matrix()))?;
    let quantum = relative_entropy(&rho_t, &sigma)?;
    let emb = embed(gen, &rho_t)?;
    points
        .par_iter()
        .map(|g| {
            let value = DensityMatrix::from_matrix(emb.at(g))?;
            Ok((relative_entropy(&value, &sigma)? - quantum).abs())
        })
        .collect::<Result<Vec<f64>>>()
        .map(|v| v.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherTransferenceReport {
    pub quantum: f64,
    /// Haar mean of the classical integrand `Σ_V ⟨V F, M⁻¹_F V F⟩` and its standard error.
    pub classical_mean: f64,
    pub stderr: f64,
    pub points: usize,
}

impl FisherTransferenceReport {
    /// `|mean − I| ≤ 3 SE`, with a `1e-8·I` floor: the integrand is constant
    /// in `g`, so the standard error only reflects rounding.
    pub fn passes(&self) -> bool {
        (self.classical_mean - self.quantum).abs() <= 3.0 * self.stderr + 1e-8 * self.quantum.abs().max(1e-300)
    }
}

/// Compares `I(ρ)` with the Haar average of the horizontal Fisher integrand of
/// `α(ρ)`, whose derivatives are taken by central differences on the group.
pub fn fisher_transference_check(
    gen: &IrrepGenerators,
    rho: &DensityMatrix,
    points: &[GroupElement],
) -> Result<FisherTransferenceReport> {
    if points.len() < 2 {
        return invalid("need at least two points");
    }
    let emb = embed(gen, rho)?;
    let quantum = fisher_information(gen, rho, emb.amplification())?;
    let samples = points
        .par_iter()
        .map(|g| {
            let spec = PositiveSpectrum::of(&HermitianMatrix::new(emb.at(g))?)?;
            Ok(Direction::HORIZONTAL
                .iter()
                .map(|&d| {
                    let vf = emb.derivative_fd(g, d, FIRST_STEP);
                    hs_inner(&vf, &spec.m_inverse(&vf)).re
                })
                .sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let nf = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok(FisherTransferenceReport { quantum, classical_mean: mean, stderr: (var / nf).sqrt(), points: points.len() })
}
