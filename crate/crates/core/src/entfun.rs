//! Relative entropy, Fisher information and the double-operator-integral
//! multipliers `M_ρ`, `M_ρ^{-1}` and `K_ρ = ∇* M_ρ ∇`.
//!
//! All logarithms are natural. The multipliers act in the eigenbasis of `ρ`
//! by entrywise multiplication with a divided-difference kernel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numkit::{eig_hermitian, hs_inner, CMatrix, HermitianMatrix, Spectrum, EIG_FLOOR};
use crate::qms::{amplified_generators, DensityMatrix, Superoperator};
use crate::su2repr::IrrepGenerators;

/// Eigenvalue pairs closer than this (relatively) use the diagonal limit.
pub const KERNEL_MERGE: f64 = 1e-8;

/// Overlap weight above which support outside `supp σ` counts as a violation.
pub const SUPPORT_TOL: f64 = 1e-10;

/// `(δ_X(ρ), δ_Y(ρ))` with `δ_V(ρ) = [V_m ⊗ I_n, ρ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    components: Vec<CMatrix>,
}

impl TangentVector {
    pub fn new(components: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = components.first() else {
            return invalid("tangent vector needs at least one component");
        };
        let shape = first.shape();
        if components.iter().any(|c| c.shape() != shape) {
            return invalid("tangent components have different shapes");
        }
        Ok(TangentVector { components })
    }

    pub fn components(&self) -> &[CMatrix] {
        &self.components
    }

    /// `Σ_j tr(a_j† b_j)`.
    pub fn inner(&self, other: &TangentVector) -> f64 {
        self.components.iter().zip(&other.components).map(|(a, b)| hs_inner(a, b).re).sum()
    }
}

pub fn gradient(gen: &IrrepGenerators, rho: &CMatrix, amplification: usize) -> TangentVector {
    let components = amplified_generators(gen, amplification)
        .iter()
        .map(|a| a * rho - rho * a)
        .collect();
    TangentVector { components }
}

/// Spectrum of a state that has been checked to be strictly positive.
#[derive(Debug, Clone)]
pub struct PositiveSpectrum(Spectrum);

impl PositiveSpectrum {
    pub fn of(rho: &HermitianMatrix) -> Result<Self> {
        let spec = eig_hermitian(rho)?;
        let lo = spec.min();
        if lo < EIG_FLOOR {
            return Err(Error::SingularState(lo));
        }
        Ok(PositiveSpectrum(spec))
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.0
    }

    pub fn log(&self) -> CMatrix {
        self.0.map_real(f64::ln)
    }

    fn multiply(&self, f: &CMatrix, kernel: impl Fn(f64, f64) -> f64) -> CMatrix {
        let ev = &self.0.eigenvalues;
        let mut g = self.0.to_eigenbasis(f);
        for j in 0..ev.len() {
            for i in 0..ev.len() {
                g[(i, j)] *= kernel(ev[i], ev[j]);
            }
        }
        self.0.from_eigenbasis(&g)
    }

    /// `M_ρ^{-1}`, kernel `(ln λ − ln μ)/(λ − μ)`.
    pub fn m_inverse(&self, f: &CMatrix) -> CMatrix {
        self.multiply(f, log_divided_difference)
    }

    /// `M_ρ`, kernel `(λ − μ)/(ln λ − ln μ)`.
    pub fn m(&self, f: &CMatrix) -> CMatrix {
        self.multiply(f, logarithmic_mean)
    }
}

fn near_equal(a: f64, b: f64) -> bool {
    (a - b).abs() < KERNEL_MERGE * a.max(b)
}

/// `(ln a − ln b)/(a − b)`; `2/(a+b)` when the two nearly coincide.
pub fn log_divided_difference(a: f64, b: f64) -> f64 {
    if near_equal(a, b) {
        2.0 / (a + b)
    } else {
        ((a - b) / b).ln_1p() / (a - b)
    }
}

/// `(a − b)/(ln a − ln b)`, the reciprocal of [`log_divided_difference`].
pub fn logarithmic_mean(a: f64, b: f64) -> f64 {
    1.0 / log_divided_difference(a, b)
}

pub fn m_rho_inverse(rho: &DensityMatrix, f: &CMatrix) -> Result<CMatrix> {
    Ok(PositiveSpectrum::of(rho.hermitian())?.m_inverse(f))
}

pub fn m_rho(rho: &DensityMatrix, f: &CMatrix) -> Result<CMatrix> {
    Ok(PositiveSpectrum::of(rho.hermitian())?.m(f))
}

/// `⟨f, M_σ^{-1} f⟩`, accepting any strictly positive weight (not only
/// trace-one states).
pub fn weighted_norm_sq(sigma: &HermitianMatrix, f: &CMatrix) -> Result<f64> {
    let spec = PositiveSpectrum::of(sigma)?;
    Ok(hs_inner(f, &spec.m_inverse(f)).re.max(0.0))
}

/// `tr(ρ ln ρ − ρ ln σ)`, or `+∞` when `supp ρ ⊄ supp σ`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return invalid(format!("dimension mismatch {} vs {}", rho.dim(), sigma.dim()));
    }
    let r = eig_hermitian(rho.hermitian())?;
    let s = eig_hermitian(sigma.hermitian())?;
    let overlap = r.eigenvectors.adjoint() * &s.eigenvectors;
    let mut total = 0.0;
    for (i, &lam) in r.eigenvalues.iter().enumerate() {
        if lam <= EIG_FLOOR {
            continue;
        }
        total += lam * lam.ln();
        for (k, &mu) in s.eigenvalues.iter().enumerate() {
            let w = lam * overlap[(i, k)].norm_sqr();
            if mu <= EIG_FLOOR {
                if w > SUPPORT_TOL {
                    return Ok(f64::INFINITY);
                }
            } else {
                total -= w * mu.ln();
            }
        }
    }
    Ok(total)
}

/// `−tr(L(ρ) ln ρ)` computed from the generator.
pub fn fisher_information(gen: &IrrepGenerators, rho: &DensityMatrix, amplification: usize) -> Result<f64> {
    check_dim(gen, rho, amplification)?;
    let spec = PositiveSpectrum::of(rho.hermitian())?;
    let l_rho = crate::qms::apply_lindbladian(gen, amplification, rho.matrix());
    Ok(-hs_inner(&l_rho, &spec.log()).re)
}

/// `Σ_j ⟨δ_j ρ, M_ρ^{-1} δ_j ρ⟩`, the chain-rule form of the Fisher information.
pub fn fisher_information_chain_rule(
    gen: &IrrepGenerators,
    rho: &DensityMatrix,
    amplification: usize,
) -> Result<f64> {
    check_dim(gen, rho, amplification)?;
    let spec = PositiveSpectrum::of(rho.hermitian())?;
    let grad = gradient(gen, rho.matrix(), amplification);
    Ok(grad.components.iter().map(|d| hs_inner(d, &spec.m_inverse(d)).re).sum())
}

fn check_dim(gen: &IrrepGenerators, rho: &DensityMatrix, amplification: usize) -> Result<()> {
    if rho.dim() != gen.dim() * amplification {
        return invalid(format!(
            "state dim {} does not match {}×{}",
            rho.dim(),
            gen.dim(),
            amplification
        ));
    }
    Ok(())
}

/// `K_ρ(f) = Σ_j δ_j†(M_ρ(δ_j f))` with `δ_j†(g) = −[A_j, g]`.
pub fn k_rho_apply(
    gen: &IrrepGenerators,
    rho: &DensityMatrix,
    f: &CMatrix,
    amplification: usize,
) -> Result<CMatrix> {
    check_dim(gen, rho, amplification)?;
    let spec = PositiveSpectrum::of(rho.hermitian())?;
    Ok(k_apply(&spec, &amplified_generators(gen, amplification), f))
}

fn k_apply(spec: &PositiveSpectrum, ops: &[CMatrix], f: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(f.nrows(), f.ncols());
    for a in ops {
        let g = spec.m(&(a * f - f * a));
        out -= a * &g - &g * a;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorInequalityReport {
    /// Smallest `C⟨f, K_{Pρ} f⟩ − ⟨Pf, K_ρ Pf⟩` over the samples.
    pub max_violation: f64,
    pub samples: usize,
}

/// Samples the quadratic form of `C K_{Pρ} − P K_ρ P` on random Hermitian
/// `f` of unit Hilbert–Schmidt norm.
pub fn operator_inequality_check(
    gen: &IrrepGenerators,
    rho: &DensityMatrix,
    p: &Superoperator,
    c: f64,
    samples: usize,
    amplification: usize,
    seed: u64,
) -> Result<OperatorInequalityReport> {
    check_dim(gen, rho, amplification)?;
    if p.dim() != rho.dim() {
        return invalid("map and state dimensions differ");
    }
    let ops = amplified_generators(gen, amplification);
    let spec_rho = PositiveSpectrum::of(rho.hermitian())?;
    let p_rho = HermitianMatrix::new(p.apply(rho.matrix()))?;
    let spec_p_rho = PositiveSpectrum::of(&p_rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let f = crate::numkit::random::hermitian(&mut rng, rho.dim()).into_matrix();
        let f = &f / crate::numkit::c(crate::numkit::frobenius(&f));
        let pf = p.apply(&f);
        let lhs = hs_inner(&pf, &k_apply(&spec_rho, &ops, &pf)).re;
        let rhs = hs_inner(&f, &k_apply(&spec_p_rho, &ops, &f)).re;
        worst = worst.min(c * rhs - lhs);
    }
    Ok(OperatorInequalityReport { max_violation: worst, samples })
}

/// Smallest `C` with `ρ ≤ C σ`, i.e. the top eigenvalue of `σ^{-1/2} ρ σ^{-1/2}`.
pub fn domination_constant(rho: &HermitianMatrix, sigma: &HermitianMatrix) -> Result<f64> {
    let s = PositiveSpectrum::of(sigma)?;
    let inv_sqrt = s.0.map_real(|x| 1.0 / x.sqrt());
    let m = &inv_sqrt * rho.matrix() * &inv_sqrt;
    Ok(crate::numkit::eig_hermitian(&HermitianMatrix::new(m)?)?.max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{c, frobenius, identity, kron, max_abs, random, trace_norm, I};
    use crate::qms::{conditional_expectation, evolve, fixed_point_projection, lindblad_generator};
    use crate::su2repr::build_generators;
    use proptest::prelude::*;

    fn state(seed: u64, dim: usize, mix: f64) -> DensityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DensityMatrix::new(random::density(&mut rng, dim, mix)).unwrap()
    }

    fn e_of(rho: &DensityMatrix, m: usize, n: usize) -> DensityMatrix {
        DensityMatrix::from_matrix(conditional_expectation(m, n, rho.matrix())).unwrap()
    }

    #[test]
    fn relative_entropy_examples() {
        for seed in 0..10 {
            let rho = state(seed, 3, 0.05);
            assert!(relative_entropy(&rho, &rho).unwrap().abs() < 1e-9);
        }
        let pure = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2);
        let d = relative_entropy(&pure, &mixed).unwrap();
        assert!((d - 2f64.ln()).abs() < 1e-12);
        assert_eq!(relative_entropy(&mixed, &pure).unwrap(), f64::INFINITY);
        assert!(relative_entropy(&pure, &DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn relative_entropy_commuting_case() {
        let p: [f64; 3] = [0.7, 0.2, 0.1];
        let q = [0.3, 0.3, 0.4];
        let want: f64 = p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum();
        let got = relative_entropy(&DensityMatrix::diagonal(&p).unwrap(), &DensityMatrix::diagonal(&q).unwrap());
        assert!((got.unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn gradient_examples() {
        let g = build_generators(2).unwrap();
        let t = gradient(&g, &identity(2), 1);
        assert!(t.components().iter().all(|x| max_abs(x) == 0.0));

        let rho = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]).into_matrix();
        let t = gradient(&g, &rho, 1);
        let want_x = CMatrix::from_row_slice(2, 2, &[c(0.0), c(-1.0), c(-1.0), c(0.0)]);
        let want_y = CMatrix::from_row_slice(2, 2, &[c(0.0), -I, I, c(0.0)]);
        assert!(max_abs(&(&t.components()[0] - want_x)) < 1e-15);
        assert!(max_abs(&(&t.components()[1] - want_y)) < 1e-15);

        let g3 = build_generators(3).unwrap();
        let rho = state(1, 6, 0.0);
        let fixed = conditional_expectation(3, 2, rho.matrix());
        let t = gradient(&g3, &fixed, 2);
        assert!(t.components().iter().all(|x| max_abs(x) < 1e-12));
    }

    #[test]
    fn fisher_examples() {
        let g = build_generators(2).unwrap();
        assert!(fisher_information(&g, &DensityMatrix::maximally_mixed(2), 1).unwrap().abs() < 1e-14);
        let p: f64 = 0.9;
        let rho = DensityMatrix::diagonal(&[p, 1.0 - p]).unwrap();
        let want = 8.0 * (p - 0.5) * (p / (1.0 - p)).ln();
        assert!((fisher_information(&g, &rho, 1).unwrap() - want).abs() < 1e-12);
        assert!((fisher_information_chain_rule(&g, &rho, 1).unwrap() - want).abs() < 1e-12);
        let pure = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        assert!(matches!(fisher_information(&g, &pure, 1), Err(Error::SingularState(_))));
    }

    #[test]
    fn fisher_routes_agree() {
        let mut seed = 100;
        for (m, n) in [(2, 1), (2, 2), (3, 1), (3, 2), (4, 1), (4, 2)] {
            let g = build_generators(m).unwrap();
            for _ in 0..8 {
                seed += 1;
                let rho = state(seed, m * n, 0.02);
                let a = fisher_information(&g, &rho, n).unwrap();
                let b = fisher_information_chain_rule(&g, &rho, n).unwrap();
                assert!(a >= -1e-9);
                assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-12), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn multiplier_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random::ginibre(&mut rng, 3, 3);
        let spec = PositiveSpectrum::of(&HermitianMatrix::identity(3)).unwrap();
        assert!(max_abs(&(spec.m_inverse(&f) - &f)) < 1e-13);

        let diag = [0.5, 0.3, 0.2];
        let rho = DensityMatrix::diagonal(&diag).unwrap();
        let fd = HermitianMatrix::from_real_diagonal(&[1.0, 2.0, 3.0]).into_matrix();
        let out = m_rho_inverse(&rho, &fd).unwrap();
        for i in 0..3 {
            assert!((out[(i, i)].re - fd[(i, i)].re / diag[i]).abs() < 1e-12);
        }

        for seed in 0..10 {
            let rho = state(seed, 4, 0.01);
            let f = random::ginibre(&mut rng, 4, 4);
            let back = m_rho(&rho, &m_rho_inverse(&rho, &f).unwrap()).unwrap();
            assert!(max_abs(&(back - &f)) < 1e-8);
        }
    }

    #[test]
    fn kernel_near_diagonal_is_continuous() {
        let a = 0.3;
        for rel in [1e-4, 1e-7, 1e-8, 1e-9, 1e-12] {
            let b = a * (1.0 + rel);
            let k = log_divided_difference(a, b);
            assert!((k * a - 1.0).abs() < 2.0 * rel);
            assert!((k * logarithmic_mean(a, b) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn m_inverse_matches_resolvent_integral() {
        // ∫₀^∞ (ρ+s)^{-1} f (ρ+s)^{-1} ds in the eigenbasis, substituting
        // s = e^x and using the trapezoid rule on x ∈ [−40, 40].
        let rho = state(11, 3, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = random::ginibre(&mut rng, 3, 3);
        let spec = PositiveSpectrum::of(rho.hermitian()).unwrap();
        let ev = spec.spectrum().eigenvalues.clone();
        let integral = |l: f64, m: f64| -> f64 {
            let (nodes, h) = (8000, 80.0 / 8000.0);
            (0..=nodes)
                .map(|k| {
                    let s = (-40.0 + h * k as f64).exp();
                    let w = if k == 0 || k == nodes { 0.5 } else { 1.0 };
                    w * h * s / ((l + s) * (m + s))
                })
                .sum()
        };
        let mut g = spec.spectrum().to_eigenbasis(&f);
        for i in 0..3 {
            for j in 0..3 {
                g[(i, j)] *= integral(ev[i], ev[j]);
            }
        }
        let quad = spec.spectrum().from_eigenbasis(&g);
        let exact = spec.m_inverse(&f);
        assert!(max_abs(&(quad - &exact)) < 1e-9 * max_abs(&exact));
    }

    #[test]
    fn weighted_norm_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = random::ginibre(&mut rng, 3, 3);
        let v = weighted_norm_sq(&HermitianMatrix::identity(3), &f).unwrap();
        assert!((v - frobenius(&f).powi(2)).abs() < 1e-12);
        let sigma = state(14, 3, 0.1);
        let base = weighted_norm_sq(sigma.hermitian(), &f).unwrap();
        let scaled = weighted_norm_sq(&sigma.hermitian().scale(3.5), &f).unwrap();
        assert!((scaled - base / 3.5).abs() < 1e-9 * base);
    }

    #[test]
    fn chi_square_bounds_entropy() {
        for (m, n) in [(2, 1), (2, 2), (3, 1)] {
            for seed in 0..20 {
                let rho = state(200 + seed, m * n, 0.0);
                let e = e_of(&rho, m, n);
                let d = relative_entropy(&rho, &e).unwrap();
                let chi = weighted_norm_sq(e.hermitian(), &(rho.matrix() - e.matrix())).unwrap();
                assert!(d <= chi + 1e-8);
            }
        }
    }

    #[test]
    fn k_rho_examples() {
        for m in 2..=4 {
            let g = build_generators(m).unwrap();
            let l = lindblad_generator(&g, 1).unwrap();
            let rho = state(300 + m as u64, m, 0.02);
            let log = PositiveSpectrum::of(rho.hermitian()).unwrap().log();
            let k = k_rho_apply(&g, &rho, &log, 1).unwrap();
            assert!(max_abs(&(k + l.apply(rho.matrix()))) < 1e-8);

            let mix = DensityMatrix::maximally_mixed(m);
            let f = random::hermitian(&mut ChaCha8Rng::seed_from_u64(m as u64), m).into_matrix();
            let k = k_rho_apply(&g, &mix, &f, 1).unwrap();
            assert!(max_abs(&(k + l.apply(&f) * c(1.0 / m as f64))) < 1e-10);
            assert!(max_abs(&k_rho_apply(&g, &rho, &identity(m), 1).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn operator_inequality_examples() {
        let g = build_generators(2).unwrap();
        let rho = state(400, 2, 0.1);
        let id = Superoperator::identity(2);
        let r = operator_inequality_check(&g, &rho, &id, 1.0, 20, 1, 1).unwrap();
        assert!(r.max_violation >= -1e-10);
        let r0 = operator_inequality_check(&g, &rho, &id, 0.0, 20, 1, 1).unwrap();
        assert!(r0.max_violation < 0.0);
    }

    #[test]
    fn domination_constant_examples() {
        let a = HermitianMatrix::from_real_diagonal(&[0.6, 0.4]);
        let b = HermitianMatrix::from_real_diagonal(&[0.5, 0.5]);
        assert!((domination_constant(&a, &b).unwrap() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn pure_amplified_state_against_fixed_point() {
        // ρ = |0⟩⟨0| ⊗ σ has E(ρ) = I/2 ⊗ σ and D = ln 2.
        let sigma = state(500, 2, 0.1);
        let pure = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]).into_matrix();
        let rho = DensityMatrix::from_matrix(kron(&pure, sigma.matrix())).unwrap();
        let e = e_of(&rho, 2, 2);
        assert!((relative_entropy(&rho, &e).unwrap() - 2f64.ln()).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn pinsker(seed in 0u64..10_000, dim in 2usize..5) {
            let rho = state(seed, dim, 0.0);
            let sigma = state(seed + 77_777, dim, 0.05);
            let d = relative_entropy(&rho, &sigma).unwrap();
            let tn = trace_norm(&(rho.matrix() - sigma.matrix()));
            prop_assert!(d >= 0.5 * tn * tn - 1e-9);
        }

        #[test]
        fn data_processing(seed in 0u64..10_000, m in 2usize..4, n in 1usize..3) {
            let g = build_generators(m).unwrap();
            let l = lindblad_generator(&g, n).unwrap();
            let rho = state(seed, m * n, 0.0);
            let sigma = state(seed + 1, m * n, 0.05);
            let d0 = relative_entropy(&rho, &sigma).unwrap();
            for t in [0.1, 1.0] {
                let dt = relative_entropy(&evolve(&l, &rho, t).unwrap(), &evolve(&l, &sigma, t).unwrap()).unwrap();
                prop_assert!(dt <= d0 + 1e-8);
            }
        }

        #[test]
        fn monotone_weight(seed in 0u64..10_000, dim in 2usize..5) {
            let rho = state(seed, dim, 0.1);
            let sigma = state(seed + 3, dim, 0.1);
            let cst = domination_constant(rho.hermitian(), sigma.hermitian()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random::ginibre(&mut rng, dim, dim);
            let lhs = weighted_norm_sq(sigma.hermitian(), &f).unwrap();
            let rhs = cst * weighted_norm_sq(rho.hermitian(), &f).unwrap();
            prop_assert!(lhs <= rhs + 1e-8 * rhs.max(1.0));
        }

        #[test]
        fn entropy_decays(seed in 0u64..10_000, m in 2usize..4) {
            let g = build_generators(m).unwrap();
            let l = lindblad_generator(&g, 1).unwrap();
            let e = fixed_point_projection(&l);
            let rho = state(seed, m, 0.0);
            let e_rho = DensityMatrix::from_matrix(e.apply(rho.matrix())).unwrap();
            let mut prev = f64::INFINITY;
            for k in 0..50 {
                let t = 0.02 * k as f64;
                let d = relative_entropy(&evolve(&l, &rho, t).unwrap(), &e_rho).unwrap();
                prop_assert!(d <= prev + 1e-12);
                prev = d;
            }
        }
    }
}
