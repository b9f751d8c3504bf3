//! Numerical estimates of (complete) modified log-Sobolev constants.
//!
//! The constant of `S_t = exp(t L)` at amplification `n` is the infimum of
//! `I(ρ) / (2 D(ρ‖E ρ))` over states on `C^m ⊗ C^n`. [`estimate_lambda`]
//! minimizes that ratio with a multistart simplex search over
//! `ρ = exp(H)/tr exp(H)`. The returned value is attained by the stored
//! minimizer, so it is an upper bound on the true constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entfun::{fisher_information, relative_entropy, PositiveSpectrum};
use crate::error::{invalid, Error, Result};
use crate::numkit::{c, hs_inner, kron, matrix_function, CMatrix, HermitianMatrix, MatrixFunction, C64};
use crate::qms::{apply_lindbladian, conditional_expectation, evolve, lindblad_generator, spectral_gap, DensityMatrix, Superoperator};
use crate::su2repr::{build_generators, IrrepGenerators};

/// Entropy denominators below this make the ratio undefined.
pub const ENTROPY_FLOOR: f64 = 1e-12;
/// Near-pure starts put this eigenvalue ratio between the top level and the rest.
pub const NEAR_PURE_RATIO: f64 = 1e6;
/// Norm of `H` for the slow-mode start. The ratio there is `gap + O(size²)`.
pub const SLOW_MODE_SIZE: f64 = 1e-4;
/// Largest `m · n` accepted by [`cmlsi_table`].
pub const MAX_TABLE_DIM: usize = 20;

fn check_amplification(l: &Superoperator, gen: &IrrepGenerators, rho: &DensityMatrix) -> Result<usize> {
    let n = match l.structure() {
        Some(s) if s.rep_dim == gen.dim() => s.amplification,
        Some(s) => return invalid(format!("generator built for m = {}, got m = {}", s.rep_dim, gen.dim())),
        None => return invalid("generator has no irrep structure; build it with lindblad_generator"),
    };
    if rho.dim() != l.dim() {
        return invalid(format!("state dim {} does not match generator dim {}", rho.dim(), l.dim()));
    }
    Ok(n)
}

fn fixed_point_state(gen: &IrrepGenerators, n: usize, rho: &DensityMatrix) -> DensityMatrix {
    DensityMatrix::from_matrix(conditional_expectation(gen.dim(), n, rho.matrix()))
        .expect("conditional expectation of a state is a state")
}

/// Below this entropy the ratio switches to the cancellation-free form.
pub const NEAR_FIXED_POINT: f64 = 1e-6;

/// `I(ρ) / (2 D(ρ‖E ρ))`.
///
/// Near the fixed point both `I` and `D` are `O(‖ρ − Eρ‖²)`, and the direct
/// formulas lose their leading digits to cancellation. There the ratio is
/// evaluated from `Δ = ρ − σ`, `σ = Eρ`, along `ρ_s = σ + sΔ`:
/// `D = ∫₀¹ (1−s) ⟨Δ, M⁻¹_{ρ_s} Δ⟩ ds`, `ln ρ − ln σ = ∫₀¹ M⁻¹_{ρ_s} Δ ds`
/// and `I = −tr(L(Δ)(ln ρ − ln σ))`, with Gauss–Legendre quadrature in `s`.
pub fn mlsi_ratio(l: &Superoperator, gen: &IrrepGenerators, rho: &DensityMatrix) -> Result<f64> {
    let n = check_amplification(l, gen, rho)?;
    let sigma = fixed_point_state(gen, n, rho);
    let direct = relative_entropy(rho, &sigma)?;
    let (entropy, fisher) = if direct < NEAR_FIXED_POINT {
        near_fixed_point_terms(gen, n, rho, &sigma)?
    } else {
        (direct, fisher_information(gen, rho, n)?)
    };
    if !(entropy >= ENTROPY_FLOOR) {
        return Err(Error::DegenerateDenominator(entropy));
    }
    Ok(fisher / (2.0 * entropy))
}

fn near_fixed_point_terms(
    gen: &IrrepGenerators,
    n: usize,
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
) -> Result<(f64, f64)> {
    let delta = rho.matrix() - sigma.matrix();
    let mut entropy = 0.0;
    let mut log_diff = CMatrix::zeros(delta.nrows(), delta.ncols());
    for (s, w) in gauss_legendre_unit(QUADRATURE_NODES) {
        let rho_s = HermitianMatrix::new(sigma.matrix() + &delta * c(s))?;
        let g = PositiveSpectrum::of(&rho_s)?.m_inverse(&delta);
        entropy += w * (1.0 - s) * hs_inner(&delta, &g).re;
        log_diff += g * c(w);
    }
    let fisher = -hs_inner(&apply_lindbladian(gen, n, &delta), &log_diff).re;
    Ok((entropy, fisher))
}

const QUADRATURE_NODES: usize = 12;

/// Gauss–Legendre nodes and weights on `[0, 1]` (Golub–Welsch).
pub fn gauss_legendre_unit(k: usize) -> Vec<(f64, f64)> {
    let jacobi = nalgebra::DMatrix::from_fn(k, k, |i, j| {
        if i + 1 == j || j + 1 == i {
            let b = i.max(j) as f64;
            b / (4.0 * b * b - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = nalgebra::SymmetricEigen::new(jacobi);
    let mut nodes: Vec<(f64, f64)> = (0..k)
        .map(|i| (0.5 * (eig.eigenvalues[i] + 1.0), eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    nodes
}

/// Number of real parameters of a `dim × dim` Hermitian matrix.
pub fn parameter_count(dim: usize) -> usize {
    dim * dim
}

/// Diagonal first, then real and imaginary parts of the strict upper triangle.
pub fn hermitian_from_params(theta: &[f64], dim: usize) -> CMatrix {
    let mut h = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        h[(i, i)] = c(theta[i]);
    }
    let mut k = dim;
    for i in 0..dim {
        for j in i + 1..dim {
            let z = C64::new(theta[k], theta[k + 1]);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            k += 2;
        }
    }
    h
}

pub fn params_from_hermitian(h: &CMatrix) -> Vec<f64> {
    let dim = h.nrows();
    let mut theta: Vec<f64> = (0..dim).map(|i| h[(i, i)].re).collect();
    for i in 0..dim {
        for j in i + 1..dim {
            theta.push(h[(i, j)].re);
            theta.push(h[(i, j)].im);
        }
    }
    theta
}

/// `exp(H) / tr exp(H)`, shifted by the top eigenvalue to avoid overflow.
pub fn gibbs_state(h: &CMatrix) -> Result<DensityMatrix> {
    let spec = crate::numkit::eig_hermitian(&HermitianMatrix::new(h.clone())?)?;
    let top = spec.max();
    let w = spec.map_real(|x| (x - top).exp());
    DensityMatrix::normalized(HermitianMatrix::new(w)?)
}

/// Outcome of one simplex run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
}

/// Nelder–Mead with dimension-adapted coefficients, restarted from the best
/// vertex while restarts keep improving and budget remains.
pub fn nelder_mead(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], step: f64, budget: usize, ftol: f64) -> SimplexOutcome {
    let dim = x0.len();
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    let mut evaluations = 0;
    let mut trace = Vec::new();
    let mut best_x = x0.to_vec();
    let mut best = eval(x0, &mut evaluations);
    let mut converged = false;
    if dim == 0 {
        return SimplexOutcome { x: best_x, value: best, evaluations, converged: true, trace };
    }
    let nf = dim as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    while evaluations + dim + 1 <= budget {
        let start_value = best;
        let mut simplex: Vec<(Vec<f64>, f64)> = vec![(best_x.clone(), best)];
        for i in 0..dim {
            let mut x = best_x.clone();
            x[i] += step;
            let v = eval(&x, &mut evaluations);
            simplex.push((x, v));
        }
        converged = false;
        // an iteration costs at most dim + 2 evaluations
        while evaluations + dim + 2 <= budget {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            trace.push(simplex[0].1);
            let spread = simplex[dim].1 - simplex[0].1;
            if spread.is_finite() && spread <= ftol * (simplex[0].1.abs() + 1e-300) {
                converged = true;
                break;
            }
            let centroid: Vec<f64> =
                (0..dim).map(|k| simplex[..dim].iter().map(|v| v.0[k]).sum::<f64>() / nf).collect();
            let along = |s: f64| -> Vec<f64> {
                centroid.iter().zip(&simplex[dim].0).map(|(c, w)| c + s * (c - w)).collect()
            };
            let xr = along(alpha);
            let fr = eval(&xr, &mut evaluations);
            if fr < simplex[0].1 {
                let xe = along(alpha * beta);
                let fe = eval(&xe, &mut evaluations);
                simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[dim - 1].1 {
                simplex[dim] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[dim].1 {
                    let x = along(alpha * gamma);
                    let v = eval(&x, &mut evaluations);
                    (x, v)
                } else {
                    let x = along(-gamma);
                    let v = eval(&x, &mut evaluations);
                    (x, v)
                };
                if fc < fr.min(simplex[dim].1) {
                    simplex[dim] = (xc, fc);
                } else {
                    let x0 = simplex[0].0.clone();
                    for v in simplex.iter_mut().skip(1) {
                        for (xi, bi) in v.0.iter_mut().zip(&x0) {
                            *xi = bi + delta * (*xi - bi);
                        }
                        v.1 = eval(&v.0, &mut evaluations);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < best {
            best = simplex[0].1;
            best_x = simplex[0].0.clone();
        }
        if !(start_value - best > ftol * (best.abs() + 1e-300)) {
            break;
        }
    }
    SimplexOutcome { x: best_x, value: best, evaluations, converged, trace }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    /// Small step from the fixed point along the slowest mode of `L`.
    SlowMode,
    NearFixedPoint,
    NearPure,
    Random,
    Warm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub multistarts: usize,
    /// Ratio evaluations per start.
    pub budget: usize,
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions { multistarts: 16, budget: 2000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub index: usize,
    pub kind: StartKind,
    pub initial_ratio: f64,
    pub final_ratio: f64,
    pub evaluations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioLandscapePoint {
    pub rho: DensityMatrix,
    pub ratio: f64,
    /// Central-difference gradient norm in the parameters of `H` at termination.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    pub m: usize,
    pub n: usize,
    pub lambda_hat: f64,
    pub gap: f64,
    pub best: RatioLandscapePoint,
    /// `false` if the winning start ran out of budget.
    pub converged: bool,
    pub options: OptimizerOptions,
    pub starts: Vec<StartRecord>,
}

impl LambdaEstimate {
    /// Drops the per-iteration traces.
    pub fn without_traces(mut self) -> Self {
        for s in &mut self.starts {
            s.trace.clear();
        }
        self
    }
}

fn initial_h(kind: StartKind, dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let noise = |rng: &mut ChaCha8Rng, s: f64| {
        let theta: Vec<f64> = (0..parameter_count(dim)).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect();
        hermitian_from_params(&theta, dim)
    };
    match kind {
        StartKind::NearFixedPoint => noise(rng, 0.1),
        StartKind::NearPure => {
            let mut h = noise(rng, 0.01);
            h[(0, 0)] += c(NEAR_PURE_RATIO.ln());
            h
        }
        StartKind::Random | StartKind::Warm | StartKind::SlowMode => noise(rng, 1.0),
    }
}

/// Hermitian direction of an eigenvector of `L` with eigenvalue `−gap`, scaled to norm `size`.
fn slow_mode_h(l: &Superoperator, gap: f64, size: f64) -> CMatrix {
    let spec = l.spectrum();
    let k = (0..spec.eigenvalues.len())
        .min_by(|&a, &b| (spec.eigenvalues[a] + gap).abs().total_cmp(&(spec.eigenvalues[b] + gap).abs()))
        .expect("nonempty spectrum");
    let v = crate::numkit::unvec_col(&spec.eigenvectors.column(k).into_owned(), l.dim());
    let herm = (&v + v.adjoint()) * c(0.5);
    let dir = if crate::numkit::frobenius(&herm) > 1e-8 { herm } else { (&v - v.adjoint()) * C64::new(0.0, 0.5) };
    let norm = crate::numkit::frobenius(&dir);
    dir * c(size / norm)
}

/// Multistart minimization of [`mlsi_ratio`] for `L` at its own amplification.
pub fn estimate_lambda(l: &Superoperator, gen: &IrrepGenerators, opts: &OptimizerOptions) -> Result<LambdaEstimate> {
    estimate_lambda_with_starts(l, gen, opts, &[])
}

/// As [`estimate_lambda`], with extra caller-supplied initial states.
pub fn estimate_lambda_with_starts(
    l: &Superoperator,
    gen: &IrrepGenerators,
    opts: &OptimizerOptions,
    warm: &[DensityMatrix],
) -> Result<LambdaEstimate> {
    if opts.multistarts == 0 || opts.budget == 0 {
        return invalid("multistarts and budget must be positive");
    }
    let gap = spectral_gap(l)?;
    let n = check_amplification(l, gen, &DensityMatrix::maximally_mixed(l.dim()))?;
    let dim = l.dim();
    let objective = |theta: &[f64]| -> f64 {
        gibbs_state(&hermitian_from_params(theta, dim))
            .and_then(|rho| mlsi_ratio(l, gen, &rho))
            .unwrap_or(f64::INFINITY)
    };

    let mut plans: Vec<(StartKind, CMatrix)> = (0..opts.multistarts)
        .map(|i| {
            let kind = match i {
                0 => StartKind::SlowMode,
                1 => StartKind::NearFixedPoint,
                2 => StartKind::NearPure,
                _ => StartKind::Random,
            };
            if kind == StartKind::SlowMode {
                return (kind, slow_mode_h(l, gap, SLOW_MODE_SIZE));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            (kind, initial_h(kind, dim, &mut rng))
        })
        .collect();
    for w in warm {
        if w.dim() != dim {
            return invalid(format!("warm start has dim {}, expected {dim}", w.dim()));
        }
        plans.push((StartKind::Warm, matrix_function(w.hermitian(), MatrixFunction::Log)?.into_matrix()));
    }

    let runs: Vec<(StartRecord, Vec<f64>)> = plans
        .par_iter()
        .enumerate()
        .map(|(index, (kind, h))| {
            let x0 = params_from_hermitian(h);
            let initial_ratio = objective(&x0);
            let step = if *kind == StartKind::SlowMode { 0.1 * SLOW_MODE_SIZE } else { 0.3 };
            let out = nelder_mead(objective, &x0, step, opts.budget, 1e-12);
            let record = StartRecord {
                index,
                kind: *kind,
                initial_ratio,
                final_ratio: out.value,
                evaluations: out.evaluations,
                converged: out.converged,
                trace: out.trace,
            };
            (record, out.x)
        })
        .collect();
    let (winner, best_x) = runs
        .iter()
        .min_by(|a, b| a.0.final_ratio.total_cmp(&b.0.final_ratio).then(a.0.index.cmp(&b.0.index)))
        .expect("at least one start");
    if !winner.final_ratio.is_finite() {
        return Err(Error::DegenerateDenominator(0.0));
    }
    let rho = gibbs_state(&hermitian_from_params(best_x, dim))?;
    let ratio = mlsi_ratio(l, gen, &rho)?;
    let h = 1e-6;
    let grad_norm = (0..best_x.len())
        .map(|k| {
            let mut xp = best_x.clone();
            let mut xm = best_x.clone();
            xp[k] += h;
            xm[k] -= h;
            ((objective(&xp) - objective(&xm)) / (2.0 * h)).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    Ok(LambdaEstimate {
        m: gen.dim(),
        n,
        lambda_hat: ratio,
        gap,
        converged: winner.converged,
        best: RatioLandscapePoint { rho, ratio, grad_norm },
        options: *opts,
        starts: runs.into_iter().map(|r| r.0).collect(),
    })
}

/// `ρ ⊕ fixed point`: embeds a state of amplification `n_from` into
/// amplification `n_to > n_from` without changing its ratio.
///
/// The ancilla space splits as `C^{n_from} ⊕ C^{n_to − n_from}`; the second
/// block carries `I/m ⊗ I/(n_to − n_from)`, which has zero entropy and zero
/// Fisher information, and both quantities are additive over the blocks.
pub fn lift_state(rho: &DensityMatrix, m: usize, n_from: usize, n_to: usize, weight: f64) -> Result<DensityMatrix> {
    if n_to <= n_from || rho.dim() != m * n_from || !(weight > 0.0 && weight < 1.0) {
        return invalid("lift_state needs n_to > n_from, a matching state and weight in (0, 1)");
    }
    let (nf, nt) = (n_from, n_to);
    let mut out = CMatrix::zeros(m * nt, m * nt);
    let fill = 1.0 / (m * (nt - nf)) as f64;
    for a in 0..m {
        for b in 0..m {
            for i in 0..nf {
                for j in 0..nf {
                    out[(a * nt + i, b * nt + j)] = rho.matrix()[(a * nf + i, b * nf + j)] * weight;
                }
            }
        }
        for i in nf..nt {
            out[(a * nt + i, a * nt + i)] = c((1.0 - weight) * fill);
        }
    }
    DensityMatrix::from_matrix(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub m: usize,
    pub n: usize,
    pub lambda_hat: f64,
    pub gap: f64,
    pub starts: usize,
    pub budget: usize,
    pub seed: u64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmlsiTable {
    pub rows: Vec<TableRow>,
}

impl CmlsiTable {
    pub fn get(&self, m: usize, n: usize) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.m == m && r.n == n)
    }
}

/// `λ_hat(m, n)` over the grid. Within each `m`, amplifications run in
/// increasing order and every cell also starts from the previous cell's
/// minimizer lifted by [`lift_state`], so each row is non-increasing in `n`.
pub fn cmlsi_table(m_list: &[usize], n_list: &[usize], opts: &OptimizerOptions) -> Result<CmlsiTable> {
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.first() == Some(&0) {
        return invalid("amplifications must be positive");
    }
    let mut rows = Vec::new();
    for &m in m_list {
        if m * ns.last().copied().unwrap_or(0) > MAX_TABLE_DIM {
            return invalid(format!("m·n must be at most {MAX_TABLE_DIM}"));
        }
        let gen = build_generators(m)?;
        let mut previous: Option<(usize, DensityMatrix)> = None;
        for &n in &ns {
            let l = lindblad_generator(&gen, n)?;
            let warm = match &previous {
                Some((pn, rho)) => vec![lift_state(rho, m, *pn, n, 0.9)?],
                None => vec![],
            };
            let est = estimate_lambda_with_starts(&l, &gen, opts, &warm)?;
            rows.push(TableRow {
                m,
                n,
                lambda_hat: est.lambda_hat,
                gap: est.gap,
                starts: opts.multistarts,
                budget: opts.budget,
                seed: opts.seed,
                converged: est.converged,
            });
            previous = Some((n, est.best.rho));
        }
    }
    Ok(CmlsiTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryChecks {
    /// Entropies non-increasing (up to rounding) and ≥ −1e-10.
    pub monotone: bool,
    /// Largest `D(t) − e^{−2λt} D(0) (1 + 1e-6)`; positive means the envelope is violated.
    pub max_envelope_excess: Option<f64>,
    /// Largest `|D'(t) + I(t)| / I(t)` with `D'` from central differences.
    pub derivative_max_rel_error: f64,
    pub derivative_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTrajectory {
    pub times: Vec<f64>,
    pub entropies: Vec<f64>,
    pub fisher: Vec<f64>,
    pub rho0: DensityMatrix,
    pub lambda_hat: Option<f64>,
    pub checks: TrajectoryChecks,
}

/// Step of the central differences in [`decay_trajectory`].
pub const DERIVATIVE_STEP: f64 = 1e-4;
/// Fisher values below this are too small for a relative derivative check.
const DERIVATIVE_FLOOR: f64 = 1e-8;

/// `D(S_tρ₀‖Eρ₀)` and `I(S_tρ₀)` on `times`, with the decay checks.
pub fn decay_trajectory(
    l: &Superoperator,
    gen: &IrrepGenerators,
    rho0: &DensityMatrix,
    times: &[f64],
    lambda_hat: Option<f64>,
) -> Result<DecayTrajectory> {
    let n = check_amplification(l, gen, rho0)?;
    if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("time grid must be nonempty, nonnegative and strictly increasing");
    }
    let target = fixed_point_state(gen, n, rho0);
    let entropy_at = |t: f64| -> Result<f64> { relative_entropy(&evolve(l, rho0, t)?, &target) };
    let rows = times
        .par_iter()
        .map(|&t| {
            let rho = evolve(l, rho0, t)?;
            Ok((relative_entropy(&rho, &target)?, fisher_information(gen, &rho, n)?))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let entropies: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let fisher: Vec<f64> = rows.iter().map(|r| r.1).collect();

    let d0 = entropies[0];
    let slack = 1e-12 * d0.abs() + 1e-14;
    let monotone = entropies.iter().all(|&d| d >= -1e-10) && entropies.windows(2).all(|w| w[1] <= w[0] + slack);
    let max_envelope_excess = lambda_hat.map(|lam| {
        times
            .iter()
            .zip(&entropies)
            .map(|(&t, &d)| d - (-2.0 * lam * t).exp() * d0 * (1.0 + 1e-6))
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let mut derivative_max_rel_error: f64 = 0.0;
    let mut derivative_points = 0;
    for i in 1..times.len().saturating_sub(1) {
        let t = times[i];
        if t < DERIVATIVE_STEP || fisher[i] < DERIVATIVE_FLOOR {
            continue;
        }
        let fd = (entropy_at(t + DERIVATIVE_STEP)? - entropy_at(t - DERIVATIVE_STEP)?) / (2.0 * DERIVATIVE_STEP);
        derivative_max_rel_error = derivative_max_rel_error.max((fd + fisher[i]).abs() / fisher[i]);
        derivative_points += 1;
    }
    Ok(DecayTrajectory {
        times: times.to_vec(),
        entropies,
        fisher,
        rho0: rho0.clone(),
        lambda_hat,
        checks: TrajectoryChecks { monotone, max_envelope_excess, derivative_max_rel_error, derivative_points },
    })
}

/// `ρ ⊗ σ` as a state, used for product starts and tests.
pub fn product_state(rho: &DensityMatrix, sigma: &DensityMatrix) -> DensityMatrix {
    DensityMatrix::from_matrix(kron(rho.matrix(), sigma.matrix())).expect("product of states is a state")
}
