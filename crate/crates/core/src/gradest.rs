//! Gradient-estimate constants `C(t)` for the SU(2) sub-Laplacian, their
//! integral `κ`, and the constants `λ = 1/(2κ)` and `λ_ε = (1−ε)/(2κ_ε)`.
//!
//! `C(t)` is the best constant in `Γ(P_t f) ≤ C(t) P_t Γ(f)` for real scalar
//! `f`. Two estimators are provided. [`GradientEnsemble`] takes the maximum
//! of the pointwise ratio over random functions and Haar points, which is a
//! lower bound on the true constant. [`BandSupremum`] computes the exact
//! supremum over a whole band: both sides commute with left translations,
//! so the supremum over points can be taken at the identity, where the
//! ratio is a quotient of two Hermitian forms in the coefficients.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numkit::{eig_unchecked, matrix_function, CMatrix, HermitianMatrix, MatrixFunction, C64, ZERO};
use crate::pwfun::{
    band_size, design_heat_weights, identity_design_row, min_points, BandLimitedFunction, BandProjector,
    GeneratorFamily, PointCache,
};
use crate::su2repr::{haar_sample_with, Direction, GroupElement};

pub const DEFAULT_RIDGE: f64 = 1e-10;
/// Pointwise denominators below this are skipped and counted.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;
/// Tail fits use grid points with `t ≥` this value when there are enough of them.
pub const TAIL_T_MIN: f64 = 1.0;
const BOOTSTRAP_ROUNDS: usize = 200;

/// `{0}` followed by 40 log-spaced points in `[0.01, 3]`.
pub fn default_time_grid() -> Vec<f64> {
    let (lo, hi, k) = (0.01f64.ln(), 3f64.ln(), 40);
    std::iter::once(0.0)
        .chain((0..k).map(|i| (lo + (hi - lo) * i as f64 / (k - 1) as f64).exp()))
        .collect()
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One point of an estimated curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub t: f64,
    pub c_hat: f64,
    /// Bootstrap standard deviation of the maximum over ensemble members.
    pub stderr: f64,
    pub skipped: usize,
    pub evaluated: usize,
}

/// Functions, points and the projected `Γ(f)` of every member, ready to be
/// evaluated at any `t`.
#[derive(Debug, Clone)]
pub struct GradientEnsemble {
    fam: GeneratorFamily,
    m_max: usize,
    seed: u64,
    projector: BandProjector,
    functions: Vec<BandLimitedFunction>,
    gamma: Vec<DVector<C64>>,
    max_fit_residual: f64,
}

impl GradientEnsemble {
    /// Random real scalar functions of unit norm on bands `≤ m_max`. Points
    /// come from stream 0 of `seed`, member `k` from stream `k + 1`, so a
    /// smaller ensemble is always a prefix of a larger one.
    pub fn random(m_max: usize, ensemble: usize, points: usize, seed: u64) -> Result<Self> {
        if m_max == 0 || ensemble == 0 {
            return invalid("m_max and ensemble must be positive");
        }
        let fam = GeneratorFamily::new(2 * m_max - 1)?;
        let pts = haar_sample_with(&mut stream_rng(seed, 0), points);
        let functions = (0..ensemble)
            .into_par_iter()
            .map(|k| BandLimitedFunction::random_real(&mut stream_rng(seed, k as u64 + 1), &fam, m_max))
            .collect();
        GradientEnsemble::build(fam, functions, pts, m_max, seed)
    }

    /// An explicit list of scalar functions on bands `≤ m_max`.
    pub fn from_functions(
        functions: Vec<BandLimitedFunction>,
        points: Vec<GroupElement>,
        m_max: usize,
    ) -> Result<Self> {
        if m_max == 0 || functions.iter().any(|f| f.value_dim() != 1 || f.m_max() > m_max) {
            return invalid("ensemble functions must be scalar and within the band");
        }
        let fam = GeneratorFamily::new(2 * m_max - 1)?;
        GradientEnsemble::build(fam, functions, points, m_max, 0)
    }

    fn build(
        fam: GeneratorFamily,
        functions: Vec<BandLimitedFunction>,
        points: Vec<GroupElement>,
        m_max: usize,
        seed: u64,
    ) -> Result<Self> {
        let band = 2 * m_max - 1;
        let need = min_points(band, 1);
        if points.len() < need {
            return invalid(format!("{} points, need at least {need} for band {band}", points.len()));
        }
        let projector = BandProjector::new(PointCache::new(&fam, points, band)?, DEFAULT_RIDGE)?;
        let fits = functions
            .par_iter()
            .map(|f| {
                let g = projector.cache().gamma_scalar(&fam, f, f)?;
                let fit = projector.fit_scalar(&g)?;
                Ok((fit.function.to_design_coeffs().column(0).into_owned(), fit.relative_residual))
            })
            .collect::<Result<Vec<_>>>()?;
        let max_fit_residual = fits.iter().map(|x| x.1).fold(0.0, f64::max);
        let gamma = fits.into_iter().map(|x| x.0).collect();
        Ok(GradientEnsemble { fam, m_max, seed, projector, functions, gamma, max_fit_residual })
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn ensemble_size(&self) -> usize {
        self.functions.len()
    }

    pub fn points(&self) -> usize {
        self.projector.cache().len()
    }

    pub fn functions(&self) -> &[BandLimitedFunction] {
        &self.functions
    }

    /// Largest relative residual of the band projections of `Γ(f)`.
    pub fn max_fit_residual(&self) -> f64 {
        self.max_fit_residual
    }

    /// Per-member maxima of `Γ(P_t f)(g) / (P_t Γ(f))(g)` with skip counts.
    fn member_maxima(&self, t: f64) -> Result<Vec<(Option<f64>, usize)>> {
        let band = 2 * self.m_max - 1;
        let weights = design_heat_weights(band, t);
        let cache = self.projector.cache();
        self.functions
            .par_iter()
            .zip(&self.gamma)
            .map(|(f, gamma)| {
                let pf = f.heat_semigroup(t)?;
                let num = cache.gamma_scalar(&self.fam, &pf, &pf)?;
                let heated = DVector::from_iterator(gamma.len(), gamma.iter().zip(&weights).map(|(z, w)| z * *w));
                let den = cache.design() * heated;
                let mut best: Option<f64> = None;
                let mut skipped = 0;
                for (a, b) in num.iter().zip(den.iter()) {
                    if b.re < DENOMINATOR_FLOOR {
                        skipped += 1;
                    } else {
                        let r = a.re / b.re;
                        best = Some(best.map_or(r, |x: f64| x.max(r)));
                    }
                }
                Ok((best, skipped))
            })
            .collect()
    }

    pub fn ratio(&self, t: f64) -> Result<RatioEstimate> {
        if !(t >= 0.0) {
            return invalid(format!("time must be nonnegative, got {t}"));
        }
        let maxima = self.member_maxima(t)?;
        let skipped: usize = maxima.iter().map(|m| m.1).sum();
        let total = self.functions.len() * self.points();
        let values: Vec<f64> = maxima.iter().filter_map(|m| m.0).collect();
        if values.is_empty() {
            return Err(Error::DegenerateEnsemble { skipped });
        }
        let c_hat = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(RatioEstimate {
            t,
            c_hat,
            stderr: bootstrap_max_sd(&values, self.seed),
            skipped,
            evaluated: total - skipped,
        })
    }

    pub fn curve(&self, times: &[f64]) -> Result<GradientEstimateCurve> {
        check_grid(times)?;
        let est = times.iter().map(|&t| self.ratio(t)).collect::<Result<Vec<_>>>()?;
        Ok(GradientEstimateCurve {
            times: times.to_vec(),
            c_hat: est.iter().map(|e| e.c_hat).collect(),
            stderr: est.iter().map(|e| e.stderr).collect(),
            skipped: est.iter().map(|e| e.skipped).collect(),
            ensemble_size: self.ensemble_size(),
            points: self.points(),
            m_max: self.m_max,
            seed: self.seed,
        })
    }
}

fn bootstrap_max_sd(values: &[f64], seed: u64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut rng = stream_rng(seed, u64::MAX);
    let maxima: Vec<f64> = (0..BOOTSTRAP_ROUNDS)
        .map(|_| (0..values.len()).map(|_| values[rng.random_range(0..values.len())]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mean = maxima.iter().sum::<f64>() / maxima.len() as f64;
    (maxima.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (maxima.len() - 1) as f64).sqrt()
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("time grid must be nonempty, nonnegative and strictly increasing");
    }
    Ok(())
}

/// `C_hat(t)` for a fresh random ensemble.
pub fn estimate_c(t: f64, ensemble: usize, points: usize, m_max: usize, seed: u64) -> Result<RatioEstimate> {
    GradientEnsemble::random(m_max, ensemble, points, seed)?.ratio(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimateCurve {
    pub times: Vec<f64>,
    pub c_hat: Vec<f64>,
    pub stderr: Vec<f64>,
    pub skipped: Vec<usize>,
    pub ensemble_size: usize,
    pub points: usize,
    pub m_max: usize,
    pub seed: u64,
}

impl GradientEstimateCurve {
    /// A curve sampled from a known function, with zero error bars.
    pub fn synthetic(times: &[f64], c: impl Fn(f64) -> f64) -> Result<Self> {
        check_grid(times)?;
        Ok(GradientEstimateCurve {
            times: times.to_vec(),
            c_hat: times.iter().map(|&t| c(t)).collect(),
            stderr: vec![0.0; times.len()],
            skipped: vec![0; times.len()],
            ensemble_size: 0,
            points: 0,
            m_max: 0,
            seed: 0,
        })
    }

    /// `∫₀^T C`, interpolating each segment exponentially (exact for
    /// exponential curves) and extrapolating beyond the grid with `tail`.
    fn integral_to(&self, upper: f64, tail: Option<&DecayFit>) -> f64 {
        let mut total = 0.0;
        for w in 0..self.times.len().saturating_sub(1) {
            let (ta, tb) = (self.times[w], self.times[w + 1]);
            if ta >= upper {
                break;
            }
            let (ca, cb) = (self.c_hat[w], self.c_hat[w + 1]);
            let end = tb.min(upper);
            total += segment_integral(ta, ca, tb, cb, end);
        }
        let last = *self.times.last().expect("nonempty grid");
        if upper > last {
            total += match tail {
                Some(fit) if fit.rate.abs() > 1e-300 => {
                    fit.prefactor * ((fit.rate * upper).exp() - (fit.rate * last).exp()) / fit.rate
                }
                Some(fit) => fit.prefactor * (upper - last),
                None => self.c_hat.last().unwrap() * (upper - last),
            };
        }
        total
    }

    fn trapezoid(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.c_hat.windows(2))
            .map(|(t, c)| 0.5 * (t[1] - t[0]) * (c[0] + c[1]))
            .sum()
    }
}

/// `∫_{ta}^{end} C` for the exponential through `(ta, ca)` and `(tb, cb)`.
fn segment_integral(ta: f64, ca: f64, tb: f64, cb: f64, end: f64) -> f64 {
    let h = end - ta;
    if ca <= 0.0 || cb <= 0.0 {
        let c_end = ca + (cb - ca) * h / (tb - ta);
        return 0.5 * h * (ca + c_end);
    }
    let slope = (cb / ca).ln() / (tb - ta);
    if (slope * h).abs() < 1e-12 {
        ca * h
    } else {
        ca * (slope * h).exp_m1() / slope
    }
}

/// Least-squares line through `(t, ln C_hat)` on `t ≥ t_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub points_used: usize,
    pub t_min: f64,
    /// `rate < 0`; a flat or growing tail cannot be integrated.
    pub integrable: bool,
}

pub fn fit_decay(curve: &GradientEstimateCurve, t_min: f64) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = curve
        .times
        .iter()
        .zip(&curve.c_hat)
        .filter(|(t, _)| **t >= t_min)
        .map(|(&t, &c)| (t, c))
        .collect();
    if pts.len() < 5 {
        return invalid(format!("{} grid points with t ≥ {t_min}, need at least 5", pts.len()));
    }
    if let Some((t, c)) = pts.iter().find(|(_, c)| !(*c > 0.0)) {
        return invalid(format!("C_hat({t}) = {c} is not positive"));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1.ln() - my)).sum();
    let rate = sxy / sxx;
    let intercept = my - rate * mt;
    let ss_tot: f64 = pts.iter().map(|p| (p.1.ln() - my).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1.ln() - intercept - rate * p.0).powi(2)).sum();
    let r_squared = if ss_tot <= 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(DecayFit {
        rate,
        prefactor: intercept.exp(),
        r_squared,
        points_used: pts.len(),
        t_min,
        integrable: rate < -1e-8,
    })
}

/// Tail fit on `t ≥ 1`, or on the last five grid points if the grid is short.
pub fn tail_fit(curve: &GradientEstimateCurve) -> Result<DecayFit> {
    match fit_decay(curve, TAIL_T_MIN) {
        Ok(fit) => Ok(fit),
        Err(_) if curve.times.len() >= 5 => fit_decay(curve, curve.times[curve.times.len() - 5]),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmlsiEstimate {
    pub kappa: f64,
    pub lambda: f64,
    pub t_cutoff: f64,
    pub tail_model: String,
    pub tail_rate: f64,
    pub tail_prefactor: f64,
    pub tail_r_squared: f64,
    /// Grid part of `κ` (exponential segments) and the tail completion.
    pub kappa_grid: f64,
    pub kappa_tail: f64,
    /// Plain trapezoid value of the grid part, for comparison.
    pub kappa_trapezoid: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

/// `κ = ∫₀^∞ C_hat`, `λ = 1/(2κ)`.
pub fn kappa_and_lambda(curve: &GradientEstimateCurve) -> Result<CmlsiEstimate> {
    let fit = tail_fit(curve)?;
    if !fit.integrable {
        return Err(Error::NonIntegrableTail { rate: fit.rate });
    }
    let last = *curve.times.last().unwrap();
    let kappa_grid = curve.integral_to(last, None);
    let kappa_tail = -fit.prefactor * (fit.rate * last).exp() / fit.rate;
    let kappa = kappa_grid + kappa_tail;
    Ok(CmlsiEstimate {
        kappa,
        lambda: 1.0 / (2.0 * kappa),
        t_cutoff: last,
        tail_model: "exponential".into(),
        tail_rate: fit.rate,
        tail_prefactor: fit.prefactor,
        tail_r_squared: fit.r_squared,
        kappa_grid,
        kappa_tail,
        kappa_trapezoid: curve.trapezoid(),
        eps: None,
    })
}

/// Grid of `ε` values scanned by [`lambda_eps_best`].
pub const EPS_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// `λ_ε = (1−ε)/(2κ_ε)` with `κ_ε = ∫₀^{t(ε)} C_hat` and the mixing-time
/// bound `t(ε) = ln(1/ε)/gap`.
pub fn lambda_eps(curve: &GradientEstimateCurve, gap: f64, eps: f64) -> Result<CmlsiEstimate> {
    if !(eps > 0.0 && eps < 1.0) {
        return invalid(format!("ε must lie in (0, 1), got {eps}"));
    }
    if !(gap > 0.0) {
        return invalid(format!("gap must be positive, got {gap}"));
    }
    let t_eps = (1.0 / eps).ln() / gap;
    let last = *curve.times.last().unwrap();
    let tail = if t_eps > last { tail_fit(curve).ok() } else { None };
    let kappa = curve.integral_to(t_eps, tail.as_ref());
    let kappa_grid = curve.integral_to(t_eps.min(last), None);
    Ok(CmlsiEstimate {
        kappa,
        lambda: (1.0 - eps) / (2.0 * kappa),
        t_cutoff: t_eps,
        tail_model: if tail.is_some() { "exponential".into() } else { "none".into() },
        tail_rate: tail.map_or(0.0, |f| f.rate),
        tail_prefactor: tail.map_or(0.0, |f| f.prefactor),
        tail_r_squared: tail.map_or(1.0, |f| f.r_squared),
        kappa_grid,
        kappa_tail: kappa - kappa_grid,
        kappa_trapezoid: f64::NAN,
        eps: Some(eps),
    })
}

/// The largest `λ_ε` over [`EPS_GRID`].
pub fn lambda_eps_best(curve: &GradientEstimateCurve, gap: f64) -> Result<CmlsiEstimate> {
    let mut best: Option<CmlsiEstimate> = None;
    for eps in EPS_GRID {
        let e = lambda_eps(curve, gap, eps)?;
        if best.as_ref().is_none_or(|b| e.lambda > b.lambda) {
            best = Some(e);
        }
    }
    Ok(best.expect("nonempty grid"))
}

/// Exact `sup_f Γ(P_t f)(e) / (P_t Γ(f))(e)` over all nonconstant `f` in
/// bands `≤ m_max`.
///
/// With basis functions `φ_{(m,a,c)} = π_m[c, a]`, the numerator form is
/// `Q1 = Σ_V d_V d_V†` with `d_V = e^{t h_a} (V_m)_{ca}`. The denominator
/// form `Q2_{ij} = (P_t Γ(φ_i, φ_j))(e)` comes from a band `2 m_max − 1`
/// fit of `Γ(φ_i, φ_j)`, which is exact because these products lie in that
/// band.
#[derive(Debug, Clone)]
pub struct BandSupremum {
    fam: GeneratorFamily,
    m_max: usize,
    /// `(Vφ_j)(g_k)` for V = X, Y; basis without the constant.
    d: [CMatrix; 2],
    fit: CMatrix,
    e_row: Vec<C64>,
}

impl BandSupremum {
    pub fn new(m_max: usize, seed: u64) -> Result<Self> {
        if m_max < 2 {
            return invalid("band supremum needs m_max ≥ 2");
        }
        let band = 2 * m_max - 1;
        let fam = GeneratorFamily::new(band)?;
        let pts = haar_sample_with(&mut stream_rng(seed, 0), 4 * band_size(band));
        let cache = PointCache::new(&fam, pts, band)?;
        let projector = BandProjector::new(cache, DEFAULT_RIDGE)?;
        let design = projector.cache().design();
        let k = band_size(m_max) - 1;
        let d = Direction::HORIZONTAL.map(|dir| {
            let mut out = CMatrix::zeros(design.nrows(), k);
            let mut col = 0;
            let mut offset = 1;
            for m in 2..=m_max {
                let v = fam.get(m).get(dir);
                for a in 0..m {
                    for ci in 0..m {
                        // (π V)_{ca} = Σ_x π_{cx} V_{xa}, π_{cx} at design column (m, x, c)
                        for row in 0..design.nrows() {
                            let mut z = ZERO;
                            for x in 0..m {
                                z += design[(row, offset + x * m + ci)] * v[(x, a)];
                            }
                            out[(row, col)] = z;
                        }
                        col += 1;
                    }
                }
                offset += m * m;
            }
            out
        });
        Ok(BandSupremum { fit: projector.fit_operator(), e_row: identity_design_row(band), fam, m_max, d })
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    fn forms(&self, t: f64) -> (CMatrix, CMatrix) {
        let k = band_size(self.m_max) - 1;
        let mut dv = [DVector::from_element(k, ZERO), DVector::from_element(k, ZERO)];
        let mut col = 0;
        for m in 2..=self.m_max {
            let h = crate::su2repr::horizontal_eigenvalues(m);
            for a in 0..m {
                for ci in 0..m {
                    for (slot, dir) in Direction::HORIZONTAL.iter().enumerate() {
                        dv[slot][col] = self.fam.get(m).get(*dir)[(ci, a)] * (t * h[a]).exp();
                    }
                    col += 1;
                }
            }
        }
        let q1 = dv.iter().fold(CMatrix::zeros(k, k), |acc, d| acc + d.conjugate() * d.transpose());

        let band = 2 * self.m_max - 1;
        let w = design_heat_weights(band, t);
        let u = DVector::from_iterator(w.len(), self.e_row.iter().zip(&w).map(|(e, w)| e * *w));
        let omega = self.fit.transpose() * u;
        let mut q2 = CMatrix::zeros(k, k);
        for d in &self.d {
            let weighted = CMatrix::from_fn(d.nrows(), k, |r, j| d[(r, j)] * omega[r]);
            q2 += d.adjoint() * weighted;
        }
        (q1, q2)
    }

    /// Largest generalized eigenvalue of `(Q1, Q2)` on the range of `Q2`.
    pub fn at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return invalid(format!("time must be nonnegative, got {t}"));
        }
        let (q1, q2) = self.forms(t);
        let q2 = HermitianMatrix::new(q2)?;
        let spec = eig_unchecked(q2.matrix());
        let top = spec.max();
        let keep: Vec<usize> = (0..spec.eigenvalues.len()).filter(|&i| spec.eigenvalues[i] > 1e-10 * top).collect();
        let basis = CMatrix::from_fn(q1.nrows(), keep.len(), |r, j| {
            spec.eigenvectors[(r, keep[j])] / spec.eigenvalues[keep[j]].sqrt()
        });
        let reduced = basis.adjoint() * q1 * &basis;
        Ok(eig_unchecked(&HermitianMatrix::new(reduced)?.into_matrix()).max())
    }
}

/// `C_hat` raised to the exact band supremum where the ensemble misses it.
pub fn certified_constant(estimate: &RatioEstimate, sup: &BandSupremum) -> Result<f64> {
    Ok(estimate.c_hat.max(sup.at(estimate.t)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixGeReport {
    /// Smallest eigenvalue of `C [P_tΓ(f_i,f_j)] − [Γ(P_t f_i, P_t f_j)]` over points.
    pub min_margin: f64,
    /// Largest eigenvalue of `C [P_tΓ(f_i,f_j)]` over points.
    pub scale: f64,
    pub points: usize,
    pub max_fit_residual: f64,
}

/// Checks `[Γ(P_t f_i, P_t f_j)] ≤ C [P_t Γ(f_i, f_j)]` pointwise.
pub fn matrix_ge_check(
    f_list: &[BandLimitedFunction],
    t: f64,
    c: f64,
    points: &[GroupElement],
) -> Result<MatrixGeReport> {
    let n = f_list.len();
    if n == 0 || f_list.iter().any(|f| f.value_dim() != 1) {
        return invalid("matrix_ge_check needs a nonempty list of scalar functions");
    }
    let m_max = f_list.iter().map(|f| f.m_max()).max().unwrap();
    let band = 2 * m_max - 1;
    let fam = GeneratorFamily::new(band)?;
    if points.len() < min_points(band, 1) {
        return invalid(format!("need at least {} points", min_points(band, 1)));
    }
    let projector = BandProjector::new(PointCache::new(&fam, points.to_vec(), band)?, DEFAULT_RIDGE)?;
    let cache = projector.cache();
    let weights = design_heat_weights(band, t);
    let pf = f_list.iter().map(|f| f.heat_semigroup(t)).collect::<Result<Vec<_>>>()?;
    let np = points.len();
    let mut lhs = vec![CMatrix::zeros(n, n); np];
    let mut rhs = vec![CMatrix::zeros(n, n); np];
    let mut max_fit_residual: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            let gp = cache.gamma_scalar(&fam, &pf[i], &pf[j])?;
            let fit = projector.fit_scalar(&cache.gamma_scalar(&fam, &f_list[i], &f_list[j])?)?;
            max_fit_residual = max_fit_residual.max(fit.relative_residual);
            let x = fit.function.to_design_coeffs();
            let heated = DVector::from_iterator(x.nrows(), x.iter().zip(&weights).map(|(z, w)| z * *w));
            let pg = cache.design() * heated;
            for k in 0..np {
                lhs[k][(i, j)] = gp[k];
                lhs[k][(j, i)] = gp[k].conj();
                rhs[k][(i, j)] = pg[k];
                rhs[k][(j, i)] = pg[k].conj();
            }
        }
    }
    let per_point: Vec<(f64, f64)> = lhs
        .par_iter()
        .zip(&rhs)
        .map(|(l, r)| {
            let cr = r * crate::numkit::c(c);
            let margin = eig_unchecked(&HermitianMatrix::symmetrize(&cr - l).into_matrix()).min();
            let scale = eig_unchecked(&HermitianMatrix::symmetrize(cr).into_matrix()).max().abs();
            (margin, scale)
        })
        .collect();
    Ok(MatrixGeReport {
        min_margin: per_point.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        scale: per_point.iter().map(|p| p.1).fold(0.0, f64::max),
        points: np,
        max_fit_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiebReport {
    /// Monte-Carlo estimates of both sides (right side includes `C`).
    pub lhs: f64,
    pub rhs: f64,
    /// Mean of the per-sample differences `rhs_k − lhs_k` and its standard error.
    pub margin: f64,
    pub stderr: f64,
    pub relative_margin: f64,
}

/// Compares `⟨∇P_tF, A^s (∇P_tF) B^{1−s}⟩` with
/// `C ⟨∇F, (P_tA)^s (∇F) (P_tB)^{1−s}⟩` by Haar Monte Carlo on `points`.
#[allow(clippy::too_many_arguments)]
pub fn lieb_form_check(
    f: &BandLimitedFunction,
    a: &BandLimitedFunction,
    b: &BandLimitedFunction,
    s: f64,
    t: f64,
    c: f64,
    points: &[GroupElement],
) -> Result<LiebReport> {
    if !(0.0..=1.0).contains(&s) {
        return invalid(format!("s must lie in [0, 1], got {s}"));
    }
    let n = f.value_dim();
    if a.value_dim() != n || b.value_dim() != n {
        return invalid("F, A and B must share the value dimension");
    }
    if points.len() < 2 {
        return invalid("need at least two sample points");
    }
    let band = f.m_max().max(a.m_max()).max(b.m_max());
    let fam = GeneratorFamily::new(band)?;
    let cache = PointCache::new(&fam, points.to_vec(), band)?;
    let pf = f.heat_semigroup(t)?;
    let grads = |h: &BandLimitedFunction| -> Result<Vec<Vec<CMatrix>>> {
        Direction::HORIZONTAL.iter().map(|&d| cache.evaluate(&h.vector_field(&fam, d))).collect()
    };
    let grad_pf = grads(&pf)?;
    let grad_f = grads(f)?;
    let av = cache.evaluate(a)?;
    let bv = cache.evaluate(b)?;
    let pav = cache.evaluate(&a.heat_semigroup(t)?)?;
    let pbv = cache.evaluate(&b.heat_semigroup(t)?)?;
    let power = |m: &CMatrix, p: f64| -> Result<CMatrix> {
        let h = HermitianMatrix::new(m.clone())?;
        if crate::numkit::min_eigenvalue(&h) <= crate::numkit::EIG_FLOOR {
            return invalid("weight function is not strictly positive at a sample point");
        }
        Ok(matrix_function(&h, MatrixFunction::Power(p))?.into_matrix())
    };
    let form = |grad: &[Vec<CMatrix>], k: usize, left: &CMatrix, right: &CMatrix| -> f64 {
        grad.iter().map(|g| (g[k].adjoint() * left * &g[k] * right).trace().re).sum()
    };
    let samples = (0..points.len())
        .into_par_iter()
        .map(|k| {
            let l = form(&grad_pf, k, &power(&av[k], s)?, &power(&bv[k], 1.0 - s)?);
            let r = c * form(&grad_f, k, &power(&pav[k], s)?, &power(&pbv[k], 1.0 - s)?);
            Ok((l, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let nf = samples.len() as f64;
    let lhs = samples.iter().map(|x| x.0).sum::<f64>() / nf;
    let rhs = samples.iter().map(|x| x.1).sum::<f64>() / nf;
    let margin = rhs - lhs;
    let var = samples.iter().map(|x| (x.1 - x.0 - margin).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok(LiebReport {
        lhs,
        rhs,
        margin,
        stderr: (var / nf).sqrt(),
        relative_margin: if rhs.abs() > 0.0 { margin / rhs.abs() } else { 0.0 },
    })
}

/// `I + 0.9 H / ‖H‖_∞` for a random Hermitian-valued `H`, strictly positive
/// everywhere (`≥ 0.1 I`), using `‖H(g)‖ ≤ Σ_m m ‖H_m‖_F` as the sup bound.
pub fn random_positive_function<R: Rng + ?Sized>(
    rng: &mut R,
    fam: &GeneratorFamily,
    m_max: usize,
    n: usize,
) -> BandLimitedFunction {
    let h = BandLimitedFunction::random_hermitian(rng, fam, m_max, n);
    let bound: f64 = h.coeffs().iter().enumerate().map(|(i, a)| (i + 1) as f64 * a.norm()).sum();
    let id = BandLimitedFunction::constant(&crate::numkit::identity(n), m_max);
    id.add(&h.scale(crate::numkit::c(0.9 / bound)))
}
