use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use hypolog::entfun::fisher_information;
use hypolog::gradest::{
    certified_constant, kappa_and_lambda, lambda_eps_best, lieb_form_check, matrix_ge_check, random_positive_function,
    BandSupremum, GradientEnsemble, GradientEstimateCurve,
};
use hypolog::mlsiopt::{cmlsi_table, decay_trajectory, estimate_lambda, OptimizerOptions};
use hypolog::numkit::{max_abs, random, CMatrix};
use hypolog::pwfun::{classical_spectral_gap, min_points, BandLimitedFunction, GeneratorFamily};
use hypolog::qms::{lindblad_generator, spectral_gap, verify_cp, DensityMatrix};
use hypolog::su2repr::{build_generators, casimir, haar_sample, horizontal_eigenvalues, horizontal_symbol};
use hypolog::transfer::{
    entropy_transference_check, fisher_transference_check, generator_transference_check, semigroup_transference_check,
};

use crate::artifact::{Check, Outcome, Table};
use crate::config::{CommandKind, Resolved};
use crate::CliError;

/// Seed streams, so that independent draws in one command never overlap.
const STATE_STREAM: u64 = 1;
const POINT_STREAM: u64 = 2;
const FUNCTION_STREAM: u64 = 3;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn execute(run: &Resolved) -> Result<Outcome, CliError> {
    match run.command {
        CommandKind::ReprValidate => repr_validate(run),
        CommandKind::QmsSpectrum => qms_spectrum(run),
        CommandKind::MlsiEstimate => mlsi_estimate(run),
        CommandKind::CmlsiTable => table(run),
        CommandKind::GradientCurve => gradient_curve(run),
        CommandKind::KappaLambda => kappa_lambda(run),
        CommandKind::TransferenceCheck => transference(run),
        CommandKind::DecayTrajectory => decay(run),
        CommandKind::PropGradientCheck => prop_gradient(run),
    }
}

fn repr_validate(run: &Resolved) -> Result<Outcome, CliError> {
    let tol = run.tolerances();
    let m_top = run.get(run.config.m);
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for m in 1..=m_top {
        let gen = build_generators(m)?;
        let brackets = gen.bracket_residuals();
        let cas = casimir(&gen).into_matrix() + CMatrix::identity(m, m) * hypolog::numkit::c((m * m - 1) as f64);
        let symbol = horizontal_symbol(&gen).diagonal();
        let closed = horizontal_eigenvalues(m);
        let symbol_err = symbol.iter().zip(&closed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let off_diag = {
            let mut h = horizontal_symbol(&gen).into_matrix();
            h.fill_diagonal(hypolog::numkit::ZERO);
            max_abs(&h)
        };
        checks.push(Check::at_most(format!("bracket_m{m}"), brackets.iter().cloned().fold(0.0, f64::max), tol.bracket));
        checks.push(Check::at_most(format!("casimir_m{m}"), max_abs(&cas), tol.casimir));
        checks.push(Check::at_most(format!("skew_m{m}"), gen.skew_residual(), tol.bracket));
        checks.push(Check::at_most(format!("symbol_m{m}"), symbol_err.max(off_diag), tol.bracket));
        rows.push(json!({
            "m": m,
            "bracket_residuals": brackets,
            "casimir_residual": max_abs(&cas),
            "skew_residual": gen.skew_residual(),
            "horizontal_diagonal": symbol,
            "horizontal_closed_form": closed,
        }));
    }
    let gap = if m_top >= 2 { Some(classical_spectral_gap(m_top)?) } else { None };
    Ok(Outcome { result: json!({ "bands": rows, "classical_gap": gap }), checks, tables: vec![] })
}

fn qms_spectrum(run: &Resolved) -> Result<Outcome, CliError> {
    let tol = run.tolerances();
    let (m, n) = (run.get(run.config.m), run.get(run.config.n));
    let gen = build_generators(m)?;
    let l = lindblad_generator(&gen, n)?;
    let eigenvalues = l.spectrum().eigenvalues.clone();
    let mut checks = vec![Check::at_most("asymmetry", l.asymmetry(), tol.bracket)];
    let mut cp = Vec::new();
    for t in [0.1, 1.0] {
        let r = verify_cp(&l, t)?;
        checks.push(Check::at_least(format!("choi_min_t{t}"), r.choi_min_eig, -tol.choi_min));
        checks.push(Check::at_most(format!("trace_defect_t{t}"), r.trace_defect, tol.trace_defect));
        cp.push(json!({ "t": t, "choi_min_eig": r.choi_min_eig, "trace_defect": r.trace_defect }));
    }
    let (s, t) = (0.3, 0.7);
    let law = max_abs(&(l.exp(s).compose(&l.exp(t)).matrix() - l.exp(s + t).matrix()));
    checks.push(Check::at_most("semigroup_law", law, tol.semigroup));
    let gap = match m {
        1 => None,
        _ => Some(spectral_gap(&l)?),
    };
    Ok(Outcome {
        result: json!({
            "m": m, "n": n, "dim": m * n,
            "eigenvalues": eigenvalues, "gap": gap,
            "cp": cp, "semigroup_residual": law,
        }),
        checks,
        tables: vec![],
    })
}

fn options(run: &Resolved) -> OptimizerOptions {
    OptimizerOptions {
        multistarts: run.get(run.config.multistarts),
        budget: run.get(run.config.budget),
        seed: run.seed(),
    }
}

fn mlsi_estimate(run: &Resolved) -> Result<Outcome, CliError> {
    let (m, n) = (run.get(run.config.m), run.get(run.config.n));
    if m < 2 {
        return Err(CliError::Usage("mlsi-estimate needs m ≥ 2".into()));
    }
    let gen = build_generators(m)?;
    let l = lindblad_generator(&gen, n)?;
    let mut est = estimate_lambda(&l, &gen, &options(run))?;
    if !run.config.trace.unwrap_or(false) {
        est = est.without_traces();
    }
    let checks = vec![
        Check::at_least("lambda_positive", est.lambda_hat, 0.0),
        Check::at_most("lambda_le_gap", est.lambda_hat - est.gap, run.tolerances().gap_slack),
    ];
    Ok(Outcome { result: serde_json::to_value(&est).expect("serializable"), checks, tables: vec![] })
}

fn table(run: &Resolved) -> Result<Outcome, CliError> {
    let tol = run.tolerances();
    let m_list = run.config.m_list.clone().expect("required");
    let n_list = run.config.n_list.clone().expect("required");
    if m_list.contains(&1) {
        return Err(CliError::Usage("cmlsi-table needs every m ≥ 2".into()));
    }
    let t = cmlsi_table(&m_list, &n_list, &options(run))?;
    let mut checks = Vec::new();
    for r in &t.rows {
        checks.push(Check::at_most(format!("lambda_le_gap_m{}_n{}", r.m, r.n), r.lambda_hat - r.gap, tol.gap_slack));
    }
    let mut ms = m_list.clone();
    ms.sort_unstable();
    ms.dedup();
    for m in ms {
        let row: Vec<_> = t.rows.iter().filter(|r| r.m == m).collect();
        let worst = row.windows(2).map(|w| w[1].lambda_hat / w[0].lambda_hat - 1.0).fold(f64::NEG_INFINITY, f64::max);
        if row.len() > 1 {
            checks.push(Check::at_most(format!("non_increasing_m{m}"), worst, tol.table_noise));
        }
    }
    let rows = t
        .rows
        .iter()
        .map(|r| {
            vec![
                r.m.to_string(),
                r.n.to_string(),
                num(r.lambda_hat),
                num(r.gap),
                r.starts.to_string(),
                r.budget.to_string(),
                r.seed.to_string(),
            ]
        })
        .collect();
    Ok(Outcome {
        result: serde_json::to_value(&t).expect("serializable"),
        checks,
        tables: vec![Table {
            stem: "cmlsi-table",
            columns: vec!["m", "n", "lambda_hat", "gap", "starts", "budget", "seed"],
            rows,
            notes: vec![],
        }],
    })
}

fn curve_of(run: &Resolved) -> Result<GradientEstimateCurve, CliError> {
    let m_max = run.get(run.config.m_max);
    let ens = GradientEnsemble::random(m_max, run.get(run.config.ensemble), run.get(run.config.points), run.seed())?;
    Ok(ens.curve(&run.times)?)
}

fn curve_table(curve: &GradientEstimateCurve) -> Table {
    Table {
        stem: "gradient-curve",
        columns: vec!["t", "C_hat", "stderr", "skipped"],
        rows: (0..curve.times.len())
            .map(|i| vec![num(curve.times[i]), num(curve.c_hat[i]), num(curve.stderr[i]), curve.skipped[i].to_string()])
            .collect(),
        notes: vec![
            ("m_max".into(), curve.m_max.to_string()),
            ("ensemble".into(), curve.ensemble_size.to_string()),
            ("points".into(), curve.points.to_string()),
        ],
    }
}

fn curve_checks(run: &Resolved, curve: &GradientEstimateCurve) -> Vec<Check> {
    let mut checks = Vec::new();
    if curve.times[0] == 0.0 {
        checks.push(Check::at_most("c_hat_at_zero", (curve.c_hat[0] - 1.0).abs(), run.tolerances().c_hat_zero));
    }
    checks.push(Check::at_least("c_hat_finite", curve.c_hat.iter().all(|c| c.is_finite()) as u8 as f64, 1.0));
    checks
}

fn gradient_curve(run: &Resolved) -> Result<Outcome, CliError> {
    let curve = curve_of(run)?;
    let checks = curve_checks(run, &curve);
    Ok(Outcome {
        result: serde_json::to_value(&curve).expect("serializable"),
        checks,
        tables: vec![curve_table(&curve)],
    })
}

fn kappa_lambda(run: &Resolved) -> Result<Outcome, CliError> {
    let curve = curve_of(run)?;
    let mut checks = curve_checks(run, &curve);
    let est = kappa_and_lambda(&curve)?;
    let gap = classical_spectral_gap(run.get(run.config.m_max))?;
    let eps = lambda_eps_best(&curve, gap)?;
    checks.push(Check::at_least("kappa_positive", est.kappa, f64::MIN_POSITIVE));
    checks.push(Check::at_least("lambda_finite", est.lambda.is_finite() as u8 as f64, 1.0));
    // Two readings of the constant for an exponential tail C_2 e^{-4t}.
    let c2 = est.tail_prefactor;
    let mut table = curve_table(&curve);
    table.notes.push(("kappa".into(), num(est.kappa)));
    table.notes.push(("lambda".into(), num(est.lambda)));
    Ok(Outcome {
        result: json!({
            "estimate": est,
            "lambda_eps_best": eps,
            "classical_gap": gap,
            "readings": {
                "c2_from_tail_prefactor": c2,
                "lambda_integral": est.lambda,
                "lambda_c2_over_8": c2 / 8.0,
                "lambda_2_over_c2": 2.0 / c2,
            },
            "ensemble": curve.ensemble_size,
            "points": curve.points,
            "m_max": curve.m_max,
        }),
        checks,
        tables: vec![table],
    })
}

fn initial_state(run: &Resolved, dim: usize) -> Result<DensityMatrix, CliError> {
    match &run.config.rho0_diag {
        Some(d) if d.len() != dim => Err(CliError::Usage(format!("rho0_diag needs {dim} entries, got {}", d.len()))),
        Some(d) => {
            let total: f64 = d.iter().sum();
            if d.iter().any(|x| !(*x >= 0.0)) || !(total > 0.0) {
                return Err(CliError::Usage("rho0_diag must be nonnegative with a positive sum".into()));
            }
            Ok(DensityMatrix::diagonal(&d.iter().map(|x| x / total).collect::<Vec<_>>())?)
        }
        None => {
            let h = random::density(&mut rng(run.seed(), STATE_STREAM), dim, 0.1);
            Ok(DensityMatrix::new(h)?)
        }
    }
}

fn transference(run: &Resolved) -> Result<Outcome, CliError> {
    let tol = run.tolerances();
    let (m, n) = (run.get(run.config.m), run.get(run.config.n));
    let gen = build_generators(m)?;
    let rho = initial_state(run, m * n)?;
    let points = haar_sample(run.seed() ^ POINT_STREAM, run.get(run.config.points));
    let g = generator_transference_check(&gen, n, rho.matrix(), &points)?;
    let s = semigroup_transference_check(&gen, &rho, &run.times, &points)?;
    let entropy: Vec<(f64, f64)> = run
        .times
        .iter()
        .map(|&t| Ok((t, entropy_transference_check(&gen, &rho, t, &points)?)))
        .collect::<Result<_, CliError>>()?;
    let f = fisher_transference_check(&gen, &rho, &points)?;
    let scale = g.scale.max(1.0);
    let mut checks = vec![
        Check::at_most("generator_exact", g.max_residual_exact, tol.transfer_exact),
        Check::at_most("generator_fd", g.max_residual_fd(), tol.transfer_fd_rel * scale),
        Check::at_most("semigroup_time_fd", s.steps.iter().map(|x| x.residual_time_fd).fold(0.0, f64::max), tol.transfer_fd_rel * scale),
        Check::at_most("semigroup_exact", s.max_residual(), tol.transfer_exact),
        Check::at_least("fisher_within_3se", f.passes() as u8 as f64, 1.0),
    ];
    for (t, e) in &entropy {
        checks.push(Check::at_most(format!("entropy_t{t}"), *e, tol.entropy_transfer));
    }
    Ok(Outcome {
        result: json!({
            "m": m, "n": n,
            "generator": g, "semigroup": s,
            "entropy": entropy.iter().map(|(t, e)| json!({"t": t, "residual": e})).collect::<Vec<Value>>(),
            "fisher": f,
        }),
        checks,
        tables: vec![],
    })
}

fn decay(run: &Resolved) -> Result<Outcome, CliError> {
    let tol = run.tolerances();
    let (m, n) = (run.get(run.config.m), run.get(run.config.n));
    if m < 2 {
        return Err(CliError::Usage("decay-trajectory needs m ≥ 2".into()));
    }
    let gen = build_generators(m)?;
    let l = lindblad_generator(&gen, n)?;
    let rho0 = initial_state(run, m * n)?;
    let lambda_hat = match run.config.lambda_hat {
        Some(x) => x,
        None => estimate_lambda(&l, &gen, &options(run))?.lambda_hat,
    };
    let traj = decay_trajectory(&l, &gen, &rho0, &run.times, Some(lambda_hat))?;
    let mut checks = vec![
        Check::at_least("monotone", traj.checks.monotone as u8 as f64, 1.0),
        Check::at_most("entropy_derivative_rel", traj.checks.derivative_max_rel_error, tol.derivative_rel),
    ];
    if let Some(x) = traj.checks.max_envelope_excess {
        let d0 = traj.entropies[0].abs().max(f64::MIN_POSITIVE);
        checks.push(Check::at_most("envelope_excess_rel", x / d0, tol.envelope_rel));
    }
    let rows = (0..traj.times.len())
        .map(|i| vec![num(traj.times[i]), num(traj.entropies[i]), num(traj.fisher[i])])
        .collect();
    let fisher0 = fisher_information(&gen, &rho0, n).ok();
    Ok(Outcome {
        result: json!({ "m": m, "n": n, "trajectory": traj, "fisher_initial": fisher0 }),
        checks,
        tables: vec![Table {
            stem: "decay",
            columns: vec!["t", "entropy", "fisher"],
            rows,
            notes: vec![("lambda_hat".into(), num(lambda_hat)), ("m".into(), m.to_string()), ("n".into(), n.to_string())],
        }],
    })
}

fn prop_gradient(run: &Resolved) -> Result<Outcome, CliError> {
    let tol = run.tolerances();
    let m_max = run.get(run.config.m_max);
    if m_max < 2 {
        return Err(CliError::Usage("prop-gradient-check needs m_max ≥ 2".into()));
    }
    let seed = run.seed();
    let band = 2 * m_max - 1;
    let npts = run.get(run.config.points).max(min_points(band, 1));
    let points = haar_sample(seed ^ POINT_STREAM, npts);
    let ensemble = GradientEnsemble::random(m_max, run.get(run.config.ensemble), npts, seed)?;
    let sup = BandSupremum::new(m_max, seed)?;
    let fam = GeneratorFamily::new(m_max)?;
    let mut frng = rng(seed, FUNCTION_STREAM);
    let scalar: Vec<BandLimitedFunction> =
        (0..3).map(|_| BandLimitedFunction::random_real(&mut frng, &fam, m_max)).collect();
    let mut checks = Vec::new();
    let mut ge = Vec::new();
    for &t in &run.times {
        let est = ensemble.ratio(t)?;
        let c = certified_constant(&est, &sup)?;
        for n in [2usize, 3] {
            let r = matrix_ge_check(&scalar[..n], t, c, &points)?;
            checks.push(Check::at_least(format!("matrix_ge_n{n}_t{t}"), r.min_margin, -tol.matrix_ge_rel * r.scale));
            ge.push(json!({ "n": n, "t": t, "c_hat": est.c_hat, "c_certified": c, "report": r }));
        }
    }
    let t_lieb = 0.5;
    let c_lieb = certified_constant(&ensemble.ratio(t_lieb)?, &sup)?;
    let f = BandLimitedFunction::random_hermitian(&mut frng, &fam, m_max, 2);
    let a = random_positive_function(&mut frng, &fam, m_max, 2);
    let b = random_positive_function(&mut frng, &fam, m_max, 2);
    let mut lieb = Vec::new();
    for s in [0.25, 0.5, 0.75] {
        let r = lieb_form_check(&f, &a, &b, s, t_lieb, c_lieb, &points)?;
        checks.push(Check::at_least(format!("lieb_s{s}"), r.margin, -tol.lieb_stderr * r.stderr));
        lieb.push(json!({ "s": s, "report": r }));
    }
    Ok(Outcome {
        result: json!({
            "m_max": m_max, "points": npts,
            "matrix_ge": ge,
            "lieb": { "t": t_lieb, "c_certified": c_lieb, "checks": lieb },
        }),
        checks,
        tables: vec![],
    })
}
