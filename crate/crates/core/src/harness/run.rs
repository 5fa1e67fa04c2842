//! Experiment dispatch: one directory of deterministic artifacts per run,
//! with named verdicts and a summary.

use super::config::{DtSpec, ExperimentConfig, ExperimentKind};
use super::output::{
    fmt_f64, fmt_opt, float_tag, write_checkpoint, write_csv, write_json,
};
use crate::decay::{
    self, fit_scaling, graded_band_datum, resolved_ny, DecayRow, DtRule, ScalingResult,
    SemigroupIntegrals, SweepGrid, SweepSpec,
};
use crate::error::{Error, Result};
use crate::field::ModeField;
use crate::grid::Grid;
use crate::hypocoercivity::{
    audit_monotonicity, functional_sample, verify_identities, FunctionalSample, HypoConstants,
};
use crate::nonlinear::{threshold_experiment, ThresholdConfig, ThresholdOutcome};
use crate::norms::l2_norm_sq;
use crate::semigroup::{evolve_with, ModeEvolution, ModeOperator, StepperConfig};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Verdict {
            name: name.into(),
            pass,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub kind: String,
    pub started_unix: u64,
    pub elapsed_s: f64,
    pub warnings: Vec<String>,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
    /// some cells passed, some failed (sweeps)
    pub partial: bool,
    pub outputs: Vec<String>,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload: Option<serde_json::Value>,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    outputs: Vec<String>,
}

impl Ctx<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }
}

/// Gaussian band datum used by the linear experiments; physical field
/// cos(kx) e^{-y^2} for k >= 1.
fn gaussian_datum(grid: &Arc<Grid>, k: usize) -> ModeField {
    let amp = if k == 0 { 1.0 } else { 0.5 };
    ModeField::from_fn(Arc::clone(grid), k, move |y| {
        Complex64::new(amp * (-y * y).exp(), 0.0)
    })
}

/// Datum-norm insensitivity under doubling the truncation at fixed dy.
fn truncation_verdict(ly: f64, ny: usize, k: usize) -> Result<Verdict> {
    let g1 = Arc::new(Grid::new(ly, ny, k.max(1))?);
    let g2 = Arc::new(Grid::new(2.0 * ly, 2 * (ny + 1) - 1, k.max(1))?);
    let n1 = l2_norm_sq(&gaussian_datum(&g1, k)).sqrt();
    let n2 = l2_norm_sq(&gaussian_datum(&g2, k)).sqrt();
    let rel = (n1 - n2).abs() / n1;
    Ok(Verdict::new(
        "truncation-doubling-ly",
        rel < 1e-8,
        format!("relative norm change {rel:.3e} under Ly doubling"),
    ))
}

fn dt_for(cfg: &ExperimentConfig, grid: &Grid, k: usize, nu: f64) -> f64 {
    match cfg.stepper.dt {
        DtSpec::Fixed(dt) => dt,
        DtSpec::Named(_) => StepperConfig::auto_dt(grid, k, nu),
    }
}

fn single_nu(cfg: &ExperimentConfig, warnings: &mut Vec<String>) -> Result<f64> {
    Ok(cfg.nu_values(warnings)?[0])
}

/// Evolve one band and sample the time-weighted functional alongside.
fn evolve_with_functional(
    op: &ModeOperator,
    datum: &ModeField,
    scfg: &StepperConfig,
    constants: &HypoConstants,
) -> Result<(ModeEvolution, Vec<FunctionalSample>)> {
    let nu = op.nu();
    let mut samples = Vec::new();
    let mut err: Option<Error> = None;
    let ev = evolve_with(op, datum, scfg, |t, w| {
        if err.is_some() || w.k() == 0 {
            return;
        }
        match op
            .stream_function(w)
            .and_then(|psi| functional_sample(w, &psi, t, nu, constants))
        {
            Ok(s) => samples.push(s),
            Err(e) => err = Some(e),
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok((ev, samples))
}

#[derive(Serialize)]
struct LinearDecayPayload {
    nu: f64,
    k: usize,
    fit: decay::DecayFit,
    t0_theory: f64,
    rate_over_sqrt_nuk: f64,
}

fn run_linear_decay(ctx: &mut Ctx, warnings: &mut Vec<String>) -> Result<(Vec<Verdict>, serde_json::Value)> {
    let cfg = ctx.cfg;
    let nu = single_nu(cfg, warnings)?;
    let k = cfg.experiment.k.unwrap_or(1);
    let constants = HypoConstants::new(cfg.hypo.epsilon)?;
    let grid = Arc::new(Grid::new(cfg.grid.ly, cfg.grid.ny, cfg.grid.kmax)?);
    let op = ModeOperator::new(Arc::clone(&grid), k, nu)?;
    let datum = gaussian_datum(&grid, k);
    let t_end = if cfg.stepper.t_end > 0.0 {
        cfg.stepper.t_end
    } else {
        cfg.experiment.horizon / (nu * k.max(1) as f64).sqrt()
    };
    let scfg = StepperConfig::new(dt_for(cfg, &grid, k, nu), t_end, cfg.stepper.samples);
    let (ev, phi) = evolve_with_functional(&op, &datum, &scfg, &constants)?;

    // results.csv: t, norm, phi (phi empty for the zero mode)
    let rows: Vec<Vec<String>> = ev
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let phi_s = if k == 0 {
                String::new()
            } else {
                fmt_f64(phi[i].phi)
            };
            vec![fmt_f64(t), fmt_f64(ev.norm_sq[i].sqrt()), phi_s]
        })
        .collect();
    write_csv(&ctx.path("results.csv"), "t,norm,phi", &rows)?;

    let norms = ev.norms();
    let window = decay::default_window(&ev.times, &norms);
    let fit = decay::fit_decay(&ev.times, &norms, window)?;
    let t0 = constants.theoretical_halving_time(nu, k.max(1));

    let mut verdicts = vec![Verdict::new(
        "fit-quality",
        fit.r2 >= 0.98,
        format!("r2 = {:.6}", fit.r2),
    )];
    if k >= 1 {
        // algebraic envelope |w(t)|^2 <= |g|^2 / (1 + g/2 nu^2 k^2 t^4)
        let g0 = ev.norm_sq[0];
        let mut worst = f64::NEG_INFINITY;
        for (&t, &n2) in ev.times.iter().zip(&ev.norm_sq) {
            let envelope = g0 / (1.0 + 0.5 * constants.gamma * nu * nu * (k * k) as f64 * t.powi(4));
            worst = worst.max(n2 / envelope - 1.0);
        }
        verdicts.push(Verdict::new(
            "norm-envelope",
            worst <= 1e-10,
            format!("max relative envelope excess {worst:.3e}"),
        ));
        // velocity decay |u_k(t)|^2 <= 2 |g|^2 / (g nu k^2 t^3)
        let mut worst_u = f64::NEG_INFINITY;
        for (&t, &u2) in ev.times.iter().zip(&ev.u_norm_sq).skip(1) {
            let bound = 2.0 * g0 / (constants.gamma * nu * (k * k) as f64 * t.powi(3));
            worst_u = worst_u.max(u2 / bound - 1.0);
        }
        verdicts.push(Verdict::new(
            "velocity-decay",
            worst_u <= 1e-10,
            format!("max relative velocity-bound excess {worst_u:.3e}"),
        ));
        let rate_ratio = fit.c_fit / (nu * k as f64).sqrt();
        verdicts.push(Verdict::new(
            "rate-bracket",
            (0.3..=6.0).contains(&rate_ratio),
            format!("c_fit = {:.4e} = {rate_ratio:.3} (nu k)^(1/2)", fit.c_fit),
        ));
    }
    verdicts.push(Verdict::new(
        "norm-monotone",
        ev.max_norm_uptick() <= 1e-10,
        format!("max relative uptick {:.3e}", ev.max_norm_uptick()),
    ));
    verdicts.push(truncation_verdict(cfg.grid.ly, cfg.grid.ny, k)?);

    let payload = LinearDecayPayload {
        nu,
        k,
        rate_over_sqrt_nuk: fit.c_fit / (nu * k.max(1) as f64).sqrt(),
        t0_theory: t0,
        fit,
    };
    write_json(&ctx.path("fit.json"), &payload)?;
    Ok((verdicts, serde_json::to_value(&payload).unwrap()))
}

#[derive(Serialize)]
struct AuditRecord {
    t: f64,
    phi: f64,
    terms: [f64; 4],
    residuals: [f64; 4],
    pass: bool,
}

fn run_functional_audit(
    ctx: &mut Ctx,
    warnings: &mut Vec<String>,
) -> Result<(Vec<Verdict>, serde_json::Value)> {
    let cfg = ctx.cfg;
    let nu = single_nu(cfg, warnings)?;
    let k = cfg.experiment.k.unwrap_or(1).max(1);
    let constants = HypoConstants::new(cfg.hypo.epsilon)?;
    let grid = Arc::new(Grid::new(cfg.grid.ly, cfg.grid.ny, cfg.grid.kmax)?);
    let op = ModeOperator::new(Arc::clone(&grid), k, nu)?;
    let datum = gaussian_datum(&grid, k);
    let t_end = if cfg.stepper.t_end > 0.0 {
        cfg.stepper.t_end
    } else {
        cfg.experiment.horizon / (nu * k as f64).sqrt()
    };
    let dt = dt_for(cfg, &grid, k, nu);
    let scfg = StepperConfig::new(dt, t_end, cfg.stepper.samples);
    let (_ev, phi) = evolve_with_functional(&op, &datum, &scfg, &constants)?;

    let report = audit_monotonicity(&phi, nu, k, &constants, 1e-3)?;
    let mut worst_gap = f64::INFINITY;
    for s in &phi {
        worst_gap = worst_gap.min(s.lower_bound_gap() + 1e-10 * s.phi.abs());
    }

    // identity residuals at a few audit instants
    let audit_times: Vec<f64> = if cfg.experiment.audit_times.is_empty() {
        [0.1, 0.3, 1.0]
            .iter()
            .map(|m| m / (nu * k as f64).sqrt())
            .collect()
    } else {
        cfg.experiment.audit_times.clone()
    };
    let residuals = verify_identities(&op, &datum, scfg.dt, &audit_times)?;
    let mut records = Vec::new();
    for r in &residuals {
        // nearest functional sample for the terms
        let s = phi
            .iter()
            .min_by(|a, b| {
                (a.t - r.t).abs().partial_cmp(&(b.t - r.t).abs()).unwrap()
            })
            .unwrap();
        let pass = r.residuals.iter().all(|&x| x < 1e-3)
            && s.lower_bound_gap() >= -1e-10 * s.phi.abs();
        records.push(AuditRecord {
            t: r.t,
            phi: s.phi,
            terms: [s.term_l2, s.term_grad, s.term_cross, s.term_weighted],
            residuals: r.residuals,
            pass,
        });
    }
    write_json(&ctx.path("audit.json"), &records)?;

    let rows: Vec<Vec<String>> = phi
        .iter()
        .map(|s| {
            vec![
                fmt_f64(s.t),
                fmt_f64(s.phi),
                fmt_f64(s.term_l2),
                fmt_f64(s.term_grad),
                fmt_f64(s.term_cross),
                fmt_f64(s.term_weighted),
                fmt_f64(s.norm_sq),
                fmt_f64(s.grad_sq),
            ]
        })
        .collect();
    write_csv(
        &ctx.path("results.csv"),
        "t,phi,term_l2,term_grad,term_cross,term_weighted,norm_sq,grad_sq",
        &rows,
    )?;

    let verdicts = vec![
        Verdict::new(
            "phi-lower-bound",
            worst_gap >= 0.0,
            format!("min slack {worst_gap:.3e}"),
        ),
        Verdict::new(
            "phi-monotone",
            report.monotone,
            format!("max uptick {:.3e}", report.max_phi_uptick),
        ),
        Verdict::new(
            "phi-derivative-bound",
            report.max_excess_proof_form <= report.tol,
            format!(
                "max excess {:.3e} (statement-form {:.3e})",
                report.max_excess_proof_form, report.max_excess_statement_form
            ),
        ),
        Verdict::new(
            "identity-residuals",
            records.iter().all(|r| r.pass),
            format!("{} audit instants", records.len()),
        ),
    ];
    Ok((verdicts, serde_json::to_value(&report).unwrap()))
}

#[derive(Serialize)]
struct IdentitiesPayload {
    dt: f64,
    coarse: Vec<crate::hypocoercivity::IdentityResiduals>,
    fine: Vec<crate::hypocoercivity::IdentityResiduals>,
    halving_ratio_id1: f64,
}

fn run_identities(ctx: &mut Ctx, warnings: &mut Vec<String>) -> Result<(Vec<Verdict>, serde_json::Value)> {
    let cfg = ctx.cfg;
    let nu = single_nu(cfg, warnings)?;
    let k = cfg.experiment.k.unwrap_or(1);
    let grid = Arc::new(Grid::new(cfg.grid.ly, cfg.grid.ny, cfg.grid.kmax)?);
    let op = ModeOperator::new(Arc::clone(&grid), k, nu)?;
    let datum = gaussian_datum(&grid, k);
    let dt = match cfg.stepper.dt {
        DtSpec::Fixed(dt) => dt,
        DtSpec::Named(_) => DtRule::Phase { c: 0.05, y95: 3.0 }.dt(&grid, k, nu),
    };
    let audit_times: Vec<f64> = if cfg.experiment.audit_times.is_empty() {
        vec![0.2, 0.5, 1.0]
    } else {
        cfg.experiment.audit_times.clone()
    };
    let coarse = verify_identities(&op, &datum, dt, &audit_times)?;
    let fine = verify_identities(&op, &datum, 0.5 * dt, &audit_times)?;

    let mut rows = Vec::new();
    for (tag, set) in [("coarse", &coarse), ("fine", &fine)] {
        for r in set.iter() {
            rows.push(vec![
                tag.to_string(),
                fmt_f64(r.t),
                fmt_f64(r.residuals[0]),
                fmt_f64(r.residuals[1]),
                fmt_f64(r.residuals[2]),
                fmt_f64(r.residuals[3]),
                fmt_f64(r.scale),
            ]);
        }
    }
    write_csv(
        &ctx.path("results.csv"),
        "dt_level,t,res_ddt_l2,res_ddt_grad,res_ddt_cross,res_ddt_weighted,scale",
        &rows,
    )?;

    let worst_fine = fine
        .iter()
        .flat_map(|r| r.residuals.iter().copied())
        .fold(0.0f64, f64::max);
    let ratio = coarse[0].residuals[0] / fine[0].residuals[0].max(f64::MIN_POSITIVE);
    let verdicts = vec![
        Verdict::new(
            "identity-residuals-fine",
            worst_fine < 1e-3,
            format!("worst residual {worst_fine:.3e}"),
        ),
        Verdict::new(
            "identity-dt-convergence",
            (2.0..8.0).contains(&ratio),
            format!("id-1 residual ratio {ratio:.2} per dt halving"),
        ),
    ];
    let payload = IdentitiesPayload {
        dt,
        coarse,
        fine,
        halving_ratio_id1: ratio,
    };
    write_json(&ctx.path("identities.json"), &payload)?;
    Ok((verdicts, serde_json::to_value(&payload).unwrap()))
}

#[derive(Serialize)]
struct SemigroupPayload {
    /// graded multi-band family (carries the logarithmic structure)
    log_family: Vec<SemigroupIntegrals>,
    /// width-matched crossover-band family (near-extremal for the
    /// x-derivative integral)
    crossover_family: Vec<SemigroupIntegrals>,
    x_scaling: Option<ScalingResult>,
    linf_scaling: Option<ScalingResult>,
}

fn run_semigroup_integrals(
    ctx: &mut Ctx,
    warnings: &mut Vec<String>,
) -> Result<(Vec<Verdict>, serde_json::Value)> {
    let cfg = ctx.cfg;
    let nus = cfg.nu_values(warnings)?;
    let horizon = cfg.experiment.horizon;
    let samples = cfg.stepper.samples.max(1200);

    // two datum families per viscosity; both verify the hard gradient
    // bound, the crossover one measures the x-derivative scaling, the
    // graded one the L-infinity integral
    let log_cells: Vec<Result<SemigroupIntegrals>> = nus
        .par_iter()
        .map(|&nu| {
            let kmax = ((1.2 * nu.powf(-1.0 / 3.0)).ceil() as usize)
                .clamp(2, cfg.grid.kmax);
            let ny = resolved_ny(cfg.grid.ny, cfg.grid.ly, nu, 1);
            let grid = Arc::new(Grid::new(cfg.grid.ly, ny, kmax)?);
            let bands = graded_band_datum(&grid, kmax);
            decay::semigroup_integrals(
                bands,
                nu,
                horizon / nu.sqrt(),
                samples,
                DtRule::Phase { c: 0.3, y95: 3.0 },
            )
        })
        .collect();
    let cross_cells: Vec<Result<SemigroupIntegrals>> = nus
        .par_iter()
        .map(|&nu| {
            let (_, bands) = decay::crossover_band_datum(nu)?;
            decay::semigroup_integrals(
                bands,
                nu,
                horizon / nu.sqrt(),
                samples,
                decay::crossover_dt_rule(nu),
            )
        })
        .collect();
    let mut log_family = Vec::new();
    for c in log_cells {
        log_family.push(c?);
    }
    let mut crossover_family = Vec::new();
    for c in cross_cells {
        crossover_family.push(c?);
    }

    let mut rows = Vec::new();
    for (family, cells) in [("graded", &log_family), ("crossover", &crossover_family)] {
        for c in cells.iter() {
            rows.push(vec![
                family.to_string(),
                fmt_f64(c.nu),
                fmt_f64(c.int_grad_sq),
                fmt_f64(c.grad_bound),
                fmt_f64(c.int_x_norm),
                fmt_f64(c.int_linf_sq),
                fmt_f64(c.g_norm_sq),
                c.saturated.to_string(),
            ]);
        }
    }
    write_csv(
        &ctx.path("results.csv"),
        "family,nu,int_grad_sq,grad_bound,int_x_norm,int_linf_sq,g_norm_sq,saturated",
        &rows,
    )?;

    let mut verdicts = Vec::new();
    let hard = log_family
        .iter()
        .chain(&crossover_family)
        .all(|c| c.int_grad_sq <= c.grad_bound);
    verdicts.push(Verdict::new(
        "gradient-integral-bound",
        hard,
        "int |grad w|^2 dt <= |g|^2 / (2 nu) on every run".into(),
    ));
    for c in log_family.iter().chain(&crossover_family) {
        if !c.saturated {
            warnings.push(format!(
                "nu = {}: integrals not saturated (tails {:.2e}, {:.2e}); extend the horizon",
                c.nu, c.tail_fraction.0, c.tail_fraction.1
            ));
        }
    }
    let (mut x_scaling, mut linf_scaling) = (None, None);
    if nus.len() >= 4 {
        let pts_x: Vec<(f64, f64)> = crossover_family
            .iter()
            .map(|c| (c.nu, c.int_x_norm / c.g_norm_sq.sqrt()))
            .collect();
        let pts_l: Vec<(f64, f64)> = log_family
            .iter()
            .map(|c| (c.nu, c.int_linf_sq / (1.0 + c.nu.ln().abs()) / c.g_norm_sq))
            .collect();
        let sx = fit_scaling(&pts_x)?;
        let sl = fit_scaling(&pts_l)?;
        verdicts.push(Verdict::new(
            "x-integral-scaling",
            (sx.exponent + 2.0 / 3.0).abs() <= 0.1,
            format!("exponent {:.4} +- {:.4} (want -2/3 +- 0.1)", sx.exponent, sx.stderr),
        ));
        verdicts.push(Verdict::new(
            "linf-integral-scaling",
            (sl.exponent + 1.0 / 3.0).abs() <= 0.1,
            format!(
                "exponent {:.4} +- {:.4} (want -1/3 +- 0.1); the raw integral tracks (1 + |log nu|) with no viscosity power for localized data",
                sl.exponent, sl.stderr
            ),
        ));
        x_scaling = Some(sx);
        linf_scaling = Some(sl);
    }
    let payload = SemigroupPayload {
        log_family,
        crossover_family,
        x_scaling,
        linf_scaling,
    };
    write_json(&ctx.path("scaling.json"), &payload)?;
    Ok((verdicts, serde_json::to_value(&payload).unwrap()))
}

#[derive(Serialize)]
struct SweepPayload {
    nu_scaling: ScalingResult,
    k_scaling: Option<ScalingResult>,
    heat_scaling: ScalingResult,
}

fn decay_row_csv(r: &DecayRow) -> Vec<String> {
    vec![
        fmt_f64(r.nu),
        r.k.to_string(),
        fmt_f64(r.c_fit),
        fmt_f64(r.c_prefactor),
        fmt_opt(r.t_half),
        fmt_f64(r.t0_theory),
        fmt_f64(r.r2),
    ]
}

fn run_scaling_sweep(ctx: &mut Ctx, warnings: &mut Vec<String>) -> Result<(Vec<Verdict>, serde_json::Value)> {
    let cfg = ctx.cfg;
    let nus = cfg.nu_values(warnings)?;
    let ks = cfg
        .experiment
        .k_list
        .clone()
        .unwrap_or_else(|| vec![1, 2, 4, 8]);
    let spec = SweepSpec {
        nu_list: nus,
        k_list: ks,
        grid: SweepGrid {
            ly: cfg.grid.ly,
            ny: cfg.grid.ny,
        },
        epsilon: cfg.hypo.epsilon,
        horizon: cfg.experiment.horizon,
        samples: cfg.stepper.samples,
        dt: match cfg.stepper.dt {
            DtSpec::Fixed(dt) => DtRule::Fixed(dt),
            DtSpec::Named(_) => DtRule::Phase { c: 0.05, y95: 3.0 },
        },
    };
    let outcome = decay::scaling_sweep(&spec)?;

    let rows: Vec<Vec<String>> = outcome
        .rows
        .iter()
        .filter(|r| !r.heat_only)
        .map(decay_row_csv)
        .collect();
    write_csv(
        &ctx.path("results.csv"),
        "nu,k,c_fit,C_fit,t_half,t0_theory,r2",
        &rows,
    )?;
    let heat_rows: Vec<Vec<String>> = outcome
        .rows
        .iter()
        .filter(|r| r.heat_only)
        .map(decay_row_csv)
        .collect();
    write_csv(
        &ctx.path("heat_control.csv"),
        "nu,k,c_fit,C_fit,t_half,t0_theory,r2",
        &heat_rows,
    )?;

    let mut verdicts = vec![
        Verdict::new(
            "rate-vs-nu",
            (outcome.nu_scaling.exponent - 0.5).abs() <= 0.1,
            format!(
                "exponent {:.4} +- {:.4} (want 0.5 +- 0.1)",
                outcome.nu_scaling.exponent, outcome.nu_scaling.stderr
            ),
        ),
        Verdict::new(
            "heat-control-vs-nu",
            (outcome.heat_scaling.exponent - 1.0).abs() <= 0.05,
            format!(
                "exponent {:.4} +- {:.4} (want 1.0 +- 0.05)",
                outcome.heat_scaling.exponent, outcome.heat_scaling.stderr
            ),
        ),
    ];
    if let Some(ks) = &outcome.k_scaling {
        verdicts.push(Verdict::new(
            "rate-vs-k",
            (ks.exponent - 0.5).abs() <= 0.15,
            format!(
                "exponent {:.4} +- {:.4} (want 0.5 +- 0.15)",
                ks.exponent, ks.stderr
            ),
        ));
    }
    let payload = SweepPayload {
        nu_scaling: outcome.nu_scaling,
        k_scaling: outcome.k_scaling,
        heat_scaling: outcome.heat_scaling,
    };
    write_json(&ctx.path("scaling.json"), &payload)?;
    Ok((verdicts, serde_json::to_value(&payload).unwrap()))
}

#[derive(Serialize)]
struct ThresholdPayload {
    records: Vec<crate::nonlinear::ThresholdRecord>,
    /// max_t A(t) * 3 / (4 |omega~_in|) per decayed cell: the measured
    /// bootstrap constant
    k_measured: Vec<f64>,
    /// smallest non-decaying amplitude per nu, when one exists
    empirical_threshold: Vec<(f64, Option<f64>)>,
}

fn run_nonlinear_threshold(
    ctx: &mut Ctx,
    warnings: &mut Vec<String>,
) -> Result<(Vec<Verdict>, serde_json::Value)> {
    let cfg = ctx.cfg;
    let nus = cfg.nu_values(warnings)?;
    let eps0s = cfg.eps0_values();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    for &nu in &nus {
        for &e in &eps0s {
            cells.push((nu, e));
        }
    }
    let outcomes: Vec<(f64, f64, Result<ThresholdOutcome>)> = cells
        .par_iter()
        .map(|&(nu, eps0)| {
            let tc = ThresholdConfig {
                ly: cfg.grid.ly,
                ny: resolved_ny(cfg.grid.ny, cfg.grid.ly, nu, 1),
                kmax: cfg.grid.kmax,
                nx: cfg.nx_physical(),
                nu,
                eps0,
                shear_fraction: cfg.experiment.shear_fraction,
                horizon: cfg.experiment.horizon,
                samples: cfg.stepper.samples,
                cfl_fraction: 0.9,
            };
            (nu, eps0, threshold_experiment(&tc))
        })
        .collect();

    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut k_measured = Vec::new();
    let mut verdicts = Vec::new();
    let mut cell_failures = Vec::new();
    let hash = cfg.hash();
    for (nu, eps0, out) in outcomes {
        match out {
            Ok(o) => {
                rows.push(vec![
                    fmt_f64(o.record.nu),
                    fmt_f64(o.record.eps0),
                    fmt_f64(o.record.amplitude),
                    o.record.decayed.to_string(),
                    fmt_opt(o.record.big_c1),
                    fmt_f64(o.record.c1),
                    fmt_opt(o.record.envelope_margin),
                    o.record.blowup.to_string(),
                ]);
                if o.record.amplitude > 0.0 {
                    let a = crate::nonlinear::bootstrap_series(&o.series, nu);
                    let a_max = a.iter().map(|p| p.1).fold(0.0f64, f64::max);
                    k_measured.push(0.75 * a_max / o.series.nonshear_norm[0].max(1e-300));
                }
                if cfg.experiment.checkpoints {
                    let name = format!(
                        "checkpoints/final_nu{}_eps{}",
                        float_tag(nu),
                        float_tag(eps0)
                    );
                    std::fs::create_dir_all(ctx.dir.join("checkpoints"))?;
                    let base = ctx.path(&name);
                    write_checkpoint(&base, &o.final_state, nu, &hash)?;
                }
                // diagnostics on every completed cell
                let uptick = o.series.max_total_norm_uptick();
                let energy = o.series.global_energy_excess(nu);
                if uptick > 1e-10 {
                    cell_failures.push(format!("nu={nu} eps0={eps0}: norm uptick {uptick:.2e}"));
                }
                if energy > 1e-3 {
                    cell_failures.push(format!("nu={nu} eps0={eps0}: energy excess {energy:.2e}"));
                }
                records.push(o.record);
            }
            Err(e) => {
                cell_failures.push(format!("nu={nu} eps0={eps0}: {e}"));
                rows.push(vec![
                    fmt_f64(nu),
                    fmt_f64(eps0),
                    String::new(),
                    "false".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    "false".into(),
                ]);
            }
        }
    }
    write_csv(
        &ctx.path("results.csv"),
        "nu,eps0,amplitude,decayed,C1,c1,envelope_margin,blowup",
        &rows,
    )?;

    // only the stability side is verdict-bearing: small amplitudes must
    // decay, larger ones are exploratory
    let small_ok = records
        .iter()
        .filter(|r| r.eps0 <= 0.01 * (1.0 + 1e-12))
        .all(|r| r.decayed && !r.blowup);
    verdicts.push(Verdict::new(
        "below-threshold-decay",
        small_ok && cell_failures.is_empty(),
        if cell_failures.is_empty() {
            "all eps0 <= 0.01 cells decayed under the fitted envelope".into()
        } else {
            cell_failures.join("; ")
        },
    ));

    let mut empirical = Vec::new();
    for &nu in &nus {
        let min_bad = records
            .iter()
            .filter(|r| r.nu == nu && !r.decayed)
            .map(|r| r.eps0)
            .fold(f64::INFINITY, f64::min);
        empirical.push((nu, if min_bad.is_finite() { Some(min_bad) } else { None }));
    }
    let payload = ThresholdPayload {
        records,
        k_measured,
        empirical_threshold: empirical,
    };
    write_json(&ctx.path("threshold.json"), &payload)?;
    Ok((verdicts, serde_json::to_value(&payload).unwrap()))
}

/// Run one experiment, writing artifacts under `cfg.output.dir`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let started = now_unix();
    let t0 = std::time::Instant::now();
    let mut warnings = cfg.validate()?;
    let dir = PathBuf::from(&cfg.output.dir);
    std::fs::create_dir_all(&dir)?;
    let mut ctx = Ctx {
        cfg,
        dir: dir.clone(),
        outputs: Vec::new(),
    };
    let (verdicts, payload) = match cfg.experiment.kind {
        ExperimentKind::LinearDecay => run_linear_decay(&mut ctx, &mut warnings)?,
        ExperimentKind::FunctionalAudit => run_functional_audit(&mut ctx, &mut warnings)?,
        ExperimentKind::Identities => run_identities(&mut ctx, &mut warnings)?,
        ExperimentKind::SemigroupIntegrals => run_semigroup_integrals(&mut ctx, &mut warnings)?,
        ExperimentKind::ScalingSweep => run_scaling_sweep(&mut ctx, &mut warnings)?,
        ExperimentKind::NonlinearThreshold => run_nonlinear_threshold(&mut ctx, &mut warnings)?,
    };
    let pass = verdicts.iter().all(|v| v.pass);
    let partial = !pass && verdicts.iter().any(|v| v.pass);
    let mut outputs = ctx.outputs;
    outputs.push("summary.json".into());
    let record = RunRecord {
        config_hash: cfg.hash(),
        kind: cfg.experiment.kind.as_str().into(),
        started_unix: started,
        elapsed_s: t0.elapsed().as_secs_f64(),
        warnings,
        verdicts,
        pass,
        partial,
        outputs,
        config: cfg.clone(),
        payload: Some(payload),
    };
    write_json(&dir.join("summary.json"), &record)?;
    Ok(record)
}

/// Fan a config with list axes out into cells (for the kinds that do not
/// sweep natively) and aggregate. Native sweep kinds go straight to `run`.
pub fn sweep(cfg: &ExperimentConfig) -> Result<RunRecord> {
    match cfg.experiment.kind {
        ExperimentKind::ScalingSweep
        | ExperimentKind::SemigroupIntegrals
        | ExperimentKind::NonlinearThreshold => run(cfg),
        ExperimentKind::LinearDecay => sweep_linear_decay(cfg),
        _ => {
            let mut warnings = Vec::new();
            let nus = cfg.nu_values(&mut warnings)?;
            if nus.len() == 1 {
                return run(cfg);
            }
            // per-nu cells of a non-sweeping kind
            let mut verdicts = Vec::new();
            let mut pass_all = true;
            let mut any_pass = false;
            for (i, nu) in nus.iter().enumerate() {
                let mut cell = cfg.clone();
                cell.physics.nu = Some(*nu);
                cell.physics.nu_list = None;
                cell.output.dir = format!("{}/cell_{i}", cfg.output.dir);
                match run(&cell) {
                    Ok(rec) => {
                        pass_all &= rec.pass;
                        any_pass |= rec.pass;
                        verdicts.push(Verdict::new(
                            &format!("cell-nu-{nu}"),
                            rec.pass,
                            format!("{} verdicts", rec.verdicts.len()),
                        ));
                    }
                    Err(e) => {
                        pass_all = false;
                        verdicts.push(Verdict::new(&format!("cell-nu-{nu}"), false, e.to_string()));
                    }
                }
            }
            let record = RunRecord {
                config_hash: cfg.hash(),
                kind: format!("sweep:{}", cfg.experiment.kind.as_str()),
                started_unix: now_unix(),
                elapsed_s: 0.0,
                warnings,
                verdicts,
                pass: pass_all,
                partial: !pass_all && any_pass,
                outputs: vec!["summary.json".into()],
                config: cfg.clone(),
                payload: None,
            };
            std::fs::create_dir_all(&cfg.output.dir)?;
            write_json(&Path::new(&cfg.output.dir).join("summary.json"), &record)?;
            Ok(record)
        }
    }
}

/// linear-decay over (nu_list x k_list): one long results.csv, plus a
/// ScalingResult aggregate when one axis has >= 4 values.
fn sweep_linear_decay(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let started = now_unix();
    let t0 = std::time::Instant::now();
    let mut warnings = cfg.validate()?;
    let nus = cfg.nu_values(&mut warnings)?;
    let ks = cfg
        .experiment
        .k_list
        .clone()
        .unwrap_or_else(|| vec![cfg.experiment.k.unwrap_or(1)]);
    let dir = PathBuf::from(&cfg.output.dir);
    std::fs::create_dir_all(&dir)?;
    let spec = SweepSpec {
        nu_list: nus.clone(),
        k_list: ks.clone(),
        grid: SweepGrid {
            ly: cfg.grid.ly,
            ny: cfg.grid.ny,
        },
        epsilon: cfg.hypo.epsilon,
        horizon: cfg.experiment.horizon,
        samples: cfg.stepper.samples,
        dt: match cfg.stepper.dt {
            DtSpec::Fixed(dt) => DtRule::Fixed(dt),
            DtSpec::Named(_) => DtRule::Phase { c: 0.05, y95: 3.0 },
        },
    };
    let mut cells: Vec<(f64, usize)> = Vec::new();
    for &nu in &nus {
        for &k in &ks {
            cells.push((nu, k));
        }
    }
    let results: Vec<(f64, usize, Result<(DecayRow, ModeEvolution)>)> = cells
        .par_iter()
        .map(|&(nu, k)| (nu, k, decay::decay_cell(&spec, nu, k, false)))
        .collect();
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    let mut points = Vec::new();
    let mut pass_all = true;
    let mut any_pass = false;
    for (nu, k, res) in results {
        match res {
            Ok((row, _)) => {
                points.push((nu, row.c_fit));
                rows.push(decay_row_csv(&row));
                verdicts.push(Verdict::new(
                    &format!("cell-nu-{nu}-k-{k}"),
                    true,
                    format!("c_fit = {:.4e}, r2 = {:.5}", row.c_fit, row.r2),
                ));
                any_pass = true;
            }
            Err(e) => {
                pass_all = false;
                verdicts.push(Verdict::new(&format!("cell-nu-{nu}-k-{k}"), false, e.to_string()));
            }
        }
    }
    write_csv(
        &dir.join("results.csv"),
        "nu,k,c_fit,C_fit,t_half,t0_theory,r2",
        &rows,
    )?;
    let mut payload = serde_json::Map::new();
    if nus.len() >= 4 && ks.len() == 1 && points.len() >= 4 {
        let scaling = fit_scaling(&points)?;
        payload.insert(
            "nu_scaling".into(),
            serde_json::to_value(&scaling).unwrap(),
        );
        write_json(&dir.join("scaling.json"), &scaling)?;
    }
    let record = RunRecord {
        config_hash: cfg.hash(),
        kind: "sweep:linear-decay".into(),
        started_unix: started,
        elapsed_s: t0.elapsed().as_secs_f64(),
        warnings,
        verdicts,
        pass: pass_all,
        partial: !pass_all && any_pass,
        outputs: vec!["results.csv".into(), "summary.json".into()],
        config: cfg.clone(),
        payload: Some(serde_json::Value::Object(payload)),
    };
    write_json(&dir.join("summary.json"), &record)?;
    Ok(record)
}
