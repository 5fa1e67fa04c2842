//! Rate extraction and semigroup integral measurements.
//!
//! Enhanced dissipation shows up as an exponential envelope on the band
//! norms with rate ~ (nu k)^{1/2}; the fits here are plain least squares on
//! log-norm over a window anchored at the measured halving time, with the
//! theoretical halving time t0 = (2/(g nu^2 k^2))^{1/4} reported alongside
//! (t0 sits far beyond the simulated horizon at the default constants, so it
//! cannot anchor the window itself).

use crate::error::{Error, Result};
use crate::field::ModeField;
use crate::grid::Grid;
use crate::hypocoercivity::HypoConstants;
use crate::norms::l2_norm_sq;
use crate::semigroup::{evolve, ModeEvolution, ModeOperator, StepperConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Noise floor under which norms are dropped from fits.
const FLOOR_FACTOR: f64 = 1e2 * f64::EPSILON;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    /// fitted rate in |w(t)| ~ C exp(-c t)
    pub c_fit: f64,
    pub c_prefactor: f64,
    /// measured halving time (norm crossing 1/sqrt(2), i.e. half the
    /// squared norm); None when the series never halves
    pub t_half: Option<f64>,
    pub r2: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

impl DecayFit {
    pub fn accepted(&self) -> bool {
        self.r2 >= 0.98
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_stderr: f64,
}

/// Ordinary least squares y = a + b x with r^2 and the slope's standard
/// error.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return Err(Error::SeriesTooShort { len: n, min: 2 });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::NumericalBreakdown("degenerate abscissa in fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = (syy - slope * sxy).max(0.0);
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let stderr = if n > 2 {
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        r2,
        slope_stderr: stderr,
    })
}

/// First crossing of |w| below |g| / sqrt(2), linearly interpolated.
pub fn halving_time(times: &[f64], norms: &[f64]) -> Option<f64> {
    let target = norms.first()? / std::f64::consts::SQRT_2;
    for i in 1..norms.len() {
        if norms[i] <= target {
            let (t0, t1) = (times[i - 1], times[i]);
            let (n0, n1) = (norms[i - 1], norms[i]);
            if n0 == n1 {
                return Some(t1);
            }
            return Some(t0 + (t1 - t0) * (n0 - target) / (n0 - n1));
        }
    }
    None
}

/// Least-squares exponential fit of a norm series over [window.0, window.1].
/// Samples below the noise floor are truncated away.
pub fn fit_decay(times: &[f64], norms: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    if times.len() != norms.len() || times.len() < 2 {
        return Err(Error::SeriesTooShort {
            len: times.len(),
            min: 2,
        });
    }
    let floor = norms[0] * FLOOR_FACTOR;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &n) in times.iter().zip(norms) {
        if t >= window.0 && t <= window.1 && n > floor {
            xs.push(t);
            ys.push(n.ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::EmptyWindow {
            lo: window.0,
            hi: window.1,
        });
    }
    let fit = linear_fit(&xs, &ys)?;
    Ok(DecayFit {
        c_fit: -fit.slope,
        c_prefactor: fit.intercept.exp() / norms[0],
        t_half: halving_time(times, norms),
        r2: fit.r2,
        window: (xs[0], *xs.last().unwrap()),
        n_points: xs.len(),
    })
}

/// Default fit window for a decaying band series: [5 t_half, min(15 t_half,
/// t_last)] with t_half the measured halving time, falling back to the
/// latter half of the series when the norm never halves. The multi-mode
/// transient stays convex well past the first halving; the window starts
/// where the slowest surviving mode dominates (about (nu k)^{-1/2}).
pub fn default_window(times: &[f64], norms: &[f64]) -> (f64, f64) {
    let t_last = *times.last().unwrap();
    match halving_time(times, norms) {
        Some(th) => ((5.0 * th).min(0.5 * t_last), (15.0 * th).min(t_last)),
        None => (0.5 * t_last, t_last),
    }
}

pub fn fit_mode_decay(ev: &ModeEvolution) -> Result<DecayFit> {
    let norms = ev.norms();
    let w = default_window(&ev.times, &norms);
    fit_decay(&ev.times, &norms, w)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingResult {
    /// slope of log(rate) against log(axis value)
    pub exponent: f64,
    pub stderr: f64,
    pub r2: f64,
    /// (axis value, fitted rate)
    pub points: Vec<(f64, f64)>,
}

pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingResult> {
    if points.len() < 4 {
        return Err(Error::SeriesTooShort {
            len: points.len(),
            min: 4,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(ScalingResult {
        exponent: fit.slope,
        stderr: fit.slope_stderr,
        r2: fit.r2,
        points: points.to_vec(),
    })
}

/// One cell of a decay sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayRow {
    pub nu: f64,
    pub k: usize,
    pub heat_only: bool,
    pub c_fit: f64,
    pub c_prefactor: f64,
    pub t_half: Option<f64>,
    pub t0_theory: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepGrid {
    pub ly: f64,
    pub ny: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub nu_list: Vec<f64>,
    pub k_list: Vec<usize>,
    pub grid: SweepGrid,
    pub epsilon: f64,
    /// multiple of (nu k)^{-1/2} to integrate to
    pub horizon: f64,
    pub samples: usize,
    /// cap on dt as a multiple of 1/(k <y^2>) resolved by the datum; the
    /// spec's dy-based default is available through StepperConfig::auto
    pub dt: DtRule,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DtRule {
    /// spec default: 0.5 * min(0.5 dy/(k Ly^2), 0.01 nu^{-1/2})
    Auto,
    /// resolve the datum's oscillation y-range: dt = c / (k y95^2)
    Phase { c: f64, y95: f64 },
    Fixed(f64),
}

impl DtRule {
    pub fn dt(&self, grid: &Grid, k: usize, nu: f64) -> f64 {
        match *self {
            DtRule::Auto => StepperConfig::auto_dt(grid, k, nu),
            DtRule::Phase { c, y95 } => {
                let k = k.max(1) as f64;
                (c / (k * y95 * y95)).min(0.01 / nu.sqrt())
            }
            DtRule::Fixed(dt) => dt,
        }
    }
}

/// Interior points needed to put ~6 nodes across the oscillatory core of
/// width (nu/k)^{1/4}.
pub fn resolved_ny(base: usize, ly: f64, nu: f64, k: usize) -> usize {
    let width = (nu / k.max(1) as f64).powf(0.25);
    let need = (12.0 * ly / width).ceil() as usize;
    base.max(need).min(4096)
}

/// Evolve one (nu, k) cell on a Gaussian band datum and fit its decay over
/// the eigen-regime window [1.2, 3.8] (nu k)^{-1/2}.
pub fn decay_cell(
    spec: &SweepSpec,
    nu: f64,
    k: usize,
    heat_only: bool,
) -> Result<(DecayRow, ModeEvolution)> {
    let ny = if heat_only {
        spec.grid.ny
    } else {
        resolved_ny(spec.grid.ny, spec.grid.ly, nu, k)
    };
    let grid = Arc::new(Grid::new(spec.grid.ly, ny, k.max(1))?);
    let op = if heat_only {
        ModeOperator::heat_variant(Arc::clone(&grid), k, nu)?
    } else {
        ModeOperator::new(Arc::clone(&grid), k, nu)?
    };
    // heat-only control uses the slowest discrete eigenmode so the rate is a
    // single clean exponential nu (k^2 + lambda_1)
    let datum = if heat_only {
        let ly = grid.ly();
        ModeField::from_fn(Arc::clone(&grid), k, |y| {
            num_complex::Complex64::new(
                (std::f64::consts::PI * (y + ly) / (2.0 * ly)).sin(),
                0.0,
            )
        })
    } else {
        ModeField::from_fn(Arc::clone(&grid), k, |y| {
            num_complex::Complex64::new(0.5 * (-y * y).exp(), 0.0)
        })
    };
    let t_end = if heat_only {
        // heat decays on the nu^{-1} timescale
        let lam1 = (std::f64::consts::PI / (2.0 * grid.ly())).powi(2);
        spec.horizon / (nu * ((k * k) as f64 + lam1))
    } else {
        spec.horizon / (nu * k.max(1) as f64).sqrt()
    };
    let dt = if heat_only {
        t_end / (4.0 * spec.samples as f64)
    } else {
        spec.dt.dt(&grid, k, nu)
    };
    let cfg = StepperConfig::new(dt, t_end, spec.samples);
    let ev = evolve(&op, &datum, &cfg)?;
    let fit = if heat_only {
        fit_mode_decay(&ev)?
    } else {
        let unit = 1.0 / (nu * k.max(1) as f64).sqrt();
        let norms = ev.norms();
        fit_decay(&ev.times, &norms, (1.2 * unit, (3.8 * unit).min(t_end)))?
    };
    let c = HypoConstants::new(spec.epsilon)?;
    let row = DecayRow {
        nu,
        k,
        heat_only,
        c_fit: fit.c_fit,
        c_prefactor: fit.c_prefactor,
        t_half: fit.t_half,
        t0_theory: c.theoretical_halving_time(nu, k),
        r2: fit.r2,
    };
    if !fit.accepted() {
        return Err(Error::NumericalBreakdown(format!(
            "decay fit rejected at nu={nu}, k={k}: r2 = {:.4}",
            fit.r2
        )));
    }
    Ok((row, ev))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub rows: Vec<DecayRow>,
    /// rate vs nu at fixed k = k_list[0]
    pub nu_scaling: ScalingResult,
    /// rate vs k at fixed nu = nu_list nearest 1e-3
    pub k_scaling: Option<ScalingResult>,
    /// heat-only control: rate vs nu
    pub heat_scaling: ScalingResult,
}

/// Rate-scaling sweep: rate vs nu at fixed k, rate vs k at fixed nu, and the
/// heat-only control. Cells run in parallel.
pub fn scaling_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    if spec.nu_list.len() < 4 {
        return Err(Error::SeriesTooShort {
            len: spec.nu_list.len(),
            min: 4,
        });
    }
    let span = spec.nu_list.iter().fold((f64::MAX, f64::MIN), |acc, &v| {
        (acc.0.min(v), acc.1.max(v))
    });
    if span.1 / span.0 < 99.0 {
        return Err(Error::config(
            "physics.nu_list",
            "scaling sweep needs at least two decades of viscosity",
        ));
    }
    let k_fixed = spec.k_list.first().copied().unwrap_or(1);

    // (nu, k, heat) cells
    let mut cells: Vec<(f64, usize, bool)> = Vec::new();
    for &nu in &spec.nu_list {
        cells.push((nu, k_fixed, false));
        cells.push((nu, k_fixed, true));
    }
    let nu_mid = spec
        .nu_list
        .iter()
        .copied()
        .min_by(|a, b| {
            (a.ln() + 3.0 * std::f64::consts::LN_10)
                .abs()
                .partial_cmp(&(b.ln() + 3.0 * std::f64::consts::LN_10).abs())
                .unwrap()
        })
        .unwrap();
    for &k in spec.k_list.iter().skip(1) {
        cells.push((nu_mid, k, false));
    }

    let results: Vec<Result<(DecayRow, ModeEvolution)>> = cells
        .par_iter()
        .map(|&(nu, k, heat)| decay_cell(spec, nu, k, heat))
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.push(r?.0);
    }

    let nu_points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !r.heat_only && r.k == k_fixed)
        .map(|r| (r.nu, r.c_fit))
        .collect();
    let heat_points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.heat_only)
        .map(|r| (r.nu, r.c_fit))
        .collect();
    let k_points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !r.heat_only && r.nu == nu_mid)
        .map(|r| (r.k as f64, r.c_fit))
        .collect();

    Ok(SweepOutcome {
        nu_scaling: fit_scaling(&nu_points)?,
        k_scaling: if k_points.len() >= 4 {
            Some(fit_scaling(&k_points)?)
        } else {
            None
        },
        heat_scaling: fit_scaling(&heat_points)?,
        rows,
    })
}

/// Multi-band datum for the semigroup integral estimates: band norms
/// proportional to k^{-1/2} on k = 1..=kmax with a Gaussian y-profile.
/// This is the equality case of the Cauchy-Schwarz step that produces the
/// logarithmic factor in the L-infinity estimate, and it keeps the
/// x-derivative integral near its extremal scaling once kmax reaches
/// ~ nu^{-1/3}; equal band norms dilute both.
pub fn graded_band_datum(grid: &Arc<Grid>, kmax: usize) -> Vec<ModeField> {
    let norm: f64 = (1..=kmax).map(|k| 1.0 / k as f64).sum();
    (1..=kmax)
        .map(|k| {
            let amp = (1.0 / (k as f64 * norm)).sqrt();
            ModeField::from_fn(Arc::clone(grid), k, move |y| {
                num_complex::Complex64::new(amp * (-y * y).exp(), 0.0)
            })
        })
        .collect()
}

/// Near-extremal datum for the x-derivative integral estimate: one band at
/// the heat/enhanced crossover k* = round(nu^{-1/3}) with the oscillator
/// width (nu/k*)^{1/4}. The family is self-similar across viscosities, so
/// the integral's nu^{-2/3} envelope is measured cleanly.
pub fn crossover_band_datum(nu: f64) -> Result<(Arc<Grid>, Vec<ModeField>)> {
    let kstar = nu.powf(-1.0 / 3.0).round().max(1.0) as usize;
    let w = (nu / kstar as f64).powf(0.25);
    let ly = 2.5;
    let ny = ((14.0 * ly / w).ceil() as usize).clamp(256, 4096);
    let grid = Arc::new(Grid::new(ly, ny, kstar)?);
    let band = ModeField::from_fn(Arc::clone(&grid), kstar, move |y| {
        num_complex::Complex64::new((-y * y / (2.0 * w * w)).exp(), 0.0)
    });
    Ok((grid, vec![band]))
}

/// dt rule matched to `crossover_band_datum`: the solution lives within a
/// few widths of the center, so the phase constraint uses 4w, not Ly.
pub fn crossover_dt_rule(nu: f64) -> DtRule {
    let kstar = nu.powf(-1.0 / 3.0).round().max(1.0) as usize;
    let w = (nu / kstar as f64).powf(0.25);
    DtRule::Phase { c: 0.15, y95: 4.0 * w }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemigroupIntegrals {
    pub nu: f64,
    /// int |grad e^{Lt} g|^2 dt (step-resolution trapezoid, summed over bands)
    pub int_grad_sq: f64,
    /// the hard bound 1/2 nu^{-1} |g|^2
    pub grad_bound: f64,
    /// int |d_x e^{Lt} g| dt
    pub int_x_norm: f64,
    /// int |grad inv(Lap) e^{Lt} g|^2_{Linf} dt (Minkowski band assembly)
    pub int_linf_sq: f64,
    pub g_norm_sq: f64,
    /// fraction of each integral gathered in the last tenth of the horizon
    pub tail_fraction: (f64, f64),
    /// true when both tails are below 1%; otherwise extend the horizon
    pub saturated: bool,
}

/// Measure the three semigroup integrals for a multi-band datum with
/// P_0 g = 0. Bands evolve independently (in parallel) on a shared sample
/// schedule; the cross-band integrands are assembled on that schedule.
pub fn semigroup_integrals(
    bands: Vec<ModeField>,
    nu: f64,
    t_end: f64,
    samples: usize,
    dt_rule: DtRule,
) -> Result<SemigroupIntegrals> {
    if bands.is_empty() {
        return Err(Error::SeriesTooShort { len: 0, min: 1 });
    }
    if bands.iter().any(|b| b.k() == 0) {
        return Err(Error::config(
            "datum",
            "semigroup integrals need P0 g = 0 (no k = 0 band)",
        ));
    }
    let grid = Arc::clone(bands[0].grid());
    let g_norm_sq: f64 = bands.iter().map(l2_norm_sq).sum();

    let evs: Vec<Result<ModeEvolution>> = bands
        .par_iter()
        .map(|b| {
            let op = ModeOperator::new(Arc::clone(&grid), b.k(), nu)?;
            let dt = dt_rule.dt(&grid, b.k(), nu);
            let cfg = StepperConfig::new(dt, t_end, samples);
            evolve(&op, b, &cfg)
        })
        .collect();
    let mut evolutions = Vec::with_capacity(evs.len());
    for e in evs {
        evolutions.push(e?);
    }

    let int_grad_sq: f64 = evolutions.iter().map(|e| e.int_grad_sq).sum();

    // shared sample schedule across bands
    let times = evolutions[0].times.clone();
    let n = times.len();
    let mut x_norm = vec![0.0f64; n];
    let mut linf = vec![0.0f64; n];
    for (b, ev) in bands.iter().zip(&evolutions) {
        let k2 = (b.k() * b.k()) as f64;
        for i in 0..n {
            x_norm[i] += k2 * ev.norm_sq[i];
            // two conjugate modes per band pointwise
            linf[i] += 2.0 * ev.linf_grad_psi[i];
        }
    }
    for v in &mut x_norm {
        *v = v.sqrt();
    }
    let linf_sq: Vec<f64> = linf.iter().map(|v| v * v).collect();

    let trapz = |ys: &[f64], lo: usize, hi: usize| -> f64 {
        let mut acc = 0.0;
        for i in lo..hi {
            acc += 0.5 * (ys[i] + ys[i + 1]) * (times[i + 1] - times[i]);
        }
        acc
    };
    let int_x = trapz(&x_norm, 0, n - 1);
    let int_l = trapz(&linf_sq, 0, n - 1);
    let cut = n - 1 - (n - 1) / 10;
    let tail_x = trapz(&x_norm, cut, n - 1) / int_x.max(f64::MIN_POSITIVE);
    let tail_l = trapz(&linf_sq, cut, n - 1) / int_l.max(f64::MIN_POSITIVE);

    Ok(SemigroupIntegrals {
        nu,
        int_grad_sq,
        grad_bound: 0.5 * g_norm_sq / nu,
        int_x_norm: int_x,
        int_linf_sq: int_l,
        g_norm_sq,
        tail_fraction: (tail_x, tail_l),
        saturated: tail_x < 0.01 && tail_l < 0.01,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_is_recovered() {
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        let norms: Vec<f64> = times.iter().map(|t| (-0.5 * t).exp()).collect();
        let fit = fit_decay(&times, &norms, (0.0, 20.0)).unwrap();
        assert!((fit.c_fit - 0.5).abs() < 1e-6, "c_fit = {}", fit.c_fit);
        assert!(fit.r2 > 0.999999);
    }

    #[test]
    fn constant_series_has_zero_rate_and_no_halving() {
        let times: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let norms = vec![2.0; 50];
        let fit = fit_decay(&times, &norms, (0.0, 49.0)).unwrap();
        assert!(fit.c_fit.abs() < 1e-12);
        assert!(fit.t_half.is_none());
    }

    #[test]
    fn modulated_exponential_within_one_percent() {
        let times: Vec<f64> = (0..400).map(|i| i as f64 * 0.05).collect();
        let norms: Vec<f64> = times
            .iter()
            .map(|t| (-0.8 * t).exp() * (1.0 + 0.01 * t.sin()))
            .collect();
        let fit = fit_decay(&times, &norms, (0.0, 20.0)).unwrap();
        assert!((fit.c_fit - 0.8).abs() < 0.01 * 0.8);
    }

    #[test]
    fn halving_time_interpolates() {
        let times = vec![0.0, 1.0, 2.0, 3.0];
        let norms = vec![1.0, 0.9, 0.5, 0.2];
        let th = halving_time(&times, &norms).unwrap();
        let target = 1.0 / std::f64::consts::SQRT_2;
        assert!((1.0 + (2.0 - 1.0) * (0.9 - target) / (0.9 - 0.5) - th).abs() < 1e-12);
    }

    #[test]
    fn noise_floor_truncates_window() {
        let times: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let norms: Vec<f64> = times
            .iter()
            .map(|t| ((-0.9 * t).exp()).max(1e-17))
            .collect();
        let fit = fit_decay(&times, &norms, (0.0, 99.0)).unwrap();
        // points at the flat 1e-17 floor are excluded
        assert!((fit.c_fit - 0.9).abs() < 1e-3);
    }

    #[test]
    fn fit_is_scale_invariant() {
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let n1: Vec<f64> = times.iter().map(|t| (-0.4 * t).exp()).collect();
        let n10: Vec<f64> = n1.iter().map(|v| 10.0 * v).collect();
        let f1 = fit_decay(&times, &n1, (0.0, 10.0)).unwrap();
        let f10 = fit_decay(&times, &n10, (0.0, 10.0)).unwrap();
        assert!((f1.c_fit - f10.c_fit).abs() < 1e-12);
    }

    #[test]
    fn scaling_fit_recovers_power_law() {
        let pts: Vec<(f64, f64)> = [1e-2, 1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&nu: &f64| (nu, 0.7 * nu.sqrt()))
            .collect();
        let s = fit_scaling(&pts).unwrap();
        assert!((s.exponent - 0.5).abs() < 1e-10);
        assert!(fit_scaling(&pts[..3]).is_err());
    }

    #[test]
    fn crossover_integrand_changes_regime_near_nu_third() {
        // the x-derivative integrand k |w(t)| on the crossover family turns
        // from flat to decaying within a factor 5 of nu^{-1/3}
        let nu = 1e-3;
        let (grid, bands) = crossover_band_datum(nu).unwrap();
        let k = bands[0].k();
        let op = ModeOperator::new(Arc::clone(&grid), k, nu).unwrap();
        let dt = crossover_dt_rule(nu).dt(&grid, k, nu);
        let cfg = StepperConfig::new(dt, 3.0 / nu.sqrt(), 600);
        let ev = evolve(&op, &bands[0], &cfg).unwrap();
        let integrand: Vec<f64> = ev.norm_sq.iter().map(|n| k as f64 * n.sqrt()).collect();
        let tc = halving_time(&ev.times, &integrand).unwrap();
        let t_cross = nu.powf(-1.0 / 3.0);
        assert!(
            tc >= t_cross / 5.0 && tc <= 5.0 * t_cross,
            "regime change at {tc:.2}, expected within a factor 5 of {t_cross:.2}"
        );
    }

    #[test]
    fn theoretical_t0_spec_value() {
        let c = HypoConstants::new(0.02).unwrap();
        let t0 = c.theoretical_halving_time(1e-3, 1);
        assert!((t0 - 940.15).abs() < 0.1, "t0 = {t0}");
    }
}
