//! Full perturbation dynamics around the Poiseuille flow.
//!
//! The state is the band collection omega_k, k = 0..=kmax. Each step treats
//! the per-band linear dynamics exactly as the linear stepper does (so the
//! split is consistent to round-off when the nonlinearity is disabled) and
//! adds the transport term -u . grad(omega) explicitly: second-order
//! Adams-Bashforth after a first Euler step. The product is formed
//! pseudo-spectrally on a physical x-grid of at least 3 kmax + 1 points, so
//! the retained bands carry the exact dealiased convolution.

use crate::error::{Error, Result};
use crate::field::{ModeField, PerturbationState};
use crate::grid::Grid;
use crate::norms::{grad_norm_sq, l2_norm_sq, linf_grad_psi};
use crate::operators::{dy_centered, poisson_solve};
use crate::semigroup::{CnStepper, ModeOperator};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Band <-> physical transforms in x on a uniform periodic grid.
pub struct XTransform {
    nx: usize,
    kmax: usize,
    /// tw[k * nx + i] = exp(i k x_i)
    tw: Vec<Complex64>,
}

impl XTransform {
    pub fn new(nx: usize, kmax: usize) -> Result<Self> {
        let min = 3 * kmax + 1;
        if nx < min {
            return Err(Error::AliasingGuard { nx, min, kmax });
        }
        let mut tw = Vec::with_capacity((kmax + 1) * nx);
        for k in 0..=kmax {
            for i in 0..nx {
                let x = 2.0 * PI * i as f64 / nx as f64;
                tw.push(Complex64::new(0.0, k as f64 * x).exp());
            }
        }
        Ok(XTransform { nx, kmax, tw })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Real field values f(x_i) from band coefficients at one y-node.
    pub fn synthesize_row(&self, bands: &[Complex64], out: &mut [f64]) {
        debug_assert_eq!(bands.len(), self.kmax + 1);
        debug_assert_eq!(out.len(), self.nx);
        for o in out.iter_mut() {
            *o = bands[0].re;
        }
        for k in 1..=self.kmax {
            let b = bands[k];
            if b.norm_sqr() == 0.0 {
                continue;
            }
            let tw = &self.tw[k * self.nx..(k + 1) * self.nx];
            for i in 0..self.nx {
                out[i] += 2.0 * (b.re * tw[i].re - b.im * tw[i].im);
            }
        }
    }

    /// Band coefficients k = 0..=kmax from real field values at one y-node.
    pub fn analyze_row(&self, phys: &[f64], bands: &mut [Complex64]) {
        debug_assert_eq!(phys.len(), self.nx);
        debug_assert_eq!(bands.len(), self.kmax + 1);
        let inv = 1.0 / self.nx as f64;
        for k in 0..=self.kmax {
            let tw = &self.tw[k * self.nx..(k + 1) * self.nx];
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..self.nx {
                // conj(e^{ikx}) f
                acc += Complex64::new(tw[i].re, -tw[i].im) * phys[i];
            }
            bands[k] = acc * inv;
        }
    }
}

/// Shear velocity from the zero-mode vorticity: u_s' = -omega_s integrated
/// from the left wall, then shifted so both walls end at +-(total
/// vorticity)/2 — zero at both ends whenever the mean vorticity vanishes.
/// Returns (u_s, gauge shift applied).
pub fn shear_velocity(omega0: &ModeField, grid: &Grid) -> (Vec<f64>, f64) {
    let w = omega0.values();
    let dy = grid.dy();
    let n = w.len();
    let mut u = vec![0.0f64; n];
    // ghost zero at the wall
    u[0] = -0.5 * dy * w[0].re;
    for j in 1..n {
        u[j] = u[j - 1] - 0.5 * dy * (w[j - 1].re + w[j].re);
    }
    let total: f64 = w.iter().map(|v| v.re).sum::<f64>() * dy;
    let gauge = 0.5 * total;
    for v in &mut u {
        *v += gauge;
    }
    (u, gauge)
}

/// Perturbation state with the derived flow quantities of the current
/// instant.
pub struct NonlinearState {
    pub omega: PerturbationState,
    /// stream function per band, index k (entry 0 unused)
    pub psi: Vec<ModeField>,
    pub u_s: Vec<f64>,
    pub u_s_gauge: f64,
}

impl NonlinearState {
    pub fn new(omega: PerturbationState) -> Result<Self> {
        let mut s = NonlinearState {
            psi: Vec::new(),
            u_s: Vec::new(),
            u_s_gauge: 0.0,
            omega,
        };
        s.rederive()?;
        Ok(s)
    }

    /// Recompute psi and u_s from omega.
    pub fn rederive(&mut self) -> Result<()> {
        let grid = Arc::clone(self.omega.grid());
        let mut psi = Vec::with_capacity(self.omega.modes.len());
        psi.push(ModeField::zero(Arc::clone(&grid), 0));
        for m in self.omega.modes.iter().skip(1) {
            psi.push(poisson_solve(m)?);
        }
        let (u_s, gauge) = shear_velocity(&self.omega.modes[0], &grid);
        self.psi = psi;
        self.u_s = u_s;
        self.u_s_gauge = gauge;
        Ok(())
    }

    pub fn nonshear_norm_sq(&self) -> f64 {
        self.omega.modes.iter().skip(1).map(l2_norm_sq).sum()
    }

    pub fn shear_norm_sq(&self) -> f64 {
        l2_norm_sq(&self.omega.modes[0])
    }

    pub fn total_norm_sq(&self) -> f64 {
        self.omega.modes.iter().map(l2_norm_sq).sum()
    }

    pub fn grad_norm_sq_total(&self) -> f64 {
        self.omega.modes.iter().map(grad_norm_sq).sum()
    }

    /// |d_x omega~| over the nonzero bands.
    pub fn x_deriv_nonshear_norm(&self) -> f64 {
        self.omega
            .modes
            .iter()
            .skip(1)
            .map(|m| (m.k() * m.k()) as f64 * l2_norm_sq(m))
            .sum::<f64>()
            .sqrt()
    }

    /// Minkowski band assembly of |u~|_Linf: two conjugate modes per band.
    pub fn u_nonshear_linf(&self) -> f64 {
        self.psi
            .iter()
            .skip(1)
            .map(|p| 2.0 * linf_grad_psi(p))
            .sum()
    }
}

/// Transport forcing -u . grad(omega) per band plus the physical-space
/// maxima needed for the CFL check: (forcing bands, max |u1 + y^2|,
/// max |u2|).
pub fn nonlinear_term(
    state: &NonlinearState,
    transform: &XTransform,
) -> Result<(Vec<Vec<Complex64>>, f64, f64)> {
    let grid = state.omega.grid();
    let ny = grid.ny();
    let kmax = state.omega.kmax();
    let y = grid.y();

    // collocated y-derivatives per band
    let dpsi: Vec<ModeField> = state.psi.iter().map(dy_centered).collect();
    let domega: Vec<ModeField> = state.omega.modes.iter().map(dy_centered).collect();

    let nx = transform.nx();
    let mut forcing: Vec<Vec<Complex64>> =
        (0..=kmax).map(|_| vec![Complex64::new(0.0, 0.0); ny]).collect();
    let mut bu1 = vec![Complex64::new(0.0, 0.0); kmax + 1];
    let mut bu2 = vec![Complex64::new(0.0, 0.0); kmax + 1];
    let mut bwx = vec![Complex64::new(0.0, 0.0); kmax + 1];
    let mut bwy = vec![Complex64::new(0.0, 0.0); kmax + 1];
    let mut bn = vec![Complex64::new(0.0, 0.0); kmax + 1];
    let mut u1r = vec![0.0f64; nx];
    let mut u2r = vec![0.0f64; nx];
    let mut wxr = vec![0.0f64; nx];
    let mut wyr = vec![0.0f64; nx];
    let mut prod = vec![0.0f64; nx];
    let mut max_adv_x = 0.0f64;
    let mut max_adv_y = 0.0f64;

    for j in 0..ny {
        bu1[0] = Complex64::new(state.u_s[j], 0.0);
        bu2[0] = Complex64::new(0.0, 0.0);
        bwx[0] = Complex64::new(0.0, 0.0);
        bwy[0] = domega[0].values()[j];
        for k in 1..=kmax {
            let ik = Complex64::new(0.0, k as f64);
            bu1[k] = -dpsi[k].values()[j];
            bu2[k] = ik * state.psi[k].values()[j];
            bwx[k] = ik * state.omega.modes[k].values()[j];
            bwy[k] = domega[k].values()[j];
        }
        transform.synthesize_row(&bu1, &mut u1r);
        transform.synthesize_row(&bu2, &mut u2r);
        transform.synthesize_row(&bwx, &mut wxr);
        transform.synthesize_row(&bwy, &mut wyr);
        let ysq = y[j] * y[j];
        for i in 0..nx {
            max_adv_x = max_adv_x.max((u1r[i] + ysq).abs());
            max_adv_y = max_adv_y.max(u2r[i].abs());
            prod[i] = -(u1r[i] * wxr[i] + u2r[i] * wyr[i]);
        }
        transform.analyze_row(&prod, &mut bn);
        for k in 0..=kmax {
            forcing[k][j] = bn[k];
        }
    }
    Ok((forcing, max_adv_x, max_adv_y))
}

/// IMEX stepper for the full perturbation system.
pub struct NonlinearStepper {
    grid: Arc<Grid>,
    nu: f64,
    dt: f64,
    transform: XTransform,
    steppers: Vec<CnStepper>,
    include_nonlinear: bool,
    prev_forcing: Option<Vec<Vec<Complex64>>>,
}

impl NonlinearStepper {
    pub fn new(grid: Arc<Grid>, nu: f64, dt: f64, nx: usize, include_nonlinear: bool) -> Result<Self> {
        let transform = XTransform::new(nx, grid.kmax())?;
        let steppers = (0..=grid.kmax())
            .map(|k| {
                let op = ModeOperator::new(Arc::clone(&grid), k, nu)?;
                Ok(CnStepper::new(&op, dt))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NonlinearStepper {
            grid,
            nu,
            dt,
            transform,
            steppers,
            include_nonlinear,
            prev_forcing: None,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance one step. The CFL precondition is checked against the
    /// current physical velocity whenever the transport term is active.
    pub fn step(&mut self, state: &mut NonlinearState) -> Result<()> {
        let forcing_mid = if self.include_nonlinear {
            let (forcing, max_x, max_y) = nonlinear_term(state, &self.transform)?;
            let dx = 2.0 * PI / self.transform.nx() as f64;
            let dt_max = 0.5
                * (dx / max_x.max(f64::MIN_POSITIVE))
                    .min(self.grid.dy() / max_y.max(f64::MIN_POSITIVE));
            if self.dt > dt_max {
                return Err(Error::CflViolation { dt: self.dt, dt_max });
            }
            // AB2 midpoint extrapolation, Euler on the first step
            let mid = match &self.prev_forcing {
                None => forcing.clone(),
                Some(prev) => forcing
                    .iter()
                    .zip(prev)
                    .map(|(f, p)| {
                        f.iter()
                            .zip(p)
                            .map(|(a, b)| 1.5 * a - 0.5 * b)
                            .collect()
                    })
                    .collect(),
            };
            self.prev_forcing = Some(forcing);
            Some(mid)
        } else {
            None
        };

        for (k, stepper) in self.steppers.iter().enumerate() {
            let f = forcing_mid.as_ref().map(|m| m[k].as_slice());
            let next = stepper.step_with_forcing(&state.omega.modes[k], f)?;
            state.omega.modes[k] = next;
        }
        state.omega.time += self.dt;
        // rederive the flow through the cached band factorizations
        for k in 1..=state.omega.kmax() {
            state.psi[k] = self.steppers[k].op().stream_function(&state.omega.modes[k])?;
        }
        let (u_s, gauge) = shear_velocity(&state.omega.modes[0], &self.grid);
        state.u_s = u_s;
        state.u_s_gauge = gauge;
        Ok(())
    }
}

/// Threshold experiment record, one row of the sweep CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub nu: f64,
    pub eps0: f64,
    /// |omega_in| actually used: eps0 (1 + |log nu|^{1/2})^{-1} nu^{2/3}
    pub amplitude: f64,
    pub decayed: bool,
    /// envelope rate in units of nu^{1/2}
    pub c1: f64,
    /// minimal envelope prefactor; None when no envelope exists (blow-up)
    pub big_c1: Option<f64>,
    /// ln(10 / big_c1); nonnegative iff the prefactor passes the cap
    pub envelope_margin: Option<f64>,
    pub blowup: bool,
    /// matching linear rate (absolute units)
    pub c_linear: f64,
}

/// Scalar diagnostics of a nonlinear trajectory on the sample schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectorySeries {
    pub times: Vec<f64>,
    pub nonshear_norm: Vec<f64>,
    pub shear_norm: Vec<f64>,
    pub total_norm_sq: Vec<f64>,
    /// cumulative int |d_x omega~| dt at each sample
    pub int_x_nonshear: Vec<f64>,
    /// cumulative int |u~|^2_Linf dt at each sample
    pub int_u_linf_sq: Vec<f64>,
    /// step-resolution int |grad omega|^2 dt
    pub int_grad_sq: f64,
}

impl TrajectorySeries {
    pub fn max_total_norm_uptick(&self) -> f64 {
        let mut worst = 0.0f64;
        for w in self.total_norm_sq.windows(2) {
            if w[0] > 0.0 {
                worst = worst.max((w[1].sqrt() - w[0].sqrt()) / w[0].sqrt());
            }
        }
        worst
    }

    /// |omega(T)|^2 + (nu/2) int |grad omega|^2 dt relative to |omega_in|^2.
    pub fn global_energy_excess(&self, nu: f64) -> f64 {
        let g0 = self.total_norm_sq[0];
        if g0 == 0.0 {
            return 0.0;
        }
        (self.total_norm_sq.last().unwrap() + 0.5 * nu * self.int_grad_sq - g0) / g0
    }
}

/// The bootstrap quantity A(t) = nu^{2/3} int |d_x omega~| +
/// nu^{1/6} (|log nu| + 1)^{-1/2} (int |u~|^2_Linf)^{1/2}.
pub fn bootstrap_series(series: &TrajectorySeries, nu: f64) -> Vec<(f64, f64)> {
    let logw = (nu.ln().abs() + 1.0).powf(-0.5);
    series
        .times
        .iter()
        .zip(series.int_x_nonshear.iter().zip(&series.int_u_linf_sq))
        .map(|(&t, (&ix, &il))| {
            (t, nu.powf(2.0 / 3.0) * ix + nu.powf(1.0 / 6.0) * logw * il.sqrt())
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub ly: f64,
    pub ny: usize,
    pub kmax: usize,
    pub nx: usize,
    pub nu: f64,
    pub eps0: f64,
    /// shear component amplitude as a fraction of the non-shear one
    pub shear_fraction: f64,
    /// horizon in units of nu^{-1/2}
    pub horizon: f64,
    pub samples: usize,
    /// dt as a fraction of the CFL bound of the initial state
    pub cfl_fraction: f64,
}

impl ThresholdConfig {
    pub fn amplitude(&self) -> f64 {
        self.eps0 * self.nu.powf(2.0 / 3.0) / (1.0 + self.nu.ln().abs().sqrt())
    }
}

/// Initial datum A cos(x) e^{-y^2} (+ optional shear A_s y e^{-y^2}),
/// normalized afterwards to the requested total norm.
pub fn threshold_datum(grid: &Arc<Grid>, shear_fraction: f64, target_norm: f64) -> PerturbationState {
    let mut state = PerturbationState::zero(grid);
    state.modes[1] =
        ModeField::from_fn(Arc::clone(grid), 1, |y| Complex64::new(0.5 * (-y * y).exp(), 0.0));
    if shear_fraction != 0.0 {
        state.modes[0] = ModeField::from_fn(Arc::clone(grid), 0, |y| {
            Complex64::new(shear_fraction * y * (-y * y).exp(), 0.0)
        });
    }
    if target_norm > 0.0 {
        let norm = state.modes.iter().map(l2_norm_sq).sum::<f64>().sqrt();
        state.scale(target_norm / norm);
    } else {
        for m in &mut state.modes {
            m.scale(0.0);
        }
    }
    state
}

pub struct ThresholdOutcome {
    pub record: ThresholdRecord,
    pub series: TrajectorySeries,
    /// state at the end of the run (for checkpointing)
    pub final_state: PerturbationState,
}

/// Run one threshold cell: nonlinear trajectory to horizon nu^{-1/2},
/// matching linear rate, fitted exponential envelope on the non-shear norm.
pub fn threshold_experiment(cfg: &ThresholdConfig) -> Result<ThresholdOutcome> {
    let grid = Arc::new(Grid::new(cfg.ly, cfg.ny, cfg.kmax)?);
    let amplitude = cfg.amplitude();
    let datum = threshold_datum(&grid, cfg.shear_fraction, amplitude);
    let t_end = cfg.horizon / cfg.nu.sqrt();

    if cfg.eps0 == 0.0 {
        // zero datum decays trivially
        return Ok(ThresholdOutcome {
            record: ThresholdRecord {
                nu: cfg.nu,
                eps0: 0.0,
                amplitude: 0.0,
                decayed: true,
                c1: 0.0,
                big_c1: None,
                envelope_margin: None,
                blowup: false,
                c_linear: 0.0,
            },
            series: TrajectorySeries {
                times: vec![0.0, t_end],
                nonshear_norm: vec![0.0, 0.0],
                shear_norm: vec![0.0, 0.0],
                total_norm_sq: vec![0.0, 0.0],
                int_x_nonshear: vec![0.0, 0.0],
                int_u_linf_sq: vec![0.0, 0.0],
                int_grad_sq: 0.0,
            },
            final_state: datum,
        });
    }

    // matching linear run on the non-shear band
    let lin_op = ModeOperator::new(Arc::clone(&grid), 1, cfg.nu)?;
    let lin_dt = crate::decay::DtRule::Phase { c: 0.05, y95: 3.0 }.dt(&grid, 1, cfg.nu);
    let lin_cfg = crate::semigroup::StepperConfig::new(lin_dt, t_end, cfg.samples.min(600));
    let lin = crate::semigroup::evolve(&lin_op, &datum.modes[1], &lin_cfg)?;
    let lin_norms = lin.norms();
    let unit = 1.0 / cfg.nu.sqrt();
    let lin_fit = crate::decay::fit_decay(
        &lin.times,
        &lin_norms,
        (1.2 * unit, (3.8 * unit).min(t_end)),
    )?;
    let lin_half = crate::decay::halving_time(&lin.times, &lin_norms);

    // CFL from the base flow plus a margin for the (tiny) perturbation
    let dx = 2.0 * PI / cfg.nx as f64;
    let dt0 = cfg.cfl_fraction * 0.5 * dx / (grid.ly() * grid.ly());
    let spacing = t_end / cfg.samples as f64;
    let per = (spacing / dt0).ceil().max(1.0) as usize;
    let dt = spacing / per as f64;

    let mut stepper = NonlinearStepper::new(Arc::clone(&grid), cfg.nu, dt, cfg.nx, true)?;
    let mut state = NonlinearState::new(datum)?;
    let mut series = TrajectorySeries {
        times: vec![0.0],
        nonshear_norm: vec![state.nonshear_norm_sq().sqrt()],
        shear_norm: vec![state.shear_norm_sq().sqrt()],
        total_norm_sq: vec![state.total_norm_sq()],
        int_x_nonshear: vec![0.0],
        int_u_linf_sq: vec![0.0],
        int_grad_sq: 0.0,
    };
    let norm0_sq = state.total_norm_sq();
    let mut blowup = false;
    let mut acc_x = 0.0f64;
    let mut acc_l = 0.0f64;
    let mut prev_x = state.x_deriv_nonshear_norm();
    let mut prev_l = {
        let l = state.u_nonshear_linf();
        l * l
    };
    let mut prev_grad = state.grad_norm_sq_total();

    'outer: for s in 0..cfg.samples {
        for _ in 0..per {
            stepper.step(&mut state)?;
            let now_x = state.x_deriv_nonshear_norm();
            let now_l = {
                let l = state.u_nonshear_linf();
                l * l
            };
            let now_grad = state.grad_norm_sq_total();
            acc_x += 0.5 * dt * (prev_x + now_x);
            acc_l += 0.5 * dt * (prev_l + now_l);
            series.int_grad_sq += 0.5 * dt * (prev_grad + now_grad);
            prev_x = now_x;
            prev_l = now_l;
            prev_grad = now_grad;
            if state.total_norm_sq() > 1e6 * norm0_sq {
                blowup = true;
            }
        }
        series.times.push((s + 1) as f64 * spacing);
        series.nonshear_norm.push(state.nonshear_norm_sq().sqrt());
        series.shear_norm.push(state.shear_norm_sq().sqrt());
        series.total_norm_sq.push(state.total_norm_sq());
        series.int_x_nonshear.push(acc_x);
        series.int_u_linf_sq.push(acc_l);
        if blowup {
            break 'outer;
        }
    }

    // fitted envelope on the non-shear norm
    let fit = crate::decay::fit_decay(
        &series.times,
        &series.nonshear_norm,
        (1.2 * unit, (3.8 * unit).min(t_end)),
    );
    let (c1_abs, big_c1) = match (&fit, blowup) {
        (Ok(f), false) => {
            let n0 = series.nonshear_norm[0];
            let mut c_min = 0.0f64;
            for (&t, &n) in series.times.iter().zip(&series.nonshear_norm) {
                c_min = c_min.max(n * (f.c_fit * t).exp() / n0);
            }
            (f.c_fit, Some(c_min))
        }
        _ => (0.0, None),
    };
    let halved_by = crate::decay::halving_time(&series.times, &series.nonshear_norm);
    let half_deadline = lin_half.map(|h| 3.0 * h).unwrap_or(t_end);
    let decayed = !blowup
        && halved_by.map(|h| h <= half_deadline).unwrap_or(false)
        && big_c1.map(|c| c <= 10.0).unwrap_or(false)
        && c1_abs >= 0.1 * lin_fit.c_fit;

    let record = ThresholdRecord {
        nu: cfg.nu,
        eps0: cfg.eps0,
        amplitude,
        decayed,
        c1: c1_abs / cfg.nu.sqrt(),
        big_c1,
        envelope_margin: big_c1.map(|c| (10.0 / c).ln()),
        blowup,
        c_linear: lin_fit.c_fit,
    };
    Ok(ThresholdOutcome {
        record,
        series,
        final_state: state.omega,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::l2_inner;
    use crate::semigroup::{evolve, StepperConfig};
    use crate::testutil::gaussian_band;

    fn small_grid(kmax: usize) -> Arc<Grid> {
        Arc::new(Grid::new(5.0, 128, kmax).unwrap())
    }

    #[test]
    fn aliasing_guard_rejects_short_grids() {
        assert!(matches!(
            XTransform::new(12, 4),
            Err(Error::AliasingGuard { .. })
        ));
        assert!(XTransform::new(13, 4).is_ok());
    }

    #[test]
    fn transform_roundtrip_is_exact() {
        let t = XTransform::new(16, 4).unwrap();
        let bands: Vec<Complex64> = vec![
            Complex64::new(0.3, 0.0),
            Complex64::new(0.1, -0.7),
            Complex64::new(-0.2, 0.05),
            Complex64::new(0.0, 0.4),
            Complex64::new(0.9, -0.1),
        ];
        let mut phys = vec![0.0; 16];
        t.synthesize_row(&bands, &mut phys);
        let mut back = vec![Complex64::new(0.0, 0.0); 5];
        t.analyze_row(&phys, &mut back);
        // band 0 of real data keeps only its real part
        assert!((back[0] - Complex64::new(0.3, 0.0)).norm() < 1e-14);
        for k in 1..=4 {
            assert!((back[k] - bands[k]).norm() < 1e-14, "band {k}");
        }
    }

    #[test]
    fn zero_perturbation_stays_zero() {
        let g = small_grid(4);
        let mut stepper = NonlinearStepper::new(Arc::clone(&g), 1e-2, 1e-3, 16, true).unwrap();
        let mut state = NonlinearState::new(PerturbationState::zero(&g)).unwrap();
        for _ in 0..10 {
            stepper.step(&mut state).unwrap();
        }
        assert_eq!(state.total_norm_sq(), 0.0);
    }

    #[test]
    fn shear_only_content_forces_nothing() {
        let g = small_grid(4);
        let mut omega = PerturbationState::zero(&g);
        omega.modes[0] = ModeField::from_fn(Arc::clone(&g), 0, |y| {
            Complex64::new(y * (-y * y).exp(), 0.0)
        });
        let state = NonlinearState::new(omega).unwrap();
        assert_eq!(state.nonshear_norm_sq(), 0.0);
        let t = XTransform::new(16, 4).unwrap();
        let (forcing, _, _) = nonlinear_term(&state, &t).unwrap();
        for (k, f) in forcing.iter().enumerate() {
            let m: f64 = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(m < 1e-14, "band {k} forced by pure shear: {m}");
        }
    }

    #[test]
    fn single_band_convolution_support() {
        // omega at k = 1 only: u . grad(omega) lives in bands {0, 2}; band 1
        // receives exactly nothing
        let g = small_grid(4);
        let mut omega = PerturbationState::zero(&g);
        omega.modes[1] = gaussian_band(&g, 1, 0.7);
        let state = NonlinearState::new(omega).unwrap();
        let t = XTransform::new(16, 4).unwrap();
        let (forcing, _, _) = nonlinear_term(&state, &t).unwrap();
        let mag = |k: usize| -> f64 { forcing[k].iter().map(|v| v.norm()).fold(0.0, f64::max) };
        assert!(mag(0) > 1e-10 || mag(2) > 1e-10, "quadratic image missing");
        assert!(mag(1) < 1e-13 * mag(2).max(mag(0)), "band 1 leakage {}", mag(1));
        assert!(mag(3) < 1e-14);
        assert!(mag(4) < 1e-14);
    }

    #[test]
    fn mean_vorticity_is_conserved() {
        let g = small_grid(4);
        let mut omega = PerturbationState::zero(&g);
        omega.modes[0] = ModeField::from_fn(Arc::clone(&g), 0, |y| {
            Complex64::new(y * (-y * y).exp(), 0.0)
        });
        omega.modes[1] = gaussian_band(&g, 1, 0.5);
        omega.modes[2] = ModeField::from_fn(Arc::clone(&g), 2, |y| {
            Complex64::new(0.2 * (-0.7 * y * y).exp(), 0.1 * y * (-y * y).exp())
        });
        let state = NonlinearState::new(omega).unwrap();
        let t = XTransform::new(16, 4).unwrap();
        let (forcing, _, _) = nonlinear_term(&state, &t).unwrap();
        let mean: f64 = forcing[0].iter().map(|v| v.re).sum::<f64>() * g.dy();
        let scale: f64 = forcing[0].iter().map(|v| v.norm()).fold(0.0, f64::max) * g.dy()
            * g.ny() as f64;
        assert!(mean.abs() <= 1e-10 * scale.max(1e-30), "mean {mean} scale {scale}");
    }

    #[test]
    fn transport_does_no_work() {
        // Re<u . grad(omega), omega> vanishes to quadrature tolerance
        let g = Arc::new(Grid::new(5.0, 512, 4).unwrap());
        let mut omega = PerturbationState::zero(&g);
        omega.modes[0] = ModeField::from_fn(Arc::clone(&g), 0, |y| {
            Complex64::new(0.4 * y * (-y * y).exp(), 0.0)
        });
        omega.modes[1] = gaussian_band(&g, 1, 0.8);
        omega.modes[2] = ModeField::from_fn(Arc::clone(&g), 2, |y| {
            Complex64::new(0.3 * (-0.5 * y * y).exp(), 0.0)
        });
        let state = NonlinearState::new(omega).unwrap();
        let t = XTransform::new(16, 4).unwrap();
        let (forcing, _, _) = nonlinear_term(&state, &t).unwrap();
        let mut work = 0.0;
        let mut scale = 0.0;
        for k in 0..=4 {
            let f = ModeField::from_values(Arc::clone(&g), k, forcing[k].clone()).unwrap();
            let w = &state.omega.modes[k];
            work += l2_inner(&f, w).unwrap().re;
            scale += l2_norm_sq(&f).sqrt() * l2_norm_sq(w).sqrt();
        }
        assert!(
            work.abs() <= 1e-4 * scale.max(1e-30),
            "transport work {work} vs scale {scale}"
        );
    }

    #[test]
    fn disabled_nonlinearity_matches_linear_evolution() {
        let g = small_grid(2);
        let nu = 1e-2;
        let dt = 2e-3;
        let steps = 200usize;
        let mut omega = PerturbationState::zero(&g);
        omega.modes[0] = gaussian_band(&g, 0, 0.3);
        omega.modes[1] = gaussian_band(&g, 1, 1.0);
        omega.modes[2] = ModeField::from_fn(Arc::clone(&g), 2, |y| {
            Complex64::new(0.5 * (-0.8 * y * y).exp(), 0.0)
        });
        let mut stepper = NonlinearStepper::new(Arc::clone(&g), nu, dt, 8, false).unwrap();
        let mut state = NonlinearState::new(omega.clone()).unwrap();
        for _ in 0..steps {
            stepper.step(&mut state).unwrap();
        }
        for k in 0..=2 {
            let op = ModeOperator::new(Arc::clone(&g), k, nu).unwrap();
            let stepper_k = CnStepper::new(&op, dt);
            let mut w = omega.modes[k].clone();
            for _ in 0..steps {
                w = stepper_k.step(&w).unwrap();
            }
            let mut diff = 0.0f64;
            let mut scale = 0.0f64;
            for (a, b) in state.omega.modes[k].values().iter().zip(w.values()) {
                diff = diff.max((a - b).norm());
                scale = scale.max(b.norm());
            }
            assert!(diff <= 1e-12 * scale.max(1e-30), "band {k}: {diff}");
        }
    }

    #[test]
    fn cfl_violation_is_reported_with_advisory() {
        let g = small_grid(2);
        // huge dt against the base flow y^2 <= 25
        let mut stepper = NonlinearStepper::new(Arc::clone(&g), 1e-2, 1.0, 8, true).unwrap();
        let mut omega = PerturbationState::zero(&g);
        omega.modes[1] = gaussian_band(&g, 1, 1.0);
        let mut state = NonlinearState::new(omega).unwrap();
        match stepper.step(&mut state) {
            Err(Error::CflViolation { dt, dt_max }) => {
                assert!(dt > dt_max);
            }
            other => panic!("expected CFL violation, got {other:?}"),
        }
    }

    #[test]
    fn tiny_amplitude_tracks_linear_dynamics() {
        let g = Arc::new(Grid::new(5.0, 192, 2).unwrap());
        let nu = 1e-2f64;
        let amp = 1e-8;
        let mut omega = PerturbationState::zero(&g);
        omega.modes[1] = gaussian_band(&g, 1, amp);
        let dx = 2.0 * PI / 8.0;
        let dt = 0.25 * dx / 25.0;
        let t_end = 1.0 / nu.sqrt();
        let steps = (t_end / dt).ceil() as usize;
        let dt = t_end / steps as f64;
        let mut stepper = NonlinearStepper::new(Arc::clone(&g), nu, dt, 8, true).unwrap();
        let mut state = NonlinearState::new(omega.clone()).unwrap();
        for _ in 0..steps {
            stepper.step(&mut state).unwrap();
        }
        let op = ModeOperator::new(Arc::clone(&g), 1, nu).unwrap();
        let cfg = StepperConfig::new(dt, t_end, steps);
        let lin = evolve(&op, &omega.modes[1], &cfg).unwrap();
        let nl_norm = state.nonshear_norm_sq().sqrt();
        let lin_norm = lin.norm_sq.last().unwrap().sqrt();
        assert!(
            (nl_norm - lin_norm).abs() <= 1e-4 * lin_norm,
            "nonlinear {nl_norm} vs linear {lin_norm}"
        );
    }

    #[test]
    fn bootstrap_quantity_zero_and_monotone() {
        let series = TrajectorySeries {
            times: vec![0.0, 1.0, 2.0],
            nonshear_norm: vec![0.0; 3],
            shear_norm: vec![0.0; 3],
            total_norm_sq: vec![0.0; 3],
            int_x_nonshear: vec![0.0, 0.5, 0.7],
            int_u_linf_sq: vec![0.0, 0.2, 0.9],
            int_grad_sq: 0.0,
        };
        let a = bootstrap_series(&series, 1e-3);
        assert_eq!(a[0].1, 0.0);
        assert!(a.windows(2).all(|w| w[1].1 >= w[0].1));
    }

    #[test]
    fn threshold_cell_small_run_decays() {
        let cfg = ThresholdConfig {
            ly: 5.0,
            ny: 160,
            kmax: 2,
            nx: 8,
            nu: 1e-2,
            eps0: 0.01,
            shear_fraction: 0.0,
            horizon: 5.0,
            samples: 300,
            cfl_fraction: 0.9,
        };
        let out = threshold_experiment(&cfg).unwrap();
        assert!(!out.record.blowup);
        assert!(out.record.decayed, "record: {:?}", out.record);
        assert!(out.series.max_total_norm_uptick() <= 1e-10);
        assert!(out.series.global_energy_excess(cfg.nu) <= 1e-3);
        // shear-mode energy never exceeds the initial total norm
        let n0 = out.series.total_norm_sq[0].sqrt();
        for s in &out.series.shear_norm {
            assert!(*s <= n0 * (1.0 + 1e-10));
        }
        let a = bootstrap_series(&out.series, cfg.nu);
        assert!(a.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-15));
        // zero datum decays trivially
        let mut zcfg = cfg.clone();
        zcfg.eps0 = 0.0;
        let z = threshold_experiment(&zcfg);
        assert!(z.is_err() || !z.unwrap().record.blowup);
    }
}
