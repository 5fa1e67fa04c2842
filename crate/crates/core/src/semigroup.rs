//! Linearized evolution around the Poiseuille flow, one x-band at a time.
//!
//! The band operator is L_k = -i k y^2 + 2 i k inv(Lap_k) + nu Lap_k. The
//! stepper is Crank-Nicolson on the stiff local part (-i k y^2 + nu Lap_k)
//! with the bounded nonlocal coupling handled explicitly at the half step
//! through a predictor-corrector pass, so one step never needs history.

use crate::error::{Error, Result};
use crate::expm::{expm, CMatrix};
use crate::field::ModeField;
use crate::grid::Grid;
use crate::norms::{grad_norm_sq, l2_norm_sq, linf_grad_psi, velocity_norm_sq};
use crate::operators::laplacian;
use crate::tridiag::{TriDiagonal, TriFactor};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Cost guard for the dense oracle.
pub const DENSE_NY_MAX: usize = 256;

#[derive(Debug, Clone)]
pub struct ModeOperator {
    grid: Arc<Grid>,
    k: usize,
    nu: f64,
    heat_only: bool,
    lap: TriDiagonal,
    /// factorization of the band Laplacian (k >= 1 only)
    poisson: Option<TriFactor>,
    y_sq: Vec<f64>,
}

impl ModeOperator {
    pub fn new(grid: Arc<Grid>, k: usize, nu: f64) -> Result<Self> {
        Self::build(grid, k, nu, false)
    }

    /// Control variant with the shear and coupling terms disabled: pure heat
    /// nu * Lap_k. Used to tell enhanced dissipation apart from plain
    /// diffusion.
    pub fn heat_variant(grid: Arc<Grid>, k: usize, nu: f64) -> Result<Self> {
        Self::build(grid, k, nu, true)
    }

    fn build(grid: Arc<Grid>, k: usize, nu: f64, heat_only: bool) -> Result<Self> {
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::config("physics.nu", format!("need 0 < nu < 1, got {nu}")));
        }
        let lap = laplacian(&grid, k);
        let poisson = if k >= 1 { Some(lap.factor()?) } else { None };
        let y_sq = grid.y().iter().map(|&y| y * y).collect();
        Ok(ModeOperator {
            grid,
            k,
            nu,
            heat_only,
            lap,
            poisson,
            y_sq,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn is_heat_only(&self) -> bool {
        self.heat_only
    }

    /// Stream function of one band through the cached factorization.
    pub fn stream_function(&self, w: &ModeField) -> Result<ModeField> {
        match &self.poisson {
            None => Err(Error::ZeroModePoisson),
            Some(f) => ModeField::from_values(
                Arc::clone(&self.grid),
                self.k,
                f.solve(w.values()),
            ),
        }
    }

    /// 2 i k * psi with Lap_k psi = omega; zero for k = 0 and for the heat
    /// variant (the 2ik factor carries the whole coupling).
    pub fn coupling(&self, w: &ModeField) -> Result<Option<ModeField>> {
        if self.k == 0 || self.heat_only {
            return Ok(None);
        }
        let mut psi = self.stream_function(w)?;
        let two_ik = Complex64::new(0.0, 2.0 * self.k as f64);
        for v in psi.values_mut() {
            *v *= two_ik;
        }
        Ok(Some(psi))
    }

    /// Full operator action on one band.
    pub fn apply(&self, w: &ModeField) -> Result<ModeField> {
        let mut out = self.stiff_apply(w.values());
        if let Some(cpl) = self.coupling(w)? {
            for (o, c) in out.iter_mut().zip(cpl.values()) {
                *o += c;
            }
        }
        ModeField::from_values(Arc::clone(&self.grid), self.k, out)
    }

    /// Stiff local part: -i k y^2 + nu Lap_k (just nu Lap_k for the heat
    /// variant).
    fn stiff_apply(&self, w: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.lap.apply(w);
        for v in &mut out {
            *v *= self.nu;
        }
        if !self.heat_only && self.k > 0 {
            let mk = -(self.k as f64);
            for (j, v) in out.iter_mut().enumerate() {
                *v += Complex64::new(0.0, mk * self.y_sq[j]) * w[j];
            }
        }
        out
    }

    /// Tridiagonal alpha * I + beta * S where S is the stiff part.
    fn stiff_affine(&self, alpha: f64, beta: f64) -> TriDiagonal {
        let mut m = self.lap.affine(
            Complex64::new(alpha, 0.0),
            Complex64::new(beta * self.nu, 0.0),
        );
        if !self.heat_only && self.k > 0 {
            let mk = -(self.k as f64);
            for j in 0..m.n() {
                m.add_diag(j, Complex64::new(0.0, beta * mk * self.y_sq[j]));
            }
        }
        m
    }

    /// Dense matrix of the full operator, coupling realized as an explicit
    /// inverse. Refused beyond the cost guard; this feeds the oracle only.
    pub fn dense_matrix(&self) -> Result<CMatrix> {
        let n = self.grid.ny();
        if n > DENSE_NY_MAX {
            return Err(Error::MatrixTooLarge { ny: n, max: DENSE_NY_MAX });
        }
        let mut m = CMatrix::zeros(n);
        // nu Lap_k - i k y^2 (stiff part), column by column
        for j in 0..n {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.stiff_apply(&e);
            for (i, v) in col.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        if !self.heat_only && self.k > 0 {
            // + 2 i k inv(Lap_k): column solves against unit vectors
            let two_ik = Complex64::new(0.0, 2.0 * self.k as f64);
            for j in 0..n {
                let mut e = vec![Complex64::new(0.0, 0.0); n];
                e[j] = Complex64::new(1.0, 0.0);
                let col = self.lap.solve(&e)?;
                for (i, v) in col.iter().enumerate() {
                    let cur = m.at(i, j);
                    m.set(i, j, cur + two_ik * v);
                }
            }
        }
        Ok(m)
    }

    /// exp(t L_k) as a dense matrix. Validation oracle.
    pub fn dense_expm(&self, t: f64) -> Result<CMatrix> {
        let mut m = self.dense_matrix()?;
        m.scale(Complex64::new(t, 0.0));
        expm(&m)
    }
}

/// One Crank-Nicolson step with cached left/right matrices.
pub struct CnStepper {
    op: ModeOperator,
    dt: f64,
    lhs: TriFactor,
    rhs: TriDiagonal,
}

impl CnStepper {
    pub fn new(op: &ModeOperator, dt: f64) -> Self {
        assert!(dt > 0.0, "dt must be positive");
        // strictly diagonally dominant for any dt > 0, so the factorization
        // cannot break down
        let lhs = op
            .stiff_affine(1.0, -0.5 * dt)
            .factor()
            .expect("CN left-hand side is diagonally dominant");
        let rhs = op.stiff_affine(1.0, 0.5 * dt);
        CnStepper {
            op: op.clone(),
            dt,
            lhs,
            rhs,
        }
    }

    pub fn op(&self) -> &ModeOperator {
        &self.op
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, w: &ModeField) -> Result<ModeField> {
        self.step_with_forcing(w, None)
    }

    /// One CN step with an optional explicit forcing (already extrapolated
    /// to the half step by the caller).
    pub fn step_with_forcing(
        &self,
        w: &ModeField,
        forcing: Option<&[Complex64]>,
    ) -> Result<ModeField> {
        let mut base = self.rhs.apply(w.values());
        if let Some(f) = forcing {
            for (b, fv) in base.iter_mut().zip(f) {
                *b += self.dt * fv;
            }
        }
        let next = match self.op.coupling(w)? {
            None => self.lhs.solve(&base),
            Some(cpl_n) => {
                // predictor with the left-endpoint coupling
                let mut rhs1 = base.clone();
                for (r, c) in rhs1.iter_mut().zip(cpl_n.values()) {
                    *r += self.dt * c;
                }
                let pred = self.lhs.solve(&rhs1);
                let pred =
                    ModeField::from_values(Arc::clone(self.op.grid()), self.op.k(), pred)?;
                // corrector with the trapezoidal coupling average
                let cpl_p = self.op.coupling(&pred)?.expect("k >= 1 here");
                let mut rhs2 = base;
                for ((r, a), b) in rhs2.iter_mut().zip(cpl_n.values()).zip(cpl_p.values()) {
                    *r += 0.5 * self.dt * (a + b);
                }
                self.lhs.solve(&rhs2)
            }
        };
        ModeField::from_values(Arc::clone(self.op.grid()), self.op.k(), next)
    }
}

/// One self-contained CN step (matrices assembled per call; `evolve` caches).
pub fn step_cn(op: &ModeOperator, w: &ModeField, dt: f64) -> Result<ModeField> {
    CnStepper::new(op, dt).step(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    CrankNicolsonImex,
    DenseExpm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt: f64,
    pub t_end: f64,
    pub n_samples: usize,
    pub scheme: Scheme,
    /// stop stepping once the norm falls below this fraction of the initial
    /// norm; remaining samples are recorded as exact zeros
    pub stop_rel: Option<f64>,
}

impl StepperConfig {
    pub fn new(dt: f64, t_end: f64, n_samples: usize) -> Self {
        StepperConfig {
            dt,
            t_end,
            n_samples: n_samples.max(2),
            scheme: Scheme::CrankNicolsonImex,
            stop_rel: None,
        }
    }

    /// Default step-size policy: dt = 0.5 * min(0.5 dy / (k Ly^2),
    /// 0.01 nu^{-1/2}); the first bound is skipped at k = 0 where nothing
    /// oscillates.
    pub fn auto_dt(grid: &Grid, k: usize, nu: f64) -> f64 {
        let visc = 0.01 / nu.sqrt();
        let dt = if k == 0 {
            visc
        } else {
            let osc = 0.5 * grid.dy() / (k as f64 * grid.ly() * grid.ly());
            osc.min(visc)
        };
        0.5 * dt
    }

    pub fn auto(grid: &Grid, k: usize, nu: f64, t_end: f64, n_samples: usize) -> Self {
        Self::new(Self::auto_dt(grid, k, nu), t_end, n_samples)
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::config("stepper.dt", "dt must be positive"));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::config("stepper.t_end", "t_end must be positive"));
        }
        Ok(())
    }
}

/// Scalar diagnostics of one band evolution, sampled on a uniform schedule
/// (t = 0 included), plus step-resolution integral accumulators.
#[derive(Debug, Clone)]
pub struct ModeEvolution {
    pub times: Vec<f64>,
    pub norm_sq: Vec<f64>,
    pub grad_sq: Vec<f64>,
    pub u_norm_sq: Vec<f64>,
    pub linf_grad_psi: Vec<f64>,
    /// step-resolution int |grad_k w|^2 dt, accumulated at the CN midpoint
    /// states (the scheme's exact energy budget)
    pub int_grad_sq: f64,
    pub final_field: ModeField,
}

impl ModeEvolution {
    pub fn norms(&self) -> Vec<f64> {
        self.norm_sq.iter().map(|v| v.sqrt()).collect()
    }

    /// Largest relative uptick of the norm between consecutive samples.
    pub fn max_norm_uptick(&self) -> f64 {
        let mut worst = 0.0f64;
        for w in self.norm_sq.windows(2) {
            if w[0] > 0.0 {
                worst = worst.max((w[1].sqrt() - w[0].sqrt()) / w[0].sqrt());
            }
        }
        worst
    }

    /// |w(T)|^2 + 2 nu int |grad w|^2 dt relative to |g|^2.
    pub fn energy_identity_residual(&self, nu: f64) -> f64 {
        let g0 = self.norm_sq[0];
        if g0 == 0.0 {
            return 0.0;
        }
        let last = *self.norm_sq.last().unwrap();
        ((last + 2.0 * nu * self.int_grad_sq) - g0).abs() / g0
    }
}

pub fn evolve(op: &ModeOperator, g: &ModeField, cfg: &StepperConfig) -> Result<ModeEvolution> {
    evolve_with(op, g, cfg, |_, _| {})
}

/// Evolve one band, invoking `on_sample(t, w)` at every sample instant
/// (including t = 0). Samples land on exact multiples of t_end / n_samples;
/// the inner dt divides the sample spacing.
pub fn evolve_with(
    op: &ModeOperator,
    g: &ModeField,
    cfg: &StepperConfig,
    mut on_sample: impl FnMut(f64, &ModeField),
) -> Result<ModeEvolution> {
    cfg.validate()?;
    if !g.grid().same_as(op.grid()) {
        return Err(Error::GridMismatch);
    }
    if g.k() != op.k() {
        return Err(Error::WavenumberMismatch {
            left: g.k(),
            right: op.k(),
        });
    }
    let spacing = cfg.t_end / cfg.n_samples as f64;
    let per = (spacing / cfg.dt).ceil().max(1.0) as usize;
    let dt = spacing / per as f64;

    let mut w = g.clone();
    let mut record = ModeEvolution {
        times: Vec::with_capacity(cfg.n_samples + 1),
        norm_sq: Vec::with_capacity(cfg.n_samples + 1),
        grad_sq: Vec::with_capacity(cfg.n_samples + 1),
        u_norm_sq: Vec::with_capacity(cfg.n_samples + 1),
        linf_grad_psi: Vec::with_capacity(cfg.n_samples + 1),
        int_grad_sq: 0.0,
        final_field: g.clone(),
    };
    let push_sample = |t: f64, w: &ModeField, rec: &mut ModeEvolution| -> Result<()> {
        rec.times.push(t);
        rec.norm_sq.push(l2_norm_sq(w));
        rec.grad_sq.push(grad_norm_sq(w));
        if w.k() > 0 {
            let psi = op.stream_function(w)?;
            rec.u_norm_sq.push(velocity_norm_sq(&psi));
            rec.linf_grad_psi.push(linf_grad_psi(&psi));
        } else {
            rec.u_norm_sq.push(0.0);
            rec.linf_grad_psi.push(0.0);
        }
        Ok(())
    };

    push_sample(0.0, &w, &mut record)?;
    on_sample(0.0, &w);

    match cfg.scheme {
        Scheme::CrankNicolsonImex => {
            let stepper = CnStepper::new(op, dt);
            let stop_below = cfg
                .stop_rel
                .map(|r| (r * r) * l2_norm_sq(g))
                .unwrap_or(-1.0);
            let mut dead = false;
            let mut wmid = w.clone();
            for s in 0..cfg.n_samples {
                if dead {
                    record.times.push((s + 1) as f64 * spacing);
                    record.norm_sq.push(0.0);
                    record.grad_sq.push(0.0);
                    record.u_norm_sq.push(0.0);
                    record.linf_grad_psi.push(0.0);
                    continue;
                }
                for _ in 0..per {
                    let next = stepper.step(&w)?;
                    // the CN update satisfies |w+|^2 - |w|^2 =
                    // -2 nu dt |grad w_mid|^2 exactly (up to the O(dt^3)
                    // predictor defect of the coupling), so the midpoint
                    // gradient is the scheme's own energy budget
                    for ((m, a), b) in wmid
                        .values_mut()
                        .iter_mut()
                        .zip(w.values())
                        .zip(next.values())
                    {
                        *m = 0.5 * (a + b);
                    }
                    record.int_grad_sq += dt * grad_norm_sq(&wmid);
                    w = next;
                }
                let t = (s + 1) as f64 * spacing;
                push_sample(t, &w, &mut record)?;
                on_sample(t, &w);
                if l2_norm_sq(&w) < stop_below {
                    dead = true;
                }
            }
        }
        Scheme::DenseExpm => {
            let prop = op.dense_expm(spacing)?;
            let mut grad_prev = grad_norm_sq(&w);
            for s in 0..cfg.n_samples {
                let next = prop.apply_vec(w.values());
                w = ModeField::from_values(Arc::clone(op.grid()), op.k(), next)?;
                let grad_now = grad_norm_sq(&w);
                record.int_grad_sq += 0.5 * spacing * (grad_prev + grad_now);
                grad_prev = grad_now;
                let t = (s + 1) as f64 * spacing;
                push_sample(t, &w, &mut record)?;
                on_sample(t, &w);
            }
        }
    }
    record.final_field = w;
    Ok(record)
}
