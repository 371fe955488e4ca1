//! Five-way Lie–Trotter splitting baseline.
//!
//! One step applies, in order:
//!
//! 1. diffraction, `d_sigma V = (1/4pi) int_{theta_min}^{theta} d_rho^2 V`,
//!    by Crank–Nicolson in sigma with the trapezoidal rule in theta;
//! 2. the Burgers flow `d_sigma V = (B/2) d_theta V^2` by Godunov's method;
//! 3. axial convection and absorption, fused into one Fourier multiplier
//!    along theta;
//! 4. transverse convection `d_sigma V = -U_perp d_rho V` by Lax–Wendroff.
//!
//! The rho axis carries homogeneous Neumann conditions (mirror ghosts) and
//! stores `N_rho + 1` nodes; theta is periodic with `N_theta` nodes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};
use crate::grid::{DomainConfig, Field2D, RhoBoundary};
use crate::run::{guard, BudgetClock, CflPolicy, RunOptions, RunOutput, Snapshot, StepTiming};
use crate::turbulence::{VelocityFields, VelocityRow};

/// Outcome of the explicit-step CFL conditions
/// `B v_max d_sigma <= d_theta` and `max|U_perp| d_sigma <= d_rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflReport {
    pub burgers_lhs: f64,
    pub burgers_rhs: f64,
    pub transverse_lhs: f64,
    pub transverse_rhs: f64,
    /// Largest admissible `N_theta` at this `N_sigma`.
    pub max_n_theta: f64,
    /// Largest admissible `N_rho` at this `N_sigma`.
    pub max_n_rho: f64,
}

impl CflReport {
    pub fn burgers_ok(&self) -> bool {
        self.burgers_lhs <= self.burgers_rhs
    }

    pub fn transverse_ok(&self) -> bool {
        self.transverse_lhs <= self.transverse_rhs
    }

    pub fn passed(&self) -> bool {
        self.burgers_ok() && self.transverse_ok()
    }
}

impl fmt::Display for CflReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = |ok: bool| if ok { "ok" } else { "VIOLATED" };
        write!(
            f,
            "nonlinear: {:.4e} <= {:.4e} [{}] (N_theta <= {:.1}); transverse: {:.4e} <= {:.4e} [{}] (N_rho <= {:.1})",
            self.burgers_lhs,
            self.burgers_rhs,
            tag(self.burgers_ok()),
            self.max_n_theta,
            self.transverse_lhs,
            self.transverse_rhs,
            tag(self.transverse_ok()),
            self.max_n_rho,
        )
    }
}

pub fn check_cfl_splitting(config: &DomainConfig, v_max: f64, u_perp_max: f64) -> CflReport {
    let ds = config.d_sigma();
    let bv = config.nonlinearity * v_max;
    let n_sigma = config.n_sigma as f64;
    CflReport {
        burgers_lhs: bv * ds,
        burgers_rhs: config.d_theta(),
        transverse_lhs: u_perp_max * ds,
        transverse_rhs: config.d_rho(),
        max_n_theta: if bv > 0.0 {
            config.theta.len() * n_sigma / (bv * config.sigma_max)
        } else {
            f64::INFINITY
        },
        max_n_rho: if u_perp_max > 0.0 {
            config.rho.len() * n_sigma / (u_perp_max * config.sigma_max)
        } else {
            f64::INFINITY
        },
    }
}

/// How the trapezoidal sum over earlier theta-stages is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffractionSum {
    /// Re-sum all earlier stages for every `(j, k)`: `O(N_rho N_theta^2)`.
    #[default]
    Direct,
    /// Carry a running sum per row: `O(N_rho N_theta)`, same scheme.
    Running,
}

/// Crank–Nicolson/trapezoid diffraction step with precomputed Thomas
/// factors for the constant-coefficient Neumann system.
pub struct Diffraction {
    n_rows: usize,
    n_theta: usize,
    d_rho: f64,
    /// `d_sigma d_theta / (8 pi)`: weight of a full trapezoid node.
    weight: f64,
    sum: DiffractionSum,
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
    lower: Vec<f64>,
    dn: Vec<f64>,
    acc: Vec<f64>,
    running: Vec<f64>,
    col: Vec<f64>,
}

impl Diffraction {
    pub fn new(
        n_rows: usize,
        n_theta: usize,
        d_sigma: f64,
        d_rho: f64,
        d_theta: f64,
        sum: DiffractionSum,
    ) -> Result<Self> {
        if n_rows < 2 {
            return Err(Error::InvalidArgument("diffraction needs at least two rho nodes".into()));
        }
        let weight = d_sigma * d_theta / (8.0 * PI);
        // Off-diagonal magnitude: half trapezoid weight at l = k over d_rho^2.
        let c = 0.5 * weight / (d_rho * d_rho);
        let diag = 1.0 + 2.0 * c;
        let m = n_rows;
        let mut lower = vec![-c; m];
        let mut upper = vec![-c; m];
        lower[0] = 0.0;
        upper[0] = -2.0 * c;
        lower[m - 1] = -2.0 * c;
        upper[m - 1] = 0.0;
        for i in 0..m {
            if diag.abs() < lower[i].abs() + upper[i].abs() {
                return Err(Error::InvalidArgument(
                    "diffraction system is not diagonally dominant".into(),
                ));
            }
        }
        // Thomas forward factors: u'_i = u_i / p_i, p_i = d - l_i u'_{i-1}.
        let mut up = vec![0.0; m];
        let mut inv_pivot = vec![0.0; m];
        let mut prev = 0.0;
        for i in 0..m {
            let p = diag - lower[i] * prev;
            inv_pivot[i] = 1.0 / p;
            up[i] = upper[i] / p;
            prev = up[i];
        }
        Ok(Diffraction {
            n_rows,
            n_theta,
            d_rho,
            weight,
            sum,
            upper: up,
            inv_pivot,
            lower,
            dn: vec![0.0; n_rows * n_theta],
            acc: vec![0.0; n_rows * n_theta],
            running: vec![0.0; n_rows],
            col: vec![0.0; n_rows],
        })
    }

    /// Solve the tridiagonal system in place on `self.col`.
    fn solve_column(&mut self) {
        let m = self.n_rows;
        let col = &mut self.col;
        col[0] *= self.inv_pivot[0];
        for i in 1..m {
            col[i] = (col[i] - self.lower[i] * col[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..m - 1).rev() {
            col[i] -= self.upper[i] * col[i + 1];
        }
    }

    /// Advance `v` by one diffraction step. Theta-stages are solved in
    /// increasing order because stage `k` depends on all earlier ones.
    pub fn step(&mut self, v: &mut Field2D) {
        let (m, nt) = (self.n_rows, self.n_theta);
        assert_eq!(v.shape(), (m, nt));
        let inv_h2 = 1.0 / (self.d_rho * self.d_rho);
        second_difference_rows(v.values(), &mut self.dn, m, nt, inv_h2);

        // Stage 0: zero-width trapezoid, the column is unchanged.
        for j in 0..m {
            self.acc[j * nt] = 2.0 * self.dn[j * nt];
            self.running[j] = 0.0;
        }
        let w = self.weight;
        for k in 1..nt {
            for j in 0..m {
                let row = j * nt;
                let earlier = match self.sum {
                    DiffractionSum::Direct => self.acc[row + 1..row + k].iter().sum::<f64>(),
                    DiffractionSum::Running => self.running[j],
                };
                self.col[j] = v.values()[row + k]
                    + w * (0.5 * self.acc[row] + earlier + 0.5 * self.dn[row + k]);
            }
            self.solve_column();
            let vals = v.values_mut();
            for j in 0..m {
                vals[j * nt + k] = self.col[j];
            }
            for j in 0..m {
                let jm = if j == 0 { 1 } else { j - 1 };
                let jp = if j == m - 1 { m - 2 } else { j + 1 };
                let d_new = (self.col[jp] - 2.0 * self.col[j] + self.col[jm]) * inv_h2;
                let a = self.dn[j * nt + k] + d_new;
                self.acc[j * nt + k] = a;
                self.running[j] += a;
            }
        }
    }
}

/// `(V_{j+1} - 2 V_j + V_{j-1}) / h^2` with mirrored ghosts at both ends.
fn second_difference_rows(v: &[f64], out: &mut [f64], m: usize, nt: usize, inv_h2: f64) {
    out.par_chunks_mut(nt).enumerate().for_each(|(j, row)| {
        let jm = if j == 0 { 1 } else { j - 1 };
        let jp = if j == m - 1 { m - 2 } else { j + 1 };
        let (a, b, c) = (&v[jm * nt..][..nt], &v[j * nt..][..nt], &v[jp * nt..][..nt]);
        for k in 0..nt {
            row[k] = (c[k] - 2.0 * b[k] + a[k]) * inv_h2;
        }
    });
}

/// Convenience wrapper building a one-off [`Diffraction`].
pub fn step_diffraction_cn(
    v: &mut Field2D,
    d_sigma: f64,
    d_rho: f64,
    d_theta: f64,
    sum: DiffractionSum,
) -> Result<()> {
    let mut d = Diffraction::new(v.n_rho(), v.n_theta(), d_sigma, d_rho, d_theta, sum)?;
    d.step(v);
    Ok(())
}

/// Godunov flux for `f(u) = -(B/2) u^2`: the minimum of `f` over
/// `[u_l, u_r]` if `u_l <= u_r`, else the maximum over `[u_r, u_l]`.
#[inline]
pub fn godunov_flux(u_l: f64, u_r: f64, b: f64) -> f64 {
    let f = |u: f64| -0.5 * b * u * u;
    if u_l <= u_r {
        // f is concave: the minimum sits at an endpoint.
        f(u_l).min(f(u_r))
    } else if u_r <= 0.0 && 0.0 <= u_l {
        0.0
    } else {
        f(u_l).max(f(u_r))
    }
}

/// Conservative Godunov update along periodic theta for every rho row.
pub fn step_burgers_godunov(v: &mut Field2D, b: f64, d_sigma: f64, d_theta: f64) {
    let nt = v.n_theta();
    let ratio = d_sigma / d_theta;
    v.values_mut().par_chunks_mut(nt).for_each_init(
        || vec![0.0; nt],
        |flux, row| {
            // flux[k] = F_{k+1/2}
            for k in 0..nt {
                let kp = if k + 1 == nt { 0 } else { k + 1 };
                flux[k] = godunov_flux(row[k], row[kp], b);
            }
            let mut left = flux[nt - 1];
            for k in 0..nt {
                row[k] -= ratio * (flux[k] - left);
                left = flux[k];
            }
        },
    );
}

/// Axial convection and absorption applied as one multiplier per theta
/// Fourier mode `m`:
/// `exp(i w_m 2 pi Q_j - A w_m^2 d_sigma)`, `w_m = 2 pi m / (theta_max - theta_min)`,
/// with `Q_j = U_par(sigma^n, rho_j) d_sigma`.
pub struct AxialAbsorption {
    n_theta: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
}

impl AxialAbsorption {
    pub fn new(n_theta: usize) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        AxialAbsorption {
            n_theta,
            r2c: planner.plan_fft_forward(n_theta),
            c2r: planner.plan_fft_inverse(n_theta),
        }
    }

    pub fn step(
        &self,
        v: &mut Field2D,
        u_par: &[f64],
        absorption: f64,
        d_sigma: f64,
        theta_span: f64,
    ) {
        let nt = self.n_theta;
        assert_eq!(v.n_theta(), nt);
        assert!(u_par.len() >= v.n_rho());
        let nh = nt / 2 + 1;
        let even = nt.is_multiple_of(2);
        let scale = 1.0 / nt as f64;
        let (r2c, c2r) = (&self.r2c, &self.c2r);
        v.values_mut()
            .par_chunks_mut(nt)
            .zip(u_par.par_iter())
            .for_each_init(
                || {
                    (
                        r2c.make_output_vec(),
                        r2c.make_scratch_vec(),
                        c2r.make_scratch_vec(),
                    )
                },
                |(spec, s1, s2), (row, &u)| {
                    r2c.process_with_scratch(row, spec, s1)
                        .expect("sizes fixed at planning");
                    let shift = 2.0 * PI * u * d_sigma;
                    for (m, c) in spec.iter_mut().enumerate() {
                        let w = 2.0 * PI * m as f64 / theta_span;
                        let decay = (-absorption * w * w * d_sigma).exp();
                        if even && m == nh - 1 {
                            // A real Nyquist coefficient only sees the even
                            // part of the shift.
                            *c *= decay * (w * shift).cos();
                        } else {
                            *c *= Complex::from_polar(decay, w * shift);
                        }
                    }
                    spec[0].im = 0.0;
                    if even {
                        spec[nh - 1].im = 0.0;
                    }
                    c2r.process_with_scratch(spec, row, s2)
                        .expect("real bins cleared");
                    for x in row.iter_mut() {
                        *x *= scale;
                    }
                },
            );
    }
}

/// Lax–Wendroff step for `d_sigma V = -U_perp d_rho V` with Neumann
/// mirror ghosts.
///
/// `V^{n+1} = V - ds a_j D1 + ds b_j D2` where
/// `a_j = U + (ds/2) d_sigma U - (ds/2) U d_rho U`, `b_j = (ds/2) U^2`,
/// `D1` and `D2` the centred first and second differences.
pub fn step_transverse_lw(
    v: &mut Field2D,
    out: &mut Vec<f64>,
    row: VelocityRow<'_>,
    d_sigma: f64,
    d_rho: f64,
) {
    let (m, nt) = v.shape();
    assert!(row.u_perp.len() >= m);
    out.resize(m * nt, 0.0);
    let src = v.values();
    let (inv_2h, inv_h2) = (0.5 / d_rho, 1.0 / (d_rho * d_rho));
    out.par_chunks_mut(nt).enumerate().for_each(|(j, dst)| {
        let u = row.u_perp[j];
        let a = u + 0.5 * d_sigma * row.du_perp_dsigma[j] - 0.5 * d_sigma * u * row.du_perp_drho[j];
        let b = 0.5 * d_sigma * u * u;
        let jm = if j == 0 { 1 } else { j - 1 };
        let jp = if j == m - 1 { m - 2 } else { j + 1 };
        let (lo, mid, hi) = (&src[jm * nt..][..nt], &src[j * nt..][..nt], &src[jp * nt..][..nt]);
        for k in 0..nt {
            let d1 = (hi[k] - lo[k]) * inv_2h;
            let d2 = (hi[k] - 2.0 * mid[k] + lo[k]) * inv_h2;
            dst[k] = mid[k] - d_sigma * a * d1 + d_sigma * b * d2;
        }
    });
    v.swap_values(out);
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplittingState {
    pub v: Field2D,
    pub sigma_index: usize,
}

/// Lie–Trotter driver owning the sub-step workspaces.
pub struct SplittingSolver {
    config: DomainConfig,
    diffraction: Diffraction,
    axial: AxialAbsorption,
    lw_buf: Vec<f64>,
}

impl SplittingSolver {
    pub fn new(config: &DomainConfig, sum: DiffractionSum) -> Result<Self> {
        config.validate()?;
        let rows = RhoBoundary::Neumann.node_count(config.n_rho);
        Ok(SplittingSolver {
            config: config.clone(),
            diffraction: Diffraction::new(
                rows,
                config.n_theta,
                config.d_sigma(),
                config.d_rho(),
                config.d_theta(),
                sum,
            )?,
            axial: AxialAbsorption::new(config.n_theta),
            lw_buf: Vec::new(),
        })
    }

    pub fn config(&self) -> &DomainConfig {
        &self.config
    }

    /// Shape of the fields this solver marches: `(N_rho + 1, N_theta)`.
    pub fn field_shape(&self) -> (usize, usize) {
        (self.config.n_rho + 1, self.config.n_theta)
    }

    fn check_inputs(&self, v: &Field2D, fields: &VelocityFields, steps: usize) -> Result<()> {
        if v.shape() != self.field_shape() {
            return Err(Error::ShapeMismatch(format!(
                "splitting field must be {:?}, got {:?}",
                self.field_shape(),
                v.shape()
            )));
        }
        if fields.n_rho() < self.config.n_rho + 1 || fields.n_sigma() < steps {
            return Err(Error::ShapeMismatch(format!(
                "velocity fields {}x{} too small for {} steps on {} rho nodes",
                fields.n_sigma(),
                fields.n_rho(),
                steps,
                self.config.n_rho + 1
            )));
        }
        Ok(())
    }

    /// One Lie step from `sigma^n` to `sigma^{n+1}` using the velocity data
    /// at `sigma^n`.
    pub fn lie_step(
        &mut self,
        state: &mut SplittingState,
        fields: &VelocityFields,
    ) -> Result<StepTiming> {
        self.check_inputs(&state.v, fields, state.sigma_index + 1)?;
        let cfg = &self.config;
        let (ds, dr, dt) = (cfg.d_sigma(), cfg.d_rho(), cfg.d_theta());
        let row = fields.row(state.sigma_index);

        let t0 = Instant::now();
        self.diffraction.step(&mut state.v);
        let t1 = Instant::now();
        step_burgers_godunov(&mut state.v, cfg.nonlinearity, ds, dt);
        let t2 = Instant::now();
        self.axial
            .step(&mut state.v, row.u_par, cfg.absorption, ds, cfg.theta.len());
        step_transverse_lw(&mut state.v, &mut self.lw_buf, row, ds, dr);
        let t3 = Instant::now();

        state.sigma_index += 1;
        let max_abs = state.v.max_abs();
        guard(cfg.sigma_at(state.sigma_index), max_abs, f64::INFINITY)?;
        let nonlinear = (t2 - t1).as_secs_f64();
        let total = (t3 - t0).as_secs_f64();
        Ok(StepTiming {
            total_s: total,
            nonlinear_s: nonlinear,
            linear_s: total - nonlinear,
        })
    }

    pub fn cfl_report(&self, fields: &VelocityFields, v_max: f64) -> CflReport {
        check_cfl_splitting(&self.config, v_max, fields.max_abs_u_perp())
    }

    /// March from `v0` at `sigma = 0`.
    pub fn run(
        &mut self,
        v0: Field2D,
        fields: &VelocityFields,
        opts: &RunOptions,
    ) -> Result<RunOutput> {
        let steps = opts.steps(&self.config);
        self.check_inputs(&v0, fields, steps)?;
        let report = self.cfl_report(fields, opts.cfl_v_max);
        if !report.passed() && opts.cfl_policy == CflPolicy::Error {
            return Err(Error::Cfl(report));
        }
        let clock = BudgetClock::new(opts.budget);
        let mut state = SplittingState {
            v: v0,
            sigma_index: 0,
        };
        let mut snapshots = Vec::new();
        let mut timings = Vec::with_capacity(steps);
        let mut max_abs = state.v.max_abs();
        guard(0.0, max_abs, opts.divergence_bound)?;
        if opts.snapshot_steps.contains(&0) {
            snapshots.push(Snapshot {
                step: 0,
                sigma: 0.0,
                field: state.v.clone(),
            });
        }
        for n in 0..steps {
            timings.push(self.lie_step(&mut state, fields)?);
            let sigma = self.config.sigma_at(n + 1);
            let m = state.v.max_abs();
            guard(sigma, m, opts.divergence_bound)?;
            max_abs = max_abs.max(m);
            if opts.snapshot_steps.contains(&(n + 1)) {
                snapshots.push(Snapshot {
                    step: n + 1,
                    sigma,
                    field: state.v.clone(),
                });
            }
            clock.check(n + 1, steps)?;
        }
        Ok(RunOutput {
            final_field: state.v,
            final_step: steps,
            final_sigma: self.config.sigma_at(steps),
            snapshots,
            max_abs,
            steps: timings,
            total_s: clock.elapsed(),
        })
    }
}
