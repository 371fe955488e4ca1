//! Exponential Runge–Kutta integration in Fourier space.
//!
//! The linear part `L = (1/4pi) d_theta^{-1} d_rho^2 + A d_theta^2` is
//! diagonal on the doubly periodic grid. Its symbol, with the antiderivative
//! regularised by the unit roundoff `eps`, gives per mode
//!
//! `z = d_sigma * ( -xi^2 / (4 pi i omega + eps) - A omega^2 )`,
//!
//! `xi = 2 pi j / (rho_max - rho_min)`, `omega = 2 pi k / (theta_max - theta_min)`.
//! The nonlinear and variable-coefficient remainder `b` is evaluated in
//! physical space by [`Weno5`].

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::{Complex, Complex64};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{DomainConfig, Field2D};
use crate::phi::{phi1, phi2};
use crate::run::{guard, BudgetClock, CflPolicy, RunOptions, RunOutput, Snapshot, StepTiming};
use crate::spectral::{signed_mode, Fft2d, Real};
use crate::splitting::{check_cfl_splitting, CflReport};
use crate::turbulence::VelocityFields;
use crate::weno::{Coefficients, Weno5};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Two-stage, second order.
    #[default]
    ExpRk22,
    /// The first stage alone; first order.
    ExpEuler,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ExpRk22 => "exprk22",
            Scheme::ExpEuler => "exp-euler",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    Double,
    Single,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::Double => "double",
            Precision::Single => "single",
        }
    }

    pub fn unit_roundoff(self) -> f64 {
        match self {
            Precision::Double => f64::UNIT_ROUNDOFF,
            Precision::Single => f32::UNIT_ROUNDOFF,
        }
    }
}

/// Linear-flow symbol of mode `(j, k)`; signed indices.
pub fn linear_symbol(config: &DomainConfig, j: isize, k: isize, eps: f64) -> Complex64 {
    let xi = 2.0 * PI * j as f64 / config.rho.len();
    let omega = 2.0 * PI * k as f64 / config.theta.len();
    let dispersive = -(xi * xi) / Complex64::new(eps, 4.0 * PI * omega);
    config.d_sigma() * (dispersive - config.absorption * omega * omega)
}

/// `E = e^z`, `d_sigma phi_1(z)` and `d_sigma phi_2(z)` over the stored
/// half spectrum, k-major like [`Fft2d`].
///
/// On the theta Nyquist column of an even grid the `+k` and `-k` modes
/// coincide, so only the real part of `z` is kept there; this keeps the
/// multipliers Hermitian.
#[derive(Debug, Clone)]
pub struct PhiMultipliers<T> {
    n_rho: usize,
    n_theta: usize,
    d_sigma: f64,
    e: Vec<Complex<T>>,
    dphi1: Vec<Complex<T>>,
    dphi2: Vec<Complex<T>>,
}

impl<T: Real> PhiMultipliers<T> {
    pub fn build(config: &DomainConfig, eps: f64) -> Self {
        let (nr, nt) = (config.n_rho, config.n_theta);
        let nh = nt / 2 + 1;
        let ds = config.d_sigma();
        let cast = |c: Complex64| Complex::new(T::of(c.re), T::of(c.im));
        let mut e = vec![Complex::new(T::zero(), T::zero()); nr * nh];
        let mut dphi1 = e.clone();
        let mut dphi2 = e.clone();
        e.par_chunks_mut(nr)
            .zip(dphi1.par_chunks_mut(nr))
            .zip(dphi2.par_chunks_mut(nr))
            .enumerate()
            .for_each(|(k, ((e, p1), p2))| {
                for j in 0..nr {
                    let z = Self::symbol(config, j, k, eps);
                    e[j] = cast(z.exp());
                    p1[j] = cast(ds * phi1(z));
                    p2[j] = cast(ds * phi2(z));
                }
            });
        PhiMultipliers {
            n_rho: nr,
            n_theta: nt,
            d_sigma: ds,
            e,
            dphi1,
            dphi2,
        }
    }

    /// `z` for storage position `(j, k)` (FFT-ordered `j`, `k <= n_theta/2`).
    fn symbol(config: &DomainConfig, j: usize, k: usize, eps: f64) -> Complex64 {
        let z = linear_symbol(config, signed_mode(j, config.n_rho), k as isize, eps);
        if config.n_theta.is_multiple_of(2) && k == config.n_theta / 2 {
            Complex64::new(z.re, 0.0)
        } else {
            z
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rho, self.n_theta)
    }

    pub fn d_sigma(&self) -> f64 {
        self.d_sigma
    }

    fn index(&self, j: isize, k: usize) -> usize {
        assert!(k <= self.n_theta / 2);
        k * self.n_rho + j.rem_euclid(self.n_rho as isize) as usize
    }

    pub fn e(&self, j: isize, k: usize) -> Complex<T> {
        self.e[self.index(j, k)]
    }

    pub fn phi1(&self, j: isize, k: usize) -> Complex<T> {
        let d = T::of(self.d_sigma);
        self.dphi1[self.index(j, k)] / d
    }

    pub fn phi2(&self, j: isize, k: usize) -> Complex<T> {
        let d = T::of(self.d_sigma);
        self.dphi2[self.index(j, k)] / d
    }

    pub fn max_abs_e(&self) -> T {
        self.e.iter().fold(T::zero(), |m, c| m.max(c.norm()))
    }
}

/// Velocity data for one sigma level in working precision.
struct LevelCoefficients<T> {
    u_par: Vec<T>,
    u_perp: Vec<T>,
    du_perp_drho: Vec<T>,
}

impl<T: Real> LevelCoefficients<T> {
    fn view<'a>(&'a self, config: &DomainConfig) -> Coefficients<'a, T> {
        Coefficients {
            u_par: &self.u_par,
            u_perp: &self.u_perp,
            du_perp_drho: &self.du_perp_drho,
            nonlinearity: T::of(config.nonlinearity),
            d_rho: T::of(config.d_rho()),
            d_theta: T::of(config.d_theta()),
        }
    }

    fn new(n: usize) -> Self {
        LevelCoefficients {
            u_par: vec![T::zero(); n],
            u_perp: vec![T::zero(); n],
            du_perp_drho: vec![T::zero(); n],
        }
    }

    fn load(&mut self, fields: &VelocityFields, n: usize) {
        let row = fields.row(n);
        let m = self.u_par.len();
        for (dst, src) in [
            (&mut self.u_par, row.u_par),
            (&mut self.u_perp, row.u_perp),
            (&mut self.du_perp_drho, row.du_perp_drho),
        ] {
            for (d, s) in dst.iter_mut().zip(&src[..m]) {
                *d = T::of(*s);
            }
        }
    }
}

/// Exponential integrator owning the multipliers, transforms and state.
///
/// The state is kept both in physical space (`v`) and as its spectrum
/// (`v_hat`), so a two-stage step costs exactly two forward and two
/// inverse transforms.
pub struct ExpIntegrator<T: Real> {
    config: DomainConfig,
    scheme: Scheme,
    mult: PhiMultipliers<T>,
    fft: Fft2d<T>,
    weno: Weno5<T>,
    v: Vec<T>,
    v_hat: Vec<Complex<T>>,
    b: Vec<T>,
    b_hat: Vec<Complex<T>>,
    b2_hat: Vec<Complex<T>>,
    work: Vec<Complex<T>>,
    now: LevelCoefficients<T>,
    next: LevelCoefficients<T>,
    sigma_index: usize,
}

impl<T: Real> ExpIntegrator<T> {
    /// Multipliers are built with the unit roundoff of `T`.
    pub fn new(config: &DomainConfig, scheme: Scheme) -> Result<Self> {
        config.validate()?;
        let (nr, nt) = (config.n_rho, config.n_theta);
        let fft = Fft2d::new(nr, nt);
        let sl = fft.spectrum_len();
        let zero = Complex::new(T::zero(), T::zero());
        Ok(ExpIntegrator {
            config: config.clone(),
            scheme,
            mult: PhiMultipliers::build(config, T::UNIT_ROUNDOFF),
            fft,
            weno: Weno5::new(nr, nt),
            v: vec![T::zero(); nr * nt],
            v_hat: vec![zero; sl],
            b: vec![T::zero(); nr * nt],
            b_hat: vec![zero; sl],
            b2_hat: vec![zero; sl],
            work: Vec::with_capacity(sl),
            now: LevelCoefficients::new(nr),
            next: LevelCoefficients::new(nr),
            sigma_index: 0,
        })
    }

    pub fn config(&self) -> &DomainConfig {
        &self.config
    }

    pub fn multipliers(&self) -> &PhiMultipliers<T> {
        &self.mult
    }

    /// Transforms performed so far as `(forward, inverse)`.
    pub fn transform_counts(&self) -> (usize, usize) {
        (self.fft.forward_count(), self.fft.inverse_count())
    }

    pub fn sigma_index(&self) -> usize {
        self.sigma_index
    }

    /// Load `V` at `sigma^n`; costs one forward transform.
    pub fn set_state(&mut self, v: &Field2D, sigma_index: usize) -> Result<()> {
        if v.shape() != (self.config.n_rho, self.config.n_theta) {
            return Err(Error::ShapeMismatch(format!(
                "field {:?} vs grid ({}, {})",
                v.shape(),
                self.config.n_rho,
                self.config.n_theta
            )));
        }
        for (d, s) in self.v.iter_mut().zip(v.values()) {
            *d = T::of(*s);
        }
        self.fft.forward(&self.v, &mut self.v_hat);
        self.sigma_index = sigma_index;
        Ok(())
    }

    pub fn field(&self) -> Field2D {
        Field2D::from_vec(
            self.config.n_rho,
            self.config.n_theta,
            self.v.iter().map(|x| x.to_f64_lossless()).collect(),
        )
        .expect("shape fixed at construction")
    }

    pub fn spectrum(&self) -> &[Complex<T>] {
        &self.v_hat
    }

    pub fn max_abs(&self) -> f64 {
        self.v
            .iter()
            .fold(0.0_f64, |m, x| {
                let a = x.to_f64_lossless().abs();
                if a.is_nan() || m.is_nan() { f64::NAN } else { m.max(a) }
            })
    }

    fn check_fields(&self, fields: &VelocityFields, last_level: usize) -> Result<()> {
        if fields.n_rho() < self.config.n_rho || fields.n_sigma() <= last_level {
            return Err(Error::ShapeMismatch(format!(
                "velocity fields {}x{} do not cover level {} on {} rho nodes",
                fields.n_sigma(),
                fields.n_rho(),
                last_level,
                self.config.n_rho
            )));
        }
        Ok(())
    }

    /// Advance from `sigma^n` to `sigma^{n+1}`.
    pub fn step(&mut self, fields: &VelocityFields) -> Result<StepTiming> {
        let n = self.sigma_index;
        let two_stage = self.scheme == Scheme::ExpRk22;
        self.check_fields(fields, if two_stage { n + 1 } else { n })?;
        let start = Instant::now();
        let mut nonlinear = 0.0;

        // b(sigma^n, V^n)
        let t = Instant::now();
        self.now.load(fields, n);
        self.weno.apply(&self.v, self.now.view(&self.config), &mut self.b);
        nonlinear += t.elapsed().as_secs_f64();

        // stage: V* = E V + ds phi1 F(b1)
        self.fft.forward(&self.b, &mut self.b_hat);
        let (e, p1) = (&self.mult.e, &self.mult.dphi1);
        self.v_hat
            .par_iter_mut()
            .zip(self.b_hat.par_iter())
            .zip(e.par_iter().zip(p1.par_iter()))
            .for_each(|((v, b), (e, p))| *v = *e * *v + *p * *b);
        self.fft.inverse(&self.v_hat, &mut self.v, &mut self.work);

        if two_stage {
            // b(sigma^{n+1}, V*)
            let t = Instant::now();
            self.next.load(fields, n + 1);
            self.weno.apply(&self.v, self.next.view(&self.config), &mut self.b);
            nonlinear += t.elapsed().as_secs_f64();

            // V+ = E V + ds((phi1 - phi2) F(b1) + phi2 F(b2))
            //    = V* + ds phi2 (F(b2) - F(b1))
            self.fft.forward(&self.b, &mut self.b2_hat);
            let p2 = &self.mult.dphi2;
            self.v_hat
                .par_iter_mut()
                .zip(self.b2_hat.par_iter().zip(self.b_hat.par_iter()))
                .zip(p2.par_iter())
                .for_each(|((v, (b2, b1)), p)| *v = *v + *p * (*b2 - *b1));
            self.fft.inverse(&self.v_hat, &mut self.v, &mut self.work);
        }
        self.sigma_index = n + 1;
        let total = start.elapsed().as_secs_f64();
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
        v0: &Field2D,
        fields: &VelocityFields,
        opts: &RunOptions,
    ) -> Result<RunOutput> {
        let steps = opts.steps(&self.config);
        let last_level = match self.scheme {
            Scheme::ExpRk22 => steps,
            Scheme::ExpEuler => steps.saturating_sub(1),
        };
        self.check_fields(fields, last_level)?;
        let report = self.cfl_report(fields, opts.cfl_v_max);
        if !report.passed() && opts.cfl_policy == CflPolicy::Error {
            return Err(Error::Cfl(report));
        }
        let clock = BudgetClock::new(opts.budget);
        self.set_state(v0, 0)?;
        let mut max_abs = self.max_abs();
        guard(0.0, max_abs, opts.divergence_bound)?;
        let mut snapshots = Vec::new();
        if opts.snapshot_steps.contains(&0) {
            snapshots.push(Snapshot {
                step: 0,
                sigma: 0.0,
                field: self.field(),
            });
        }
        let mut timings = Vec::with_capacity(steps);
        for n in 0..steps {
            timings.push(self.step(fields)?);
            let sigma = self.config.sigma_at(n + 1);
            let m = self.max_abs();
            guard(sigma, m, opts.divergence_bound)?;
            max_abs = max_abs.max(m);
            if opts.snapshot_steps.contains(&(n + 1)) {
                snapshots.push(Snapshot {
                    step: n + 1,
                    sigma,
                    field: self.field(),
                });
            }
            clock.check(n + 1, steps)?;
        }
        Ok(RunOutput {
            final_field: self.field(),
            final_step: steps,
            final_sigma: self.config.sigma_at(steps),
            snapshots,
            max_abs,
            steps: timings,
            total_s: clock.elapsed(),
        })
    }
}

/// Run the exponential integrator at the requested working precision.
pub fn run_exponential(
    config: &DomainConfig,
    scheme: Scheme,
    precision: Precision,
    v0: &Field2D,
    fields: &VelocityFields,
    opts: &RunOptions,
) -> Result<RunOutput> {
    match precision {
        Precision::Double => ExpIntegrator::<f64>::new(config, scheme)?.run(v0, fields, opts),
        Precision::Single => ExpIntegrator::<f32>::new(config, scheme)?.run(v0, fields, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::turbulence::PointVelocity;

    fn small_config() -> DomainConfig {
        DomainConfig {
            sigma_max: 4.0,
            n_sigma: 10,
            n_rho: 16,
            n_theta: 32,
            ..DomainConfig::default()
        }
    }

    #[test]
    fn zero_mode_multipliers() {
        let m = PhiMultipliers::<f64>::build(&small_config(), f64::UNIT_ROUNDOFF);
        assert_eq!(m.e(0, 0), Complex::new(1.0, 0.0));
        assert_eq!(m.phi1(0, 0), Complex::new(1.0, 0.0));
        assert_eq!(m.phi2(0, 0), Complex::new(0.5, 0.0));
    }

    #[test]
    fn absorption_only_column_matches_heat_multiplier() {
        let cfg = small_config();
        let m = PhiMultipliers::<f64>::build(&cfg, f64::UNIT_ROUNDOFF);
        for k in 0..=cfg.n_theta / 2 {
            let omega = 2.0 * PI * k as f64 / cfg.theta.len();
            let heat = (-cfg.absorption * omega * omega * cfg.d_sigma()).exp();
            assert!((m.e(0, k) - Complex::new(heat, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn stable_everywhere_and_regularised_at_zero_frequency() {
        for eps in [f64::UNIT_ROUNDOFF, f32::UNIT_ROUNDOFF] {
            let cfg = small_config();
            for j in -8..8 {
                for k in 0..=16 {
                    assert!(linear_symbol(&cfg, j, k, eps).re <= 0.0);
                }
            }
            let m = PhiMultipliers::<f64>::build(&cfg, eps);
            assert!(m.max_abs_e() <= 1.0);
            let mut last = 1.0;
            for j in 1..8 {
                let e = m.e(j, 0).norm();
                assert!(e <= last);
                last = e;
            }
            assert!(last < 1e-300);
        }
    }

    #[test]
    fn multipliers_are_hermitian_on_real_columns() {
        let cfg = small_config();
        let m = PhiMultipliers::<f64>::build(&cfg, f64::UNIT_ROUNDOFF);
        for k in [0, cfg.n_theta / 2] {
            for j in 0..8 {
                assert_eq!(m.e(j, k), m.e(-j, k).conj());
                assert_eq!(m.e(j, k).im, 0.0);
            }
        }
    }

    #[test]
    fn phi_tables_match_closed_forms() {
        let cfg = small_config();
        let eps = f64::UNIT_ROUNDOFF;
        let m = PhiMultipliers::<f64>::build(&cfg, eps);
        for j in -7..8 {
            for k in 1..16 {
                let z = linear_symbol(&cfg, j, k as isize, eps);
                if z.norm() < 1.0 {
                    continue;
                }
                let tol = 1e-12;
                let e = m.e(j, k);
                assert!((m.phi1(j, k) - (e - 1.0) / z).norm() <= tol * m.phi1(j, k).norm());
                assert!((m.phi2(j, k) - (e - 1.0 - z) / (z * z)).norm() <= tol * m.phi2(j, k).norm());
            }
        }
    }

    fn zero_fields(cfg: &DomainConfig) -> VelocityFields {
        VelocityFields::zeros(cfg.n_sigma + 1, cfg.n_rho)
    }

    #[test]
    fn single_mode_linear_flow_is_exact() {
        let cfg = DomainConfig {
            nonlinearity: 0.0,
            absorption: 0.0,
            ..small_config()
        };
        let (j, k) = (3isize, 5usize);
        let (lr, lt) = (cfg.rho.len(), cfg.theta.len());
        let v0 = Field2D::from_fn(cfg.n_rho, cfg.n_theta, |a, b| {
            let phase = 2.0 * PI * (j as f64 * a as f64 / cfg.n_rho as f64 + k as f64 * b as f64 / cfg.n_theta as f64);
            phase.cos()
        });
        let mut ex = ExpIntegrator::<f64>::new(&cfg, Scheme::ExpRk22).unwrap();
        ex.set_state(&v0, 0).unwrap();
        ex.step(&zero_fields(&cfg)).unwrap();
        let z = linear_symbol(&cfg, j, k as isize, f64::UNIT_ROUNDOFF);
        let g = z.exp();
        assert!((g.norm() - 1.0).abs() < 1e-12);
        let exact = Field2D::from_fn(cfg.n_rho, cfg.n_theta, |a, b| {
            let x = 2.0 * PI * j as f64 * (a as f64 * cfg.d_rho()) / lr;
            let y = 2.0 * PI * k as f64 * (b as f64 * cfg.d_theta()) / lt;
            (g * Complex64::from_polar(1.0, x + y)).re
        });
        let err = crate::grid::relative_error(&exact, &ex.field(), cfg.d_rho(), cfg.d_theta()).unwrap();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn four_transforms_per_step() {
        let cfg = small_config();
        let v0 = Field2D::from_fn(16, 32, |_, k| (k as f64 * 0.2).sin());
        let fields = zero_fields(&cfg);
        let mut ex = ExpIntegrator::<f64>::new(&cfg, Scheme::ExpRk22).unwrap();
        ex.set_state(&v0, 0).unwrap();
        assert_eq!(ex.transform_counts(), (1, 0));
        for _ in 0..3 {
            ex.step(&fields).unwrap();
        }
        assert_eq!(ex.transform_counts(), (1 + 6, 6));
        let mut eu = ExpIntegrator::<f64>::new(&cfg, Scheme::ExpEuler).unwrap();
        eu.set_state(&v0, 0).unwrap();
        eu.step(&fields).unwrap();
        assert_eq!(eu.transform_counts(), (2, 1));
    }

    fn wavy_fields(cfg: &DomainConfig) -> VelocityFields {
        VelocityFields::from_fn(cfg.n_sigma + 1, cfg.n_rho, |n, j| {
            let x = 2.0 * PI * j as f64 / cfg.n_rho as f64;
            PointVelocity {
                u_par: 0.02 * (x + 0.1 * n as f64).sin(),
                u_perp: 0.03 * x.cos(),
                du_perp_dsigma: 0.0,
                du_perp_drho: -0.03 * x.sin() * 2.0 * PI / cfg.rho.len(),
            }
        })
    }

    #[test]
    fn euler_step_is_the_first_stage() {
        let cfg = small_config();
        let fields = wavy_fields(&cfg);
        let v0 = Field2D::from_fn(16, 32, |j, k| 0.3 * (k as f64 * 0.4).sin() + 0.01 * j as f64);
        let mut eu = ExpIntegrator::<f64>::new(&cfg, Scheme::ExpEuler).unwrap();
        eu.set_state(&v0, 0).unwrap();
        eu.step(&fields).unwrap();

        // reproduce the stage by hand
        let mut fft = Fft2d::<f64>::new(16, 32);
        let mut v_hat = vec![Complex::new(0.0, 0.0); fft.spectrum_len()];
        fft.forward(v0.values(), &mut v_hat);
        let row = fields.row(0);
        let b = crate::weno::weno5_b(&v0, row, cfg.nonlinearity, cfg.d_rho(), cfg.d_theta());
        let mut b_hat = v_hat.clone();
        fft.forward(b.values(), &mut b_hat);
        let m = PhiMultipliers::<f64>::build(&cfg, f64::UNIT_ROUNDOFF);
        for i in 0..v_hat.len() {
            v_hat[i] = m.e[i] * v_hat[i] + m.dphi1[i] * b_hat[i];
        }
        assert_eq!(eu.spectrum(), &v_hat[..]);

        // with b = 0 the two schemes coincide
        let lin = DomainConfig { nonlinearity: 0.0, ..cfg.clone() };
        let z = zero_fields(&lin);
        let mut a = ExpIntegrator::<f64>::new(&lin, Scheme::ExpEuler).unwrap();
        let mut b = ExpIntegrator::<f64>::new(&lin, Scheme::ExpRk22).unwrap();
        a.set_state(&v0, 0).unwrap();
        b.set_state(&v0, 0).unwrap();
        a.step(&z).unwrap();
        b.step(&z).unwrap();
        assert_eq!(a.spectrum(), b.spectrum());
    }

    #[test]
    fn zero_initial_field_stays_zero() {
        let cfg = small_config();
        let out = run_exponential(
            &cfg,
            Scheme::ExpRk22,
            Precision::Double,
            &Field2D::zeros(16, 32),
            &wavy_fields(&cfg),
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(out.max_abs, 0.0);
        assert_eq!(out.steps.len(), cfg.n_sigma);
    }

    #[test]
    fn single_precision_tracks_double() {
        let cfg = small_config();
        let fields = wavy_fields(&cfg);
        let v0 = Field2D::from_fn(16, 32, |_, k| 0.5 * (2.0 * PI * k as f64 / 32.0).sin());
        let opts = RunOptions::default();
        let d = run_exponential(&cfg, Scheme::ExpRk22, Precision::Double, &v0, &fields, &opts).unwrap();
        let s = run_exponential(&cfg, Scheme::ExpRk22, Precision::Single, &v0, &fields, &opts).unwrap();
        let err = crate::grid::relative_error(&d.final_field, &s.final_field, 1.0, 1.0).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn short_fields_are_rejected() {
        let cfg = small_config();
        let fields = VelocityFields::zeros(cfg.n_sigma, cfg.n_rho);
        let r = run_exponential(&cfg, Scheme::ExpRk22, Precision::Double, &Field2D::zeros(16, 32), &fields, &RunOptions::default());
        assert!(matches!(r, Err(Error::ShapeMismatch(_))));
    }
}
