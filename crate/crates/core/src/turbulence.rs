//! Two-dimensional isotropic random velocity field built from a finite sum
//! of random Fourier modes with a Gaussian energy spectrum.
//!
//! Each mode `n` has a wave vector `K_n = |K_n| (cos a_n, sin a_n)`, a
//! phase `p_n` and an amplitude vector perpendicular to `K_n`. At the
//! physical point `r = lambda (sigma, rho)` the velocity is
//! `U(r) = sum_n U_n cos(K_n . r + p_n)`. The fields handed to the solvers
//! are divided by the ambient sound speed.
//!
//! Randomness comes from ChaCha8 seeded with the user seed: stream 0 draws
//! the phases and stream 1 the angles, so the two sequences are
//! independent and reproducible on every platform.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

const PHASE_STREAM: u64 = 0;
const ANGLE_STREAM: u64 = 1;

/// Physical parameters of the random medium.
#[derive(Debug, Clone, PartialEq)]
pub struct TurbulenceParams {
    pub n_modes: usize,
    /// Velocity scale `sigma_u` (m/s).
    pub sigma_u: f64,
    /// Ambient sound speed (m/s).
    pub c0: f64,
    /// Initial pulse duration (s).
    pub t0: f64,
    /// Wavenumber bounds (1/m).
    pub k_min: f64,
    pub k_max: f64,
    pub seed: u64,
}

impl Default for TurbulenceParams {
    fn default() -> Self {
        let (sigma_u, c0, t0) = (3.0, 343.0, 2e-2);
        let l = 4.0 * t0 * c0;
        TurbulenceParams {
            n_modes: 500,
            sigma_u,
            c0,
            t0,
            k_min: 0.1 / l,
            k_max: 9.0 / l,
            seed: 0,
        }
    }
}

impl TurbulenceParams {
    /// Length scale `lambda = T0 c0` (m).
    pub fn lambda(&self) -> f64 {
        self.t0 * self.c0
    }

    /// Correlation length `L = 4 lambda` (m).
    pub fn correlation_length(&self) -> f64 {
        4.0 * self.lambda()
    }

    /// Reset the wavenumber window to `[0.1/L, 9/L]` for the current
    /// `t0` and `c0`.
    pub fn with_default_wavenumbers(mut self) -> Self {
        let l = self.correlation_length();
        self.k_min = 0.1 / l;
        self.k_max = 9.0 / l;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::config("n_modes", "must be positive"));
        }
        for (key, v) in [
            ("sigma_u", self.sigma_u),
            ("c0", self.c0),
            ("t0", self.t0),
            ("k_min", self.k_min),
            ("k_max", self.k_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, "must be finite and positive"));
            }
        }
        if self.k_min >= self.k_max {
            return Err(Error::config("k_max", "must exceed k_min"));
        }
        Ok(())
    }
}

/// Gaussian spectrum `E(K) = sigma_u^2 K^3 L^4 exp(-(K L / 2)^2) / 8`.
pub fn energy_spectrum(k: f64, sigma_u: f64, l: f64) -> Result<f64> {
    if k.is_nan() || k < 0.0 {
        return Err(Error::InvalidArgument(format!("wavenumber {k} must be nonnegative")));
    }
    let kl = k * l;
    Ok(0.125 * sigma_u * sigma_u * k.powi(3) * l.powi(4) * (-(0.5 * kl).powi(2)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    /// `|K_n|` (1/m).
    pub wavenumber: f64,
    /// Angle between `K_n` and the sigma axis.
    pub angle: f64,
    pub phase: f64,
    /// Amplitude vector `|U_n| (-sin a_n, cos a_n)` (m/s).
    pub amplitude: [f64; 2],
}

impl Mode {
    pub fn wave_vector(&self) -> [f64; 2] {
        [
            self.wavenumber * self.angle.cos(),
            self.wavenumber * self.angle.sin(),
        ]
    }
}

/// One sampled realisation of the random medium.
#[derive(Debug, Clone, PartialEq)]
pub struct TurbulenceSpec {
    pub modes: Vec<Mode>,
    pub lambda: f64,
    pub c0: f64,
}

pub fn sample_modes(params: &TurbulenceParams) -> Result<TurbulenceSpec> {
    params.validate()?;
    let n = params.n_modes;
    let mut phase_rng = ChaCha8Rng::seed_from_u64(params.seed);
    phase_rng.set_stream(PHASE_STREAM);
    let mut angle_rng = ChaCha8Rng::seed_from_u64(params.seed);
    angle_rng.set_stream(ANGLE_STREAM);

    let l = params.correlation_length();
    let modes = (0..n)
        .map(|i| {
            let phase = 2.0 * PI * phase_rng.random::<f64>();
            let angle = 2.0 * PI * angle_rng.random::<f64>();
            let wavenumber = if n == 1 {
                params.k_min
            } else {
                params.k_min + (params.k_max - params.k_min) * i as f64 / (n - 1) as f64
            };
            let e = energy_spectrum(wavenumber, params.sigma_u, l)?;
            let mag = (e / n as f64).sqrt();
            Ok(Mode {
                wavenumber,
                angle,
                phase,
                amplitude: [-mag * angle.sin(), mag * angle.cos()],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TurbulenceSpec {
        modes,
        lambda: params.lambda(),
        c0: params.c0,
    })
}

/// Dimensionless velocity components and the sigma/rho derivatives of the
/// transverse one at a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointVelocity {
    pub u_par: f64,
    pub u_perp: f64,
    pub du_perp_dsigma: f64,
    pub du_perp_drho: f64,
}

impl TurbulenceSpec {
    /// Direct evaluation of the mode sum at `(sigma, rho)`.
    pub fn velocity_at(&self, sigma: f64, rho: f64) -> PointVelocity {
        let mut out = PointVelocity {
            u_par: 0.0,
            u_perp: 0.0,
            du_perp_dsigma: 0.0,
            du_perp_drho: 0.0,
        };
        for m in &self.modes {
            let [kx, ky] = m.wave_vector();
            let (kx, ky) = (kx * self.lambda, ky * self.lambda);
            let (s, c) = (kx * sigma + ky * rho + m.phase).sin_cos();
            out.u_par += m.amplitude[0] * c;
            out.u_perp += m.amplitude[1] * c;
            out.du_perp_dsigma -= m.amplitude[1] * kx * s;
            out.du_perp_drho -= m.amplitude[1] * ky * s;
        }
        let inv = 1.0 / self.c0;
        out.u_par *= inv;
        out.u_perp *= inv;
        out.du_perp_dsigma *= inv;
        out.du_perp_drho *= inv;
        out
    }

    /// Largest speed `sqrt(U_par^2 + U_perp^2)` over a grid, without
    /// storing the samples.
    pub fn max_speed(&self, sigma_nodes: &[f64], rho_nodes: &[f64]) -> f64 {
        sigma_nodes
            .par_iter()
            .map(|&s| {
                let mut row = VelocityRowBuf::new(rho_nodes.len());
                self.fill_row(s, rho_nodes, &mut row);
                row.u_par
                    .iter()
                    .zip(&row.u_perp)
                    .fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)))
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Evaluate one sigma-row.
    ///
    /// Along rho the cosine argument is an arithmetic progression, so each
    /// mode is advanced by a rotation and re-anchored with an exact
    /// `sin_cos` every [`ANCHOR_STRIDE`] nodes. The sum over modes always
    /// runs in mode order.
    fn fill_row(&self, sigma: f64, rho_nodes: &[f64], out: &mut VelocityRowBuf) {
        out.clear();
        let n = rho_nodes.len();
        let d_rho = if n > 1 {
            (rho_nodes[n - 1] - rho_nodes[0]) / (n - 1) as f64
        } else {
            0.0
        };
        for m in &self.modes {
            let [kx, ky] = m.wave_vector();
            let (kx, ky) = (kx * self.lambda, ky * self.lambda);
            let base = kx * sigma + m.phase;
            let (ds, dc) = (ky * d_rho).sin_cos();
            let (a_par, a_perp) = (m.amplitude[0], m.amplitude[1]);
            let (g_sigma, g_rho) = (-a_perp * kx, -a_perp * ky);
            for start in (0..n).step_by(ANCHOR_STRIDE) {
                let end = (start + ANCHOR_STRIDE).min(n);
                let (mut s, mut c) = (base + ky * rho_nodes[start]).sin_cos();
                for j in start..end {
                    out.u_par[j] += a_par * c;
                    out.u_perp[j] += a_perp * c;
                    out.du_perp_dsigma[j] += g_sigma * s;
                    out.du_perp_drho[j] += g_rho * s;
                    let c_next = c * dc - s * ds;
                    s = s * dc + c * ds;
                    c = c_next;
                }
            }
        }
        let inv = 1.0 / self.c0;
        for v in out
            .u_par
            .iter_mut()
            .chain(out.u_perp.iter_mut())
            .chain(out.du_perp_dsigma.iter_mut())
            .chain(out.du_perp_drho.iter_mut())
        {
            *v *= inv;
        }
    }
}

/// Re-anchoring stride of the rotation recurrence in [`TurbulenceSpec`] row
/// evaluation; bounds the accumulated phase drift to ~`64 eps`.
pub const ANCHOR_STRIDE: usize = 64;

struct VelocityRowBuf {
    u_par: Vec<f64>,
    u_perp: Vec<f64>,
    du_perp_dsigma: Vec<f64>,
    du_perp_drho: Vec<f64>,
}

impl VelocityRowBuf {
    fn new(n: usize) -> Self {
        VelocityRowBuf {
            u_par: vec![0.0; n],
            u_perp: vec![0.0; n],
            du_perp_dsigma: vec![0.0; n],
            du_perp_drho: vec![0.0; n],
        }
    }

    fn clear(&mut self) {
        for v in [
            &mut self.u_par,
            &mut self.u_perp,
            &mut self.du_perp_dsigma,
            &mut self.du_perp_drho,
        ] {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

/// Dimensionless velocity data sampled on `(sigma_n, rho_j)`, sigma-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityFields {
    n_sigma: usize,
    n_rho: usize,
    pub u_par: Vec<f64>,
    pub u_perp: Vec<f64>,
    pub du_perp_dsigma: Vec<f64>,
    pub du_perp_drho: Vec<f64>,
}

/// Borrowed view of one sigma-row of [`VelocityFields`].
#[derive(Debug, Clone, Copy)]
pub struct VelocityRow<'a> {
    pub u_par: &'a [f64],
    pub u_perp: &'a [f64],
    pub du_perp_dsigma: &'a [f64],
    pub du_perp_drho: &'a [f64],
}

impl VelocityFields {
    /// Identically zero medium.
    pub fn zeros(n_sigma: usize, n_rho: usize) -> Self {
        let z = vec![0.0; n_sigma * n_rho];
        VelocityFields {
            n_sigma,
            n_rho,
            u_par: z.clone(),
            u_perp: z.clone(),
            du_perp_dsigma: z.clone(),
            du_perp_drho: z,
        }
    }

    /// Fields built point-wise from closures `f(n, j) -> PointVelocity`.
    pub fn from_fn(
        n_sigma: usize,
        n_rho: usize,
        mut f: impl FnMut(usize, usize) -> PointVelocity,
    ) -> Self {
        let mut out = VelocityFields::zeros(n_sigma, n_rho);
        for n in 0..n_sigma {
            for j in 0..n_rho {
                let p = f(n, j);
                let i = n * n_rho + j;
                out.u_par[i] = p.u_par;
                out.u_perp[i] = p.u_perp;
                out.du_perp_dsigma[i] = p.du_perp_dsigma;
                out.du_perp_drho[i] = p.du_perp_drho;
            }
        }
        out
    }

    /// Number of sigma nodes stored.
    pub fn n_sigma(&self) -> usize {
        self.n_sigma
    }

    /// Number of rho nodes stored.
    pub fn n_rho(&self) -> usize {
        self.n_rho
    }

    pub fn row(&self, n: usize) -> VelocityRow<'_> {
        let r = n * self.n_rho..(n + 1) * self.n_rho;
        VelocityRow {
            u_par: &self.u_par[r.clone()],
            u_perp: &self.u_perp[r.clone()],
            du_perp_dsigma: &self.du_perp_dsigma[r.clone()],
            du_perp_drho: &self.du_perp_drho[r],
        }
    }

    pub fn max_abs_velocity(&self) -> f64 {
        self.u_par
            .iter()
            .chain(&self.u_perp)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_u_perp(&self) -> f64 {
        self.u_perp.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.u_par
            .iter()
            .chain(&self.u_perp)
            .chain(&self.du_perp_dsigma)
            .chain(&self.du_perp_drho)
            .all(|v| v.is_finite())
    }

    /// Keep every `factor_sigma`-th sigma node and every `factor_rho`-th
    /// rho node. Both extents, less their last node, must be divisible.
    pub fn downsample(&self, factor_sigma: usize, factor_rho: usize) -> Result<VelocityFields> {
        let check = |name: &str, len: usize, f: usize| -> Result<usize> {
            if f == 0 || !(len - 1).is_multiple_of(f) {
                return Err(Error::InvalidArgument(format!(
                    "{name} factor {f} does not divide {} intervals",
                    len - 1
                )));
            }
            Ok((len - 1) / f + 1)
        };
        let ns = check("sigma", self.n_sigma, factor_sigma)?;
        let nr = check("rho", self.n_rho, factor_rho)?;
        let pick = |src: &[f64]| -> Vec<f64> {
            let mut v = Vec::with_capacity(ns * nr);
            for n in 0..ns {
                for j in 0..nr {
                    v.push(src[n * factor_sigma * self.n_rho + j * factor_rho]);
                }
            }
            v
        };
        Ok(VelocityFields {
            n_sigma: ns,
            n_rho: nr,
            u_par: pick(&self.u_par),
            u_perp: pick(&self.u_perp),
            du_perp_dsigma: pick(&self.du_perp_dsigma),
            du_perp_drho: pick(&self.du_perp_drho),
        })
    }

    /// Copy with only the first `n` sigma-rows.
    pub fn truncate_sigma(&self, n: usize) -> VelocityFields {
        let n = n.min(self.n_sigma);
        let len = n * self.n_rho;
        VelocityFields {
            n_sigma: n,
            n_rho: self.n_rho,
            u_par: self.u_par[..len].to_vec(),
            u_perp: self.u_perp[..len].to_vec(),
            du_perp_dsigma: self.du_perp_dsigma[..len].to_vec(),
            du_perp_drho: self.du_perp_drho[..len].to_vec(),
        }
    }
}

/// Sample the velocity data of `spec` on the grid `sigma_nodes x rho_nodes`.
///
/// Rows are evaluated in parallel; the output is independent of the thread
/// count.
pub fn evaluate_fields(
    spec: &TurbulenceSpec,
    sigma_nodes: &[f64],
    rho_nodes: &[f64],
) -> VelocityFields {
    let (ns, nr) = (sigma_nodes.len(), rho_nodes.len());
    let mut out = VelocityFields::zeros(ns, nr);
    if nr == 0 {
        return out;
    }
    let rows: Vec<VelocityRowBuf> = sigma_nodes
        .par_iter()
        .map(|&s| {
            let mut row = VelocityRowBuf::new(nr);
            spec.fill_row(s, rho_nodes, &mut row);
            row
        })
        .collect();
    for (n, row) in rows.into_iter().enumerate() {
        let r = n * nr..(n + 1) * nr;
        out.u_par[r.clone()].copy_from_slice(&row.u_par);
        out.u_perp[r.clone()].copy_from_slice(&row.u_perp);
        out.du_perp_dsigma[r.clone()].copy_from_slice(&row.du_perp_dsigma);
        out.du_perp_drho[r].copy_from_slice(&row.du_perp_drho);
    }
    out
}
