//! Fifth-order WENO discretisation of the nonlinear and variable-coefficient
//! terms
//!
//! `b(V) = -d_theta g(V) - d_rho h(V) + (d_rho U_perp) V`,
//! `g = -2 pi U_par V - (B/2) V^2`, `h = U_perp V`,
//!
//! on a grid periodic in both rho and theta. Each direction uses the
//! Jiang–Shu reconstruction with global Lax–Friedrichs flux splitting.

use rayon::prelude::*;

use crate::grid::Field2D;
use crate::spectral::Real;
use crate::turbulence::VelocityRow;

/// Regulariser in the nonlinear weights.
pub const WENO_EPS: f64 = 1e-6;

/// Reconstruct the interface value at `i + 1/2` from the upwind-biased
/// stencil `(f_{i-2}, f_{i-1}, f_i, f_{i+1}, f_{i+2})`.
#[inline(always)]
pub fn reconstruct<T: Real>(a: T, b: T, c: T, d: T, e: T) -> T {
    let k = |x: f64| T::of(x);
    let two = k(2.0);
    let sixth = k(1.0 / 6.0);
    let q0 = (two * a - k(7.0) * b + k(11.0) * c) * sixth;
    let q1 = (-b + k(5.0) * c + two * d) * sixth;
    let q2 = (two * c + k(5.0) * d - e) * sixth;

    let c13 = k(13.0 / 12.0);
    let quarter = k(0.25);
    let s0 = a - two * b + c;
    let t0 = a - k(4.0) * b + k(3.0) * c;
    let s1 = b - two * c + d;
    let t1 = b - d;
    let s2 = c - two * d + e;
    let t2 = k(3.0) * c - k(4.0) * d + e;
    let beta0 = c13 * s0 * s0 + quarter * t0 * t0;
    let beta1 = c13 * s1 * s1 + quarter * t1 * t1;
    let beta2 = c13 * s2 * s2 + quarter * t2 * t2;

    let eps = k(WENO_EPS);
    let w = |d: f64, beta: T| {
        let r = eps + beta;
        k(d) / (r * r)
    };
    let w0 = w(0.1, beta0);
    let w1 = w(0.6, beta1);
    let w2 = w(0.3, beta2);
    (w0 * q0 + w1 * q1 + w2 * q2) / (w0 + w1 + w2)
}

/// Numerical flux at `i + 1/2` from split fluxes padded by three ghosts on
/// each side: `plus[p]`, `minus[p]` hold the values at node `p - 3`.
#[inline(always)]
fn interface<T: Real>(plus: &[T], minus: &[T], i: usize) -> T {
    let p = i + 3;
    reconstruct(plus[p - 2], plus[p - 1], plus[p], plus[p + 1], plus[p + 2])
        + reconstruct(minus[p + 3], minus[p + 2], minus[p + 1], minus[p], minus[p - 1])
}

#[inline(always)]
fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Reusable evaluator of `b`; owns the rho-direction buffers.
pub struct Weno5<T> {
    n_rho: usize,
    n_theta: usize,
    h_plus: Vec<T>,
    h_minus: Vec<T>,
    h_flux: Vec<T>,
}

/// Velocity samples at one sigma level in working precision.
#[derive(Debug, Clone, Copy)]
pub struct Coefficients<'a, T> {
    pub u_par: &'a [T],
    pub u_perp: &'a [T],
    pub du_perp_drho: &'a [T],
    pub nonlinearity: T,
    pub d_rho: T,
    pub d_theta: T,
}

impl<T: Real> Weno5<T> {
    pub fn new(n_rho: usize, n_theta: usize) -> Self {
        assert!(n_rho >= 1 && n_theta >= 1);
        let n = n_rho * n_theta;
        Weno5 {
            n_rho,
            n_theta,
            h_plus: vec![T::zero(); n],
            h_minus: vec![T::zero(); n],
            h_flux: vec![T::zero(); n],
        }
    }

    /// Write `b(V)` into `out`; `v` and `out` are rho-major.
    pub fn apply(&mut self, v: &[T], coef: Coefficients<'_, T>, out: &mut [T]) {
        let (nr, nt) = (self.n_rho, self.n_theta);
        assert_eq!(v.len(), nr * nt);
        assert_eq!(out.len(), nr * nt);
        assert!(coef.u_par.len() >= nr && coef.u_perp.len() >= nr && coef.du_perp_drho.len() >= nr);
        let two_pi = T::of(2.0 * std::f64::consts::PI);
        let half = T::of(0.5);
        let bnl = coef.nonlinearity;

        // Global splitting speeds. Max is order-independent, so the
        // parallel reduction is deterministic.
        let alpha_theta = v
            .par_chunks(nt)
            .zip(coef.u_par[..nr].par_iter())
            .map(|(row, &u)| {
                row.iter()
                    .fold(T::zero(), |m, &x| m.max((-two_pi * u - bnl * x).abs()))
            })
            .reduce(T::zero, |a, b| a.max(b));
        let alpha_rho = coef.u_perp[..nr]
            .iter()
            .fold(T::zero(), |m, &u| m.max(u.abs()));

        // theta direction, row by row
        let inv_dt = T::one() / coef.d_theta;
        out.par_chunks_mut(nt)
            .zip(v.par_chunks(nt))
            .zip(coef.u_par[..nr].par_iter())
            .for_each_init(
                || (vec![T::zero(); nt + 6], vec![T::zero(); nt + 6], vec![T::zero(); nt]),
                |(gp, gm, flux), ((dst, row), &u)| {
                    for p in 0..nt + 6 {
                        let x = row[wrap(p as isize - 3, nt)];
                        let g = -two_pi * u * x - half * bnl * x * x;
                        gp[p] = half * (g + alpha_theta * x);
                        gm[p] = half * (g - alpha_theta * x);
                    }
                    for (i, f) in flux.iter_mut().enumerate() {
                        *f = interface(gp, gm, i);
                    }
                    let mut left = flux[nt - 1];
                    for k in 0..nt {
                        dst[k] = -(flux[k] - left) * inv_dt;
                        left = flux[k];
                    }
                },
            );

        // rho direction: split fluxes, interface fluxes between rows j and
        // j + 1, then the difference plus the source term.
        let (hp, hm) = (&mut self.h_plus, &mut self.h_minus);
        hp.par_chunks_mut(nt)
            .zip(hm.par_chunks_mut(nt))
            .zip(v.par_chunks(nt))
            .zip(coef.u_perp[..nr].par_iter())
            .for_each(|(((p, m), row), &u)| {
                for k in 0..nt {
                    let h = u * row[k];
                    p[k] = half * (h + alpha_rho * row[k]);
                    m[k] = half * (h - alpha_rho * row[k]);
                }
            });
        let (hp, hm) = (&self.h_plus, &self.h_minus);
        let r = |j: isize| -> usize { wrap(j, nr) * nt };
        self.h_flux
            .par_chunks_mut(nt)
            .enumerate()
            .for_each(|(j, dst)| {
                let j = j as isize;
                let p = [r(j - 2), r(j - 1), r(j), r(j + 1), r(j + 2)];
                let m = [r(j + 3), r(j + 2), r(j + 1), r(j), r(j - 1)];
                for k in 0..nt {
                    dst[k] = reconstruct(hp[p[0] + k], hp[p[1] + k], hp[p[2] + k], hp[p[3] + k], hp[p[4] + k])
                        + reconstruct(hm[m[0] + k], hm[m[1] + k], hm[m[2] + k], hm[m[3] + k], hm[m[4] + k]);
                }
            });
        let inv_dr = T::one() / coef.d_rho;
        let hf = &self.h_flux;
        out.par_chunks_mut(nt)
            .zip(v.par_chunks(nt))
            .zip(coef.du_perp_drho[..nr].par_iter())
            .enumerate()
            .for_each(|(j, ((dst, row), &du))| {
                let below = &hf[wrap(j as isize - 1, nr) * nt..][..nt];
                let here = &hf[j * nt..][..nt];
                for k in 0..nt {
                    dst[k] = dst[k] - (here[k] - below[k]) * inv_dr + du * row[k];
                }
            });
    }
}

/// `b(V)` for a double-precision field with rho-periodic velocity samples.
pub fn weno5_b(v: &Field2D, row: VelocityRow<'_>, nonlinearity: f64, d_rho: f64, d_theta: f64) -> Field2D {
    let (nr, nt) = v.shape();
    let mut out = vec![0.0; nr * nt];
    Weno5::<f64>::new(nr, nt).apply(
        v.values(),
        Coefficients {
            u_par: row.u_par,
            u_perp: row.u_perp,
            du_perp_drho: row.du_perp_drho,
            nonlinearity,
            d_rho,
            d_theta,
        },
        &mut out,
    );
    Field2D::from_vec(nr, nt, out).expect("shape preserved")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn reconstruction_is_exact_up_to_quadratics() {
        // Node values are cell averages of the interface flux; for f = x^2
        // that flux is x^2 - 1/12, worth 1/4 - 1/12 at x = 1/2.
        assert_eq!(reconstruct::<f64>(3.0, 3.0, 3.0, 3.0, 3.0), 3.0);
        assert!((reconstruct::<f64>(-2.0, -1.0, 0.0, 1.0, 2.0) - 0.5).abs() < 1e-15);
        let r = reconstruct::<f64>(4.0, 1.0, 0.0, 1.0, 4.0);
        assert!((r - (0.25 - 1.0 / 12.0)).abs() < 1e-15, "{r}");
    }

    #[test]
    fn linear_weights_reproduce_fifth_order_interpolant() {
        // For data with vanishing smoothness indicators differences, the
        // scheme reduces to (2a - 13b + 47c + 27d - 3e) / 60.
        let (a, b, c, d, e) = (0.1, 0.4, 0.9, 1.6, 2.5);
        let linear = (2.0 * a - 13.0 * b + 47.0 * c + 27.0 * d - 3.0 * e) / 60.0;
        // quadratic data: all three betas equal, so weights are optimal
        assert!((reconstruct::<f64>(a, b, c, d, e) - linear).abs() < 1e-14);
    }

    fn zeros(n: usize) -> Vec<f64> {
        vec![0.0; n]
    }

    #[test]
    fn constant_field_is_an_equilibrium() {
        let (nr, nt) = (16, 24);
        let u_par: Vec<f64> = (0..nr).map(|j| 0.03 * (j as f64).sin()).collect();
        let u_perp = vec![0.04; nr];
        let du = zeros(nr);
        let v = Field2D::from_fn(nr, nt, |_, _| 0.8);
        let row = VelocityRow { u_par: &u_par, u_perp: &u_perp, du_perp_dsigma: &du, du_perp_drho: &du };
        let b = weno5_b(&v, row, 0.05, 0.3, 0.2);
        assert!(b.max_abs() <= 1e-12 * 0.8, "{}", b.max_abs());
    }

    #[test]
    fn constant_field_residual_is_fifth_order_for_varying_u_perp() {
        // b(c) = -d_rho(c U_perp)|_weno + c d_rho U_perp: a pure WENO error
        let span = 400.0;
        let w = 2.0 * std::f64::consts::PI / span;
        let errs: Vec<f64> = [64usize, 128, 256]
            .iter()
            .map(|&nr| {
                let dr = span / nr as f64;
                let u_perp: Vec<f64> = (0..nr).map(|j| 0.04 * (w * j as f64 * dr).sin()).collect();
                let du: Vec<f64> = (0..nr).map(|j| 0.04 * w * (w * j as f64 * dr).cos()).collect();
                let z = zeros(nr);
                let row = VelocityRow { u_par: &z, u_perp: &u_perp, du_perp_dsigma: &z, du_perp_drho: &du };
                weno5_b(&Field2D::from_fn(nr, 8, |_, _| 0.8), row, 0.05, dr, 0.3).max_abs()
            })
            .collect();
        assert!(errs[2] < 1e-9, "{errs:?}");
        assert!(order_fit(&errs) > 4.5, "{errs:?}");
    }

    #[test]
    fn matches_reconstruct_call_by_call() {
        // brute-force oracle with explicit modular indexing
        let (nr, nt) = (7, 9);
        let v = Field2D::from_fn(nr, nt, |j, k| ((j * 3 + k * 5) % 11) as f64 * 0.1 - 0.4);
        let u_par: Vec<f64> = (0..nr).map(|j| 0.01 * j as f64).collect();
        let u_perp: Vec<f64> = (0..nr).map(|j| 0.02 * (j as f64 - 3.0)).collect();
        let du: Vec<f64> = (0..nr).map(|j| 0.005 * j as f64).collect();
        let (bnl, dr, dt) = (0.05, 0.3, 0.2);
        let row = VelocityRow { u_par: &u_par, u_perp: &u_perp, du_perp_dsigma: &du, du_perp_drho: &du };
        let got = weno5_b(&v, row, bnl, dr, dt);

        let at = |j: isize, k: isize| v.get(wrap(j, nr), wrap(k, nt));
        let mut a_t: f64 = 0.0;
        for j in 0..nr {
            for k in 0..nt {
                a_t = a_t.max((-2.0 * PI * u_par[j] - bnl * v.get(j, k)).abs());
            }
        }
        let a_r = u_perp.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        let g = |j: usize, k: isize| {
            let x = at(j as isize, k);
            -2.0 * PI * u_par[j] * x - 0.5 * bnl * x * x
        };
        let h = |j: isize, k: usize| u_perp[wrap(j, nr)] * at(j, k as isize);
        let ftheta = |j: usize, k: isize| {
            let p = |i: isize| 0.5 * (g(j, i) + a_t * at(j as isize, i));
            let m = |i: isize| 0.5 * (g(j, i) - a_t * at(j as isize, i));
            reconstruct(p(k - 2), p(k - 1), p(k), p(k + 1), p(k + 2))
                + reconstruct(m(k + 3), m(k + 2), m(k + 1), m(k), m(k - 1))
        };
        let frho = |j: isize, k: usize| {
            let p = |i: isize| 0.5 * (h(i, k) + a_r * at(i, k as isize));
            let m = |i: isize| 0.5 * (h(i, k) - a_r * at(i, k as isize));
            reconstruct(p(j - 2), p(j - 1), p(j), p(j + 1), p(j + 2))
                + reconstruct(m(j + 3), m(j + 2), m(j + 1), m(j), m(j - 1))
        };
        for j in 0..nr {
            for k in 0..nt {
                let (ji, ki) = (j as isize, k as isize);
                let expect = -(ftheta(j, ki) - ftheta(j, ki - 1)) / dt
                    - (frho(ji, k) - frho(ji - 1, k)) / dr
                    + du[j] * v.get(j, k);
                assert!((got.get(j, k) - expect).abs() < 1e-13, "({j},{k})");
            }
        }
    }

    #[test]
    fn single_precision_agrees_with_double() {
        let (nr, nt) = (8, 32);
        let v = Field2D::from_fn(nr, nt, |j, k| (0.3 * k as f64 + 0.2 * j as f64).sin());
        let u_par: Vec<f64> = (0..nr).map(|j| 0.02 * (j as f64).cos()).collect();
        let u_perp: Vec<f64> = (0..nr).map(|j| 0.03 * (j as f64).sin()).collect();
        let du: Vec<f64> = (0..nr).map(|j| 0.01 * (j as f64).cos()).collect();
        let row = VelocityRow { u_par: &u_par, u_perp: &u_perp, du_perp_dsigma: &du, du_perp_drho: &du };
        let reference = weno5_b(&v, row, 0.05, 0.5, 0.4);

        let to32 = |x: &[f64]| x.iter().map(|&y| y as f32).collect::<Vec<_>>();
        let (v32, up, uq, d) = (to32(v.values()), to32(&u_par), to32(&u_perp), to32(&du));
        let mut out = vec![0.0f32; nr * nt];
        Weno5::<f32>::new(nr, nt).apply(
            &v32,
            Coefficients { u_par: &up, u_perp: &uq, du_perp_drho: &d, nonlinearity: 0.05, d_rho: 0.5, d_theta: 0.4 },
            &mut out,
        );
        for (a, b) in out.iter().zip(reference.values()) {
            assert!((*a as f64 - b).abs() < 1e-4 * reference.max_abs());
        }
    }

    /// Max-norm error of `b` against `exact` on an `n`-point refinement.
    fn order_fit(errs: &[f64]) -> f64 {
        let k = errs.len() - 1;
        (errs[0] / errs[k]).ln() / ((1 << k) as f64).ln()
    }

    #[test]
    fn fifth_order_burgers_term_in_theta() {
        let span = 28.0 * PI;
        let b = 0.05;
        let errs: Vec<f64> = [64usize, 128, 256]
            .iter()
            .map(|&nt| {
                let dt = span / nt as f64;
                let w = 2.0 * PI / span;
                let v = Field2D::from_fn(4, nt, |_, k| (w * k as f64 * dt).sin());
                let z = zeros(4);
                let row = VelocityRow { u_par: &z, u_perp: &z, du_perp_dsigma: &z, du_perp_drho: &z };
                let got = weno5_b(&v, row, b, 1.0, dt);
                (0..nt)
                    .map(|k| {
                        let x = w * k as f64 * dt;
                        let exact = b * x.sin() * w * x.cos();
                        (got.get(1, k) - exact).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(order_fit(&errs) >= 4.5, "{errs:?}");
    }
}
