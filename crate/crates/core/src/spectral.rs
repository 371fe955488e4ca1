//! Two-dimensional real Fourier transforms on the doubly periodic grid.
//!
//! The spectrum of a real `n_rho x n_theta` field is kept as the
//! non-redundant half along theta (`k = 0..=n_theta/2`) and stored
//! *k-major*: entry `(j, k)` lives at `k * n_rho + j`, with `j` in FFT
//! order. The remaining modes follow from conjugate symmetry.
//!
//! The forward transform is normalised so that the coefficients are the
//! Fourier-series coefficients `v_(j,k)` of the grid function:
//!
//! `V(rho_a, theta_b) = sum_(j,k) v_(j,k) exp(2 pi i (j a / n_rho + k b / n_theta))`.

use std::iter::Sum;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::{Float, Zero};
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftNum, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::Field2D;

/// Working precision of the spectral solver.
pub trait Real: FftNum + Float + Sum + Send + Sync {
    /// Unit roundoff of the format (`2^-53` or `2^-24`).
    const UNIT_ROUNDOFF: f64;
    const NAME: &'static str;

    fn of(x: f64) -> Self;
    fn to_f64_lossless(self) -> f64;
}

impl Real for f64 {
    const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;
    const NAME: &'static str = "double";

    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self
    }
}

impl Real for f32 {
    const UNIT_ROUNDOFF: f64 = f32::EPSILON as f64 / 2.0;
    const NAME: &'static str = "single";

    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self as f64
    }
}

/// Signed frequency of FFT index `i` on `n` points, in `(-n/2, n/2]`.
#[inline]
pub fn signed_mode(i: usize, n: usize) -> isize {
    if i <= n / 2 {
        i as isize
    } else {
        i as isize - n as isize
    }
}

/// Half spectrum of a real field, k-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField2D<T> {
    n_rho: usize,
    n_theta: usize,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> SpectralField2D<T> {
    pub fn zeros(n_rho: usize, n_theta: usize) -> Self {
        SpectralField2D {
            n_rho,
            n_theta,
            coeffs: vec![Complex::zero(); n_rho * (n_theta / 2 + 1)],
        }
    }

    pub fn n_rho(&self) -> usize {
        self.n_rho
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    /// Number of stored theta modes, `n_theta / 2 + 1`.
    pub fn n_half(&self) -> usize {
        self.n_theta / 2 + 1
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    /// Coefficient of the signed mode pair `(j, k)`; modes outside the
    /// stored half are recovered by conjugate symmetry.
    pub fn coeff(&self, j: isize, k: isize) -> Complex<T> {
        let nr = self.n_rho as isize;
        let nt = self.n_theta as isize;
        let km = k.rem_euclid(nt);
        if (km as usize) < self.n_half() {
            self.coeffs[km as usize * self.n_rho + j.rem_euclid(nr) as usize]
        } else {
            self.coeffs[(nt - km) as usize * self.n_rho + (-j).rem_euclid(nr) as usize].conj()
        }
    }

    /// Set the coefficient of `(j, k)` with `0 <= k <= n_theta / 2`.
    ///
    /// The caller is responsible for keeping the `k = 0` (and Nyquist)
    /// columns conjugate symmetric in `j`.
    pub fn set_coeff(&mut self, j: isize, k: usize, v: Complex<T>) {
        assert!(k < self.n_half(), "theta mode {k} not stored");
        let j = j.rem_euclid(self.n_rho as isize) as usize;
        self.coeffs[k * self.n_rho + j] = v;
    }
}

/// Planned forward/inverse 2-D real transforms with reusable buffers.
///
/// Rows along theta are transformed with a real FFT, the half spectrum is
/// transposed, and the transverse axis is transformed with a complex FFT.
/// Both batches run in parallel over the opposite axis.
pub struct Fft2d<T: Real> {
    n_rho: usize,
    n_theta: usize,
    n_half: usize,
    r2c: Arc<dyn RealToComplex<T>>,
    c2r: Arc<dyn ComplexToReal<T>>,
    rho_fwd: Arc<dyn Fft<T>>,
    rho_inv: Arc<dyn Fft<T>>,
    rows: Vec<Complex<T>>,
    forward_count: usize,
    inverse_count: usize,
}

impl<T: Real> Fft2d<T> {
    pub fn new(n_rho: usize, n_theta: usize) -> Self {
        let mut real_planner = RealFftPlanner::<T>::new();
        let mut planner = FftPlanner::<T>::new();
        let n_half = n_theta / 2 + 1;
        Fft2d {
            n_rho,
            n_theta,
            n_half,
            r2c: real_planner.plan_fft_forward(n_theta),
            c2r: real_planner.plan_fft_inverse(n_theta),
            rho_fwd: planner.plan_fft_forward(n_rho),
            rho_inv: planner.plan_fft_inverse(n_rho),
            rows: vec![Complex::zero(); n_rho * n_half],
            forward_count: 0,
            inverse_count: 0,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rho, self.n_theta)
    }

    pub fn spectrum_len(&self) -> usize {
        self.n_rho * self.n_half
    }

    /// Number of forward transforms performed so far.
    pub fn forward_count(&self) -> usize {
        self.forward_count
    }

    /// Number of inverse transforms performed so far.
    pub fn inverse_count(&self) -> usize {
        self.inverse_count
    }

    /// Physical values (rho-major) to the k-major half spectrum.
    pub fn forward(&mut self, input: &[T], out: &mut [Complex<T>]) {
        assert_eq!(input.len(), self.n_rho * self.n_theta);
        assert_eq!(out.len(), self.spectrum_len());
        self.forward_count += 1;
        let (n_rho, n_theta, n_half) = (self.n_rho, self.n_theta, self.n_half);
        let r2c = &self.r2c;
        self.rows
            .par_chunks_mut(n_half)
            .zip(input.par_chunks(n_theta))
            .for_each_init(
                || (r2c.make_input_vec(), r2c.make_scratch_vec()),
                |(buf, scratch), (spec_row, row)| {
                    buf.copy_from_slice(row);
                    r2c.process_with_scratch(buf, spec_row, scratch)
                        .expect("buffer sizes fixed at planning");
                },
            );
        transpose::transpose(&self.rows, out, n_half, n_rho);
        let scale = T::one() / T::of((n_rho * n_theta) as f64);
        let fft = &self.rho_fwd;
        out.par_chunks_mut(n_rho).for_each_init(
            || vec![Complex::zero(); fft.get_inplace_scratch_len()],
            |scratch, line| {
                fft.process_with_scratch(line, scratch);
                for c in line.iter_mut() {
                    *c = *c * scale;
                }
            },
        );
    }

    /// Inverse of [`Fft2d::forward`]. `spec` is used as scratch and is left
    /// holding rho-inverted data.
    pub fn inverse_in_place(&mut self, spec: &mut [Complex<T>], out: &mut [T]) {
        assert_eq!(spec.len(), self.spectrum_len());
        assert_eq!(out.len(), self.n_rho * self.n_theta);
        self.inverse_count += 1;
        let (n_rho, n_theta, n_half) = (self.n_rho, self.n_theta, self.n_half);
        let fft = &self.rho_inv;
        spec.par_chunks_mut(n_rho).for_each_init(
            || vec![Complex::zero(); fft.get_inplace_scratch_len()],
            |scratch, line| fft.process_with_scratch(line, scratch),
        );
        transpose::transpose(spec, &mut self.rows, n_rho, n_half);
        let c2r = &self.c2r;
        let even = n_theta % 2 == 0;
        self.rows
            .par_chunks_mut(n_half)
            .zip(out.par_chunks_mut(n_theta))
            .for_each_init(
                || c2r.make_scratch_vec(),
                |scratch, (spec_row, row)| {
                    // Real-field columns: drop roundoff-level imaginary parts.
                    spec_row[0].im = T::zero();
                    if even {
                        spec_row[n_half - 1].im = T::zero();
                    }
                    c2r.process_with_scratch(spec_row, row, scratch)
                        .expect("imaginary parts of real bins cleared");
                },
            );
    }

    /// Inverse transform leaving `spec` untouched.
    pub fn inverse(&mut self, spec: &[Complex<T>], out: &mut [T], work: &mut Vec<Complex<T>>) {
        work.clear();
        work.extend_from_slice(spec);
        self.inverse_in_place(work, out);
    }
}

impl Fft2d<f64> {
    pub fn to_spectral(&mut self, field: &Field2D) -> Result<SpectralField2D<f64>> {
        if field.shape() != self.shape() {
            return Err(Error::ShapeMismatch(format!(
                "field {:?} vs transform {:?}",
                field.shape(),
                self.shape()
            )));
        }
        let mut s = SpectralField2D::zeros(self.n_rho, self.n_theta);
        self.forward(field.values(), &mut s.coeffs);
        Ok(s)
    }

    pub fn to_physical(&mut self, spec: &SpectralField2D<f64>) -> Result<Field2D> {
        if (spec.n_rho, spec.n_theta) != self.shape() {
            return Err(Error::ShapeMismatch("spectrum vs transform".into()));
        }
        let mut work = Vec::new();
        let mut values = vec![0.0; self.n_rho * self.n_theta];
        self.inverse(&spec.coeffs, &mut values, &mut work);
        Field2D::from_vec(self.n_rho, self.n_theta, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn signed_modes() {
        assert_eq!(
            (0..6).map(|i| signed_mode(i, 6)).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, -2, -1]
        );
        assert_eq!(
            (0..5).map(|i| signed_mode(i, 5)).collect::<Vec<_>>(),
            vec![0, 1, 2, -2, -1]
        );
    }

    #[test]
    fn single_mode_lands_on_its_coefficient() {
        let (nr, nt) = (8, 12);
        let mut fft = Fft2d::<f64>::new(nr, nt);
        // cos(2 pi (2a/8 + 3b/12)) = (e^{i..} + e^{-i..}) / 2
        let f = Field2D::from_fn(nr, nt, |a, b| {
            (2.0 * PI * (2.0 * a as f64 / 8.0 + 3.0 * b as f64 / 12.0)).cos()
        });
        let s = fft.to_spectral(&f).unwrap();
        assert!((s.coeff(2, 3) - Complex::new(0.5, 0.0)).norm() < 1e-14);
        assert!((s.coeff(-2, -3) - Complex::new(0.5, 0.0)).norm() < 1e-14);
        assert!(s.coeff(2, -3).norm() < 1e-14);
        assert!(s.coeff(0, 0).norm() < 1e-14);
    }

    #[test]
    fn counts_transforms() {
        let mut fft = Fft2d::<f64>::new(4, 6);
        let f = Field2D::from_fn(4, 6, |j, k| (j + k) as f64);
        let s = fft.to_spectral(&f).unwrap();
        let _ = fft.to_physical(&s).unwrap();
        assert_eq!((fft.forward_count(), fft.inverse_count()), (1, 1));
    }

    proptest! {
        #[test]
        fn roundtrip_restores_real_fields(
            nr in 2usize..10,
            nt in 2usize..12,
            vals in proptest::collection::vec(-1.0f64..1.0, 120),
        ) {
            let f = Field2D::from_fn(nr, nt, |j, k| vals[j * 12 + k]);
            let mut fft = Fft2d::<f64>::new(nr, nt);
            let s = fft.to_spectral(&f).unwrap();
            // conjugate symmetry of a real field
            for j in -(nr as isize)..(nr as isize) {
                for k in -(nt as isize)..(nt as isize) {
                    let d = s.coeff(j, k) - s.coeff(-j, -k).conj();
                    prop_assert!(d.norm() < 1e-14);
                }
            }
            let back = fft.to_physical(&s).unwrap();
            let err: f64 = f.values().iter().zip(back.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = f.values().iter().map(|a| a * a).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-12 * norm.max(1e-300));
        }
    }
}
