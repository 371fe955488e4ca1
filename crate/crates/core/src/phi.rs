//! The entire functions `phi_1(z) = (e^z - 1) / z` and
//! `phi_2(z) = (e^z - 1 - z) / z^2`, extended by continuity to `z = 0`.
//!
//! Inside the unit disc the closed forms cancel catastrophically, so a
//! truncated Taylor series is used there; `SERIES_TERMS` terms keep the
//! truncation below `1 / 27! < 1e-28`.

use num_complex::Complex64;

/// Below this modulus the Taylor series is evaluated.
pub const SERIES_RADIUS: f64 = 1.0;
const SERIES_TERMS: usize = 25;

/// `e^z - 1` without cancellation for small `|z|`.
pub fn expm1(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    let half_sin = (0.5 * y).sin();
    // cos y - 1 = -2 sin^2(y/2)
    let re = x.exp_m1() * y.cos() - 2.0 * half_sin * half_sin;
    let im = x.exp() * y.sin();
    Complex64::new(re, im)
}

/// `sum_{n >= 0} z^n / (n + shift)!` by Horner's rule.
fn series(z: Complex64, shift: usize) -> Complex64 {
    // coefficient of z^n is 1/(n+shift)!; Horner from the top.
    let mut acc = Complex64::new(0.0, 0.0);
    for n in (0..SERIES_TERMS).rev() {
        acc = acc * z / (n + shift + 1) as f64 + 1.0;
    }
    // acc = sum z^n shift!/(n+shift)!
    acc / factorial(shift)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

pub fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < SERIES_RADIUS {
        series(z, 1)
    } else {
        expm1(z) / z
    }
}

pub fn phi2(z: Complex64) -> Complex64 {
    if z.norm() < SERIES_RADIUS {
        series(z, 2)
    } else {
        (expm1(z) - z) / (z * z)
    }
}

/// `(e^z, phi_1(z), phi_2(z))` in one call.
pub fn phi_all(z: Complex64) -> (Complex64, Complex64, Complex64) {
    (z.exp(), phi1(z), phi2(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1e-300)
    }

    /// `int_0^1 w(s) e^{(1-s) z} ds` by composite Gauss–Legendre (5 points).
    fn quadrature(z: Complex64, weight: impl Fn(f64) -> f64) -> Complex64 {
        const X: [f64; 5] = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683,
            0.0,
            0.538_469_310_105_683,
            0.906_179_845_938_664,
        ];
        const W: [f64; 5] = [
            0.236_926_885_056_189_1,
            0.478_628_670_499_366_5,
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
        ];
        let panels = 200;
        let h = 1.0 / panels as f64;
        let mut acc = c(0.0, 0.0);
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (x, w) in X.iter().zip(W) {
                let s = mid + 0.5 * h * x;
                acc += (z * (1.0 - s)).exp() * (w * 0.5 * h * weight(s));
            }
        }
        acc
    }

    #[test]
    fn known_values() {
        assert!(close(phi1(c(1.0, 0.0)), c(E - 1.0, 0.0), 1e-15));
        assert!(close(phi2(c(-2.0, 0.0)), c(((-2.0f64).exp() + 1.0) / 4.0, 0.0), 1e-15));
        assert!((phi2(c(-2.0, 0.0)).re - 0.283_833_821).abs() < 1e-9);
        assert_eq!(phi1(c(0.0, 0.0)), c(1.0, 0.0));
        assert_eq!(phi2(c(0.0, 0.0)), c(0.5, 0.0));
        // tiny arguments: leading terms of the series
        let z = c(1e-10, -3e-11);
        assert!(close(phi1(z), c(1.0, 0.0) + z / 2.0, 1e-16));
        assert!(close(phi2(z), c(0.5, 0.0) + z / 6.0, 1e-16));
    }

    #[test]
    fn huge_negative_arguments() {
        let z = c(-1e16, 0.0);
        assert!(close(phi1(z), c(1e-16, 0.0), 1e-15));
        assert!(close(phi2(z), c(1e-16, 0.0), 1e-15));
        let z = c(-3e5, 2e5);
        assert!(close(phi1(z), -z.inv(), 1e-15));
        assert!(phi2(z).is_finite());
    }

    #[test]
    fn continuous_across_series_radius() {
        for t in 0..64 {
            let a = t as f64 * std::f64::consts::TAU / 64.0;
            // both branches at the same point on the switch circle
            let z = Complex64::from_polar(SERIES_RADIUS, a);
            assert!(close(series(z, 1), expm1(z) / z, 1e-14));
            assert!(close(series(z, 2), (expm1(z) - z) / (z * z), 1e-13));
        }
    }

    proptest! {
        #[test]
        fn matches_integral_representation(re in -8.0f64..4.0, im in -8.0f64..8.0) {
            let z = c(re, im);
            let q1 = quadrature(z, |_| 1.0);
            let q2 = quadrature(z, |s| s);
            prop_assert!(close(phi1(z), q1, 1e-13), "{} vs {}", phi1(z), q1);
            prop_assert!(close(phi2(z), q2, 1e-13), "{} vs {}", phi2(z), q2);
        }

        #[test]
        fn recurrence(re in -50.0f64..5.0, im in -50.0f64..50.0) {
            let z = c(re, im);
            prop_assume!(z.norm() > 1e-3);
            let scale = z.exp().norm().max(1.0);
            prop_assert!((phi1(z) * z + 1.0 - z.exp()).norm() <= 1e-12 * scale);
            let lhs = phi2(z) * z + 1.0;
            prop_assert!((lhs - phi1(z)).norm() <= 1e-12 * phi1(z).norm().max(1.0));
        }

        #[test]
        fn conjugate_symmetry(re in -20.0f64..2.0, im in -20.0f64..20.0) {
            let z = c(re, im);
            prop_assert_eq!(phi1(z.conj()), phi1(z).conj());
            prop_assert_eq!(phi2(z.conj()), phi2(z).conj());
        }
    }
}
