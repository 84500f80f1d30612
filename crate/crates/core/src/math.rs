//! Scalar helpers shared by the array, estimator and geometry code.

use core::f64::consts::PI;
use num_traits::Float;

/// Normalized sinc, `sin(pi u) / (pi u)` with `sinc(0) = 1`.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        let pu = PI * u;
        1.0 - pu * pu / 6.0
    } else {
        let pu = PI * u;
        pu.sin() / pu
    }
}

/// First derivative of [`sinc`] with respect to its argument.
///
/// Uses `(pi u cos(pi u) - sin(pi u)) / (pi u^2)` away from the origin and
/// the Taylor series close to it, where the closed form cancels badly.
pub fn sinc_deriv(u: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    if u.abs() < 1e-3 {
        let p2 = PI * PI;
        let u2 = u * u;
        return -p2 * u / 3.0 + p2 * p2 * u * u2 / 30.0 - p2 * p2 * p2 * u * u2 * u2 / 840.0;
    }
    let pu = PI * u;
    (pu * pu.cos() - pu.sin()) / (PI * u * u)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut t = theta % two_pi;
    if t <= -PI {
        t += two_pi;
    } else if t > PI {
        t -= two_pi;
    }
    t
}

/// Wraps an angle into `[0, 2 pi)`.
pub fn wrap_positive(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let t = theta % two_pi;
    if t < 0.0 {
        let w = t + two_pi;
        if w >= two_pi {
            0.0
        } else {
            w
        }
    } else {
        t
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    Float::powf(10.0, db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_zeros_at_integers() {
        assert_eq!(sinc(0.0), 1.0);
        for k in 1..20 {
            assert!(sinc(k as f64).abs() < 1e-15);
            assert!(sinc(-(k as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn sinc_deriv_matches_central_difference() {
        // 1000 points on [-5, 5], skipping a 1e-4 neighbourhood of zero.
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..1000 {
            let u = -5.0 + 10.0 * (i as f64 + 0.5) / 1000.0;
            if u.abs() < 1e-4 {
                continue;
            }
            let fd = (sinc(u + h) - sinc(u - h)) / (2.0 * h);
            worst = worst.max((fd - sinc_deriv(u)).abs());
        }
        assert!(worst <= 1e-8, "worst {worst}");
    }

    #[test]
    fn sinc_deriv_at_integers() {
        // cos(pi k) / k for nonzero integers
        for k in 1..10i32 {
            let expected = if k % 2 == 0 { 1.0 } else { -1.0 } / k as f64;
            assert!((sinc_deriv(k as f64) - expected).abs() < 1e-12);
        }
        assert_eq!(sinc_deriv(0.0), 0.0);
    }

    #[test]
    fn wrapping() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
        assert!((wrap_positive(-0.5) - (2.0 * PI - 0.5)).abs() < 1e-12);
        assert_eq!(wrap_positive(0.0), 0.0);
    }
}
