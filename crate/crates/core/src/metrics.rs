//! Error metrics for pose estimates and scene statistics.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::localization::Pose;
use crate::math::wrap_angle;
use crate::scenario::{facing_array, Scenario};

fn check(est: &[Pose], truth: &[Pose]) -> Result<()> {
    if est.len() != truth.len() {
        return Err(Error::Dimension { expected: truth.len(), got: est.len() });
    }
    if truth.is_empty() {
        return Err(Error::Dimension { expected: 1, got: 0 });
    }
    Ok(())
}

/// Per-vehicle position error norms.
pub fn position_errors(est: &[Pose], truth: &[Pose]) -> Result<alloc::vec::Vec<f64>> {
    check(est, truth)?;
    Ok(est.iter().zip(truth).map(|(e, t)| (e.x - t.x).hypot(e.y - t.y)).collect())
}

/// Per-vehicle wrapped heading errors (absolute value).
pub fn orientation_errors(est: &[Pose], truth: &[Pose]) -> Result<alloc::vec::Vec<f64>> {
    check(est, truth)?;
    Ok(est.iter().zip(truth).map(|(e, t)| wrap_angle(e.omega - t.omega).abs()).collect())
}

/// Mean over vehicles of the position error norm.
pub fn rmse_position(est: &[Pose], truth: &[Pose]) -> Result<f64> {
    let e = position_errors(est, truth)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

pub fn rmse_orientation(est: &[Pose], truth: &[Pose]) -> Result<f64> {
    let e = orientation_errors(est, truth)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// Mean over vehicles of `|(dx, dy, d_omega)|`, metres and radians mixed.
pub fn rmse_combined(est: &[Pose], truth: &[Pose]) -> Result<f64> {
    check(est, truth)?;
    let total: f64 = est
        .iter()
        .zip(truth)
        .map(|(e, t)| {
            let dw = wrap_angle(e.omega - t.omega);
            ((e.x - t.x).powi(2) + (e.y - t.y).powi(2) + dw * dw).sqrt()
        })
        .sum();
    Ok(total / est.len() as f64)
}

pub const SIGMA_POSITION: f64 = 0.2;
pub const SIGMA_ORIENTATION_DEG: f64 = 2.0;
pub const CONFIDENCE_FACTOR: f64 = 1.96;

pub fn default_outage_thresholds() -> (f64, f64) {
    (
        CONFIDENCE_FACTOR * SIGMA_POSITION,
        (CONFIDENCE_FACTOR * SIGMA_ORIENTATION_DEG).to_radians(),
    )
}

/// Fraction of `(position error, orientation error)` samples where either
/// error reaches its threshold.
pub fn outage_probability(errors: &[(f64, f64)], gamma_p: f64, gamma_omega: f64) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    let hits = errors.iter().filter(|(p, w)| *p >= gamma_p || *w >= gamma_omega).count();
    hits as f64 / errors.len() as f64
}

/// How AoA pairs are compared when counting separations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeparationDomain {
    /// Body-frame AoAs, difference wrapped to `[0, pi]`.
    #[default]
    Wrapped,
    /// Angles folded onto the facing array; pairs on different faces
    /// always count as separated.
    PerArray,
}

/// `(separated, total)` over ordered AoA pairs at every receiver.
pub fn separation_counts(scene: &Scenario, threshold: f64, domain: SeparationDomain) -> (u64, u64) {
    let mut separated = 0u64;
    let mut total = 0u64;
    for k in 0..scene.len() {
        let angles: alloc::vec::Vec<f64> = scene.links.iter().filter(|l| l.rx == k).map(|l| l.aoa).collect();
        for (a, ta) in angles.iter().enumerate() {
            for (b, tb) in angles.iter().enumerate() {
                if a == b {
                    continue;
                }
                let d = match domain {
                    SeparationDomain::Wrapped => wrap_angle(ta - tb).abs(),
                    SeparationDomain::PerArray => {
                        let (fa, la) = facing_array(*ta);
                        let (fb, lb) = facing_array(*tb);
                        if fa == fb { (la - lb).abs() } else { f64::INFINITY }
                    }
                };
                total += 1;
                if d >= threshold {
                    separated += 1;
                }
            }
        }
    }
    (separated, total)
}
