//! Noisy array snapshots for one or more incident plane waves.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::array_model::{lens_amplitude, ula_steering, ArrayConfig, ArrayKind};
use crate::error::{Error, Result};
use crate::math::db_to_linear;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub theta: f64,
    pub gain: Complex64,
    /// Linear path gain `1/rho`.
    pub inv_rho: f64,
}

impl PathSpec {
    pub fn new(theta: f64, gain: Complex64, inv_rho: f64) -> Self {
        Self { theta, gain, inv_rho }
    }

    /// Unit gain, unit path gain.
    pub fn unit(theta: f64) -> Self {
        Self::new(theta, Complex64::new(1.0, 0.0), 1.0)
    }

    fn amplitude(&self) -> Complex64 {
        self.gain * self.inv_rho.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub y: Vec<Complex64>,
    pub sigma2: f64,
}

impl Snapshot {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.y.iter().map(|v| v.norm()).collect()
    }

    pub fn energy(&self) -> f64 {
        self.y.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Noiseless lens response to `paths`, including the common focusing phase.
pub fn lens_response(cfg: &ArrayConfig, paths: &[PathSpec]) -> Result<Vec<Complex64>> {
    if cfg.kind != ArrayKind::Lens {
        return Err(Error::Config("lens synthesis requested for a ULA"));
    }
    let phase = Complex64::from_polar(1.0, -cfg.focus_phase());
    let mut y = alloc::vec![Complex64::new(0.0, 0.0); cfg.n];
    for path in paths {
        let amp = path.amplitude() * phase;
        let a = lens_amplitude(cfg, path.theta);
        for (yn, an) in y.iter_mut().zip(a.values.iter()) {
            *yn += amp * *an;
        }
    }
    Ok(y)
}

/// Lens snapshot: superposed focused paths plus circular Gaussian noise of
/// per-element variance `sigma2`.
pub fn synthesize<R: Rng + ?Sized>(
    cfg: &ArrayConfig,
    paths: &[PathSpec],
    sigma2: f64,
    rng: &mut R,
) -> Result<Snapshot> {
    check_inputs(paths, sigma2)?;
    let mut y = lens_response(cfg, paths)?;
    add_noise(&mut y, sigma2, rng);
    Ok(Snapshot { y, sigma2 })
}

/// ULA snapshot with unit-modulus steering scaled by `|h| sqrt(1/rho)`.
pub fn synthesize_ula<R: Rng + ?Sized>(
    cfg: &ArrayConfig,
    paths: &[PathSpec],
    sigma2: f64,
    rng: &mut R,
) -> Result<Snapshot> {
    check_inputs(paths, sigma2)?;
    let mut y = alloc::vec![Complex64::new(0.0, 0.0); cfg.n];
    for path in paths {
        let a = ula_steering(cfg, path.theta)?;
        let amp = path.amplitude();
        for (yn, an) in y.iter_mut().zip(a.iter()) {
            *yn += amp * *an;
        }
    }
    add_noise(&mut y, sigma2, rng);
    Ok(Snapshot { y, sigma2 })
}

fn check_inputs(paths: &[PathSpec], sigma2: f64) -> Result<()> {
    if !(sigma2 >= 0.0) {
        return Err(Error::Domain("noise variance must be non-negative"));
    }
    if paths.is_empty() && sigma2 == 0.0 {
        return Err(Error::Domain("snapshot needs at least one path or positive noise"));
    }
    if paths.iter().any(|p| !p.theta.is_finite() || p.theta.sin().abs() > 1.0) {
        return Err(Error::Domain("path angle must be finite"));
    }
    Ok(())
}

fn add_noise<R: Rng + ?Sized>(y: &mut [Complex64], sigma2: f64, rng: &mut R) {
    if sigma2 == 0.0 {
        return;
    }
    let s = (sigma2 / 2.0).sqrt();
    for v in y.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *v += Complex64::new(s * re, s * im);
    }
}

/// Draws `h ~ CN(0, 1)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

/// Unit-modulus gain with a uniform random phase.
pub fn random_phase<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * core::f64::consts::PI)
}

/// Noise variance for a unit-power signal at `snr_db`.
pub fn snr_to_sigma2(snr_db: f64) -> f64 {
    db_to_linear(-snr_db)
}

/// Noise variance such that a link with linear power `reference_power`
/// sees `snr_db`.
pub fn scene_sigma2(snr_db: f64, reference_power: f64) -> f64 {
    reference_power * snr_to_sigma2(snr_db)
}
