//! Lens-MIMO and ULA front-end geometry.
//!
//! All lengths (aperture, focal length, array distance, ULA spacing) are in
//! wavelength units. The carrier wavelength in meters is carried along for
//! the path-loss model only.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math::{sinc, sinc_deriv};

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Wavelength at the 28 GHz carrier, meters.
pub const WAVELENGTH_28GHZ: f64 = SPEED_OF_LIGHT / 28.0e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayKind {
    Lens,
    Ula,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConfig {
    pub kind: ArrayKind,
    /// Antenna count, odd.
    pub n: usize,
    /// Lens aperture.
    pub aperture: f64,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// Focal length.
    pub focal_length: f64,
    /// Distance from the rear of the lens to the antenna arc.
    pub array_distance: f64,
    /// ULA element spacing.
    pub ula_spacing: f64,
    /// Angular field limit of one array face, radians.
    pub view_half_angle: f64,
}

impl ArrayConfig {
    /// Lens array with the array placed at the focal arc (`x = f`).
    pub fn lens(n: usize, aperture: f64, focal_length: f64) -> Result<Self> {
        let cfg = Self {
            kind: ArrayKind::Lens,
            n,
            aperture,
            wavelength: WAVELENGTH_28GHZ,
            focal_length,
            array_distance: focal_length,
            ula_spacing: 0.5,
            view_half_angle: FRAC_PI_2,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Lens array sized so that `N = 2L + 1`, with the critical angles
    /// spanning the full half-plane.
    pub fn critical_lens(n: usize, focal_length: f64) -> Result<Self> {
        if n < 3 || n % 2 == 0 {
            return Err(Error::Config("antenna count must be odd and at least 3"));
        }
        Self::lens(n, ((n - 1) / 2) as f64, focal_length)
    }

    /// Critically sampled lens with the minimum focal length `f = L/2`.
    pub fn critical_lens_min_focal(n: usize) -> Result<Self> {
        if n < 3 || n % 2 == 0 {
            return Err(Error::Config("antenna count must be odd and at least 3"));
        }
        let aperture = ((n - 1) / 2) as f64;
        Self::lens(n, aperture, aperture / 2.0)
    }

    pub fn ula(n: usize, spacing: f64) -> Result<Self> {
        let cfg = Self {
            kind: ArrayKind::Ula,
            n,
            aperture: ((n.max(1) - 1) / 2) as f64,
            wavelength: WAVELENGTH_28GHZ,
            focal_length: 0.0,
            array_distance: 0.0,
            ula_spacing: spacing,
            view_half_angle: FRAC_PI_2,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_array_distance(mut self, x: f64) -> Result<Self> {
        self.array_distance = x;
        self.validate()?;
        Ok(self)
    }

    pub fn with_wavelength(mut self, wavelength: f64) -> Self {
        self.wavelength = wavelength;
        self
    }

    pub fn with_view_half_angle(mut self, half_angle: f64) -> Self {
        self.view_half_angle = half_angle.clamp(0.0, FRAC_PI_2);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 || self.n % 2 == 0 {
            return Err(Error::Config("antenna count must be odd and at least 3"));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::Config("wavelength must be positive"));
        }
        match self.kind {
            ArrayKind::Lens => {
                if !(self.aperture > 0.0) {
                    return Err(Error::Config("lens aperture must be positive"));
                }
                if self.focal_length < self.aperture / 2.0 {
                    return Err(Error::Config("focal length must satisfy f >= L/2"));
                }
                if !(self.array_distance > 0.0) {
                    return Err(Error::Config("array distance must be positive"));
                }
                let edge = self.half() as f64 * self.lens_spacing() / self.array_distance;
                if edge > 1.0 + 1e-12 {
                    return Err(Error::Config(
                        "outermost critical angle has |sin| > 1; too many antennas for the aperture",
                    ));
                }
            }
            ArrayKind::Ula => {
                if !(self.ula_spacing > 0.0) {
                    return Err(Error::Config("ULA spacing must be positive"));
                }
            }
        }
        Ok(())
    }

    /// `(N - 1) / 2`.
    pub fn half(&self) -> i64 {
        ((self.n - 1) / 2) as i64
    }

    /// Signed antenna indices `-(N-1)/2 ..= (N-1)/2`.
    pub fn indices(&self) -> impl Iterator<Item = i64> + Clone {
        let h = self.half();
        -h..=h
    }

    /// Storage position of a signed antenna index.
    pub fn slot(&self, index: i64) -> usize {
        (index + self.half()) as usize
    }

    /// Signed antenna index of a storage position.
    pub fn index_of(&self, slot: usize) -> i64 {
        slot as i64 - self.half()
    }

    /// Antenna spacing on the focal arc, `f / L`.
    pub fn lens_spacing(&self) -> f64 {
        self.focal_length / self.aperture
    }

    /// `sin` of the critical angle of antenna `index`.
    pub fn critical_sine(&self, index: i64) -> f64 {
        index as f64 * self.lens_spacing() / self.array_distance
    }

    /// Amplitude scale `L / sqrt(x)` of a focused path.
    pub fn focus_gain(&self) -> f64 {
        self.aperture / self.array_distance.sqrt()
    }

    /// AoA-independent phase `2 pi x`.
    pub fn focus_phase(&self) -> f64 {
        2.0 * PI * self.array_distance
    }
}

/// Real steering amplitudes of a lens array and their angle derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringAmplitude {
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

/// Critical angles of a lens array in ascending index order.
pub fn critical_angles(cfg: &ArrayConfig) -> Result<Vec<f64>> {
    if cfg.kind != ArrayKind::Lens {
        return Err(Error::Config("critical angles are defined for lens arrays only"));
    }
    cfg.indices()
        .map(|n| {
            let s = cfg.critical_sine(n);
            if s.abs() > 1.0 + 1e-12 {
                Err(Error::Domain("critical angle sine exceeds 1"))
            } else {
                Ok(s.clamp(-1.0, 1.0).asin())
            }
        })
        .collect()
}

/// Lens amplitudes `(L/sqrt x) sinc(L (sin th_n - sin th))` and their
/// derivatives with respect to `theta`. `theta` is clamped to `[-pi/2, pi/2]`.
pub fn lens_amplitude(cfg: &ArrayConfig, theta: f64) -> SteeringAmplitude {
    let theta = theta.clamp(-FRAC_PI_2, FRAC_PI_2);
    let (s, c) = theta.sin_cos();
    let gain = cfg.focus_gain();
    let l = cfg.aperture;
    let mut values = Vec::with_capacity(cfg.n);
    let mut derivs = Vec::with_capacity(cfg.n);
    for n in cfg.indices() {
        let u = l * (cfg.critical_sine(n) - s);
        values.push(gain * sinc(u));
        derivs.push(-gain * l * c * sinc_deriv(u));
    }
    SteeringAmplitude { values, derivs }
}

/// Unit-modulus ULA steering vector `exp(i 2 pi d n sin th)`.
pub fn ula_steering(cfg: &ArrayConfig, theta: f64) -> Result<Vec<Complex64>> {
    if cfg.kind != ArrayKind::Ula {
        return Err(Error::Config("ULA steering requested for a lens array"));
    }
    let s = theta.sin();
    Ok(cfg
        .indices()
        .map(|n| Complex64::from_polar(1.0, 2.0 * PI * cfg.ula_spacing * n as f64 * s))
        .collect())
}
