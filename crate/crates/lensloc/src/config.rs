//! TOML configuration: `[array]`, `[scenario]`, `[experiment]`, `[solver]`.
//!
//! Every key has a default. When a file is supplied, `array.N`, `array.L`
//! and `array.f` must be present in it.

use std::path::Path;

use lensloc_core::crlb::Variant;
use lensloc_core::estimators::SicUpdate;
use lensloc_core::localization::{GaugeMode, SolverOptions};
use lensloc_core::metrics::SeparationDomain;
use lensloc_core::scenario::IntersectionSpec;
use lensloc_core::ArrayConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("missing required config key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("unknown experiment id `{0}`")]
    UnknownExperiment(String),
}

impl ConfigError {
    pub fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid { key: key.to_string(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FimVariant {
    #[default]
    PaperExact,
    Textbook,
}

impl From<FimVariant> for Variant {
    fn from(v: FimVariant) -> Self {
        match v {
            FimVariant::PaperExact => Variant::PaperExact,
            FimVariant::Textbook => Variant::Textbook,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Gauge {
    #[default]
    Anchored,
    SimilarityAligned,
}

impl From<Gauge> for GaugeMode {
    fn from(g: Gauge) -> Self {
        match g {
            Gauge::Anchored => GaugeMode::Anchored,
            Gauge::SimilarityAligned => GaugeMode::SimilarityAligned,
        }
    }
}

/// How the noise level is tied to the configured SNR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SnrMode {
    /// Path loss and Rayleigh fading; the strongest link in the scene sees
    /// the configured SNR.
    Scene,
    /// Every link has unit power and sees the configured SNR.
    #[default]
    PerLink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SicMode {
    #[default]
    Projection,
    Elementwise,
}

impl From<SicMode> for SicUpdate {
    fn from(m: SicMode) -> Self {
        match m {
            SicMode::Projection => SicUpdate::Projection,
            SicMode::Elementwise => SicUpdate::Elementwise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SepDomain {
    #[default]
    Wrapped,
    PerArray,
}

impl From<SepDomain> for SeparationDomain {
    fn from(d: SepDomain) -> Self {
        match d {
            SepDomain::Wrapped => SeparationDomain::Wrapped,
            SepDomain::PerArray => SeparationDomain::PerArray,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArraySettings {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub aperture: f64,
    #[serde(rename = "f")]
    pub focal_length: f64,
    /// Array distance behind the lens; defaults to `f`.
    pub x: Option<f64>,
    pub ula_spacing: f64,
    pub carrier_ghz: f64,
}

impl Default for ArraySettings {
    fn default() -> Self {
        Self { n: 31, aperture: 15.0, focal_length: 7.5, x: None, ula_spacing: 0.5, carrier_ghz: 28.0 }
    }
}

impl ArraySettings {
    pub fn wavelength(&self) -> f64 {
        lensloc_core::array_model::SPEED_OF_LIGHT / (self.carrier_ghz * 1e9)
    }

    pub fn lens(&self) -> Result<ArrayConfig, ConfigError> {
        self.validate()?;
        let mut cfg = ArrayConfig::lens(self.n, self.aperture, self.focal_length)
            .map_err(|e| ConfigError::invalid("array", e.to_string()))?;
        if let Some(x) = self.x {
            cfg = cfg.with_array_distance(x).map_err(|e| ConfigError::invalid("array.x", e.to_string()))?;
        }
        Ok(cfg.with_wavelength(self.wavelength()))
    }

    pub fn ula(&self) -> Result<ArrayConfig, ConfigError> {
        let cfg = ArrayConfig::ula(self.n, self.ula_spacing)
            .map_err(|e| ConfigError::invalid("array.ula_spacing", e.to_string()))?;
        Ok(cfg.with_wavelength(self.wavelength()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 3 || self.n % 2 == 0 {
            return Err(ConfigError::invalid("array.N", format!("N must be odd and >= 3, got {}", self.n)));
        }
        if !(self.aperture > 0.0) {
            return Err(ConfigError::invalid("array.L", format!("L must be positive, got {}", self.aperture)));
        }
        if !(self.focal_length >= self.aperture / 2.0) {
            return Err(ConfigError::invalid(
                "array.f",
                format!("focal length must satisfy f >= L/2, got f = {} with L = {}", self.focal_length, self.aperture),
            ));
        }
        if !(self.carrier_ghz > 0.0) {
            return Err(ConfigError::invalid("array.carrier_ghz", "carrier must be positive"));
        }
        let half = (self.n / 2) as f64;
        let x = self.x.unwrap_or(self.focal_length);
        if half * self.focal_length / self.aperture > x * (1.0 + 1e-12) {
            return Err(ConfigError::invalid(
                "array.N",
                format!("outer elements fall beyond 90 degrees (N = {}, L = {}, f = {}, x = {})", self.n, self.aperture, self.focal_length, x),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSettings {
    pub roads: usize,
    pub lanes_per_direction: usize,
    pub lane_width: f64,
    pub road_length: f64,
    pub comm_radius: f64,
    pub density: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub attenuation_db_per_km: f64,
}

impl Default for ScenarioSettings {
    fn default() -> Self {
        let s = IntersectionSpec::default();
        Self {
            roads: s.roads,
            lanes_per_direction: s.lanes_per_direction,
            lane_width: s.lane_width,
            road_length: s.road_length,
            comm_radius: s.comm_radius,
            density: 10.0,
            vehicle_length: s.vehicle_length,
            vehicle_width: s.vehicle_width,
            attenuation_db_per_km: 0.0,
        }
    }
}

impl ScenarioSettings {
    pub fn spec(&self) -> IntersectionSpec {
        IntersectionSpec {
            roads: self.roads,
            lanes_per_direction: self.lanes_per_direction,
            lane_width: self.lane_width,
            road_length: self.road_length,
            comm_radius: self.comm_radius,
            vehicle_length: self.vehicle_length,
            vehicle_width: self.vehicle_width,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.spec().validate().map_err(|e| ConfigError::invalid("scenario", e.to_string()))?;
        if !(self.density > 0.0) {
            return Err(ConfigError::invalid("scenario.density", "density must be positive"));
        }
        if !(self.attenuation_db_per_km >= 0.0) {
            return Err(ConfigError::invalid("scenario.attenuation_db_per_km", "attenuation must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSettings {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub multistart: usize,
    pub damping_init: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            max_iterations: o.max_iterations,
            gradient_tolerance: o.gradient_tolerance,
            multistart: o.multistart_count,
            damping_init: o.damping_init,
        }
    }
}

impl SolverSettings {
    pub fn options(&self, gauge: Gauge) -> SolverOptions {
        SolverOptions {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            multistart_count: self.multistart,
            damping_init: self.damping_init,
            gauge: gauge.into(),
            ..SolverOptions::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.options(Gauge::Anchored).validate().map_err(|e| ConfigError::invalid("solver", e.to_string()))
    }
}

/// `[experiment]` keys. Sweep lists left unset fall back to the preset of
/// the experiment being run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSettings {
    pub seed: u64,
    pub trials: Option<usize>,
    pub snr_db: Option<Vec<f64>>,
    pub antennas: Option<Vec<usize>>,
    pub densities: Option<Vec<f64>>,
    pub vehicles: Option<usize>,
    pub targets: Option<Vec<usize>>,
    pub views_deg: Option<Vec<f64>>,
    pub apertures: Option<Vec<f64>>,
    pub focal_ratios: Option<Vec<f64>>,
    pub fim_variant: FimVariant,
    pub gauge: Gauge,
    pub snr_mode: SnrMode,
    pub sic_update: SicMode,
    pub separation_domain: SepDomain,
    pub separation_threshold_scale: f64,
    pub theta_max_deg: f64,
    pub low_power_threshold_db: Option<f64>,
}

pub const DEFAULT_SEED: u64 = 20_240_528;

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            trials: None,
            snr_db: None,
            antennas: None,
            densities: None,
            vehicles: None,
            targets: None,
            views_deg: None,
            apertures: None,
            focal_ratios: None,
            fim_variant: FimVariant::PaperExact,
            gauge: Gauge::Anchored,
            snr_mode: SnrMode::PerLink,
            sic_update: SicMode::Projection,
            separation_domain: SepDomain::Wrapped,
            separation_threshold_scale: 1.0,
            theta_max_deg: 60.0,
            low_power_threshold_db: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Config {
    pub array: ArraySettings,
    pub scenario: ScenarioSettings,
    pub experiment: ExperimentSettings,
    pub solver: SolverSettings,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    array: Option<RawArray>,
    scenario: Option<RawScenario>,
    experiment: Option<RawExperiment>,
    solver: Option<RawSolver>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawArray {
    #[serde(rename = "N")]
    n: Option<usize>,
    #[serde(rename = "L")]
    aperture: Option<f64>,
    f: Option<f64>,
    x: Option<f64>,
    ula_spacing: Option<f64>,
    carrier_ghz: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    roads: Option<usize>,
    lanes_per_direction: Option<usize>,
    lane_width: Option<f64>,
    road_length: Option<f64>,
    comm_radius: Option<f64>,
    density: Option<f64>,
    vehicle_length: Option<f64>,
    vehicle_width: Option<f64>,
    attenuation_db_per_km: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    seed: Option<u64>,
    trials: Option<usize>,
    snr_db: Option<Vec<f64>>,
    antennas: Option<Vec<usize>>,
    densities: Option<Vec<f64>>,
    vehicles: Option<usize>,
    targets: Option<Vec<usize>>,
    views_deg: Option<Vec<f64>>,
    apertures: Option<Vec<f64>>,
    focal_ratios: Option<Vec<f64>>,
    fim_variant: Option<FimVariant>,
    gauge: Option<Gauge>,
    snr_mode: Option<SnrMode>,
    sic_update: Option<SicMode>,
    separation_domain: Option<SepDomain>,
    separation_threshold_scale: Option<f64>,
    theta_max_deg: Option<f64>,
    low_power_threshold_db: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    max_iterations: Option<usize>,
    gradient_tolerance: Option<f64>,
    multistart: Option<usize>,
    damping_init: Option<f64>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        let d = Config::default();

        let a = raw.array.unwrap_or_default();
        let array = ArraySettings {
            n: a.n.ok_or(ConfigError::MissingKey("array.N"))?,
            aperture: a.aperture.ok_or(ConfigError::MissingKey("array.L"))?,
            focal_length: a.f.ok_or(ConfigError::MissingKey("array.f"))?,
            x: a.x,
            ula_spacing: a.ula_spacing.unwrap_or(d.array.ula_spacing),
            carrier_ghz: a.carrier_ghz.unwrap_or(d.array.carrier_ghz),
        };

        let s = raw.scenario.unwrap_or_default();
        let ds = d.scenario;
        let scenario = ScenarioSettings {
            roads: s.roads.unwrap_or(ds.roads),
            lanes_per_direction: s.lanes_per_direction.unwrap_or(ds.lanes_per_direction),
            lane_width: s.lane_width.unwrap_or(ds.lane_width),
            road_length: s.road_length.unwrap_or(ds.road_length),
            comm_radius: s.comm_radius.unwrap_or(ds.comm_radius),
            density: s.density.unwrap_or(ds.density),
            vehicle_length: s.vehicle_length.unwrap_or(ds.vehicle_length),
            vehicle_width: s.vehicle_width.unwrap_or(ds.vehicle_width),
            attenuation_db_per_km: s.attenuation_db_per_km.unwrap_or(ds.attenuation_db_per_km),
        };

        let e = raw.experiment.unwrap_or_default();
        let de = d.experiment;
        let experiment = ExperimentSettings {
            seed: e.seed.unwrap_or(de.seed),
            trials: e.trials,
            snr_db: e.snr_db,
            antennas: e.antennas,
            densities: e.densities,
            vehicles: e.vehicles,
            targets: e.targets,
            views_deg: e.views_deg,
            apertures: e.apertures,
            focal_ratios: e.focal_ratios,
            fim_variant: e.fim_variant.unwrap_or(de.fim_variant),
            gauge: e.gauge.unwrap_or(de.gauge),
            snr_mode: e.snr_mode.unwrap_or(de.snr_mode),
            sic_update: e.sic_update.unwrap_or(de.sic_update),
            separation_domain: e.separation_domain.unwrap_or(de.separation_domain),
            separation_threshold_scale: e.separation_threshold_scale.unwrap_or(de.separation_threshold_scale),
            theta_max_deg: e.theta_max_deg.unwrap_or(de.theta_max_deg),
            low_power_threshold_db: e.low_power_threshold_db,
        };

        let v = raw.solver.unwrap_or_default();
        let dv = d.solver;
        let solver = SolverSettings {
            max_iterations: v.max_iterations.unwrap_or(dv.max_iterations),
            gradient_tolerance: v.gradient_tolerance.unwrap_or(dv.gradient_tolerance),
            multistart: v.multistart.unwrap_or(dv.multistart),
            damping_init: v.damping_init.unwrap_or(dv.damping_init),
        };

        let cfg = Config { array, scenario, experiment, solver };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.array.validate()?;
        self.scenario.validate()?;
        self.solver.validate()?;
        let e = &self.experiment;
        if e.trials == Some(0) {
            return Err(ConfigError::invalid("experiment.trials", "trial count must be at least 1"));
        }
        check_nonempty("experiment.snr_db", &e.snr_db)?;
        check_nonempty("experiment.antennas", &e.antennas)?;
        check_nonempty("experiment.densities", &e.densities)?;
        check_nonempty("experiment.targets", &e.targets)?;
        check_nonempty("experiment.views_deg", &e.views_deg)?;
        check_nonempty("experiment.apertures", &e.apertures)?;
        check_nonempty("experiment.focal_ratios", &e.focal_ratios)?;
        if let Some(a) = &e.antennas {
            if a.iter().any(|&n| n < 3 || n % 2 == 0) {
                return Err(ConfigError::invalid("experiment.antennas", "antenna counts must be odd and >= 3"));
            }
        }
        if let Some(d) = &e.densities {
            if d.iter().any(|&x| !(x > 0.0)) {
                return Err(ConfigError::invalid("experiment.densities", "densities must be positive"));
            }
        }
        if let Some(t) = &e.targets {
            if t.contains(&0) {
                return Err(ConfigError::invalid("experiment.targets", "targets per subchannel must be >= 1"));
            }
        }
        if let Some(v) = &e.views_deg {
            if v.iter().any(|&x| !(x > 0.0 && x <= 90.0)) {
                return Err(ConfigError::invalid("experiment.views_deg", "view half-angles must lie in (0, 90] degrees"));
            }
        }
        if let Some(r) = &e.focal_ratios {
            if r.iter().any(|&x| !(x >= 0.5)) {
                return Err(ConfigError::invalid("experiment.focal_ratios", "focal length must satisfy f >= L/2"));
            }
        }
        if e.vehicles.is_some_and(|v| v < 3) {
            return Err(ConfigError::invalid("experiment.vehicles", "at least 3 vehicles are needed"));
        }
        if !(e.separation_threshold_scale > 0.0) {
            return Err(ConfigError::invalid("experiment.separation_threshold_scale", "must be positive"));
        }
        if !(e.theta_max_deg > 0.0 && e.theta_max_deg < 90.0) {
            return Err(ConfigError::invalid("experiment.theta_max_deg", "must lie in (0, 90) degrees"));
        }
        Ok(())
    }
}

fn check_nonempty<T>(key: &str, list: &Option<Vec<T>>) -> Result<(), ConfigError> {
    match list {
        Some(v) if v.is_empty() => Err(ConfigError::invalid(key, "list must not be empty")),
        _ => Ok(()),
    }
}
