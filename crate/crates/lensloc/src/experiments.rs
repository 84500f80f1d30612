//! Seeded Monte Carlo sweeps, one per figure or table.
//!
//! Trial `t` of sweep point `p` draws from its own stream
//! `derive_seed(seed, p, t)`; results are collected in trial order and
//! reduced sequentially, so output does not depend on the thread count.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use lensloc_core::crlb::{self, Variant};
use lensloc_core::estimators::{self, Dictionary, SicUpdate};
use lensloc_core::localization::{Pose, SolverOptions};
use lensloc_core::math::wrap_angle;
use lensloc_core::metrics::{self, SeparationDomain};
use lensloc_core::scenario::{self, IntersectionSpec, Scenario};
use lensloc_core::signal::{self, PathSpec};
use lensloc_core::ArrayConfig;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    ArraySettings, Config, ConfigError, FimVariant, Gauge, ScenarioSettings, SepDomain, SicMode, SnrMode,
    SolverSettings,
};
use crate::sim::{self, AoaMethod, BoundKind, Channel, Estimator, LinkModel, PoseErrors, SceneSource, Solver, VarianceAt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Fig2,
    Fig3,
    Table1,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Fig10,
    Fig11,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 11] = [
        ExperimentId::Fig2,
        ExperimentId::Fig3,
        ExperimentId::Table1,
        ExperimentId::Fig4,
        ExperimentId::Fig5,
        ExperimentId::Fig6,
        ExperimentId::Fig7,
        ExperimentId::Fig8,
        ExperimentId::Fig9,
        ExperimentId::Fig10,
        ExperimentId::Fig11,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentId::Fig2 => "fig2",
            ExperimentId::Fig3 => "fig3",
            ExperimentId::Table1 => "table1",
            ExperimentId::Fig4 => "fig4",
            ExperimentId::Fig5 => "fig5",
            ExperimentId::Fig6 => "fig6",
            ExperimentId::Fig7 => "fig7",
            ExperimentId::Fig8 => "fig8",
            ExperimentId::Fig9 => "fig9",
            ExperimentId::Fig10 => "fig10",
            ExperimentId::Fig11 => "fig11",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.as_str() == key)
            .ok_or_else(|| ConfigError::UnknownExperiment(s.to_string()))
    }
}

fn snr_range() -> Vec<f64> {
    (0..=6).map(|i| 5.0 * i as f64).collect()
}

/// Fully resolved parameters of one sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub id: ExperimentId,
    pub array: ArraySettings,
    pub scenario: ScenarioSettings,
    pub solver: SolverSettings,
    pub snr_db: Vec<f64>,
    pub antennas: Vec<usize>,
    pub densities: Vec<f64>,
    pub vehicles: usize,
    pub targets: Vec<usize>,
    pub views_deg: Vec<f64>,
    pub apertures: Vec<f64>,
    pub focal_ratios: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub fim_variant: FimVariant,
    pub gauge: Gauge,
    pub snr_mode: SnrMode,
    pub sic_update: SicMode,
    pub separation_domain: SepDomain,
    pub separation_threshold_scale: f64,
    pub theta_max_deg: f64,
    pub low_power_threshold_db: Option<f64>,
}

impl ExperimentConfig {
    /// Preset for `id`, with every list or count set in `cfg` taking
    /// precedence.
    pub fn resolve(id: ExperimentId, cfg: &Config) -> Result<Self, ConfigError> {
        use ExperimentId::*;
        let e = &cfg.experiment;
        let n = cfg.array.n;
        let (snr, antennas, densities, vehicles, targets, views, trials): (Vec<f64>, Vec<usize>, Vec<f64>, usize, Vec<usize>, Vec<f64>, usize) =
            match id {
                Fig2 => (vec![5.0], vec![n], vec![cfg.scenario.density], 4, vec![1], vec![90.0], 1),
                Fig3 => (snr_range(), vec![n], vec![cfg.scenario.density], 4, vec![1, 2], vec![90.0], 2000),
                Table1 => (vec![10.0], vec![15, 31, 61], vec![10.0, 20.0, 40.0], 4, vec![1], vec![90.0], 10_000),
                Fig4 => (vec![5.0], vec![61], vec![cfg.scenario.density], 4, vec![1], vec![90.0], 1),
                Fig5 => (snr_range(), vec![121], vec![cfg.scenario.density], 4, vec![1], vec![90.0], 50),
                Fig6 => (snr_range(), vec![121], vec![cfg.scenario.density], 4, vec![1], vec![90.0], 200),
                Fig7 => (vec![10.0], vec![13, 21, 31, 41, 51, 61], vec![cfg.scenario.density], 4, vec![1], vec![90.0], 200),
                Fig8 => (vec![10.0], vec![31], vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0], 4, vec![1], vec![90.0], 200),
                Fig9 => (vec![10.0], vec![31, 61, 91, 121, 161], vec![cfg.scenario.density], 8, vec![1, 2, 4], vec![90.0], 100),
                Fig10 => (snr_range(), vec![121, 161], vec![10.0, 20.0], 4, vec![1, 2, 4], vec![90.0], 100),
                Fig11 => (snr_range(), vec![31, 61], vec![cfg.scenario.density], 8, vec![2], vec![10.0, 20.0, 30.0], 100),
            };
        let out = ExperimentConfig {
            id,
            array: cfg.array.clone(),
            scenario: cfg.scenario.clone(),
            solver: cfg.solver.clone(),
            snr_db: e.snr_db.clone().unwrap_or(snr),
            antennas: e.antennas.clone().unwrap_or(antennas),
            densities: e.densities.clone().unwrap_or(densities),
            vehicles: e.vehicles.unwrap_or(vehicles),
            targets: e.targets.clone().unwrap_or(targets),
            views_deg: e.views_deg.clone().unwrap_or(views),
            apertures: e.apertures.clone().unwrap_or_else(|| vec![10.0, 20.0]),
            focal_ratios: e.focal_ratios.clone().unwrap_or_else(|| {
                vec![0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0]
            }),
            trials: e.trials.unwrap_or(trials),
            seed: e.seed,
            fim_variant: e.fim_variant,
            gauge: e.gauge,
            snr_mode: e.snr_mode,
            sic_update: e.sic_update,
            separation_domain: e.separation_domain,
            separation_threshold_scale: e.separation_threshold_scale,
            theta_max_deg: e.theta_max_deg,
            low_power_threshold_db: e.low_power_threshold_db,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(ConfigError::invalid("experiment.trials", "trial count must be at least 1"));
        }
        for (key, empty) in [
            ("experiment.snr_db", self.snr_db.is_empty()),
            ("experiment.antennas", self.antennas.is_empty()),
            ("experiment.densities", self.densities.is_empty()),
            ("experiment.targets", self.targets.is_empty()),
            ("experiment.views_deg", self.views_deg.is_empty()),
            ("experiment.apertures", self.apertures.is_empty()),
            ("experiment.focal_ratios", self.focal_ratios.is_empty()),
        ] {
            if empty {
                return Err(ConfigError::invalid(key, "list must not be empty"));
            }
        }
        for &n in &self.antennas {
            self.lens_for(n)?;
        }
        Ok(())
    }

    /// Lens with `n` elements: the configured array when `n` matches it,
    /// otherwise the critical lens at the minimum focal length.
    pub fn lens_for(&self, n: usize) -> Result<ArrayConfig, ConfigError> {
        if n == self.array.n {
            return self.array.lens();
        }
        ArrayConfig::critical_lens_min_focal(n)
            .map(|c| c.with_wavelength(self.array.wavelength()))
            .map_err(|e| ConfigError::invalid("experiment.antennas", e.to_string()))
    }

    pub fn ula_for(&self, n: usize) -> Result<ArrayConfig, ConfigError> {
        ArrayConfig::ula(n, self.array.ula_spacing)
            .map(|c| c.with_wavelength(self.array.wavelength()))
            .map_err(|e| ConfigError::invalid("array.ula_spacing", e.to_string()))
    }

    pub fn spec(&self) -> IntersectionSpec {
        self.scenario.spec()
    }

    pub fn variant(&self) -> Variant {
        self.fim_variant.into()
    }

    pub fn solver_options(&self) -> SolverOptions {
        self.solver.options(self.gauge)
    }

    pub fn link_model(&self, snr_db: f64, view_half_angle: f64) -> LinkModel {
        LinkModel {
            snr_db,
            mode: self.snr_mode,
            wavelength: self.array.wavelength(),
            attenuation_db_per_km: self.scenario.attenuation_db_per_km,
            view_half_angle,
            low_power_threshold_db: self.low_power_threshold_db,
        }
    }

    fn theta_max(&self) -> f64 {
        self.theta_max_deg.to_radians()
    }
}

/// Running mean and standard error of the finite samples pushed.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stat {
    pub count: usize,
    sum: f64,
    sumsq: f64,
}

impl Stat {
    pub fn push(&mut self, x: f64) {
        if x.is_finite() {
            self.count += 1;
            self.sum += x;
            self.sumsq += x * x;
        }
    }

    pub fn from_iter<I: IntoIterator<Item = f64>>(it: I) -> Self {
        let mut s = Stat::default();
        for x in it {
            s.push(x);
        }
        s
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        let n = self.count as f64;
        let var = ((self.sumsq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub coords: Vec<String>,
    pub metric: String,
    pub value: f64,
    pub trials: usize,
    /// `None` for quantities computed without sampling.
    pub std_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable {
    pub experiment: String,
    pub coord_names: Vec<String>,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(experiment: &str, coord_names: &[&str]) -> Self {
        Self {
            experiment: experiment.to_string(),
            coord_names: coord_names.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_stat(&mut self, coords: &[String], metric: &str, stat: &Stat) {
        self.rows.push(ResultRow {
            coords: coords.to_vec(),
            metric: metric.to_string(),
            value: stat.mean(),
            trials: stat.count,
            std_err: Some(stat.std_err()),
        });
    }

    pub fn push_value(&mut self, coords: &[String], metric: &str, value: f64, trials: usize, std_err: Option<f64>) {
        self.rows.push(ResultRow { coords: coords.to_vec(), metric: metric.to_string(), value, trials, std_err });
    }

    /// First row whose coordinates and metric match; `"*"` matches any
    /// coordinate.
    pub fn find(&self, coords: &[&str], metric: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| {
            r.metric == metric && r.coords.len() == coords.len() && r.coords.iter().zip(coords).all(|(a, b)| *b == "*" || a == b)
        })
    }
}

/// Formats a coordinate value.
pub fn fmt_num(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{experiment}: {source}")]
    Runtime {
        experiment: String,
        partial: Box<ResultTable>,
        source: lensloc_core::Error,
    },
    #[error("cannot build thread pool: {0}")]
    Pool(String),
}

fn runtime(table: ResultTable, source: lensloc_core::Error) -> SweepError {
    SweepError::Runtime { experiment: table.experiment.clone(), partial: Box::new(table), source }
}

/// Runs `trials` independent trials of `f` on the current rayon pool and
/// returns their outputs in trial order.
pub fn run_trials<T, F>(seed: u64, point: u64, trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync + Send,
{
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = sim::trial_rng(seed, point, t);
            f(&mut rng)
        })
        .collect()
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, SweepError> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| SweepError::Pool(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<ResultTable, SweepError> {
    match cfg.id {
        ExperimentId::Fig2 => focal_sweep(cfg),
        ExperimentId::Fig3 => aoa_variance_sweep(cfg),
        ExperimentId::Table1 => separation_sweep(cfg),
        ExperimentId::Fig4 => landscape(cfg),
        ExperimentId::Fig5 => estimator_comparison(cfg),
        ExperimentId::Fig6 | ExperimentId::Fig7 | ExperimentId::Fig8 => bound_comparison(cfg),
        ExperimentId::Fig9 => multi_target_sweep(cfg),
        ExperimentId::Fig10 => outage_sweep(cfg),
        ExperimentId::Fig11 => view_sweep(cfg),
    }
}

pub fn run_sweep_with(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ResultTable, SweepError> {
    with_threads(threads, || run_sweep(cfg))?
}

/// Midpoints of `count` equal cells covering `(-max, max)`.
pub fn theta_grid(max: f64, count: usize) -> Vec<f64> {
    let step = 2.0 * max / count as f64;
    (0..count).map(|i| -max + (i as f64 + 0.5) * step).collect()
}

/// Averages of the lens CRLB, its bracket and the ULA CRLB over `thetas`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundAverages {
    pub lens: f64,
    pub lower: f64,
    pub upper: f64,
    pub ula: f64,
}

pub fn bound_averages(lens: &ArrayConfig, ula: &ArrayConfig, sigma2: f64, thetas: &[f64], variant: Variant) -> lensloc_core::Result<BoundAverages> {
    let mut acc = BoundAverages { lens: 0.0, lower: 0.0, upper: 0.0, ula: 0.0 };
    for &t in thetas {
        acc.lens += crlb::crlb_lens(lens, t, sigma2)?;
        let (lo, hi) = crlb::lens_crlb_bounds(lens, t, sigma2)?;
        acc.lower += lo;
        acc.upper += hi;
        acc.ula += crlb::crlb_ula(ula, t, sigma2, variant)?;
    }
    let n = thetas.len() as f64;
    Ok(BoundAverages { lens: acc.lens / n, lower: acc.lower / n, upper: acc.upper / n, ula: acc.ula / n })
}

/// Number of angle cells averaged in the focal-length sweep.
pub const FOCAL_SWEEP_ANGLES: usize = 180;

fn focal_sweep(cfg: &ExperimentConfig) -> Result<ResultTable, SweepError> {
    let mut table = ResultTable::new("fig2", &["L", "f", "f_over_L", "N", "snr_db"]);
    let thetas = theta_grid(FRAC_PI_2, FOCAL_SWEEP_ANGLES);
    for &l in &cfg.apertures {
        let n = 2 * l.round() as usize + 1;
        for &r in &cfg.focal_ratios {
            let f = r * l;
            let lens = ArrayConfig::lens(n, l, f).map_err(|e| ConfigError::invalid("experiment.apertures", e.to_string()))?;
            let ula = cfg.ula_for(n)?;
            for &snr in &cfg.snr_db {
                let s2 = signal::snr_to_sigma2(snr);
                let avg = match bound_averages(&lens, &ula, s2, &thetas, cfg.variant()) {
                    Ok(a) => a,
                    Err(e) => return Err(runtime(table, e)),
                };
                let c = vec![fmt_num(l), fmt_num(f), fmt_num(r), n.to_string(), fmt_num(snr)];
                for (m, v) in [("crlb_lens", avg.lens), ("crlb_lens_lower", avg.lower), ("crlb_lens_upper", avg.upper), ("crlb_ula", avg.ula)] {
                    table.push_value(&c, m, v, thetas.len(), None);
                }
            }
        }
    }
    Ok(table)
}

/// Squared errors of a single-target trial with bounds at the drawn angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleTargetTrial {
    pub theta: f64,
    pub sq_ms: f64,
    pub sq_r2sa: f64,
    pub crlb_lens: f64,
    pub lower: f64,
    pub upper: f64,
    pub crlb_ula: f64,
}

pub fn single_target_trial<R: Rng + ?Sized>(
    lens: &ArrayConfig,
    ula: &ArrayConfig,
    sigma2: f64,
    theta_max: f64,
    variant: Variant,
    rng: &mut R,
) -> lensloc_core::Result<SingleTargetTrial> {
    let theta = rng.random_range(-theta_max..theta_max);
    let y = signal::synthesize(lens, &[PathSpec::new(theta, signal::random_phase(rng), 1.0)], sigma2, rng)?;
    let ms = estimators::ms(lens, &y)?.theta_hat;
    let r2 = estimators::r2sa(lens, &y)?.theta_hat;
    let (lower, upper) = crlb::lens_crlb_bounds(lens, theta, sigma2)?;
    Ok(SingleTargetTrial {
        theta,
        sq_ms: (ms - theta).powi(2),
        sq_r2sa: (r2 - theta).powi(2),
        crlb_lens: crlb::crlb_lens(lens, theta, sigma2)?,
        lower,
        upper,
        crlb_ula: crlb::crlb_ula(ula, theta, sigma2, variant)?,
    })
}

/// Mean per-target squared errors of SIC and of the no-SIC baseline on a
/// two-path snapshot. `separated` selects `|dtheta| > 1/N`, otherwise
/// `|dtheta| <= 1/N`.
pub fn pair_trial<R: Rng + ?Sized>(
    lens: &ArrayConfig,
    sigma2: f64,
    theta_max: f64,
    separated: bool,
    update: SicUpdate,
    rng: &mut R,
) -> lensloc_core::Result<(f64, f64)> {
    let res = 1.0 / lens.n as f64;
    let (a, b) = loop {
        let a = rng.random_range(-theta_max..theta_max);
        let b = if separated {
            rng.random_range(-theta_max..theta_max)
        } else {
            a + rng.random_range(-res..res)
        };
        let d = (a - b).abs();
        if b.abs() < theta_max && ((separated && d > res) || (!separated && d <= res)) {
            break (a, b);
        }
    };
    let paths = [
        PathSpec::new(a, signal::random_phase(rng), 1.0),
        PathSpec::new(b, signal::random_phase(rng), 1.0),
    ];
    let y = signal::synthesize(lens, &paths, sigma2, rng)?;
    let score = |hats: Vec<f64>| -> f64 {
        sim::associate(&[a, b], &hats)
            .into_iter()
            .zip([a, b])
            .map(|(h, t)| h.map_or(PI * PI, |h| (h - t).powi(2)))
            .sum::<f64>()
            / 2.0
    };
    let sic = estimators::sic_multi(lens, &y, 2, update)?.into_iter().map(|e| e.theta_hat).collect();
    let plain = estimators::multi_no_sic(lens, &y, 2)?.into_iter().map(|e| e.theta_hat).collect();
    Ok((score(sic), score(plain)))
}

fn aoa_variance_sweep(cfg: &ExperimentConfig) -> Result<ResultTable, SweepError> {
    let mut table = ResultTable::new("fig3", &["panel", "N", "snr_db"]);
    let tmax = cfg.theta_max();
    let update: SicUpdate = cfg.sic_update.into();
    let mut point = 0u64;
    for &n in &cfg.antennas {
        let lens = cfg.lens_for(n)?;
        let ula = cfg.ula_for(n)?;
        for &snr in &cfg.snr_db {
            let s2 = signal::snr_to_sigma2(snr);
            let single = run_trials(cfg.seed, point, cfg.trials, |rng| single_target_trial(&lens, &ula, s2, tmax, cfg.variant(), rng));
            let single: Vec<SingleTargetTrial> = match single.into_iter().collect() {
                Ok(v) => v,
                Err(e) => return Err(runtime(table, e)),
            };
            let c = vec!["a".to_string(), n.to_string(), fmt_num(snr)];
            for (m, f) in [
                ("mse_ms", (|t: &SingleTargetTrial| t.sq_ms) as fn(&SingleTargetTrial) -> f64),
                ("mse_r2sa", |t| t.sq_r2sa),
                ("crlb_lens", |t| t.crlb_lens),
                ("crlb_lens_lower", |t| t.lower),
                ("crlb_lens_upper", |t| t.upper),
                ("crlb_ula", |t| t.crlb_ula),
            ] {
                table.push_stat(&c, m, &Stat::from_iter(single.iter().map(f)));
            }
            point += 1;
            for (panel, separated) in [("b", true), ("c", false)] {
                let out = run_trials(cfg.seed, point, cfg.trials, |rng| pair_trial(&lens, s2, tmax, separated, update, rng));
                let out: Vec<(f64, f64)> = match out.into_iter().collect() {
                    Ok(v) => v,
                    Err(e) => return Err(runtime(table, e)),
                };
                let c = vec![panel.to_string(), n.to_string(), fmt_num(snr)];
                table.push_stat(&c, "mse_r2sa_sic", &Stat::from_iter(out.iter().map(|o| o.0)));
                table.push_stat(&c, "mse_r2sa_nosic", &Stat::from_iter(out.iter().map(|o| o.1)));
                point += 1;
            }
        }
    }
    Ok(table)
}

/// Pooled separation probability over drops with a ratio-estimator
/// standard error.
pub fn separation_probability(counts: &[(u64, u64)]) -> (f64, f64) {
    let sep: u64 = counts.iter().map(|c| c.0).sum();
    let tot: u64 = counts.iter().map(|c| c.1).sum();
    if tot == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = sep as f64 / tot as f64;
    let n = counts.len() as f64;
    let mean_tot = tot as f64 / n;
    let ss: f64 = counts.iter().map(|&(s, t)| (s as f64 - p * t as f64).powi(2)).sum();
    let se = if counts.len() > 1 { (ss / (n * (n - 1.0))).sqrt() / mean_tot } else { f64::NAN };
    (p, se)
}

fn separation_sweep(cfg: &ExperimentConfig) -> Result<ResultTable, SweepError> {
    let mut table = ResultTable::new("table1", &["density", "N"]);
    let spec = cfg.spec();
    let domain: SeparationDomain = cfg.separation_domain.into();
    for (di, &density) in cfg.densities.iter().enumerate() {
        // Drops are shared across antenna counts.
        let scenes = run_trials(cfg.seed, di as u64, cfg.trials, |rng| scenario::drop_vehicles(&spec, density, rng));
        let scenes: Vec<_> = match scenes.into_iter().collect() {
            Ok(v) => v,
            Err(e) => return Err(runtime(table, e)),
        };
        for &n in &cfg.antennas {
            let threshold = cfg.separation_threshold_scale / n as f64;
            let counts: Vec<(u64, u64)> = scenes.par_iter().map(|s| metrics::separation_counts(s, threshold, domain)).collect();
            let (p, se) = separation_probability(&counts);
            table.push_value(&[fmt_num(density), n.to_string()], "p_sep", p, counts.len(), Some(se));
        }
    }
    Ok(table)
}

/// Grid step of the sensing-equation landscape, meters.
const LANDSCAPE_STEP: f64 = 1.0;
const LANDSCAPE_HALF_WIDTH: f64 = 40.0;
const LANDSCAPE_HEADINGS: usize = 360;

fn landscape(cfg: &ExperimentConfig) -> Result<ResultTable, SweepError> {
    let mut table = ResultTable::new("fig4", &["panel", "x", "y", "omega"]);
    let spec = cfg.spec();
    let n = cfg.antennas[0];
    let lens = cfg.lens_for(n)?;
    let mut rng = sim::trial_rng(cfg.seed, 0, 0);
    let result = (|| -> lensloc_core::Result<()> {
        let scene = sim::draw_scene(&spec, SceneSource::Fixed(cfg.vehicles), &mut rng)?;
        let channel = sim::draw_channel(&scene, &cfg.link_model(cfg.snr_db[0], FRAC_PI_2), &mut rng)?;
        let groups = sim::subchannels(&scene, &channel, 1);
        let est = Estimator { front: &lens, method: AoaMethod::R2sa, sic_update: cfg.sic_update.into(), dict: None };
        let hats = est.estimate(&channel, &groups, &mut rng)?;
        let meas = sim::measurement_set(scene.len(), &channel, &hats, &lens, VarianceAt::Estimate, None)?;
        let truth = sim::truth_poses(&scene);
        let k = 1.min(scene.len() - 1);
        let involved: Vec<_> = meas.entries.iter().filter(|m| m.rx == k || m.tx == k).copied().collect();
        let log_se = |poses: &[Pose]| -> f64 {
            involved
                .iter()
                .map(|m| {
                    let a = poses[m.rx];
                    let b = poses[m.tx];
                    let r = wrap_angle((b.y - a.y).atan2(b.x - a.x) - a.omega - m.theta);
                    (r * r).max(1e-300).ln()
                })
                .sum()
        };
        let c = truth[k];
        let steps = (2.0 * LANDSCAPE_HALF_WIDTH / LANDSCAPE_STEP).round() as i64;
        for iy in 0..=steps {
            for ix in 0..=steps {
                let x = c.x - LANDSCAPE_HALF_WIDTH + ix as f64 * LANDSCAPE_STEP;
                let y = c.y - LANDSCAPE_HALF_WIDTH + iy as f64 * LANDSCAPE_STEP;
                let mut poses = truth.clone();
                poses[k] = Pose::new(x, y, c.omega);
                let coords = vec!["position".to_string(), fmt_num(x), fmt_num(y), fmt_num(c.omega)];
                table.push_value(&coords, "log_se", log_se(&poses), 1, None);
            }
        }
        let incoming: Vec<_> = meas.entries.iter().filter(|m| m.rx == k).copied().collect();
        for i in 0..LANDSCAPE_HEADINGS {
            let w = 2.0 * PI * i as f64 / LANDSCAPE_HEADINGS as f64;
            let mut poses = truth.clone();
            poses[k].omega = w;
            let se: f64 = incoming
                .iter()
                .map(|m| {
                    let a = poses[m.rx];
                    let b = poses[m.tx];
                    wrap_angle((b.y - a.y).atan2(b.x - a.x) - a.omega - m.theta).powi(2)
                })
                .sum();
            let coords = vec!["orientation".to_string(), fmt_num(c.x), fmt_num(c.y), fmt_num(w)];
            table.push_value(&coords, "se", se, 1, None);
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(table),
        Err(e) => Err(runtime(table, e)),
    }
}

/// One estimator configuration evaluated on every trial scene.
#[derive(Debug, Clone)]
pub struct Run {
    pub label: String,
    pub front: usize,
    pub method: AoaMethod,
    pub targets: usize,
    pub view_half_angle: f64,
}

/// One position bound evaluated on every trial scene.
#[derive(Debug, Clone)]
pub struct BoundRun {
    pub label: String,
    pub front: usize,
    pub kind: BoundKind,
}

pub struct Front {
    pub cfg: ArrayConfig,
    pub dict: Option<Dictionary>,
}

impl Front {
    pub fn new(cfg: ArrayConfig, with_dictionary: bool) -> lensloc_core::Result<Self> {
        let dict = if with_dictionary { Some(Dictionary::new(&cfg, sim::GRID_RESOLUTION_DEG)?) } else { None };
        Ok(Self { cfg, dict })
    }
}

/// Scene-level localization setup shared by the runs of a sweep point.
pub struct LocPoint {
    pub spec: IntersectionSpec,
    pub source: SceneSource,
    pub model: LinkModel,
    pub fronts: Vec<Front>,
    pub runs: Vec<Run>,
    pub bounds: Vec<BoundRun>,
    pub solver: Solver,
    pub options: SolverOptions,
    pub variant: Variant,
    pub sic_update: SicUpdate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocTrial {
    pub vehicles: usize,
    pub runs: Vec<Option<PoseErrors>>,
    pub bounds: Vec<Option<(f64, f64)>>,
}

fn restrict(channel: &Channel, view_half_angle: f64) -> Channel {
    Channel {
        links: channel.links.iter().copied().filter(|l| l.local.abs() <= view_half_angle + 1e-12).collect(),
        sigma2: channel.sigma2,
    }
}

impl LocPoint {
    pub fn trial<R: Rng + ?Sized>(&self, rng: &mut R) -> lensloc_core::Result<LocTrial> {
        let scene = sim::draw_scene(&self.spec, self.source, rng)?;
        let channel = sim::draw_channel(&scene, &self.model, rng)?;
        let mut runs = Vec::with_capacity(self.runs.len());
        for run in &self.runs {
            let front = &self.fronts[run.front];
            let ch = restrict(&channel, run.view_half_angle);
            let groups = sim::subchannels(&scene, &ch, run.targets);
            let est = Estimator { front: &front.cfg, method: run.method, sic_update: self.sic_update, dict: front.dict.as_ref() };
            let outcome = est.estimate(&ch, &groups, rng).and_then(|hats| {
                let meas = sim::measurement_set(scene.len(), &ch, &hats, &front.cfg, VarianceAt::for_method(run.method), self.model.low_power_threshold_db)?;
                sim::localize(&scene, &self.spec, &meas, self.solver, &self.options, rng)
            });
            runs.push(outcome.ok().map(|o| o.1));
        }
        let positions: Vec<_> = scene.vehicles.iter().map(|v| v.position).collect();
        let bounds = self
            .bounds
            .iter()
            .map(|b| {
                sim::bound_links(&channel, &self.fronts[b.front].cfg, b.kind, self.variant)
                    .and_then(|links| sim::per_vehicle_peb(&positions, &links, self.variant, self.options.anchor))
                    .ok()
            })
            .collect();
        Ok(LocTrial { vehicles: scene.len(), runs, bounds })
    }

    pub fn run(&self, seed: u64, point: u64, trials: usize) -> lensloc_core::Result<Vec<LocTrial>> {
        run_trials(seed, point, trials, |rng| self.trial(rng)).into_iter().collect()
    }

    /// Appends the per-run and per-bound metrics of `trials` under
    /// `coords` plus a trailing `method` coordinate.
    pub fn summarize(&self, trials: &[LocTrial], coords: &[String], table: &mut ResultTable) {
        let (gp, gw) = metrics::default_outage_thresholds();
        for (i, run) in self.runs.iter().enumerate() {
            let mut c = coords.to_vec();
            c.push(run.label.clone());
            let ok: Vec<&PoseErrors> = trials.iter().filter_map(|t| t.runs[i].as_ref()).collect();
            table.push_stat(&c, "rmse_p", &Stat::from_iter(ok.iter().map(|e| e.rmse_position())));
            table.push_stat(&c, "rmse_w", &Stat::from_iter(ok.iter().map(|e| e.rmse_orientation())));
            table.push_stat(
                &c,
                "rmse_l",
                &Stat::from_iter(ok.iter().map(|e| {
                    e.position.iter().zip(&e.orientation).map(|(p, w)| (p * p + w * w).sqrt()).sum::<f64>() / e.position.len() as f64
                })),
            );
            table.push_stat(&c, "mse_p", &Stat::from_iter(ok.iter().map(|e| e.sum_sq_position() / e.position.len() as f64)));
            table.push_stat(&c, "mse_w", &Stat::from_iter(ok.iter().map(|e| e.sum_sq_orientation() / e.orientation.len() as f64)));
            table.push_stat(
                &c,
                "outage",
                &Stat::from_iter(ok.iter().map(|e| {
                    let pairs: Vec<(f64, f64)> = e.position.iter().copied().zip(e.orientation.iter().copied()).collect();
                    metrics::outage_probability(&pairs, gp, gw)
                })),
            );
            table.push_stat(&c, "failure_rate", &Stat::from_iter(trials.iter().map(|t| if t.runs[i].is_some() { 0.0 } else { 1.0 })));
        }
        for (i, b) in self.bounds.iter().enumerate() {
            let mut c = coords.to_vec();
            c.push(b.label.clone());
            table.push_stat(&c, "peb_p", &Stat::from_iter(trials.iter().filter_map(|t| t.bounds[i].map(|v| v.0))));
            table.push_stat(&c, "peb_w", &Stat::from_iter(trials.iter().filter_map(|t| t.bounds[i].map(|v| v.1))));
        }
        let mut c = coords.to_vec();
        c.push("scene".to_string());
        table.push_stat(&c, "vehicles", &Stat::from_iter(trials.iter().map(|t| t.vehicles as f64)));
    }
}

fn run(label: &str, front: usize, method: AoaMethod, targets: usize) -> Run {
    Run { label: label.to_string(), front, method, targets, view_half_angle: FRAC_PI_2 }
}

fn bound(label: &str, front: usize, kind: BoundKind) -> BoundRun {
    BoundRun { label: label.to_string(), front, kind }
}

impl ExperimentConfig {
    pub fn loc_point(&self, source: SceneSource, snr_db: f64, fronts: Vec<Front>, runs: Vec<Run>, bounds: Vec<BoundRun>, solver: Solver) -> LocPoint {
        LocPoint {
            spec: self.spec(),
            source,
            model: self.link_model(snr_db, FRAC_PI_2),
            fronts,
            runs,
            bounds,
            solver,
            options: self.solver_options(),
            variant: self.variant(),
            sic_update: self.sic_update.into(),
        }
    }
}

fn finish_point(
    cfg: &ExperimentConfig,
    point: &LocPoint,
    index: u64,
    coords: &[String],
    table: &mut ResultTable,
) -> Result<(), lensloc_core::Error> {
    let trials = point.run(cfg.seed, index, cfg.trials)?;
    point.summarize(&trials, coords, table);
    Ok(())
}

fn estimator_comparison(cfg: &ExperimentConfig) -> Result<ResultTable, SweepError> {
    let mut table = ResultTable::new("fig5", &["N", "snr_db", "method"]);
    let mut index = 0;
    for &n in &cfg.antennas {
        let lens = cfg.lens_for(n)?;
        let ula = cfg.ula_for(n)?;
        for &snr in &cfg.snr_db {
            let fronts = match (Front::new(lens.clone(), true), Front::new(ula.clone(), true)) {
                (Ok(a), Ok(b)) => vec![a, b],
                (Err(e), _) | (_, Err(e)) => return Err(runtime(table, e)),
            };
            let runs = vec![
                run("lens_r2sa", 0, AoaMethod::R2sa, 1),
                run("lens_music", 0, AoaMethod::Music, 1),
                run("lens_ml", 0, AoaMethod::MlGrid, 1),
                run("ula_music", 1, AoaMethod::Music, 1),
                run("ula_ml", 1, AoaMethod::MlGrid, 1),
            ];
            let bounds = vec![bound("lens_crlb", 0, BoundKind::Crlb), bound("ula_crlb", 1, BoundKind::Crlb)];
            let point = cfg.loc_point(SceneSource::Fixed(cfg.vehicles), snr, fronts, runs, bounds, Solver::Se);
            if let Err(e) = finish_point(cfg, &point, index, &[n.to_string(), fmt_num(snr)], &mut table) {
                return Err(runtime(table, e));
            }
            index += 1;
        }
    }
    Ok(table)
}

fn bound_comparison(cfg: &ExperimentConfig) -> Result<ResultTable, SweepError> {
    let mut table = ResultTable::new(cfg.id.as_str(), &["N", "density", "snr_db", "method"]);
    let by_density = cfg.id == ExperimentId::Fig8;
    let densities: Vec<Option<f64>> = if by_density { cfg.densities.iter().map(|&d| Some(d)).collect() } else { vec![None] };
    let mut index = 0;
    for &n in &cfg.antennas {
        let lens = cfg.lens_for(n)?;
        let ula = cfg.ula_for(n)?;
        for &density in &densities {
            for &snr in &cfg.snr_db {
                let fronts = match (Front::new(lens.clone(), false), Front::new(ula.clone(), false)) {
                    (Ok(a), Ok(b)) => vec![a, b],
                    (Err(e), _) | (_, Err(e)) => return Err(runtime(table, e)),
                };
                let runs = vec![run("lens_r2sa", 0, AoaMethod::R2sa, 1), run("lens_ms", 0, AoaMethod::Ms, 1)];
                let bounds = vec![
                    bound("lens_crlb", 0, BoundKind::Crlb),
                    bound("lens_upper", 0, BoundKind::LensUpper),
                    bound("lens_lower", 0, BoundKind::LensLower),
                    bound("ula_crlb", 1, BoundKind::Crlb),
                ];
                let source = density.map_or(SceneSource::Fixed(cfg.vehicles), SceneSource::Density);
                let point = cfg.loc_point(source, snr, fronts, runs, bounds, Solver::Se);
                let d = density.map_or_else(|| "-".to_string(), fmt_num);
                if let Err(e) = finish_point(cfg, &point, index, &[n.to_string(), d, fmt_num(snr)], &mut table) {
                    return Err(runtime(table, e));
                }
                index += 1;
            }
        }
    }
    Ok(table)
}

fn target_runs(targets: usize) -> Vec<Run> {
    if targets == 1 {
        vec![run("lens_r2sa", 0, AoaMethod::R2sa, 1)]
    } else {
        vec![run("lens_r2sa_sic", 0, AoaMethod::R2saSic, targets), run("lens_r2sa_nosic", 0, AoaMethod::R2saNoSic, targets)]
    }
}

fn multi_target_sweep(cfg: &ExperimentConfig) -> Result<ResultTable, SweepError> {
    let mut table = ResultTable::new("fig9", &["N", "targets", "snr_db", "method"]);
    let mut index = 0;
    for &n in &cfg.antennas {
        let lens = cfg.lens_for(n)?;
        let ula = cfg.ula_for(n)?;
        for &j in &cfg.targets {
            for &snr in &cfg.snr_db {
                let fronts = match (Front::new(lens.clone(), false), Front::new(ula.clone(), false)) {
                    (Ok(a), Ok(b)) => vec![a, b],
                    (Err(e), _) | (_, Err(e)) => return Err(runtime(table, e)),
                };
                let bounds = vec![bound("ula_crlb", 1, BoundKind::Crlb)];
                let point = cfg.loc_point(SceneSource::Fixed(cfg.vehicles), snr, fronts, target_runs(j), bounds, Solver::Se);
                if let Err(e) = finish_point(cfg, &point, index, &[n.to_string(), j.to_string(), fmt_num(snr)], &mut table) {
                    return Err(runtime(table, e));
                }
                index += 1;
            }
        }
    }
    Ok(table)
}

fn outage_sweep(cfg: &ExperimentConfig) -> Result<ResultTable, SweepError> {
    let mut table = ResultTable::new("fig10", &["N", "density", "targets", "snr_db", "method"]);
    let mut index = 0;
    for &n in &cfg.antennas {
        let lens = cfg.lens_for(n)?;
        for &density in &cfg.densities {
            for &j in &cfg.targets {
                for &snr in &cfg.snr_db {
                    let fronts = match Front::new(lens.clone(), false) {
                        Ok(f) => vec![f],
                        Err(e) => return Err(runtime(table, e)),
                    };
                    let point = cfg.loc_point(SceneSource::Density(density), snr, fronts, target_runs(j), Vec::new(), Solver::Se);
                    let c = [n.to_string(), fmt_num(density), j.to_string(), fmt_num(snr)];
                    if let Err(e) = finish_point(cfg, &point, index, &c, &mut table) {
                        return Err(runtime(table, e));
                    }
                    index += 1;
                }
            }
        }
    }
    Ok(table)
}

fn view_sweep(cfg: &ExperimentConfig) -> Result<ResultTable, SweepError> {
    let mut table = ResultTable::new("fig11", &["N", "snr_db", "method"]);
    let j = cfg.targets[0];
    let mut index = 0;
    for &n in &cfg.antennas {
        let lens = cfg.lens_for(n)?;
        for &snr in &cfg.snr_db {
            let fronts = match Front::new(lens.clone(), false) {
                Ok(f) => vec![f],
                Err(e) => return Err(runtime(table, e)),
            };
            let mut runs = vec![run("lens_r2sa", 0, AoaMethod::R2sa, 1), run("lens_ms", 0, AoaMethod::Ms, 1)];
            for &v in &cfg.views_deg {
                let method = if j == 1 { AoaMethod::R2sa } else { AoaMethod::R2saSic };
                runs.push(Run {
                    label: format!("lens_r2sa_sic_view{}", fmt_num(v)),
                    front: 0,
                    method,
                    targets: j,
                    view_half_angle: v.to_radians(),
                });
            }
            let point = cfg.loc_point(SceneSource::Fixed(cfg.vehicles), snr, fronts, runs, Vec::new(), Solver::Se);
            if let Err(e) = finish_point(cfg, &point, index, &[n.to_string(), fmt_num(snr)], &mut table) {
                return Err(runtime(table, e));
            }
            index += 1;
        }
    }
    Ok(table)
}

/// Single-target estimator benchmark row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: String,
    pub snr_db: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub aperture: f64,
    pub f: f64,
    pub trials: usize,
    pub mse_rad2: f64,
}

/// Per-link benchmark of the AoA estimators at unit path power with
/// angles uniform in `±theta_max`.
pub fn aoa_bench(cfg: &ExperimentConfig) -> Result<Vec<BenchRow>, SweepError> {
    let mut rows = Vec::new();
    let tmax = cfg.theta_max();
    let mut index = 0;
    for &n in &cfg.antennas {
        let lens = cfg.lens_for(n)?;
        let ula = cfg.ula_for(n)?;
        let fronts = [Front::new(lens.clone(), true), Front::new(ula.clone(), true)];
        let fronts: Vec<Front> = fronts.into_iter().collect::<lensloc_core::Result<_>>().map_err(|e| runtime(ResultTable::new("aoa-bench", &[]), e))?;
        let methods = [
            ("ms", 0, AoaMethod::Ms),
            ("r2sa", 0, AoaMethod::R2sa),
            ("lens_ml", 0, AoaMethod::MlGrid),
            ("lens_music", 0, AoaMethod::Music),
            ("ula_ml", 1, AoaMethod::MlGrid),
            ("ula_music", 1, AoaMethod::Music),
        ];
        for &snr in &cfg.snr_db {
            let model = LinkModel::per_link(snr);
            for &(name, fi, method) in &methods {
                let front = &fronts[fi];
                let est = Estimator { front: &front.cfg, method, sic_update: cfg.sic_update.into(), dict: front.dict.as_ref() };
                let out = run_trials(cfg.seed, index, cfg.trials, |rng| -> lensloc_core::Result<f64> {
                    let theta = rng.random_range(-tmax..tmax);
                    let s2 = signal::snr_to_sigma2(model.snr_db);
                    let link = sim::LinkState {
                        rx: 0,
                        tx: 1,
                        face: scenario::ArrayFace::Front,
                        local: theta,
                        gain: signal::random_phase(rng),
                        inv_rho: 1.0,
                        distance: 1.0,
                    };
                    let channel = Channel { links: vec![link], sigma2: s2 };
                    let hat = est.estimate(&channel, &[vec![0]], rng)?[0];
                    Ok(hat.map_or(PI * PI, |h| (h - theta).powi(2)))
                });
                let out: Vec<f64> = out.into_iter().collect::<lensloc_core::Result<_>>().map_err(|e| runtime(ResultTable::new("aoa-bench", &[]), e))?;
                rows.push(BenchRow {
                    method: name.to_string(),
                    snr_db: snr,
                    n,
                    aperture: front.cfg.aperture,
                    f: front.cfg.focal_length,
                    trials: cfg.trials,
                    mse_rad2: Stat::from_iter(out).mean(),
                });
                index += 1;
            }
        }
    }
    Ok(rows)
}

/// Per-angle bound row of the CRLB sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrlbRow {
    #[serde(rename = "L")]
    pub aperture: f64,
    pub f: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub theta_deg: f64,
    pub sigma2: f64,
    pub crlb_lens: f64,
    pub crlb_ula: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Bounds at every whole degree in `(-90, 90)` for the configured array,
/// and for `f = r L` over `focal_ratios` when those were configured.
pub fn crlb_sweep(cfg: &ExperimentConfig, focal_ratios: Option<&[f64]>) -> Result<Vec<CrlbRow>, SweepError> {
    let base = cfg.array.lens()?;
    let mut arrays = vec![base.clone()];
    if let Some(ratios) = focal_ratios {
        for &r in ratios {
            let f = r * base.aperture;
            let a = ArrayConfig::lens(base.n, base.aperture, f).map_err(|e| ConfigError::invalid("experiment.focal_ratios", e.to_string()))?;
            arrays.push(a);
        }
    }
    let ula = cfg.ula_for(base.n)?;
    let mut rows = Vec::new();
    for lens in &arrays {
        for &snr in &cfg.snr_db {
            let s2 = signal::snr_to_sigma2(snr);
            for deg in -89..=89 {
                let t = (deg as f64).to_radians();
                let res = (|| -> lensloc_core::Result<CrlbRow> {
                    let (lower, upper) = crlb::lens_crlb_bounds(lens, t, s2)?;
                    Ok(CrlbRow {
                        aperture: lens.aperture,
                        f: lens.focal_length,
                        n: lens.n,
                        theta_deg: deg as f64,
                        sigma2: s2,
                        crlb_lens: crlb::crlb_lens(lens, t, s2)?,
                        crlb_ula: crlb::crlb_ula(&ula, t, s2, cfg.variant())?,
                        lower,
                        upper,
                    })
                })();
                rows.push(res.map_err(|e| runtime(ResultTable::new("crlb-sweep", &[]), e))?);
            }
        }
    }
    Ok(rows)
}

/// One solved scene of the `localize` command.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizedScene {
    pub snr_db: f64,
    pub trial: usize,
    pub truth: Vec<Pose>,
    pub estimate: Option<Vec<Pose>>,
}

/// Solves `trials` scenes per SNR with R2SA (SIC when several targets
/// share a subchannel) and reports the poses and the summary metrics.
/// A given `scene` replaces the random drops.
pub fn localize_scenes(cfg: &ExperimentConfig, scene: Option<&Scenario>) -> Result<(Vec<LocalizedScene>, ResultTable), SweepError> {
    let mut table = ResultTable::new("localize", &["N", "snr_db", "method"]);
    let mut scenes = Vec::new();
    let n = cfg.array.n;
    let lens = cfg.array.lens()?;
    let j = cfg.targets[0];
    let source = match cfg.vehicles {
        0 => SceneSource::Density(cfg.scenario.density),
        v => SceneSource::Fixed(v),
    };
    let method = if j == 1 { AoaMethod::R2sa } else { AoaMethod::R2saSic };
    for (index, &snr) in cfg.snr_db.iter().enumerate() {
        let fronts = vec![Front::new(lens.clone(), false).map_err(|e| runtime(table.clone(), e))?];
        let point = cfg.loc_point(source, snr, fronts, vec![run(method.name(), 0, method, j)], Vec::new(), Solver::Se);
        let out = run_trials(cfg.seed, index as u64, cfg.trials, |rng| -> lensloc_core::Result<(LocTrial, Vec<Pose>, Option<Vec<Pose>>)> {
            let scene = match scene {
                Some(s) => s.clone(),
                None => sim::draw_scene(&point.spec, point.source, rng)?,
            };
            let channel = sim::draw_channel(&scene, &point.model, rng)?;
            let groups = sim::subchannels(&scene, &channel, j);
            let front = &point.fronts[0];
            let est = Estimator { front: &front.cfg, method, sic_update: point.sic_update, dict: None };
            let solved = est.estimate(&channel, &groups, rng).and_then(|hats| {
                let meas = sim::measurement_set(scene.len(), &channel, &hats, &front.cfg, VarianceAt::Estimate, point.model.low_power_threshold_db)?;
                sim::localize(&scene, &point.spec, &meas, point.solver, &point.options, rng)
            });
            let truth = sim::truth_poses(&scene);
            let (poses, errors) = match solved {
                Ok((p, e)) => (Some(p), Some(e)),
                Err(_) => (None, None),
            };
            Ok((LocTrial { vehicles: scene.len(), runs: vec![errors], bounds: Vec::new() }, truth, poses))
        });
        let mut trials = Vec::with_capacity(out.len());
        for (t, o) in out.into_iter().enumerate() {
            let (trial, truth, estimate) = o.map_err(|e| runtime(table.clone(), e))?;
            scenes.push(LocalizedScene { snr_db: snr, trial: t, truth, estimate });
            trials.push(trial);
        }
        point.summarize(&trials, &[n.to_string(), fmt_num(snr)], &mut table);
    }
    Ok((scenes, table))
}
