//! Trial kernels shared by the sweeps: channel draws, subchannel grouping,
//! AoA estimation per array face, measurement sets and bound variances.

use std::f64::consts::FRAC_PI_2;

use lensloc_core::array_model::ArrayKind;
use lensloc_core::crlb::{self, AnchorSpec, FimLink, Variant};
use lensloc_core::estimators::{self, AoAEstimate, Dictionary, SicUpdate};
use lensloc_core::localization::{
    self, AoAMeasurementSet, GaugeMode, Measurement, Pose, SolveContext, SolverOptions,
};
use lensloc_core::math::wrap_angle;
use lensloc_core::scenario::{self, ArrayFace, IntersectionSpec, Point2, Scenario};
use lensloc_core::signal::{self, PathSpec, Snapshot};
use lensloc_core::{ArrayConfig, Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::SnrMode;

/// Snapshots per link for the subspace estimator.
pub const MUSIC_SNAPSHOTS: usize = 100;

/// Dictionary step for the grid estimators, degrees.
pub const GRID_RESOLUTION_DEG: f64 = 0.1;

const MAX_SCENE_ATTEMPTS: usize = 10_000;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at sweep point `point`.
pub fn derive_seed(master: u64, point: u64, trial: u64) -> u64 {
    splitmix(splitmix(splitmix(master) ^ point) ^ trial)
}

pub fn trial_rng(master: u64, point: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, point, trial))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AoaMethod {
    Ms,
    R2sa,
    R2saSic,
    R2saNoSic,
    Music,
    MlGrid,
    /// Truth plus Gaussian noise at the CRLB of the link.
    Gaussian,
}

impl AoaMethod {
    pub fn name(&self) -> &'static str {
        match self {
            AoaMethod::Ms => "ms",
            AoaMethod::R2sa => "r2sa",
            AoaMethod::R2saSic => "r2sa_sic",
            AoaMethod::R2saNoSic => "r2sa_nosic",
            AoaMethod::Music => "music",
            AoaMethod::MlGrid => "ml",
            AoaMethod::Gaussian => "gaussian",
        }
    }

    pub fn multi_target(&self) -> bool {
        matches!(self, AoaMethod::R2saSic | AoaMethod::R2saNoSic | AoaMethod::Music | AoaMethod::Gaussian)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkModel {
    pub snr_db: f64,
    pub mode: SnrMode,
    pub wavelength: f64,
    pub attenuation_db_per_km: f64,
    pub view_half_angle: f64,
    /// Links whose SNR falls below this level (dB) are discarded.
    pub low_power_threshold_db: Option<f64>,
}

impl LinkModel {
    pub fn per_link(snr_db: f64) -> Self {
        Self {
            snr_db,
            mode: SnrMode::PerLink,
            wavelength: lensloc_core::array_model::WAVELENGTH_28GHZ,
            attenuation_db_per_km: 0.0,
            view_half_angle: FRAC_PI_2,
            low_power_threshold_db: None,
        }
    }
}

/// One received path as seen by the receiving vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub rx: usize,
    pub tx: usize,
    pub face: ArrayFace,
    pub local: f64,
    pub gain: Complex64,
    pub inv_rho: f64,
    pub distance: f64,
}

impl LinkState {
    pub fn power(&self) -> f64 {
        self.gain.norm_sqr() * self.inv_rho
    }
}

/// Visible links with their gains and the scene noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub links: Vec<LinkState>,
    pub sigma2: f64,
}

impl Channel {
    pub fn effective_sigma2(&self, link: &LinkState) -> f64 {
        self.sigma2 / link.power()
    }
}

/// Draws gains for every link of `scene` and keeps those inside the view.
pub fn draw_channel<R: Rng + ?Sized>(scene: &Scenario, model: &LinkModel, rng: &mut R) -> Result<Channel> {
    let mut all = Vec::with_capacity(scene.links.len());
    for l in &scene.links {
        let (face, local) = scenario::facing_array(l.aoa);
        let (gain, inv_rho) = match model.mode {
            SnrMode::PerLink => (signal::random_phase(rng), 1.0),
            SnrMode::Scene => (
                signal::complex_gaussian(rng),
                scenario::pathloss_inv(l.distance, model.wavelength, model.attenuation_db_per_km)?,
            ),
        };
        all.push(LinkState { rx: l.rx, tx: l.tx, face, local, gain, inv_rho, distance: l.distance });
    }
    let reference = match model.mode {
        SnrMode::PerLink => 1.0,
        SnrMode::Scene => all.iter().map(LinkState::power).fold(0.0, f64::max),
    };
    if !(reference > 0.0) {
        return Err(Error::Domain("scene has no received power"));
    }
    let sigma2 = signal::scene_sigma2(model.snr_db, reference);
    let links = all.into_iter().filter(|l| l.local.abs() <= model.view_half_angle + 1e-12).collect();
    Ok(Channel { links, sigma2 })
}

/// Orders the links received by each vehicle (vehicles heading another way
/// first, then nearest first) and cuts them into subchannels of `targets`.
pub fn subchannels(scene: &Scenario, channel: &Channel, targets: usize) -> Vec<Vec<usize>> {
    let mut groups = Vec::new();
    for k in 0..scene.len() {
        let mut idx: Vec<usize> = (0..channel.links.len()).filter(|&i| channel.links[i].rx == k).collect();
        let hk = scene.vehicles[k].heading;
        idx.sort_by(|&a, &b| {
            let la = &channel.links[a];
            let lb = &channel.links[b];
            let pa = co_moving(hk, scene.vehicles[la.tx].heading);
            let pb = co_moving(hk, scene.vehicles[lb.tx].heading);
            pa.cmp(&pb).then(la.distance.total_cmp(&lb.distance)).then(la.tx.cmp(&lb.tx))
        });
        for chunk in idx.chunks(targets.max(1)) {
            groups.push(chunk.to_vec());
        }
    }
    groups
}

fn co_moving(a: f64, b: f64) -> bool {
    wrap_angle(a - b).abs() < 1e-6
}

/// Estimated local angle for every visible link (`None` when the estimator
/// returned too few paths).
pub struct Estimator<'a> {
    pub front: &'a ArrayConfig,
    pub method: AoaMethod,
    pub sic_update: SicUpdate,
    pub dict: Option<&'a Dictionary>,
}

impl Estimator<'_> {
    pub fn estimate<R: Rng + ?Sized>(
        &self,
        channel: &Channel,
        groups: &[Vec<usize>],
        rng: &mut R,
    ) -> Result<Vec<Option<f64>>> {
        let mut out = vec![None; channel.links.len()];
        for group in groups {
            for face in [ArrayFace::Front, ArrayFace::Rear] {
                let members: Vec<usize> = group.iter().copied().filter(|&i| channel.links[i].face == face).collect();
                if members.is_empty() {
                    continue;
                }
                let links: Vec<LinkState> = members.iter().map(|&i| channel.links[i]).collect();
                let hats = self.estimate_face(channel, &links, rng)?;
                let truth: Vec<f64> = links.iter().map(|l| l.local).collect();
                for (slot, hat) in associate(&truth, &hats).into_iter().enumerate() {
                    out[members[slot]] = hat;
                }
            }
        }
        Ok(out)
    }

    fn estimate_face<R: Rng + ?Sized>(&self, channel: &Channel, links: &[LinkState], rng: &mut R) -> Result<Vec<f64>> {
        let j = links.len();
        if j > 1 && !self.method.multi_target() {
            return Err(Error::Config("single-target estimator given several paths"));
        }
        let cfg = self.front;
        let paths: Vec<PathSpec> = links.iter().map(|l| PathSpec::new(l.local, l.gain, l.inv_rho)).collect();
        let theta = |e: Vec<AoAEstimate>| e.into_iter().map(|x| x.theta_hat).collect::<Vec<_>>();
        let dict = || self.dict.ok_or(Error::Config("grid estimator needs a dictionary"));
        let hats = match self.method {
            AoaMethod::Gaussian => {
                let mut v = Vec::with_capacity(j);
                for l in links {
                    let var = link_crlb(cfg, l.local, channel.sigma2 / l.power(), Variant::Textbook)?;
                    let z: f64 = StandardNormal.sample(rng);
                    v.push(l.local + var.sqrt() * z);
                }
                v
            }
            AoaMethod::Music => {
                let mut snaps = Vec::with_capacity(MUSIC_SNAPSHOTS);
                for _ in 0..MUSIC_SNAPSHOTS {
                    let p: Vec<PathSpec> = paths
                        .iter()
                        .map(|p| PathSpec::new(p.theta, p.gain * signal::random_phase(rng), p.inv_rho))
                        .collect();
                    snaps.push(self.snapshot(&p, channel.sigma2, rng)?);
                }
                match estimators::music(cfg, &snaps, j, dict()?) {
                    Ok(e) => theta(e),
                    Err(Error::Rank { .. }) => Vec::new(),
                    Err(e) => return Err(e),
                }
            }
            _ => {
                let y = self.snapshot(&paths, channel.sigma2, rng)?;
                match self.method {
                    AoaMethod::Ms => vec![estimators::ms(cfg, &y)?.theta_hat],
                    AoaMethod::R2sa => vec![estimators::r2sa(cfg, &y)?.theta_hat],
                    AoaMethod::MlGrid => vec![estimators::ml_grid(cfg, &y, dict()?)?.theta_hat],
                    AoaMethod::R2saSic => theta(estimators::sic_multi(cfg, &y, j, self.sic_update)?),
                    AoaMethod::R2saNoSic => theta(estimators::multi_no_sic(cfg, &y, j)?),
                    AoaMethod::Music | AoaMethod::Gaussian => unreachable!(),
                }
            }
        };
        Ok(hats)
    }

    fn snapshot<R: Rng + ?Sized>(&self, paths: &[PathSpec], sigma2: f64, rng: &mut R) -> Result<Snapshot> {
        match self.front.kind {
            ArrayKind::Lens => signal::synthesize(self.front, paths, sigma2, rng),
            ArrayKind::Ula => signal::synthesize_ula(self.front, paths, sigma2, rng),
        }
    }
}

/// Assignment of estimates to true angles minimizing the total absolute
/// error. Extra true angles stay unassigned.
pub fn associate(truth: &[f64], hats: &[f64]) -> Vec<Option<f64>> {
    let mut best: Option<(f64, Vec<Option<usize>>)> = None;
    let mut current = vec![None; truth.len()];
    let mut used = vec![false; hats.len()];
    search(truth, hats, 0, 0.0, &mut current, &mut used, &mut best);
    let slots = best.map(|b| b.1).unwrap_or_else(|| vec![None; truth.len()]);
    slots.into_iter().map(|s| s.map(|h| hats[h])).collect()
}

fn search(
    truth: &[f64],
    hats: &[f64],
    i: usize,
    cost: f64,
    current: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    best: &mut Option<(f64, Vec<Option<usize>>)>,
) {
    if best.as_ref().is_some_and(|b| cost >= b.0) {
        return;
    }
    if i == truth.len() {
        *best = Some((cost, current.clone()));
        return;
    }
    let free = used.iter().filter(|u| !**u).count();
    let remaining = truth.len() - i;
    for h in 0..hats.len() {
        if used[h] {
            continue;
        }
        used[h] = true;
        current[i] = Some(h);
        search(truth, hats, i + 1, cost + (hats[h] - truth[i]).abs(), current, used, best);
        used[h] = false;
        current[i] = None;
    }
    if free < remaining {
        search(truth, hats, i + 1, cost, current, used, best);
    }
}

/// AoA variance bound for one link on `front`, with the angle kept off
/// endfire.
pub fn link_crlb(front: &ArrayConfig, local: f64, sigma2: f64, ula_variant: Variant) -> Result<f64> {
    let t = local.clamp(-FRAC_PI_2 + 1e-3, FRAC_PI_2 - 1e-3);
    match front.kind {
        ArrayKind::Lens => crlb::crlb_lens(front, t, sigma2),
        ArrayKind::Ula => crlb::crlb_ula(front, t, sigma2, ula_variant),
    }
}

/// Angle at which a measurement's variance is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceAt {
    /// The estimate itself, as a receiver would.
    Estimate,
    /// The true angle; only meaningful for the Gaussian surrogate, whose
    /// noise is drawn at exactly that variance.
    Truth,
}

impl VarianceAt {
    pub fn for_method(method: AoaMethod) -> Self {
        if method == AoaMethod::Gaussian {
            VarianceAt::Truth
        } else {
            VarianceAt::Estimate
        }
    }
}

/// Turns local estimates into a measurement set in the body frame.
pub fn measurement_set(
    vehicles: usize,
    channel: &Channel,
    estimates: &[Option<f64>],
    front: &ArrayConfig,
    variance_at: VarianceAt,
    low_power_threshold_db: Option<f64>,
) -> Result<AoAMeasurementSet> {
    let mut pairs = Vec::new();
    for (l, hat) in channel.links.iter().zip(estimates) {
        let Some(hat) = *hat else { continue };
        let s2 = channel.effective_sigma2(l);
        let at = match variance_at {
            VarianceAt::Estimate => hat,
            VarianceAt::Truth => l.local,
        };
        let variance = link_crlb(front, at, s2, Variant::Textbook)?;
        let m = Measurement { rx: l.rx, tx: l.tx, theta: scenario::body_angle(l.face, hat), variance: Some(variance) };
        pairs.push((m, 1.0 / s2));
    }
    let threshold = low_power_threshold_db.map_or(0.0, lensloc_core::math::db_to_linear);
    localization::discard_low_power(vehicles, &pairs, threshold)
}

/// Which per-link AoA variance feeds the position bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Crlb,
    LensLower,
    LensUpper,
}

pub fn bound_links(channel: &Channel, front: &ArrayConfig, kind: BoundKind, variant: Variant) -> Result<Vec<FimLink>> {
    let mut out = Vec::with_capacity(channel.links.len());
    for l in &channel.links {
        let s2 = channel.effective_sigma2(l);
        let t = l.local.clamp(-FRAC_PI_2 + 1e-3, FRAC_PI_2 - 1e-3);
        let variance = match kind {
            BoundKind::Crlb => link_crlb(front, t, s2, variant)?,
            BoundKind::LensLower => crlb::lens_crlb_bounds(front, t, s2)?.0,
            BoundKind::LensUpper => crlb::lens_crlb_bounds(front, t, s2)?.1,
        };
        out.push(FimLink { rx: l.rx, tx: l.tx, variance });
    }
    Ok(out)
}

/// Per-vehicle position and orientation bounds, `sqrt(trace / count)`.
/// The textbook FIM is evaluated in the anchored gauge, where the anchor
/// carries no error and is left out of the count.
pub fn per_vehicle_peb(positions: &[Point2], links: &[FimLink], variant: Variant, anchor: AnchorSpec) -> Result<(f64, f64)> {
    let fim = crlb::build_fim(positions, links, variant)?;
    let nv = positions.len();
    let (report, count) = match variant {
        Variant::PaperExact => (crlb::peb(&fim)?, nv),
        Variant::Textbook => (crlb::anchored_peb(&fim, positions, anchor)?, nv - 1),
    };
    let c = count as f64;
    Ok((report.peb_p / c.sqrt(), report.peb_omega / c.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SceneSource {
    Fixed(usize),
    Density(f64),
}

/// Draws scenes until one passes the link counting rule: at least `3 N_v`
/// links, every vehicle receiving at least one and touching at least two.
/// Scenes with only `3 N_v - 4` links are square systems whose exact
/// solution is not unique in general.
pub fn draw_scene<R: Rng + ?Sized>(spec: &IntersectionSpec, source: SceneSource, rng: &mut R) -> Result<Scenario> {
    for _ in 0..MAX_SCENE_ATTEMPTS {
        let scene = match source {
            SceneSource::Fixed(n) => scenario::drop_fixed_count(spec, n, rng)?,
            SceneSource::Density(d) => scenario::drop_vehicles(spec, d, rng)?,
        };
        if solvable(&scene) {
            return Ok(scene);
        }
    }
    Err(Error::Domain("no solvable scene found"))
}

pub fn solvable(scene: &Scenario) -> bool {
    let nv = scene.len();
    if nv < 4 || scene.links.len() < 3 * nv {
        return false;
    }
    (0..nv).all(|k| {
        let incoming = scene.links.iter().filter(|l| l.rx == k).count();
        let touching = incoming + scene.links.iter().filter(|l| l.tx == k).count();
        incoming >= 1 && touching >= 2
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Se,
    Ml,
}

/// Per-vehicle errors of a solved scene. Under the anchored gauge the
/// anchor's pose is given and it is left out.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseErrors {
    pub position: Vec<f64>,
    pub orientation: Vec<f64>,
}

impl PoseErrors {
    pub fn rmse_position(&self) -> f64 {
        mean(&self.position)
    }

    pub fn rmse_orientation(&self) -> f64 {
        mean(&self.orientation)
    }

    pub fn sum_sq_position(&self) -> f64 {
        self.position.iter().map(|e| e * e).sum()
    }

    pub fn sum_sq_orientation(&self) -> f64 {
        self.orientation.iter().map(|e| e * e).sum()
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn truth_poses(scene: &Scenario) -> Vec<Pose> {
    scene.vehicles.iter().map(Pose::from).collect()
}

/// Solves for all poses and scores them against the scene.
pub fn localize<R: Rng + ?Sized>(
    scene: &Scenario,
    spec: &IntersectionSpec,
    meas: &AoAMeasurementSet,
    solver: Solver,
    opts: &SolverOptions,
    rng: &mut R,
) -> Result<(Vec<Pose>, PoseErrors)> {
    let truth = truth_poses(scene);
    let a = opts.anchor;
    let ctx = match opts.gauge {
        GaugeMode::Anchored => SolveContext {
            anchor_pose: Some(truth[a.anchor]),
            baseline: Some(truth[a.anchor].position().distance(&truth[a.baseline].position())),
            bounds: Some(spec.bounding_box()),
            initial: None,
        },
        GaugeMode::SimilarityAligned => SolveContext::default(),
    };
    let est = match solver {
        Solver::Se => localization::solve_se(meas, opts, &ctx, rng)?,
        Solver::Ml => localization::solve_ml(meas, opts, &ctx, rng)?,
    };
    let est = match opts.gauge {
        GaugeMode::Anchored => est,
        GaugeMode::SimilarityAligned => localization::align_similarity(&est, &truth)?,
    };
    let mut errors = PoseErrors { position: Vec::new(), orientation: Vec::new() };
    for (k, (e, t)) in est.poses.iter().zip(&truth).enumerate() {
        if opts.gauge == GaugeMode::Anchored && k == a.anchor {
            continue;
        }
        errors.position.push(e.position().distance(&t.position()));
        errors.orientation.push(wrap_angle(e.omega - t.omega).abs());
    }
    Ok((est.poses, errors))
}
