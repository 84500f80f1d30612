//! AoA estimators: maximum selection, the two-antenna ratio refinement,
//! successive cancellation, and MUSIC / grid-ML baselines.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::array_model::{lens_amplitude, ula_steering, ArrayConfig, ArrayKind};
use crate::error::{Error, Result};
use crate::signal::Snapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ms,
    R2sa,
    R2saSic,
    Music,
    MlGrid,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Ms => "MS",
            Method::R2sa => "R2SA",
            Method::R2saSic => "R2SA_SIC",
            Method::Music => "MUSIC",
            Method::MlGrid => "ML",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoAEstimate {
    pub theta_hat: f64,
    /// Signed antenna index of the strongest element (grid index for
    /// dictionary methods).
    pub n_star: i64,
    pub e_hat: f64,
    pub method: Method,
    pub low_confidence: bool,
}

/// Signed index of the strongest element. Ties go to the smaller `|n|`,
/// then the smaller `n`.
pub fn max_select(y: &Snapshot) -> Result<i64> {
    max_select_magnitudes(&y.magnitudes())
}

fn max_select_magnitudes(mags: &[f64]) -> Result<i64> {
    if mags.is_empty() {
        return Err(Error::Dimension { expected: 1, got: 0 });
    }
    let half = (mags.len() / 2) as i64;
    let mut best = 0i64;
    let mut best_val = mags[half as usize];
    for k in 1..=half {
        for n in [-k, k] {
            let v = mags[(n + half) as usize];
            if v > best_val {
                best = n;
                best_val = v;
            }
        }
    }
    Ok(best)
}

/// Sine of the fractional critical position `n + e`.
fn fractional_sine(cfg: &ArrayConfig, position: f64) -> f64 {
    position * cfg.lens_spacing() / cfg.array_distance
}

pub fn ms_estimate(cfg: &ArrayConfig, n_star: i64) -> Result<AoAEstimate> {
    let s = fractional_sine(cfg, n_star as f64);
    if s.abs() > 1.0 + 1e-12 {
        return Err(Error::Domain("selected antenna lies outside the critical set"));
    }
    Ok(AoAEstimate {
        theta_hat: s.clamp(-1.0, 1.0).asin(),
        n_star,
        e_hat: 0.0,
        method: Method::Ms,
        low_confidence: false,
    })
}

fn check_len(cfg: &ArrayConfig, y: &Snapshot) -> Result<()> {
    if y.len() != cfg.n {
        return Err(Error::Dimension { expected: cfg.n, got: y.len() });
    }
    Ok(())
}

/// Maximum selection on a snapshot.
pub fn ms(cfg: &ArrayConfig, y: &Snapshot) -> Result<AoAEstimate> {
    check_len(cfg, y)?;
    ms_estimate(cfg, max_select(y)?)
}

/// Fractional offset from the strongest element and its stronger neighbour.
fn ratio_offset(mags: &[f64], slot: usize) -> f64 {
    let left = if slot > 0 { mags[slot - 1] } else { f64::NEG_INFINITY };
    let right = mags.get(slot + 1).copied().unwrap_or(f64::NEG_INFINITY);
    let peak = mags[slot];
    let e = if right > left && right > 0.0 {
        1.0 / (peak / right + 1.0)
    } else if left > right && left > 0.0 {
        -1.0 / (peak / left + 1.0)
    } else {
        0.0
    };
    e.clamp(-0.5, 0.5)
}

fn refine(cfg: &ArrayConfig, mags: &[f64], n_star: i64, method: Method) -> AoAEstimate {
    let e = ratio_offset(mags, cfg.slot(n_star));
    let s = fractional_sine(cfg, n_star as f64 + e);
    if s.abs() > 1.0 {
        let s0 = fractional_sine(cfg, n_star as f64).clamp(-1.0, 1.0);
        return AoAEstimate { theta_hat: s0.asin(), n_star, e_hat: 0.0, method, low_confidence: false };
    }
    AoAEstimate { theta_hat: s.asin(), n_star, e_hat: e, method, low_confidence: false }
}

/// Two-antenna ratio estimator.
pub fn r2sa(cfg: &ArrayConfig, y: &Snapshot) -> Result<AoAEstimate> {
    check_len(cfg, y)?;
    let mags = y.magnitudes();
    let n_star = max_select_magnitudes(&mags)?;
    Ok(refine(cfg, &mags, n_star, Method::R2sa))
}

/// How the estimated path is removed between cancellation stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SicUpdate {
    /// Least-squares fit of the unit-norm pattern, then subtraction.
    #[default]
    Projection,
    /// `r <- r - r o a(theta_hat)` with the unnormalized pattern.
    Elementwise,
}

/// Multiply counter following the convention `N` (peak search) `+ 2`
/// (ratio and offset) `+ N` (cancellation product) per target.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub multiplications: u64,
}

pub fn r2sa_opcount(n: usize, k: usize) -> u64 {
    (k as u64) * (2 * n as u64 + 2)
}

/// Successive cancellation: estimates `j` paths in order of captured power.
pub fn sic_multi(cfg: &ArrayConfig, y: &Snapshot, j: usize, update: SicUpdate) -> Result<Vec<AoAEstimate>> {
    sic_multi_counted(cfg, y, j, update, &mut OpCounter::default())
}

pub fn sic_multi_counted(
    cfg: &ArrayConfig,
    y: &Snapshot,
    j: usize,
    update: SicUpdate,
    ops: &mut OpCounter,
) -> Result<Vec<AoAEstimate>> {
    check_len(cfg, y)?;
    if cfg.kind != ArrayKind::Lens {
        return Err(Error::Config("cancellation needs a lens array"));
    }
    if j == 0 || j > cfg.n {
        return Err(Error::Domain("target count must be in 1..=N"));
    }
    let n = cfg.n as u64;
    let noise_floor = y.sigma2 * cfg.n as f64;
    let mut residual = y.y.clone();
    let mut out = Vec::with_capacity(j);
    for _ in 0..j {
        let energy: f64 = residual.iter().map(|v| v.norm_sqr()).sum();
        let mags: Vec<f64> = residual.iter().map(|v| v.norm()).collect();
        let n_star = max_select_magnitudes(&mags)?;
        ops.multiplications += n;
        let mut est = refine(cfg, &mags, n_star, if j == 1 { Method::R2sa } else { Method::R2saSic });
        ops.multiplications += 2;
        est.low_confidence = energy <= noise_floor;
        let pattern = lens_amplitude(cfg, est.theta_hat).values;
        match update {
            SicUpdate::Projection => {
                let norm = pattern.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    let gain: Complex64 = residual
                        .iter()
                        .zip(&pattern)
                        .map(|(r, a)| r * (*a / norm))
                        .sum();
                    for (r, a) in residual.iter_mut().zip(&pattern) {
                        *r -= gain * (*a / norm);
                    }
                }
            }
            SicUpdate::Elementwise => {
                for (r, a) in residual.iter_mut().zip(&pattern) {
                    *r -= *r * *a;
                }
            }
        }
        ops.multiplications += n;
        out.push(est);
    }
    Ok(out)
}

/// Multi-target baseline without cancellation: the `j` strongest distinct
/// elements of the raw snapshot, each refined with its stronger neighbour.
pub fn multi_no_sic(cfg: &ArrayConfig, y: &Snapshot, j: usize) -> Result<Vec<AoAEstimate>> {
    check_len(cfg, y)?;
    if j == 0 || j > cfg.n {
        return Err(Error::Domain("target count must be in 1..=N"));
    }
    let mags = y.magnitudes();
    let mut masked = mags.clone();
    let mut out = Vec::with_capacity(j);
    for _ in 0..j {
        let n_star = max_select_magnitudes(&masked)?;
        masked[cfg.slot(n_star)] = f64::NEG_INFINITY;
        out.push(refine(cfg, &mags, n_star, Method::R2sa));
    }
    Ok(out)
}

/// Unit-norm array responses on a uniform angle grid over `[-90, 90]` deg.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub grid: Vec<f64>,
    pub patterns: Vec<Vec<Complex64>>,
}

impl Dictionary {
    pub fn new(cfg: &ArrayConfig, resolution_deg: f64) -> Result<Self> {
        if !(resolution_deg > 0.0) {
            return Err(Error::Domain("dictionary resolution must be positive"));
        }
        let steps = (180.0 / resolution_deg).round() as usize;
        let mut grid = Vec::with_capacity(steps + 1);
        let mut patterns = Vec::with_capacity(steps + 1);
        for i in 0..=steps {
            let deg = -90.0 + 180.0 * i as f64 / steps as f64;
            let theta = deg.to_radians();
            let mut p: Vec<Complex64> = match cfg.kind {
                ArrayKind::Lens => lens_amplitude(cfg, theta)
                    .values
                    .into_iter()
                    .map(|v| Complex64::new(v, 0.0))
                    .collect(),
                ArrayKind::Ula => ula_steering(cfg, theta)?,
            };
            let norm = p.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                p.iter_mut().for_each(|v| *v /= norm);
            }
            grid.push(theta);
            patterns.push(p);
        }
        Ok(Self { grid, patterns })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    fn check(&self, cfg: &ArrayConfig) -> Result<()> {
        match self.patterns.first() {
            Some(p) if p.len() == cfg.n => Ok(()),
            Some(p) => Err(Error::Dimension { expected: cfg.n, got: p.len() }),
            None => Err(Error::Dimension { expected: 1, got: 0 }),
        }
    }
}

fn grid_estimate(dict: &Dictionary, g: usize, method: Method) -> AoAEstimate {
    AoAEstimate { theta_hat: dict.grid[g], n_star: g as i64, e_hat: 0.0, method, low_confidence: false }
}

/// Matched-filter maximization over the dictionary.
pub fn ml_grid(cfg: &ArrayConfig, y: &Snapshot, dict: &Dictionary) -> Result<AoAEstimate> {
    check_len(cfg, y)?;
    dict.check(cfg)?;
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (g, p) in dict.patterns.iter().enumerate() {
        let c: Complex64 = p.iter().zip(&y.y).map(|(a, v)| a.conj() * v).sum();
        let v = c.norm_sqr();
        if v > best_val {
            best_val = v;
            best = g;
        }
    }
    Ok(grid_estimate(dict, best, Method::MlGrid))
}

/// Relative eigenvalue level below which the covariance is treated as
/// rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Subspace estimator on the sample covariance of `snapshots`.
pub fn music(cfg: &ArrayConfig, snapshots: &[Snapshot], j: usize, dict: &Dictionary) -> Result<Vec<AoAEstimate>> {
    dict.check(cfg)?;
    if j == 0 {
        return Err(Error::Domain("source count must be positive"));
    }
    if snapshots.len() < j + 1 {
        return Err(Error::Domain("MUSIC needs more snapshots than sources"));
    }
    let n = cfg.n;
    let mut r = DMatrix::<Complex64>::zeros(n, n);
    for s in snapshots {
        check_len(cfg, s)?;
        let v = DVector::from_column_slice(&s.y);
        r += &v * v.adjoint();
    }
    r /= Complex64::new(snapshots.len() as f64, 0.0);
    let eig = SymmetricEigen::new(r);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lmax = eig.eigenvalues[order[0]].max(0.0);
    let rank = order.iter().filter(|&&i| eig.eigenvalues[i] > RANK_TOL * lmax).count();
    if lmax <= 0.0 || rank < j {
        return Err(Error::Rank { rank: if lmax <= 0.0 { 0 } else { rank }, sources: j });
    }
    let gap_ok = j >= n || eig.eigenvalues[order[j - 1]] > 2.0 * eig.eigenvalues[order[j]].max(0.0);
    let signal: Vec<DVector<Complex64>> = order[..j].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();

    let spectrum: Vec<f64> = dict
        .patterns
        .iter()
        .map(|p| {
            let captured: f64 = signal
                .iter()
                .map(|e| e.iter().zip(p).map(|(ei, a)| ei.conj() * a).sum::<Complex64>().norm_sqr())
                .sum();
            1.0 / (1.0 - captured).max(1e-15)
        })
        .collect();
    let mut peaks: Vec<usize> = (0..spectrum.len())
        .filter(|&g| {
            let left = if g > 0 { spectrum[g - 1] } else { f64::NEG_INFINITY };
            let right = spectrum.get(g + 1).copied().unwrap_or(f64::NEG_INFINITY);
            spectrum[g] >= left && spectrum[g] > right
        })
        .collect();
    peaks.sort_by(|&a, &b| spectrum[b].total_cmp(&spectrum[a]));
    let mut out: Vec<AoAEstimate> = peaks
        .iter()
        .take(j)
        .map(|&g| {
            let mut e = grid_estimate(dict, g, Method::Music);
            e.low_confidence = !gap_ok;
            e
        })
        .collect();
    while out.len() < j {
        let mut e = out.last().copied().unwrap_or_else(|| grid_estimate(dict, 0, Method::Music));
        e.low_confidence = true;
        out.push(e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synthesize, PathSpec};
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lens31() -> ArrayConfig {
        ArrayConfig::lens(31, 15.0, 7.5).unwrap()
    }

    fn noiseless(cfg: &ArrayConfig, paths: &[PathSpec]) -> Snapshot {
        synthesize(cfg, paths, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn max_select_examples() {
        let mut y = vec![Complex64::new(0.0, 0.0); 31];
        y[15 + 7] = Complex64::new(1.0, 0.0);
        assert_eq!(max_select(&Snapshot { y, sigma2: 0.0 }).unwrap(), 7);
        let flat = Snapshot { y: vec![Complex64::new(0.0, 1.0); 31], sigma2: 0.0 };
        assert_eq!(max_select(&flat).unwrap(), 0);
        let cfg = lens31();
        let s = noiseless(&cfg, &[PathSpec::unit((5.3f64 / 15.0).asin())]);
        assert_eq!(max_select(&s).unwrap(), 5);
        let mut y = vec![Complex64::new(0.0, 0.0); 5];
        y[0] = Complex64::new(1.0, 0.0);
        y[4] = Complex64::new(1.0, 0.0);
        assert_eq!(max_select(&Snapshot { y, sigma2: 0.0 }).unwrap(), -2);
    }

    #[test]
    fn ms_examples() {
        let cfg = lens31();
        assert_eq!(ms_estimate(&cfg, 0).unwrap().theta_hat, 0.0);
        assert!((ms_estimate(&cfg, 5).unwrap().theta_hat - 0.339_836_909_454_121_9).abs() < 1e-12);
        assert!(ms_estimate(&cfg, 16).is_err());
    }

    #[test]
    fn r2sa_examples() {
        let cfg = lens31();
        let th = (5.3f64 / 15.0).asin();
        let est = r2sa(&cfg, &noiseless(&cfg, &[PathSpec::unit(th)])).unwrap();
        assert!((est.theta_hat - th).abs() < 1e-12);
        assert!((est.e_hat - 0.3).abs() < 1e-12);
        let th = (4.6f64 / 15.0).asin();
        let est = r2sa(&cfg, &noiseless(&cfg, &[PathSpec::unit(th)])).unwrap();
        assert_eq!(est.n_star, 5);
        assert!((est.e_hat + 0.4).abs() < 1e-12);
        let th = (5.0f64 / 15.0).asin();
        let est = r2sa(&cfg, &noiseless(&cfg, &[PathSpec::unit(th)])).unwrap();
        assert!((est.theta_hat - th).abs() < 1e-15 && est.e_hat.abs() < 1e-12);
    }

    #[test]
    fn r2sa_invariant_to_phase_and_scale() {
        let cfg = lens31();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = synthesize(&cfg, &[PathSpec::unit(0.41)], 0.05, &mut rng).unwrap();
        let rot = Complex64::from_polar(3.7, 1.1);
        let t = Snapshot { y: s.y.iter().map(|v| v * rot).collect(), sigma2: s.sigma2 };
        assert_eq!(r2sa(&cfg, &s).unwrap().theta_hat, r2sa(&cfg, &t).unwrap().theta_hat);
    }

    #[test]
    fn sic_examples() {
        let cfg = lens31();
        let a = (3.0f64 / 15.0).asin();
        let b = (-8.0f64 / 15.0).asin();
        let s = noiseless(&cfg, &[PathSpec::unit(a), PathSpec::unit(b)]);
        let est = sic_multi(&cfg, &s, 2, SicUpdate::Projection).unwrap();
        let mut got: Vec<f64> = est.iter().map(|e| e.theta_hat).collect();
        got.sort_by(f64::total_cmp);
        assert!((got[0] - b).abs() < 1e-12 && (got[1] - a).abs() < 1e-12);

        let s = noiseless(&cfg, &[PathSpec::unit(0.3)]);
        let one = sic_multi(&cfg, &s, 1, SicUpdate::Projection).unwrap();
        assert_eq!(one[0], r2sa(&cfg, &s).unwrap());
    }

    #[test]
    fn opcount() {
        assert_eq!(r2sa_opcount(31, 1), 64);
        assert_eq!(r2sa_opcount(121, 1), 244);
        assert_eq!(r2sa_opcount(31, 0), 0);
        let cfg = lens31();
        let s = noiseless(&cfg, &[PathSpec::unit(0.3), PathSpec::unit(-0.5)]);
        let mut ops = OpCounter::default();
        sic_multi_counted(&cfg, &s, 2, SicUpdate::Projection, &mut ops).unwrap();
        assert_eq!(ops.multiplications, r2sa_opcount(31, 2));
    }

    #[test]
    fn ml_grid_examples() {
        let cfg = lens31();
        let dict = Dictionary::new(&cfg, 0.1).unwrap();
        assert_eq!(dict.len(), 1801);
        let on = dict.grid[1200];
        let est = ml_grid(&cfg, &noiseless(&cfg, &[PathSpec::unit(on)]), &dict).unwrap();
        assert_eq!(est.theta_hat, on);
        let off = 12.34f64.to_radians();
        let est = ml_grid(&cfg, &noiseless(&cfg, &[PathSpec::unit(off)]), &dict).unwrap();
        assert!((est.theta_hat - off).abs() <= 0.05f64.to_radians() + 1e-12);
    }

    #[test]
    fn music_examples() {
        let cfg = lens31();
        let dict = Dictionary::new(&cfg, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let th = 17.33f64.to_radians();
        let snaps: Vec<Snapshot> = (0..100)
            .map(|_| {
                let h = crate::signal::random_phase(&mut rng);
                synthesize(&cfg, &[PathSpec::new(th, h, 1.0)], 0.0, &mut rng).unwrap()
            })
            .collect();
        let est = music(&cfg, &snaps, 1, &dict).unwrap();
        assert!((est[0].theta_hat - th).abs() <= 0.05f64.to_radians() + 1e-9);

        let (a, b) = (30f64.to_radians(), -30f64.to_radians());
        let snaps: Vec<Snapshot> = (0..100)
            .map(|_| {
                let p = [
                    PathSpec::new(a, crate::signal::complex_gaussian(&mut rng), 1.0),
                    PathSpec::new(b, crate::signal::complex_gaussian(&mut rng), 1.0),
                ];
                synthesize(&cfg, &p, 1e-3, &mut rng).unwrap()
            })
            .collect();
        let mut got: Vec<f64> = music(&cfg, &snaps, 2, &dict).unwrap().iter().map(|e| e.theta_hat).collect();
        got.sort_by(f64::total_cmp);
        let step = 0.1f64.to_radians();
        assert!((got[0] - b).abs() <= step && (got[1] - a).abs() <= step);

        let zero = vec![Snapshot { y: vec![Complex64::new(0.0, 0.0); 31], sigma2: 0.0 }; 5];
        assert!(matches!(music(&cfg, &zero, 1, &dict), Err(Error::Rank { .. })));
        let noise: Vec<Snapshot> = (0..200).map(|_| synthesize(&cfg, &[], 1.0, &mut rng).unwrap()).collect();
        let est = music(&cfg, &noise, 2, &dict).unwrap();
        assert!(est.iter().all(|e| e.low_confidence));
    }
}
