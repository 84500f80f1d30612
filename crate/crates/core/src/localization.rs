//! Joint position and heading recovery from measured AoAs.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

pub use crate::crlb::AnchorSpec;
use crate::error::{Error, Result};
use crate::math::{wrap_angle, wrap_positive};
use crate::scenario::{Point2, VehiclePose};

/// Body-frame AoA of `tx` measured at `rx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub rx: usize,
    pub tx: usize,
    pub theta: f64,
    /// AoA error variance (rad^2), required by the weighted solver.
    pub variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AoAMeasurementSet {
    pub vehicles: usize,
    pub entries: Vec<Measurement>,
    pub discarded: Vec<(usize, usize)>,
}

impl AoAMeasurementSet {
    pub fn new(vehicles: usize) -> Self {
        Self { vehicles, entries: Vec::new(), discarded: Vec::new() }
    }

    pub fn push(&mut self, m: Measurement) -> Result<()> {
        if m.rx >= self.vehicles || m.tx >= self.vehicles || m.rx == m.tx {
            return Err(Error::Dimension { expected: self.vehicles, got: m.rx.max(m.tx) + 1 });
        }
        if self.contains(m.rx, m.tx) {
            return Err(Error::Domain("duplicate measurement for a link"));
        }
        self.entries.push(m);
        Ok(())
    }

    pub fn contains(&self, rx: usize, tx: usize) -> bool {
        self.entries.iter().any(|e| e.rx == rx && e.tx == tx) || self.discarded.contains(&(rx, tx))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Counting rule on the raw totals, `measurements - discarded >= 3 N_v`.
    pub fn feasibility(&self) -> Feasibility {
        feasibility_check(self.vehicles, self.entries.len() + self.discarded.len(), self.discarded.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    UnderDetermined,
}

pub fn feasibility_check(vehicles: usize, measurements: usize, discarded: usize) -> Feasibility {
    if measurements >= discarded && measurements - discarded >= 3 * vehicles {
        Feasibility::Feasible
    } else {
        Feasibility::UnderDetermined
    }
}

/// Moves every link whose received power is below `threshold` into the
/// discarded list.
pub fn discard_low_power(vehicles: usize, links: &[(Measurement, f64)], threshold: f64) -> Result<AoAMeasurementSet> {
    if !(threshold >= 0.0) {
        return Err(Error::Domain("power threshold must be non-negative"));
    }
    let mut set = AoAMeasurementSet::new(vehicles);
    for (m, power) in links {
        if *power < threshold {
            if set.contains(m.rx, m.tx) {
                return Err(Error::Domain("duplicate measurement for a link"));
            }
            set.discarded.push((m.rx, m.tx));
        } else {
            set.push(*m)?;
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GaugeMode {
    /// One vehicle's pose and its distance to a second vehicle are known.
    #[default]
    Anchored,
    /// Solved in an arbitrary frame, then aligned to truth by a similarity.
    SimilarityAligned,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub multistart_count: usize,
    pub damping_init: f64,
    pub anchor: AnchorSpec,
    pub gauge: GaugeMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: 1e-10,
            multistart_count: 32,
            damping_init: 1e-3,
            anchor: AnchorSpec::default(),
            gauge: GaugeMode::Anchored,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.multistart_count == 0 {
            return Err(Error::Config("solver iteration and start counts must be positive"));
        }
        if !(self.gradient_tolerance > 0.0) || !(self.damping_init > 0.0) {
            return Err(Error::Config("solver tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub omega: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, omega: f64) -> Self {
        Self { x, y, omega }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

impl From<&VehiclePose> for Pose {
    fn from(v: &VehiclePose) -> Self {
        Pose::new(v.position.x, v.position.y, v.heading)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate {
    pub poses: Vec<Pose>,
    /// Final (weighted) sum of squared wrapped residuals.
    pub residual: f64,
    pub gauge: GaugeMode,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after each accepted step of the winning start.
    pub history: Vec<f64>,
}

/// Side information for the gauge and for initialization.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveContext {
    /// Known pose of the anchor vehicle (anchored mode).
    pub anchor_pose: Option<Pose>,
    /// Known anchor-to-baseline distance (anchored mode).
    pub baseline: Option<f64>,
    /// Region for random initial positions.
    pub bounds: Option<(Point2, Point2)>,
    /// Optional extra starting point, tried first.
    pub initial: Option<Vec<Pose>>,
}

/// Sum of squared wrapped residuals, optionally weighted by inverse variance.
pub fn objective(meas: &AoAMeasurementSet, poses: &[Pose], weighted: bool) -> f64 {
    meas.entries
        .iter()
        .map(|m| {
            let r = residual(m, poses);
            let w = if weighted { m.variance.map_or(1.0, |v| 1.0 / v) } else { 1.0 };
            w * r * r
        })
        .sum()
}

fn residual(m: &Measurement, poses: &[Pose]) -> f64 {
    let a = poses[m.rx];
    let b = poses[m.tx];
    wrap_angle((b.y - a.y).atan2(b.x - a.x) - a.omega - m.theta)
}

/// Unweighted sensing-equation least squares.
pub fn solve_se<R: Rng + ?Sized>(
    meas: &AoAMeasurementSet,
    opts: &SolverOptions,
    ctx: &SolveContext,
    rng: &mut R,
) -> Result<PoseEstimate> {
    let weights = alloc::vec![1.0; meas.entries.len()];
    solve_weighted(meas, &weights, opts, ctx, rng)
}

/// Inverse-variance weighted least squares (Gaussian maximum likelihood).
pub fn solve_ml<R: Rng + ?Sized>(
    meas: &AoAMeasurementSet,
    opts: &SolverOptions,
    ctx: &SolveContext,
    rng: &mut R,
) -> Result<PoseEstimate> {
    let mut weights = Vec::with_capacity(meas.entries.len());
    for m in &meas.entries {
        let v = m.variance.ok_or(Error::MissingVariance(m.rx, m.tx))?;
        if !(v > 0.0) {
            return Err(Error::MissingVariance(m.rx, m.tx));
        }
        weights.push(1.0 / v);
    }
    // The minimizer is unchanged by a common factor; unit mean keeps the
    // damping well scaled.
    let finite: Vec<f64> = weights.iter().copied().filter(|w| *w > 0.0).collect();
    if !finite.is_empty() {
        let mean = finite.iter().sum::<f64>() / finite.len() as f64;
        weights.iter_mut().for_each(|w| *w /= mean);
    }
    solve_weighted(meas, &weights, opts, ctx, rng)
}

/// Free parameters: the baseline vehicle's bearing from the anchor, the
/// other positions, and every heading but the anchor's.
struct Layout {
    nv: usize,
    anchor: usize,
    baseline: usize,
    anchor_pose: Pose,
    distance: f64,
    /// Parameter slot of `(x, y)` per vehicle (`None` for anchor/baseline).
    pos: Vec<Option<usize>>,
    /// Parameter slot of `omega` per vehicle (`None` for the anchor).
    head: Vec<Option<usize>>,
    size: usize,
}

impl Layout {
    fn new(nv: usize, anchor: AnchorSpec, anchor_pose: Pose, distance: f64) -> Self {
        let mut pos = alloc::vec![None; nv];
        let mut head = alloc::vec![None; nv];
        let mut next = 1;
        for k in 0..nv {
            if k != anchor.anchor && k != anchor.baseline {
                pos[k] = Some(next);
                next += 2;
            }
        }
        for k in 0..nv {
            if k != anchor.anchor {
                head[k] = Some(next);
                next += 1;
            }
        }
        Self {
            nv,
            anchor: anchor.anchor,
            baseline: anchor.baseline,
            anchor_pose,
            distance,
            pos,
            head,
            size: next,
        }
    }

    fn poses(&self, p: &[f64]) -> Vec<Pose> {
        let a = self.anchor_pose;
        (0..self.nv)
            .map(|k| {
                let omega = self.head[k].map_or(a.omega, |i| p[i]);
                if k == self.anchor {
                    a
                } else if k == self.baseline {
                    let (s, c) = p[0].sin_cos();
                    Pose::new(a.x + self.distance * c, a.y + self.distance * s, omega)
                } else {
                    let i = self.pos[k].unwrap();
                    Pose::new(p[i], p[i + 1], omega)
                }
            })
            .collect()
    }

    fn params(&self, poses: &[Pose]) -> Vec<f64> {
        let mut p = alloc::vec![0.0; self.size];
        let a = self.anchor_pose;
        let b = poses[self.baseline];
        p[0] = (b.y - a.y).atan2(b.x - a.x);
        for k in 0..self.nv {
            if let Some(i) = self.pos[k] {
                p[i] = poses[k].x;
                p[i + 1] = poses[k].y;
            }
            if let Some(i) = self.head[k] {
                p[i] = wrap_positive(poses[k].omega);
            }
        }
        p
    }

    /// Adds `coef * d(position_k)` into a Jacobian row.
    fn add_position(&self, row: &mut [f64], k: usize, gx: f64, gy: f64, p: &[f64]) {
        if k == self.baseline {
            let (s, c) = p[0].sin_cos();
            row[0] += self.distance * (-s * gx + c * gy);
        } else if let Some(i) = self.pos[k] {
            row[i] += gx;
            row[i + 1] += gy;
        }
    }
}

fn evaluate(
    layout: &Layout,
    meas: &AoAMeasurementSet,
    sqrt_w: &[f64],
    p: &[f64],
    jac: Option<&mut DMatrix<f64>>,
) -> (DVector<f64>, f64) {
    let poses = layout.poses(p);
    let m = meas.entries.len();
    let mut r = DVector::<f64>::zeros(m);
    let mut jac = jac;
    if let Some(j) = jac.as_deref_mut() {
        j.fill(0.0);
    }
    for (row, (e, sw)) in meas.entries.iter().zip(sqrt_w).enumerate() {
        r[row] = sw * residual(e, &poses);
        if let Some(j) = jac.as_deref_mut() {
            let a = poses[e.rx];
            let b = poses[e.tx];
            let dx = b.x - a.x;
            let dy = b.y - a.y;
            let d2 = (dx * dx + dy * dy).max(1e-300);
            let mut buf = alloc::vec![0.0; layout.size];
            layout.add_position(&mut buf, e.rx, dy / d2, -dx / d2, p);
            layout.add_position(&mut buf, e.tx, -dy / d2, dx / d2, p);
            if let Some(i) = layout.head[e.rx] {
                buf[i] -= 1.0;
            }
            for (c, v) in buf.iter().enumerate() {
                j[(row, c)] = sw * v;
            }
        }
    }
    let cost = r.norm_squared();
    (r, cost)
}

struct RunResult {
    params: Vec<f64>,
    cost: f64,
    converged: bool,
    iterations: usize,
    history: Vec<f64>,
}

fn levenberg_marquardt(
    layout: &Layout,
    meas: &AoAMeasurementSet,
    sqrt_w: &[f64],
    start: Vec<f64>,
    opts: &SolverOptions,
) -> RunResult {
    let n = layout.size;
    let m = meas.entries.len();
    let mut p = start;
    let mut jac = DMatrix::<f64>::zeros(m, n);
    let (mut r, mut cost) = evaluate(layout, meas, sqrt_w, &p, Some(&mut jac));
    let mut lambda = opts.damping_init;
    let mut converged = false;
    let mut iterations = 0;
    let mut history = alloc::vec![cost];
    while iterations < opts.max_iterations {
        iterations += 1;
        let jt = jac.transpose();
        let grad = &jt * &r;
        if grad.amax() <= opts.gradient_tolerance || cost <= 1e-30 {
            converged = true;
            break;
        }
        let jtj = &jt * &jac;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * (jtj[(i, i)] + 1e-9);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let (r_new, cost_new) = evaluate(layout, meas, sqrt_w, &trial, None);
            if cost_new < cost {
                let small_step = step.amax() <= 1e-12 * (1.0 + p.iter().fold(0.0f64, |acc, v| acc.max(v.abs())));
                let small_gain = cost - cost_new <= 1e-15 * cost;
                p = trial;
                for k in 0..layout.nv {
                    if let Some(i) = layout.head[k] {
                        p[i] = wrap_positive(p[i]);
                    }
                }
                p[0] = wrap_angle(p[0]);
                r = r_new;
                cost = cost_new;
                history.push(cost);
                let _ = evaluate(layout, meas, sqrt_w, &p, Some(&mut jac));
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if small_step || small_gain {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No descent direction left at any damping: a stationary point
            // to working precision.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    RunResult { params: p, cost, converged, iterations, history }
}

/// Heading that best explains the measurements at `k` given positions.
fn heading_guess(meas: &AoAMeasurementSet, poses: &[Pose], k: usize) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for m in meas.entries.iter().filter(|m| m.rx == k) {
        let a = poses[k];
        let b = poses[m.tx];
        let bearing = (b.y - a.y).atan2(b.x - a.x);
        acc += Complex64::from_polar(1.0, bearing - m.theta);
    }
    if acc.norm() == 0.0 {
        poses[k].omega
    } else {
        wrap_positive(acc.arg())
    }
}

fn check_problem(meas: &AoAMeasurementSet, opts: &SolverOptions) -> Result<()> {
    opts.validate()?;
    let nv = meas.vehicles;
    opts.anchor.validate(nv)?;
    for e in &meas.entries {
        if e.rx >= nv || e.tx >= nv {
            return Err(Error::Dimension { expected: nv, got: e.rx.max(e.tx) + 1 });
        }
    }
    let unknowns = 3 * nv - 4;
    let equations = meas.entries.len();
    if equations < unknowns {
        return Err(Error::UnderDetermined { equations, unknowns });
    }
    Ok(())
}

fn solve_weighted<R: Rng + ?Sized>(
    meas: &AoAMeasurementSet,
    weights: &[f64],
    opts: &SolverOptions,
    ctx: &SolveContext,
    rng: &mut R,
) -> Result<PoseEstimate> {
    check_problem(meas, opts)?;
    let nv = meas.vehicles;
    let (anchor_pose, distance, bounds) = match opts.gauge {
        GaugeMode::Anchored => {
            let pose = ctx.anchor_pose.ok_or(Error::GaugeDeficient("anchored mode needs the anchor pose"))?;
            let d = ctx.baseline.ok_or(Error::GaugeDeficient("anchored mode needs the baseline distance"))?;
            if !(d > 0.0) {
                return Err(Error::GaugeDeficient("baseline distance must be positive"));
            }
            let bounds = ctx.bounds.unwrap_or((
                Point2::new(pose.x - 4.0 * d, pose.y - 4.0 * d),
                Point2::new(pose.x + 4.0 * d, pose.y + 4.0 * d),
            ));
            (pose, d, bounds)
        }
        GaugeMode::SimilarityAligned => (
            Pose::new(0.0, 0.0, 0.0),
            1.0,
            (Point2::new(-4.0, -4.0), Point2::new(4.0, 4.0)),
        ),
    };
    let layout = Layout::new(nv, opts.anchor, anchor_pose, distance);
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(opts.multistart_count + 1);
    if let Some(init) = &ctx.initial {
        if init.len() != nv {
            return Err(Error::Dimension { expected: nv, got: init.len() });
        }
        starts.push(layout.params(init));
    }
    for _ in 0..opts.multistart_count {
        let mut poses: Vec<Pose> = (0..nv)
            .map(|_| {
                Pose::new(
                    bounds.0.x + rng.random::<f64>() * (bounds.1.x - bounds.0.x),
                    bounds.0.y + rng.random::<f64>() * (bounds.1.y - bounds.0.y),
                    0.0,
                )
            })
            .collect();
        poses[layout.anchor] = anchor_pose;
        let phi = rng.random::<f64>() * 2.0 * PI;
        poses[layout.baseline].x = anchor_pose.x + distance * phi.cos();
        poses[layout.baseline].y = anchor_pose.y + distance * phi.sin();
        for k in 0..nv {
            if k != layout.anchor {
                poses[k].omega = heading_guess(meas, &poses, k);
            }
        }
        starts.push(layout.params(&poses));
    }

    let mut best: Option<RunResult> = None;
    for start in starts {
        let run = levenberg_marquardt(&layout, meas, &sqrt_w, start, opts);
        if best.as_ref().is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    Ok(PoseEstimate {
        poses: layout.poses(&best.params),
        residual: best.cost,
        gauge: opts.gauge,
        converged: best.converged,
        iterations: best.iterations,
        history: best.history,
    })
}

/// Applies the least-squares similarity (scale, rotation, translation)
/// that maps the estimated positions onto `truth`; headings are rotated.
pub fn align_similarity(estimate: &PoseEstimate, truth: &[Pose]) -> Result<PoseEstimate> {
    let n = estimate.poses.len();
    if truth.len() != n {
        return Err(Error::Dimension { expected: n, got: truth.len() });
    }
    if n < 2 {
        return Err(Error::DegenerateGeometry("alignment needs at least two vehicles"));
    }
    let z = |p: &Pose| Complex64::new(p.x, p.y);
    let ce: Complex64 = estimate.poses.iter().map(z).sum::<Complex64>() / n as f64;
    let ct: Complex64 = truth.iter().map(z).sum::<Complex64>() / n as f64;
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    for (e, t) in estimate.poses.iter().zip(truth) {
        let a = z(e) - ce;
        num += a.conj() * (z(t) - ct);
        den += a.norm_sqr();
    }
    if !(den > 0.0) {
        return Err(Error::DegenerateGeometry("estimated positions coincide"));
    }
    let q = num / den;
    let rotation = q.arg();
    let poses = estimate
        .poses
        .iter()
        .map(|p| {
            let w = q * (z(p) - ce) + ct;
            Pose::new(w.re, w.im, wrap_positive(p.omega + rotation))
        })
        .collect();
    Ok(PoseEstimate { poses, ..estimate.clone() })
}

/// Exact body-frame AoAs between every ordered pair in `links`.
pub fn exact_measurements(poses: &[Pose], links: &[(usize, usize)]) -> Result<AoAMeasurementSet> {
    let mut set = AoAMeasurementSet::new(poses.len());
    for &(rx, tx) in links {
        let theta = crate::scenario::true_aoa(poses[rx].position(), poses[tx].position(), poses[rx].omega)?;
        set.push(Measurement { rx, tx, theta, variance: None })?;
    }
    Ok(set)
}

/// Every ordered pair of `n` vehicles.
pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1));
    for rx in 0..n {
        for tx in 0..n {
            if rx != tx {
                out.push((rx, tx));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square() -> Vec<Pose> {
        vec![
            Pose::new(0.0, 0.0, 0.3),
            Pose::new(20.0, 0.0, 1.9),
            Pose::new(20.0, 20.0, 3.5),
            Pose::new(0.0, 20.0, 5.0),
        ]
    }

    fn anchored_ctx(truth: &[Pose]) -> SolveContext {
        SolveContext {
            anchor_pose: Some(truth[0]),
            baseline: Some(truth[0].position().distance(&truth[1].position())),
            bounds: Some((Point2::new(-10.0, -10.0), Point2::new(30.0, 30.0))),
            initial: None,
        }
    }

    #[test]
    fn feasibility_examples() {
        assert_eq!(feasibility_check(4, 12, 0), Feasibility::Feasible);
        assert_eq!(feasibility_check(3, 6, 0), Feasibility::UnderDetermined);
        assert_eq!(feasibility_check(5, 20, 6), Feasibility::UnderDetermined);
        assert_eq!(feasibility_check(4, 12, 2), Feasibility::UnderDetermined);
    }

    #[test]
    fn discard_examples() {
        let truth = square();
        let exact = exact_measurements(&truth, &all_pairs(4)).unwrap();
        let links: Vec<(Measurement, f64)> =
            exact.entries.iter().enumerate().map(|(i, m)| (*m, if i < 2 { 0.1 } else { 1.0 })).collect();
        let none = discard_low_power(4, &links, 0.0).unwrap();
        assert!(none.discarded.is_empty());
        let two = discard_low_power(4, &links, 0.5).unwrap();
        assert_eq!(two.discarded.len(), 2);
        assert_eq!(two.feasibility(), Feasibility::UnderDetermined);
        let all = discard_low_power(4, &links, 10.0).unwrap();
        assert!(all.entries.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let opts = SolverOptions::default();
        assert!(matches!(
            solve_se(&all, &opts, &anchored_ctx(&truth), &mut rng),
            Err(Error::UnderDetermined { .. })
        ));
    }

    #[test]
    fn noiseless_square_recovered() {
        let truth = square();
        let meas = exact_measurements(&truth, &all_pairs(4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let est = solve_se(&meas, &SolverOptions::default(), &anchored_ctx(&truth), &mut rng).unwrap();
        assert!(est.residual <= 1e-12, "residual {}", est.residual);
        for (e, t) in est.poses.iter().zip(&truth) {
            assert!((e.x - t.x).abs() < 1e-6 && (e.y - t.y).abs() < 1e-6);
            assert!(wrap_angle(e.omega - t.omega).abs() < 1e-8);
        }
    }

    #[test]
    fn similarity_mode_aligns_to_truth() {
        let truth = square();
        let meas = exact_measurements(&truth, &all_pairs(4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let opts = SolverOptions { gauge: GaugeMode::SimilarityAligned, ..Default::default() };
        let est = solve_se(&meas, &opts, &SolveContext::default(), &mut rng).unwrap();
        let aligned = align_similarity(&est, &truth).unwrap();
        for (e, t) in aligned.poses.iter().zip(&truth) {
            assert!(e.position().distance(&t.position()) < 1e-6);
            assert!(wrap_angle(e.omega - t.omega).abs() < 1e-8);
        }
    }

    #[test]
    fn objective_is_similarity_invariant() {
        let truth = square();
        let mut meas = exact_measurements(&truth, &all_pairs(4)).unwrap();
        for (i, m) in meas.entries.iter_mut().enumerate() {
            m.theta += 0.01 * (i as f64 - 5.0);
        }
        let base = objective(&meas, &truth, false);
        let scaled: Vec<Pose> = truth.iter().map(|p| Pose::new(2.0 * p.x, 2.0 * p.y, p.omega)).collect();
        assert!((objective(&meas, &scaled, false) - base).abs() < 1e-12);
        let rot = 0.7f64;
        let moved: Vec<Pose> = truth
            .iter()
            .map(|p| {
                let (s, c) = rot.sin_cos();
                Pose::new(c * p.x - s * p.y + 5.0, s * p.x + c * p.y - 3.0, p.omega + rot)
            })
            .collect();
        assert!((objective(&meas, &moved, false) - base).abs() < 1e-12);
    }

    #[test]
    fn objective_continuous_across_branch_cut() {
        let poses = [Pose::new(0.0, 0.0, 0.0), Pose::new(-10.0, 0.0, 0.0)];
        let mut set = AoAMeasurementSet::new(2);
        set.push(Measurement { rx: 0, tx: 1, theta: PI, variance: None }).unwrap();
        let above = [poses[0], Pose::new(-10.0, 1e-9, 0.0)];
        let below = [poses[0], Pose::new(-10.0, -1e-9, 0.0)];
        assert!(objective(&set, &above, false) < 1e-18);
        assert!(objective(&set, &below, false) < 1e-18);
    }

    #[test]
    fn equal_weights_match_se() {
        let truth = square();
        let mut meas = exact_measurements(&truth, &all_pairs(4)).unwrap();
        for (i, m) in meas.entries.iter_mut().enumerate() {
            m.theta += 0.003 * ((i * 7 % 5) as f64 - 2.0);
            m.variance = Some(2.5e-4);
        }
        let opts = SolverOptions::default();
        let ctx = anchored_ctx(&truth);
        let a = solve_se(&meas, &opts, &ctx, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = solve_ml(&meas, &opts, &ctx, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        for (p, q) in a.poses.iter().zip(&b.poses) {
            assert!((p.x - q.x).abs() < 1e-9 && (p.y - q.y).abs() < 1e-9);
        }
    }

    #[test]
    fn infinite_variance_drops_link() {
        let truth = [
            Pose::new(0.0, 0.0, 0.3),
            Pose::new(20.0, 0.0, 1.9),
            Pose::new(20.0, 20.0, 3.5),
            Pose::new(0.0, 20.0, 5.0),
            Pose::new(8.0, 31.0, 2.0),
        ];
        let mut meas = exact_measurements(&truth, &all_pairs(5)).unwrap();
        for (i, m) in meas.entries.iter_mut().enumerate() {
            m.theta += 0.004 * ((i * 3 % 7) as f64 - 3.0);
            m.variance = Some(if i == 6 { f64::INFINITY } else { 1.0 });
        }
        let mut reduced = meas.clone();
        reduced.entries.remove(6);
        let opts = SolverOptions::default();
        let ctx = anchored_ctx(&truth);
        let a = solve_ml(&meas, &opts, &ctx, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let b = solve_se(&reduced, &opts, &ctx, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        for (p, q) in a.poses.iter().zip(&b.poses) {
            assert!((p.x - q.x).abs() < 1e-7 && (p.y - q.y).abs() < 1e-7);
        }
    }

    #[test]
    fn ml_requires_variances() {
        let truth = square();
        let meas = exact_measurements(&truth, &all_pairs(4)).unwrap();
        let r = solve_ml(&meas, &SolverOptions::default(), &anchored_ctx(&truth), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(Error::MissingVariance(_, _))));
    }

    #[test]
    fn anchored_needs_context() {
        let truth = square();
        let meas = exact_measurements(&truth, &all_pairs(4)).unwrap();
        let r = solve_se(&meas, &SolverOptions::default(), &SolveContext::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(Error::GaugeDeficient(_))));
        let bad = SolverOptions { anchor: AnchorSpec { anchor: 1, baseline: 1 }, ..Default::default() };
        let r = solve_se(&meas, &bad, &anchored_ctx(&truth), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(Error::GaugeDeficient(_))));
    }

    #[test]
    fn alignment_examples() {
        let truth = square();
        let same = PoseEstimate { poses: truth.clone(), residual: 0.0, gauge: GaugeMode::SimilarityAligned, converged: true, iterations: 0, history: Vec::new() };
        let a = align_similarity(&same, &truth).unwrap();
        for (p, q) in a.poses.iter().zip(&truth) {
            assert!((p.x - q.x).abs() < 1e-12 && (p.y - q.y).abs() < 1e-12);
        }
        let rot = 30f64.to_radians();
        let (s, c) = rot.sin_cos();
        let rotated: Vec<Pose> = truth
            .iter()
            .map(|p| Pose::new(c * p.x - s * p.y, s * p.x + c * p.y, p.omega + rot))
            .collect();
        let est = PoseEstimate { poses: rotated, ..same.clone() };
        let a = align_similarity(&est, &truth).unwrap();
        for (p, q) in a.poses.iter().zip(&truth) {
            assert!(p.position().distance(&q.position()) < 1e-9);
            assert!(wrap_angle(p.omega - q.omega).abs() < 1e-12);
        }
        let collapsed = PoseEstimate { poses: vec![Pose::new(1.0, 1.0, 0.0); 4], ..same };
        assert!(matches!(align_similarity(&collapsed, &truth), Err(Error::DegenerateGeometry(_))));
    }
}
