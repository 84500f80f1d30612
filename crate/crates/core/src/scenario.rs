//! Street-intersection vehicle placement and link geometry.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::math::{wrap_angle, wrap_positive};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehiclePose {
    pub position: Point2,
    /// Heading w.r.t. the X-axis in `[0, 2 pi)`.
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl VehiclePose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Point2::new(x, y),
            heading: wrap_positive(heading),
            length: 4.7,
            width: 1.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionSpec {
    pub roads: usize,
    pub lanes_per_direction: usize,
    pub lane_width: f64,
    pub road_length: f64,
    pub comm_radius: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
}

impl Default for IntersectionSpec {
    fn default() -> Self {
        Self {
            roads: 3,
            lanes_per_direction: 2,
            lane_width: 5.0,
            road_length: 30.0,
            comm_radius: 50.0,
            vehicle_length: 4.7,
            vehicle_width: 1.8,
        }
    }
}

/// Centerline of one lane: vehicles sit at `start + s * direction` for
/// `s` in `[0, road_length]` and drive along `heading`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lane {
    pub road: usize,
    pub start: Point2,
    pub direction: Point2,
    pub heading: f64,
    pub inbound: bool,
}

impl IntersectionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.roads == 0 || self.lanes_per_direction == 0 {
            return Err(Error::Config("intersection needs at least one road and lane"));
        }
        let positive = [
            self.lane_width,
            self.road_length,
            self.comm_radius,
            self.vehicle_length,
            self.vehicle_width,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("intersection dimensions must be positive"));
        }
        Ok(())
    }

    pub fn lane_count(&self) -> usize {
        self.roads * self.lanes_per_direction * 2
    }

    /// Roads radiate from the origin at equal angular spacing and start at
    /// the edge of the junction box. Traffic keeps to the right.
    pub fn lanes(&self) -> Vec<Lane> {
        let junction = self.lanes_per_direction as f64 * self.lane_width;
        let mut lanes = Vec::with_capacity(self.lane_count());
        for road in 0..self.roads {
            let angle = 2.0 * PI * road as f64 / self.roads as f64;
            let (s, c) = angle.sin_cos();
            let along = Point2::new(c, s);
            let left = Point2::new(-s, c);
            for i in 0..self.lanes_per_direction {
                let offset = (i as f64 + 0.5) * self.lane_width;
                for inbound in [false, true] {
                    let side = if inbound { offset } else { -offset };
                    let start = Point2::new(
                        along.x * junction + left.x * side,
                        along.y * junction + left.y * side,
                    );
                    let heading = if inbound { angle + PI } else { angle };
                    lanes.push(Lane {
                        road,
                        start,
                        direction: along,
                        heading: wrap_positive(heading),
                        inbound,
                    });
                }
            }
        }
        lanes
    }

    /// Axis-aligned bounding box `(min, max)` of every lane position.
    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for lane in self.lanes() {
            for s in [0.0, self.road_length] {
                let p = lane.point(s);
                lo.x = lo.x.min(p.x);
                lo.y = lo.y.min(p.y);
                hi.x = hi.x.max(p.x);
                hi.y = hi.y.max(p.y);
            }
        }
        (lo, hi)
    }
}

impl Lane {
    pub fn point(&self, s: f64) -> Point2 {
        Point2::new(
            self.start.x + self.direction.x * s,
            self.start.y + self.direction.y * s,
        )
    }
}

/// One directed link: `tx` as seen by the array of `rx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub rx: usize,
    pub tx: usize,
    /// True AoA in the receiver body frame, `(-pi, pi]`.
    pub aoa: f64,
    pub distance: f64,
    /// Receiver orientation relative to the common reference frame.
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub vehicles: Vec<VehiclePose>,
    pub links: Vec<Link>,
    pub neighbors: Vec<Vec<usize>>,
}

impl Scenario {
    /// Builds the links between every pair within `comm_radius`.
    pub fn from_vehicles(vehicles: Vec<VehiclePose>, comm_radius: f64) -> Result<Self> {
        let nv = vehicles.len();
        let mut links = Vec::new();
        let mut neighbors = Vec::with_capacity(nv);
        for k in 0..nv {
            let mut set = Vec::new();
            for j in 0..nv {
                if j == k {
                    continue;
                }
                let d = vehicles[k].position.distance(&vehicles[j].position);
                if d <= comm_radius {
                    let omega = vehicles[k].heading;
                    let aoa = true_aoa(vehicles[k].position, vehicles[j].position, omega)?;
                    links.push(Link { rx: k, tx: j, aoa, distance: d, omega });
                    set.push(j);
                }
            }
            neighbors.push(set);
        }
        Ok(Self { vehicles, links, neighbors })
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    pub fn is_fully_connected(&self) -> bool {
        let nv = self.len();
        self.links.len() == nv * nv.saturating_sub(1)
    }

    /// Links whose AoA falls inside the angular view of the facing array.
    pub fn links_within_view(&self, view_half_angle: f64) -> impl Iterator<Item = &Link> {
        self.links
            .iter()
            .filter(move |l| facing_array(l.aoa).1.abs() <= view_half_angle + 1e-12)
    }
}

/// Geometric AoA `atan2(y_j - y_k, x_j - x_k) - omega` wrapped to `(-pi, pi]`.
pub fn true_aoa(p_k: Point2, p_j: Point2, omega: f64) -> Result<f64> {
    let dx = p_j.x - p_k.x;
    let dy = p_j.y - p_k.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::DegenerateGeometry("coincident vehicle positions"));
    }
    Ok(wrap_angle(dy.atan2(dx) - omega))
}

/// Linear path gain `1/rho = zeta^2(d) (lambda / (4 pi d))^2` with the
/// atmospheric attenuation given in dB/km.
pub fn pathloss_inv(distance: f64, wavelength: f64, atten_db_per_km: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain("link distance must be positive"));
    }
    let zeta2 = Float::powf(10.0, -atten_db_per_km * distance / 10_000.0);
    let fs = wavelength / (4.0 * PI * distance);
    Ok(zeta2 * fs * fs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayFace {
    Front,
    Rear,
}

/// Splits a body-frame AoA between the front and rear arrays. The rear
/// array sees the reflection of the angle into `[-pi/2, pi/2]`.
pub fn facing_array(theta: f64) -> (ArrayFace, f64) {
    let t = wrap_angle(theta);
    if t > FRAC_PI_2 {
        (ArrayFace::Rear, PI - t)
    } else if t < -FRAC_PI_2 {
        (ArrayFace::Rear, -PI - t)
    } else {
        (ArrayFace::Front, t)
    }
}

/// Inverse of [`facing_array`].
pub fn body_angle(face: ArrayFace, local: f64) -> f64 {
    match face {
        ArrayFace::Front => wrap_angle(local),
        ArrayFace::Rear => wrap_angle(PI - local),
    }
}

/// Drops vehicles on every lane with an independent Poisson point process
/// of `density` vehicles per km per lane.
pub fn drop_vehicles<R: Rng + ?Sized>(
    spec: &IntersectionSpec,
    density: f64,
    rng: &mut R,
) -> Result<Scenario> {
    spec.validate()?;
    if !(density > 0.0) {
        return Err(Error::Domain("vehicle density must be positive"));
    }
    let mean = density * spec.road_length / 1000.0;
    let poisson = Poisson::new(mean).map_err(|_| Error::Domain("invalid Poisson mean"))?;
    let mut vehicles = Vec::new();
    for lane in spec.lanes() {
        let count = poisson.sample(rng) as usize;
        let mut offsets: Vec<f64> = (0..count)
            .map(|_| rng.random::<f64>() * spec.road_length)
            .collect();
        offsets.sort_by(f64::total_cmp);
        let offsets = resolve_overlaps(&offsets, spec.vehicle_length, spec.road_length);
        push_lane_vehicles(spec, &lane, &offsets, &mut vehicles);
    }
    Scenario::from_vehicles(vehicles, spec.comm_radius)
}

/// Places exactly `count` vehicles: the Poisson drop conditioned on its
/// total, i.e. i.i.d. uniform lane and offset.
pub fn drop_fixed_count<R: Rng + ?Sized>(
    spec: &IntersectionSpec,
    count: usize,
    rng: &mut R,
) -> Result<Scenario> {
    spec.validate()?;
    let lanes = spec.lanes();
    let mut per_lane: Vec<Vec<f64>> = (0..lanes.len()).map(|_| Vec::new()).collect();
    for _ in 0..count {
        let lane = rng.random_range(0..lanes.len());
        per_lane[lane].push(rng.random::<f64>() * spec.road_length);
    }
    let mut vehicles = Vec::with_capacity(count);
    for (lane, offsets) in lanes.iter().zip(per_lane.iter_mut()) {
        offsets.sort_by(f64::total_cmp);
        let offsets = resolve_overlaps(offsets, spec.vehicle_length, spec.road_length);
        push_lane_vehicles(spec, lane, &offsets, &mut vehicles);
    }
    Scenario::from_vehicles(vehicles, spec.comm_radius)
}

fn push_lane_vehicles(
    spec: &IntersectionSpec,
    lane: &Lane,
    offsets: &[f64],
    out: &mut Vec<VehiclePose>,
) {
    for &s in offsets {
        let p = lane.point(s);
        out.push(VehiclePose {
            position: p,
            heading: lane.heading,
            length: spec.vehicle_length,
            width: spec.vehicle_width,
        });
    }
}

/// Moves sorted lane offsets by the least total squared shift so that
/// neighbours are at least `gap` apart and all stay on `[0, length]`.
/// Vehicles beyond the lane capacity are dropped from the far end.
pub fn resolve_overlaps(sorted: &[f64], gap: f64, length: f64) -> Vec<f64> {
    let capacity = (length / gap).floor() as usize + 1;
    let n = sorted.len().min(capacity);
    if n == 0 {
        return Vec::new();
    }
    // With t_i = s_i - i*gap the constraints become t nondecreasing on
    // [0, length - (n-1) gap]; isotonic regression then clamping is optimal.
    let target: Vec<f64> = sorted[..n]
        .iter()
        .enumerate()
        .map(|(i, s)| s - i as f64 * gap)
        .collect();
    let fitted = isotonic_fit(&target);
    let upper = length - (n - 1) as f64 * gap;
    fitted
        .iter()
        .enumerate()
        .map(|(i, t)| t.clamp(0.0, upper.max(0.0)) + i as f64 * gap)
        .collect()
}

/// Pool-adjacent-violators fit of a nondecreasing sequence.
fn isotonic_fit(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m1, c1) = blocks[blocks.len() - 1];
            let (m0, c0) = blocks[blocks.len() - 2];
            if m0 <= m1 {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().unwrap();
            *last = ((m0 * c0 as f64 + m1 * c1 as f64) / (c0 + c1) as f64, c0 + c1);
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (m, c) in blocks {
        out.extend(core::iter::repeat_n(m, c));
    }
    out
}
