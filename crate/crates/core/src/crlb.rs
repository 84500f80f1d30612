//! AoA Cramér–Rao bounds and the cooperative-localization FIM / PEB.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::array_model::{lens_amplitude, ArrayConfig, ArrayKind};
use crate::error::{Error, Result};
use crate::math::sinc;
use crate::math::sinc_deriv;
use crate::scenario::{Point2, Scenario};

/// Selects between the constants exactly as printed and the standard
/// Gaussian-likelihood forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    #[default]
    PaperExact,
    Textbook,
}

const COS_FLOOR: f64 = 1e-12;

fn cos2(theta: f64) -> Result<f64> {
    let c = theta.cos();
    if c.abs() < COS_FLOOR {
        return Err(Error::SingularGeometry("cos(theta) = 0 at endfire"));
    }
    Ok(c * c)
}

/// ULA bound `6 s2 / (N (N^2 - 1) d^2 cos^2)`; the textbook variant adds
/// the `(2 pi)^2` phase factor.
pub fn crlb_ula(cfg: &ArrayConfig, theta: f64, sigma2: f64, variant: Variant) -> Result<f64> {
    if cfg.kind != ArrayKind::Ula {
        return Err(Error::Config("ULA bound requested for a lens array"));
    }
    let c2 = cos2(theta)?;
    let n = cfg.n as f64;
    let d = cfg.ula_spacing;
    let mut denom = n * (n * n - 1.0) * d * d * c2;
    if variant == Variant::Textbook {
        denom *= 4.0 * PI * PI;
    }
    Ok(6.0 * sigma2 / denom)
}

/// Lens bound with the path gain as a nuisance parameter:
/// `(s2/2) |a|^2 / (|a|^2 |a'|^2 - (a.a')^2)`.
pub fn crlb_lens(cfg: &ArrayConfig, theta: f64, sigma2: f64) -> Result<f64> {
    if cfg.kind != ArrayKind::Lens {
        return Err(Error::Config("lens bound requested for a ULA"));
    }
    cos2(theta)?;
    let a = lens_amplitude(cfg, theta);
    let aa: f64 = a.values.iter().map(|v| v * v).sum();
    let dd: f64 = a.derivs.iter().map(|v| v * v).sum();
    let ad: f64 = a.values.iter().zip(&a.derivs).map(|(v, d)| v * d).sum();
    let det = aa * dd - ad * ad;
    if !(det > 1e-300 * aa.max(1.0)) {
        return Err(Error::SingularGeometry("lens information determinant vanishes"));
    }
    Ok(0.5 * sigma2 * aa / det)
}

/// Normalized lens patterns: `mu1[n] = sinc(u_n)`, `mu2[n] = -sinc'(u_n)`
/// with `u_n = L (sin th_n - sin th)`, so that `a = (L/sqrt x) mu1` and
/// `da/dth = (L^2/sqrt x) cos(th) mu2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuVectors {
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
}

impl MuVectors {
    pub fn mu1_mu1(&self) -> f64 {
        dot(&self.mu1, &self.mu1)
    }

    pub fn mu1_mu2(&self) -> f64 {
        dot(&self.mu1, &self.mu2)
    }

    pub fn mu2_mu2(&self) -> f64 {
        dot(&self.mu2, &self.mu2)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn mu_vectors(cfg: &ArrayConfig, theta: f64) -> MuVectors {
    let s = theta.sin();
    let l = cfg.aperture;
    let mut mu1 = Vec::with_capacity(cfg.n);
    let mut mu2 = Vec::with_capacity(cfg.n);
    for n in cfg.indices() {
        let u = l * (cfg.critical_sine(n) - s);
        mu1.push(sinc(u));
        mu2.push(-sinc_deriv(u));
    }
    MuVectors { mu1, mu2 }
}

fn lens_prefactor(cfg: &ArrayConfig, theta: f64, sigma2: f64) -> Result<f64> {
    if cfg.kind != ArrayKind::Lens {
        return Err(Error::Config("lens bound requested for a ULA"));
    }
    let c2 = cos2(theta)?;
    let l2 = cfg.aperture * cfg.aperture;
    Ok(cfg.array_distance * sigma2 / (2.0 * l2 * l2 * c2))
}

/// The lens bound rewritten through the mu-vectors (cross term squared).
/// Agrees with [`crlb_lens`] to rounding for any `x`.
pub fn crlb_lens_from_mu(cfg: &ArrayConfig, theta: f64, sigma2: f64) -> Result<f64> {
    let pre = lens_prefactor(cfg, theta, sigma2)?;
    let mu = mu_vectors(cfg, theta);
    let m11 = mu.mu1_mu1();
    let m12 = mu.mu1_mu2();
    let det = m11 * mu.mu2_mu2() - m12 * m12;
    if !(det > 0.0) {
        return Err(Error::SingularGeometry("lens information determinant vanishes"));
    }
    Ok(pre * m11 / det)
}

/// Lens bound after substituting `mu1.mu1 = 1` and `mu1.mu2 = 0`.
pub fn crlb_lens_simplified(cfg: &ArrayConfig, theta: f64, sigma2: f64) -> Result<f64> {
    let pre = lens_prefactor(cfg, theta, sigma2)?;
    let m22 = mu_vectors(cfg, theta).mu2_mu2();
    if !(m22 > 0.0) {
        return Err(Error::SingularGeometry("mu2 vanishes"));
    }
    Ok(pre / m22)
}

/// `(f s2 / (4 L^4 cos^2), f s2 / (2 L^4 cos^2))`.
pub fn lens_crlb_bounds(cfg: &ArrayConfig, theta: f64, sigma2: f64) -> Result<(f64, f64)> {
    if cfg.kind != ArrayKind::Lens {
        return Err(Error::Config("lens bound requested for a ULA"));
    }
    let c2 = cos2(theta)?;
    let l2 = cfg.aperture * cfg.aperture;
    let upper = cfg.focal_length * sigma2 / (2.0 * l2 * l2 * c2);
    Ok((upper / 2.0, upper))
}

/// Largest focal length (wavelength units) for which the lens bound is
/// claimed to beat a half-wavelength ULA with the same element count.
pub fn superiority_focal_limit(aperture: f64) -> Result<f64> {
    if !(aperture > 0.0) {
        return Err(Error::Domain("lens aperture must be positive"));
    }
    let l = aperture;
    Ok(12.0 * l * l * l / ((2.0 * l + 1.0) * (l + 1.0)))
}

/// One AoA measurement feeding the FIM: `rx` observes `tx` with the
/// given AoA variance (rad^2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FimLink {
    pub rx: usize,
    pub tx: usize,
    pub variance: f64,
}

/// Fisher information in `[x | y | omega]` block order.
#[derive(Debug, Clone, PartialEq)]
pub struct Fim {
    pub matrix: DMatrix<f64>,
    pub variant: Variant,
    pub vehicles: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PebReport {
    pub peb_p: f64,
    pub peb_omega: f64,
}

/// Index of `x_k`, `y_k`, `omega_k` in the stacked parameter vector.
pub fn param_index(vehicles: usize, k: usize) -> [usize; 3] {
    [k, vehicles + k, 2 * vehicles + k]
}

/// Jacobian row of `atan2(dy, dx) - omega_rx` w.r.t. the receiver's
/// `(x, y, omega)`; the transmitter's position partials are the negated
/// position entries.
pub fn aoa_gradient(p_rx: Point2, p_tx: Point2) -> Result<[f64; 3]> {
    let dx = p_tx.x - p_rx.x;
    let dy = p_tx.y - p_rx.y;
    let d2 = dx * dx + dy * dy;
    if d2 == 0.0 {
        return Err(Error::SingularGeometry("zero link distance"));
    }
    Ok([dy / d2, -dx / d2, -1.0])
}

pub fn build_fim(positions: &[Point2], links: &[FimLink], variant: Variant) -> Result<Fim> {
    let nv = positions.len();
    let mut f = DMatrix::<f64>::zeros(3 * nv, 3 * nv);
    for link in links {
        if link.rx >= nv || link.tx >= nv {
            return Err(Error::Dimension { expected: nv, got: link.rx.max(link.tx) + 1 });
        }
        if !(link.variance > 0.0) || !link.variance.is_finite() {
            return Err(Error::MissingVariance(link.rx, link.tx));
        }
        let g = aoa_gradient(positions[link.rx], positions[link.tx])?;
        let ir = param_index(nv, link.rx);
        match variant {
            Variant::PaperExact => {
                // Receiver-only diagonal sub-blocks; the printed y-derivative
                // carries the opposite sign, which is a congruence by
                // diag(1, -1, 1) and leaves every error bound unchanged.
                let sigma = link.variance.sqrt();
                let a = 1.0 / ((2.0 * PI).sqrt() * sigma * sigma * sigma);
                let r = [g[0], -g[1], g[2]];
                for p in 0..3 {
                    for q in p..3 {
                        let v = a * r[p] * r[q];
                        f[(ir[p], ir[q])] += v;
                        if ir[p] != ir[q] {
                            f[(ir[q], ir[p])] += v;
                        }
                    }
                }
            }
            Variant::Textbook => {
                let w = 1.0 / link.variance;
                let it = param_index(nv, link.tx);
                let mut idx = [0usize; 5];
                let mut val = [0.0f64; 5];
                idx[..3].copy_from_slice(&ir);
                val[..3].copy_from_slice(&g);
                idx[3] = it[0];
                idx[4] = it[1];
                val[3] = -g[0];
                val[4] = -g[1];
                for p in 0..5 {
                    for q in p..5 {
                        let v = w * val[p] * val[q];
                        f[(idx[p], idx[q])] += v;
                        if idx[p] != idx[q] {
                            f[(idx[q], idx[p])] += v;
                        }
                    }
                }
            }
        }
    }
    Ok(Fim { matrix: f, variant, vehicles: nv })
}

/// FIM of a scenario, `variances` aligned with `scenario.links`.
pub fn build_scenario_fim(scenario: &Scenario, variances: &[f64], variant: Variant) -> Result<Fim> {
    if variances.len() != scenario.links.len() {
        return Err(Error::Dimension { expected: scenario.links.len(), got: variances.len() });
    }
    let positions: Vec<Point2> = scenario.vehicles.iter().map(|v| v.position).collect();
    let links: Vec<FimLink> = scenario
        .links
        .iter()
        .zip(variances)
        .map(|(l, &variance)| FimLink { rx: l.rx, tx: l.tx, variance })
        .collect();
    build_fim(&positions, &links, variant)
}

/// Condition number above which the FIM is reported singular.
pub const CONDITION_LIMIT: f64 = 1e12;

fn checked_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Err(Error::SingularFim { condition: f64::INFINITY });
    }
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::SingularFim { condition });
    }
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::SingularFim { condition })
}

/// Error bounds from the full inverse.
pub fn peb(fim: &Fim) -> Result<PebReport> {
    let inv = checked_inverse(&fim.matrix)?;
    Ok(report_from_covariance(&inv, fim.vehicles))
}

fn report_from_covariance(cov: &DMatrix<f64>, nv: usize) -> PebReport {
    let tr_p: f64 = (0..2 * nv).map(|i| cov[(i, i)]).sum();
    let tr_w: f64 = (2 * nv..3 * nv).map(|i| cov[(i, i)]).sum();
    PebReport { peb_p: tr_p.max(0.0).sqrt(), peb_omega: tr_w.max(0.0).sqrt() }
}

/// Gauge fixed by pinning vehicle `anchor`'s pose and its distance to
/// vehicle `baseline`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnchorSpec {
    pub anchor: usize,
    pub baseline: usize,
}

impl Default for AnchorSpec {
    fn default() -> Self {
        Self { anchor: 0, baseline: 1 }
    }
}

impl AnchorSpec {
    pub fn validate(&self, vehicles: usize) -> Result<()> {
        if self.anchor == self.baseline || self.anchor >= vehicles || self.baseline >= vehicles {
            return Err(Error::GaugeDeficient(
                "anchored gauge needs two distinct vehicles: one pinned pose and one baseline",
            ));
        }
        Ok(())
    }
}

/// Basis of the parameter directions left free by `anchor`, one column per
/// free parameter (`3 N_v - 4` columns).
pub fn anchored_basis(positions: &[Point2], anchor: AnchorSpec) -> Result<DMatrix<f64>> {
    let nv = positions.len();
    anchor.validate(nv)?;
    let pa = positions[anchor.anchor];
    let pb = positions[anchor.baseline];
    let d = pa.distance(&pb);
    if d == 0.0 {
        return Err(Error::DegenerateGeometry("anchor and baseline coincide"));
    }
    let tangent = [-(pb.y - pa.y) / d, (pb.x - pa.x) / d];
    let mut u = DMatrix::<f64>::zeros(3 * nv, 3 * nv - 4);
    let mut col = 0;
    let ib = param_index(nv, anchor.baseline);
    u[(ib[0], col)] = tangent[0];
    u[(ib[1], col)] = tangent[1];
    col += 1;
    for k in 0..nv {
        let ik = param_index(nv, k);
        if k != anchor.anchor && k != anchor.baseline {
            u[(ik[0], col)] = 1.0;
            u[(ik[1], col + 1)] = 1.0;
            col += 2;
        }
        if k != anchor.anchor {
            u[(ik[2], col)] = 1.0;
            col += 1;
        }
    }
    debug_assert_eq!(col, 3 * nv - 4);
    Ok(u)
}

/// Bounds under the anchored gauge: `U (U^T F U)^-1 U^T`.
pub fn anchored_peb(fim: &Fim, positions: &[Point2], anchor: AnchorSpec) -> Result<PebReport> {
    if positions.len() != fim.vehicles {
        return Err(Error::Dimension { expected: fim.vehicles, got: positions.len() });
    }
    let u = anchored_basis(positions, anchor)?;
    let reduced = u.transpose() * &fim.matrix * &u;
    let inv = checked_inverse(&reduced)?;
    let cov = &u * inv * u.transpose();
    Ok(report_from_covariance(&cov, fim.vehicles))
}
