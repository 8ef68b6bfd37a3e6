//! Anisotropic cubes, backward cylinders and iteration schedules.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::flux::ExponentVector;

/// Half-widths `rho^(1/p_i)` of the standard cube `K_rho`.
pub fn aniso_cube_half_widths(p: &ExponentVector, rho: f64) -> Result<Vec<f64>> {
    check_radius(rho)?;
    Ok(p.as_slice().iter().map(|pi| rho.powf(1.0 / pi)).collect())
}

/// Half-widths `M^((p_i-2)/p_i) rho^(pbar/p_i)` of the intrinsic cube.
pub fn intrinsic_half_widths(p: &ExponentVector, rho: f64, m: f64) -> Result<Vec<f64>> {
    check_radius(rho)?;
    if !(m.is_finite() && m > 0.0) {
        return Err(invalid(format!("intrinsic scale M = {m} must be positive")));
    }
    let pbar = p.harmonic_mean();
    Ok(p.as_slice().iter().map(|pi| m.powf((pi - 2.0) / pi) * rho.powf(pbar / pi)).collect())
}

fn check_radius(rho: f64) -> Result<()> {
    if rho.is_finite() && rho > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("radius {rho} must be positive")))
    }
}

fn check_point(p: &ExponentVector, x: &[f64]) -> Result<()> {
    if x.len() != p.dim() {
        return Err(Error::DimensionMismatch(format!("point of length {} for dimension {}", x.len(), p.dim())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CylinderKind {
    /// `K_rho(x0) x (t0 - rho, t0)`, open at the top.
    Standard,
    /// `K_rho(M)(y) x (s - rho^pbar, s]`.
    Intrinsic,
}

/// Axis-aligned space-time box centred at `center` in space, lying below `t_hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub kind: CylinderKind,
    pub center: Vec<f64>,
    pub half_widths: Vec<f64>,
    pub t_lo: f64,
    pub t_hi: f64,
    pub upper_closed: bool,
}

impl Cylinder {
    pub fn standard(p: &ExponentVector, x0: &[f64], t0: f64, rho: f64) -> Result<Self> {
        check_point(p, x0)?;
        Ok(Self {
            kind: CylinderKind::Standard,
            center: x0.to_vec(),
            half_widths: aniso_cube_half_widths(p, rho)?,
            t_lo: t0 - rho,
            t_hi: t0,
            upper_closed: false,
        })
    }

    pub fn intrinsic(p: &ExponentVector, y: &[f64], s: f64, rho: f64, m: f64) -> Result<Self> {
        check_point(p, y)?;
        Ok(Self {
            kind: CylinderKind::Intrinsic,
            center: y.to_vec(),
            half_widths: intrinsic_half_widths(p, rho, m)?,
            t_lo: s - rho.powf(p.harmonic_mean()),
            t_hi: s,
            upper_closed: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    #[inline]
    pub fn contains_space(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.center).zip(&self.half_widths).all(|((x, c), h)| (x - c).abs() < *h)
    }

    #[inline]
    pub fn contains_time(&self, t: f64) -> bool {
        t > self.t_lo && (t < self.t_hi || (self.upper_closed && t == self.t_hi))
    }

    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        self.contains_time(t) && self.contains_space(x)
    }

    pub fn spatial_measure(&self) -> f64 {
        self.half_widths.iter().map(|h| 2.0 * h).product()
    }

    pub fn measure(&self) -> f64 {
        self.spatial_measure() * (self.t_hi - self.t_lo)
    }

    /// Closure inclusion up to a relative slack.
    pub fn is_within(&self, outer: &Cylinder) -> bool {
        let tol = 1e-12;
        self.dim() == outer.dim()
            && self.t_lo >= outer.t_lo - tol * (1.0 + outer.t_lo.abs())
            && self.t_hi <= outer.t_hi + tol * (1.0 + outer.t_hi.abs())
            && (0..self.dim()).all(|i| {
                let lo = self.center[i] - self.half_widths[i];
                let hi = self.center[i] + self.half_widths[i];
                let olo = outer.center[i] - outer.half_widths[i];
                let ohi = outer.center[i] + outer.half_widths[i];
                lo >= olo - tol * (1.0 + olo.abs()) && hi <= ohi + tol * (1.0 + ohi.abs())
            })
    }
}

/// `K_rho(x0) x (t0 - rho, t0)`; measure `2^n rho^((n + pbar)/pbar)`.
pub fn standard_cylinder(p: &ExponentVector, x0: &[f64], t0: f64, rho: f64) -> Result<Cylinder> {
    Cylinder::standard(p, x0, t0, rho)
}

pub fn intrinsic_cylinder(p: &ExponentVector, y: &[f64], s: f64, rho: f64, m: f64) -> Result<Cylinder> {
    Cylinder::intrinsic(p, y, s, rho, m)
}

/// Space-time box `prod [lower_i, upper_i] x [t_lo, t_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub t_lo: f64,
    pub t_hi: f64,
}

/// Signed margin between a cylinder and the parabolic boundary of `domain`
/// (lateral sides and bottom). Negative when the cylinder sticks out,
/// including through the top.
pub fn parabolic_boundary_distance(cyl: &Cylinder, domain: &SpaceTimeBox) -> Result<f64> {
    if domain.lower.len() != cyl.dim() || domain.upper.len() != cyl.dim() {
        return Err(Error::DimensionMismatch("domain and cylinder dimensions differ".into()));
    }
    let mut margin = cyl.t_lo - domain.t_lo;
    for i in 0..cyl.dim() {
        margin = margin
            .min(cyl.center[i] - cyl.half_widths[i] - domain.lower[i])
            .min(domain.upper[i] - cyl.center[i] - cyl.half_widths[i]);
    }
    if cyl.t_hi > domain.t_hi {
        margin = margin.min(domain.t_hi - cyl.t_hi);
    }
    Ok(margin)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelRule {
    /// `k_j = k - k/2^j`, increasing to `k`.
    Approach,
    /// `k_j = 2k - k/2^j`, increasing to `2k`.
    Doubling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Super-solution side: levels rise from the infimum.
    Lower,
    /// Sub-solution side: levels fall from the supremum.
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum IterationSchedule {
    /// `rho_j = sigma rho + (1 - sigma) rho / 2^j`.
    ShrinkOut { rho: f64, sigma: f64, k: f64, levels: LevelRule },
    /// `rho_j = 2 rho - rho / 2^j`.
    GrowOut { rho: f64, k: f64 },
    /// `rho_j = rho + rho / 2^j` with intrinsic cubes stretched by `1 + 2^-(j + ell)`.
    IntrinsicShrink { rho: f64, m: f64, a: f64, mu: f64, side: Side, ell: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub j: usize,
    pub rho: f64,
    pub rho_tilde: f64,
    pub level: f64,
}

impl IterationSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            IterationSchedule::ShrinkOut { rho, sigma, k, .. } => {
                check_radius(rho)?;
                if !(sigma > 0.0 && sigma < 1.0) {
                    return Err(invalid(format!("sigma = {sigma} must lie in (0, 1)")));
                }
                if !k.is_finite() {
                    return Err(invalid("level must be finite"));
                }
            }
            IterationSchedule::GrowOut { rho, k } => {
                check_radius(rho)?;
                if !k.is_finite() {
                    return Err(invalid("level must be finite"));
                }
            }
            IterationSchedule::IntrinsicShrink { rho, m, a, mu, ell, .. } => {
                check_radius(rho)?;
                if !(m.is_finite() && m > 0.0) {
                    return Err(invalid(format!("M = {m} must be positive")));
                }
                if !(a > 0.0 && a < 1.0) {
                    return Err(invalid(format!("a = {a} must lie in (0, 1)")));
                }
                if !mu.is_finite() || ell > 64 {
                    return Err(invalid("intrinsic schedule parameters"));
                }
            }
        }
        Ok(())
    }

    pub fn radius(&self, j: usize) -> f64 {
        let s = 0.5f64.powi(j as i32);
        match *self {
            IterationSchedule::ShrinkOut { rho, sigma, .. } => sigma * rho + (1.0 - sigma) * rho * s,
            IterationSchedule::GrowOut { rho, .. } => 2.0 * rho - rho * s,
            IterationSchedule::IntrinsicShrink { rho, .. } => rho + rho * s,
        }
    }

    pub fn level(&self, j: usize) -> f64 {
        let s = 0.5f64.powi(j as i32);
        match *self {
            IterationSchedule::ShrinkOut { k, levels: LevelRule::Approach, .. } => k - k * s,
            IterationSchedule::ShrinkOut { k, levels: LevelRule::Doubling, .. } => 2.0 * k - k * s,
            IterationSchedule::GrowOut { k, .. } => k - k * s,
            IterationSchedule::IntrinsicShrink { m, a, mu, side: Side::Lower, .. } => mu + a * m + (1.0 - a) * m * s,
            IterationSchedule::IntrinsicShrink { m, a, mu, side: Side::Upper, .. } => mu - a * m - (1.0 - a) * m * s,
        }
    }

    /// The `j`-th cylinder with vertex `(x0, t0)`.
    pub fn cylinder(&self, p: &ExponentVector, j: usize, x0: &[f64], t0: f64) -> Result<Cylinder> {
        match *self {
            IterationSchedule::ShrinkOut { .. } | IterationSchedule::GrowOut { .. } => {
                Cylinder::standard(p, x0, t0, self.radius(j))
            }
            IterationSchedule::IntrinsicShrink { rho, m, ell, .. } => {
                let mut c = Cylinder::intrinsic(p, x0, t0, rho, m)?;
                let stretch = 1.0 + 0.5f64.powi((j as u32 + ell) as i32);
                for h in &mut c.half_widths {
                    *h *= stretch;
                }
                c.t_lo = t0 - self.radius(j).powf(p.harmonic_mean());
                Ok(c)
            }
        }
    }
}

/// Radii, midpoints and levels for `j = 0..=j_max`.
pub fn nested_radii(schedule: &IterationSchedule, j_max: usize) -> Result<Vec<ScheduleEntry>> {
    schedule.validate()?;
    Ok((0..=j_max)
        .map(|j| ScheduleEntry {
            j,
            rho: schedule.radius(j),
            rho_tilde: 0.5 * (schedule.radius(j) + schedule.radius(j + 1)),
            level: schedule.level(j),
        })
        .collect())
}

/// Smallest `ell` in `0..=64` with `(1 + 2^-ell) rho^(pbar/p_i) <= (2 rho)^(pbar/p_i)`
/// for every `i`, so the first stretched cube fits inside the doubled one.
pub fn find_ell(p: &ExponentVector) -> Result<u32> {
    let pbar = p.harmonic_mean();
    let room = p.as_slice().iter().map(|pi| 2f64.powf(pbar / pi)).fold(f64::INFINITY, f64::min);
    (0..=64u32)
        .find(|&l| 1.0 + 0.5f64.powi(l as i32) <= room)
        .ok_or_else(|| Error::OutOfRange("no stretch exponent fits".into()))
}
