//! De Giorgi machinery: the fast-geometric-convergence recursion, level
//! sequences over shrinking cylinders, sup bounds, the critical-mass lemma
//! and lower semicontinuous regularization.

mod critical;
mod lsc;

pub use critical::{
    critical_mass_b, critical_mass_check, critical_mass_nu_star, fit_gamma, intrinsic_level_sequence,
    CriticalMassParams, CriticalMassReport, CriticalMassVerdict,
};
pub use lsc::{lsc_regularize, LscResult};

use serde::{Deserialize, Serialize};

use crate::analysis::{cylinder_integral, cylinder_max, cylinder_weight, Sign};
use crate::error::{invalid, Error, Result};
use crate::flux::{classify_regime, omega, validate_range, ExponentVector, Regime};
use crate::geometry::{Cylinder, IterationSchedule, Side};
use crate::solver::Trajectory;

/// `Y_{j+1} <= C b^j Y_j^(1 + mu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recursion {
    pub c: f64,
    pub b: f64,
    pub mu: f64,
}

impl Recursion {
    pub fn new(c: f64, b: f64, mu: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) || !(b.is_finite() && b > 1.0) || !(mu.is_finite() && mu > 0.0) {
            return Err(invalid(format!("recursion needs C > 0, b > 1, mu > 0; got C = {c}, b = {b}, mu = {mu}")));
        }
        Ok(Self { c, b, mu })
    }

    /// `C^(-1/mu) b^(-1/mu^2)`.
    pub fn threshold(&self) -> f64 {
        self.c.powf(-1.0 / self.mu) * self.b.powf(-1.0 / (self.mu * self.mu))
    }

    /// Value of the equality recursion started at the threshold:
    /// `C^(-1/mu) b^(-1/mu^2 - j/mu)`.
    pub fn threshold_orbit(&self, j: usize) -> f64 {
        let mu = self.mu;
        self.c.powf(-1.0 / mu) * self.b.powf(-1.0 / (mu * mu) - j as f64 / mu)
    }

    /// One step of the equality recursion: `C b^j y^(1 + mu)`.
    #[inline]
    pub fn step(&self, j: usize, y: f64) -> f64 {
        self.c * self.b.powi(j as i32) * y.powf(1.0 + self.mu)
    }

    /// Runs the equality recursion for `j = 0..=j_max`.
    ///
    /// The threshold orbit is an unstable fixed point: a relative error `e` in
    /// `Y0` grows like `(1 + mu)^j e`, so long runs started there only track
    /// the closed form when the arithmetic is exact.
    pub fn iterate(&self, y0: f64, j_max: usize) -> Result<RecursionOutcome> {
        if !(y0.is_finite() && y0 >= 0.0) {
            return Err(invalid(format!("Y0 = {y0} must be finite and non-negative")));
        }
        let mut values = Vec::with_capacity(j_max + 1);
        values.push(y0);
        let mut y = y0;
        let mut diverged = false;
        for j in 0..j_max {
            y = self.step(j, y);
            if !y.is_finite() {
                diverged = true;
                values.push(f64::INFINITY);
                break;
            }
            values.push(y);
        }
        Ok(RecursionOutcome { values, diverged })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionOutcome {
    pub values: Vec<f64>,
    /// Set when the sequence overflowed; `values` then ends at infinity.
    pub diverged: bool,
}

pub fn recursion_threshold(c: f64, b: f64, mu: f64) -> Result<f64> {
    Ok(Recursion::new(c, b, mu)?.threshold())
}

pub fn iterate_recursion(y0: f64, c: f64, b: f64, mu: f64, j_max: usize) -> Result<RecursionOutcome> {
    Recursion::new(c, b, mu)?.iterate(y0, j_max)
}

/// `Y_j = int int_{Q_j} (u - k_j)_+^exponent` along a schedule (on the lower
/// side of an intrinsic schedule, `(k_j - u)_+`).
pub fn level_sequence(
    traj: &Trajectory,
    p: &ExponentVector,
    schedule: &IterationSchedule,
    vertex: (&[f64], f64),
    exponent: f64,
    j_max: usize,
) -> Result<Vec<f64>> {
    schedule.validate()?;
    if !(exponent.is_finite() && exponent > 0.0) {
        return Err(invalid(format!("exponent {exponent} must be positive")));
    }
    let sign = match schedule {
        IterationSchedule::IntrinsicShrink { side: Side::Lower, .. } => Sign::Minus,
        _ => Sign::Plus,
    };
    (0..=j_max)
        .map(|j| {
            let cyl = schedule.cylinder(p, j, vertex.0, vertex.1)?;
            let k = schedule.level(j);
            cylinder_integral(traj, &cyl, |u| sign.excess(u, k).powf(exponent))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SupBoundKind {
    /// Supercritical local bound from `Q_rho` to `Q_{sigma rho}`.
    Local { sigma: f64 },
    /// Bound of `|u|` from `Q_{2 rho}` to `Q_rho` with integrability `nu` in `(omega, P]`.
    Global { nu: f64 },
    /// Subcritical bound from `Q_{2 rho}` to `Q_rho` with integrability `m`.
    Subcritical { m: f64 },
}

/// Which of the four cases the subcritical argument falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubcriticalBranch {
    ZeroIntegralQAboveOne,
    ZeroIntegralQOne,
    PositiveIntegralQOne,
    PositiveIntegralQAboveOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupBoundReport {
    pub kind: SupBoundKind,
    pub regime: Regime,
    pub rho: f64,
    pub inner_sup: f64,
    /// Mean of the integrand over the outer cylinder.
    pub mean_integral: f64,
    pub exponent: f64,
    /// The integral part of the bound before the constant is applied.
    pub mean_term: f64,
    /// Additive (or max) floor of the bound.
    pub floor: f64,
    /// Smallest constant for which the bound holds on this data.
    pub required_constant: f64,
    pub constant: Option<f64>,
    pub bound: Option<f64>,
    pub margin: Option<f64>,
    pub branch: Option<SubcriticalBranch>,
}

impl SupBoundReport {
    pub fn holds(&self) -> Option<bool> {
        self.margin.map(|m| m >= 0.0)
    }
}

pub fn sup_bound(
    traj: &Trajectory,
    p: &ExponentVector,
    vertex: (&[f64], f64),
    rho: f64,
    kind: SupBoundKind,
    sign: Sign,
    constant: Option<f64>,
) -> Result<SupBoundReport> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(invalid(format!("rho = {rho} must be positive")));
    }
    let n = p.dim() as f64;
    let pbar = p.harmonic_mean();
    let big_p = p.big_p();
    let pmax = p.max_exponent();
    let (x0, t0) = vertex;
    let excess = move |u: f64| sign.excess(u, 0.0);
    let mean = |cyl: &Cylinder, f: &(dyn Fn(f64) -> f64 + Sync)| -> Result<f64> {
        let w = cylinder_weight(traj, cyl)?;
        if w <= 0.0 {
            return Err(Error::DomainMismatch("cylinder contains no quadrature cells".into()));
        }
        Ok(cylinder_integral(traj, cyl, f)? / w)
    };

    let mut branch = None;
    let (regime, inner_sup, mean_integral, exponent, mean_term, floor, additive) = match kind {
        SupBoundKind::Local { sigma } => {
            if !(sigma > 0.0 && sigma < 1.0) {
                return Err(invalid(format!("sigma = {sigma} must lie in (0, 1)")));
            }
            let regime = classify_regime(p, None)
                .map_err(|_| Error::OutOfRange("the local bound needs supercritical exponents".into()))?;
            let denom = pbar * (n + 2.0) - n * big_p;
            if !validate_range(p) {
                return Err(Error::OutOfRange(format!(
                    "the local bound needs pbar < n and p_i < pbar(1 + 2/n), pbar = {pbar}"
                )));
            }
            if denom <= 0.0 {
                return Err(Error::OutOfRange(format!("pbar(n+2) - nP = {denom} must be positive")));
            }
            let inner = Cylinder::standard(p, x0, t0, sigma * rho)?;
            let outer = Cylinder::standard(p, x0, t0, rho)?;
            let sup = cylinder_max(traj, &inner, excess)?;
            let avg = mean(&outer, &|u| excess(u).powf(big_p))?;
            let e = pbar / denom;
            let term = ((1.0 - sigma).powf(-pmax * (n + pbar) / pbar) * avg).powf(e);
            (regime, sup, avg, e, term, 1f64.max(rho.powf(1.0 / big_p)), false)
        }
        SupBoundKind::Global { nu } => {
            let w = omega(p)?;
            if !(nu > w && nu <= big_p) {
                return Err(invalid(format!("nu = {nu} must lie in (omega, P] = ({w}, {big_p}]")));
            }
            let regime = classify_regime(p, None)?;
            let inner = Cylinder::standard(p, x0, t0, rho)?;
            let outer = Cylinder::standard(p, x0, t0, 2.0 * rho)?;
            let sup = cylinder_max(traj, &inner, f64::abs)?;
            let avg = mean(&outer, &|u| u.abs().powf(nu))?;
            let e = 1.0 / (nu - w);
            (regime, sup, avg, e, avg.powf(e), 1.0 + rho.powf(1.0 / big_p), true)
        }
        SupBoundKind::Subcritical { m } => {
            let regime = classify_regime(p, Some(m))?;
            let sc = match regime {
                Regime::Subcritical(sc) => sc,
                Regime::Supercritical => {
                    return Err(Error::OutOfRange("the subcritical bound needs pbar <= 2n/(n+2)".into()))
                }
            };
            let inner = Cylinder::standard(p, x0, t0, rho)?;
            let outer = Cylinder::standard(p, x0, t0, 2.0 * rho)?;
            let sup = cylinder_max(traj, &inner, excess)?;
            let total = cylinder_integral(traj, &outer, |u| excess(u).powf(m))?;
            let avg = mean(&outer, &|u| excess(u).powf(m))?;
            let q_one = (sc.frak_q - 1.0).abs() <= 1e-12;
            branch = Some(match (total > 0.0, q_one) {
                (false, false) => SubcriticalBranch::ZeroIntegralQAboveOne,
                (false, true) => SubcriticalBranch::ZeroIntegralQOne,
                (true, true) => SubcriticalBranch::PositiveIntegralQOne,
                (true, false) => SubcriticalBranch::PositiveIntegralQAboveOne,
            });
            let e = 1.0 / (m - (n / pbar) * (2.0 - pbar));
            (regime, sup, avg, e, avg.powf(e), 1.0 + rho.sqrt(), true)
        }
    };

    let required_constant = if additive {
        inner_sup / (mean_term + floor)
    } else if inner_sup <= floor {
        0.0
    } else if mean_term > 0.0 {
        inner_sup / mean_term
    } else {
        f64::INFINITY
    };
    let bound = constant.map(|c| if additive { c * (mean_term + floor) } else { floor.max(c * mean_term) });
    Ok(SupBoundReport {
        kind,
        regime,
        rho,
        inner_sup,
        mean_integral,
        exponent,
        mean_term,
        floor,
        required_constant,
        constant,
        bound,
        margin: bound.map(|b| b - inner_sup),
        branch,
    })
}
