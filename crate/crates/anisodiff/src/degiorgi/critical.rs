use serde::{Deserialize, Serialize};

use crate::analysis::cylinder_cells;
use crate::error::{invalid, Error, Result};
use crate::flux::{ExponentVector, ProblemSpec};
use crate::geometry::{find_ell, Cylinder, IterationSchedule, Side};
use crate::solver::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalMassParams {
    pub y: Vec<f64>,
    pub s: f64,
    pub rho: f64,
    /// Intrinsic scale `M`.
    pub m: f64,
    /// Fraction `a` in `(0, 1)` of `M` guaranteed above the infimum.
    pub a: f64,
    pub side: Side,
    /// Prescribed bound for the infimum (or supremum); must not cut into the data.
    #[serde(default)]
    pub mu: Option<f64>,
}

impl CriticalMassParams {
    fn validate(&self, n: usize) -> Result<()> {
        if self.y.len() != n {
            return Err(Error::DimensionMismatch("critical-mass centre".into()));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) || !(self.m > 0.0 && self.m.is_finite()) {
            return Err(invalid("critical-mass radius and scale must be positive"));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(invalid(format!("a = {} must lie in (0, 1)", self.a)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalMassVerdict {
    /// `M^2 <= Gamma rho^pbar`: the lemma says nothing.
    PreconditionFailed,
    /// No calibrated `gamma`, so no threshold to compare against.
    Uncalibrated,
    /// The measure fraction is not small enough to invoke the lemma.
    AboveThreshold,
    Holds,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalMassReport {
    pub mu: f64,
    pub gamma_threshold: f64,
    pub precondition: bool,
    /// `|{u <= mu + M}| / |Q_{2 rho}(M)|` (or the mirrored set).
    pub measure_fraction: f64,
    pub b: f64,
    pub gamma: Option<f64>,
    pub nu_star: Option<f64>,
    /// `|Q_{2 rho}(M)| / |Q_0|`.
    pub gamma_star: f64,
    pub threshold: Option<f64>,
    /// Extreme value of `u` on the inner cylinder.
    pub inner_extreme: f64,
    pub conclusion_level: f64,
    pub conclusion_holds: bool,
    pub verdict: CriticalMassVerdict,
}

/// Geometric growth rate of the level-set recursion: `pbar(n+2)/n + pmax (n + pbar)/n`.
pub fn critical_mass_b(p: &ExponentVector) -> f64 {
    let n = p.dim() as f64;
    p.q_exponent() + p.max_exponent() * (n + p.harmonic_mean()) / n
}

/// `gamma^(-n/pbar) 2^(-b n^2/pbar^2)`.
pub fn critical_mass_nu_star(p: &ExponentVector, gamma: f64) -> f64 {
    let n = p.dim() as f64;
    let pbar = p.harmonic_mean();
    gamma.powf(-n / pbar) * 2f64.powf(-critical_mass_b(p) * n * n / (pbar * pbar))
}

fn schedule(params: &CriticalMassParams, p: &ExponentVector, mu: f64) -> Result<IterationSchedule> {
    Ok(IterationSchedule::IntrinsicShrink {
        rho: params.rho,
        m: params.m,
        a: params.a,
        mu,
        side: params.side,
        ell: find_ell(p)?,
    })
}

fn extreme(traj: &Trajectory, cyl: &Cylinder, side: Side) -> Result<f64> {
    let cells = cylinder_cells(traj, cyl)?;
    let mut v = match side {
        Side::Lower => f64::INFINITY,
        Side::Upper => f64::NEG_INFINITY,
    };
    for (m, &t) in traj.times.iter().enumerate() {
        if cyl.contains_time(t) {
            for &c in &cells {
                let u = traj.slices[m][c];
                v = match side {
                    Side::Lower => v.min(u),
                    Side::Upper => v.max(u),
                };
            }
        }
    }
    if !v.is_finite() {
        return Err(Error::DomainMismatch("cylinder holds no stored slice".into()));
    }
    Ok(v)
}

fn resolve_mu(traj: &Trajectory, double: &Cylinder, params: &CriticalMassParams) -> Result<f64> {
    let data = extreme(traj, double, params.side)?;
    match (params.mu, params.side) {
        (None, _) => Ok(data),
        (Some(mu), Side::Lower) if mu <= data => Ok(mu),
        (Some(mu), Side::Upper) if mu >= data => Ok(mu),
        (Some(mu), _) => Err(invalid(format!("prescribed bound {mu} is not a bound for the data ({data})"))),
    }
}

/// Fraction of the cylinder (by quadrature weight) where `u` is within `M` of `mu`.
fn near_fraction(traj: &Trajectory, cyl: &Cylinder, mu: f64, m: f64, side: Side) -> Result<f64> {
    let cells = cylinder_cells(traj, cyl)?;
    let (mut hit, mut total) = (0.0, 0.0);
    for (tc, w, k) in traj.time_cells() {
        if !cyl.contains_time(tc) {
            continue;
        }
        let cnt = cells
            .iter()
            .filter(|&&c| {
                let u = traj.mid_value(k, c);
                match side {
                    Side::Lower => u <= mu + m,
                    Side::Upper => u >= mu - m,
                }
            })
            .count();
        hit += w * cnt as f64;
        total += w * cells.len() as f64;
    }
    if total <= 0.0 {
        return Err(Error::DomainMismatch("cylinder contains no quadrature cells".into()));
    }
    Ok(hit / total)
}

pub fn critical_mass_check(
    traj: &Trajectory,
    spec: &ProblemSpec,
    params: &CriticalMassParams,
    gamma: Option<f64>,
) -> Result<CriticalMassReport> {
    let p = &spec.exponents;
    params.validate(p.dim())?;
    let pbar = p.harmonic_mean();
    let double = Cylinder::intrinsic(p, &params.y, params.s, 2.0 * params.rho, params.m)?;
    let inner = Cylinder::intrinsic(p, &params.y, params.s, params.rho, params.m)?;
    let mu = resolve_mu(traj, &double, params)?;
    let gamma_threshold = spec.gamma();
    let precondition = params.m * params.m > gamma_threshold * params.rho.powf(pbar);
    let measure_fraction = near_fraction(traj, &double, mu, params.m, params.side)?;

    let q0 = schedule(params, p, mu)?.cylinder(p, 0, &params.y, params.s)?;
    let gamma_star = double.measure() / q0.measure();
    let b = critical_mass_b(p);
    let nu_star = gamma.map(|g| critical_mass_nu_star(p, g));
    let threshold = nu_star.map(|v| v / gamma_star);

    let inner_extreme = extreme(traj, &inner, params.side)?;
    let (conclusion_level, conclusion_holds) = match params.side {
        Side::Lower => {
            let l = mu + params.a * params.m;
            (l, inner_extreme >= l)
        }
        Side::Upper => {
            let l = mu - params.a * params.m;
            (l, inner_extreme <= l)
        }
    };
    let verdict = if !precondition {
        CriticalMassVerdict::PreconditionFailed
    } else {
        match threshold {
            None => CriticalMassVerdict::Uncalibrated,
            Some(t) if measure_fraction > t => CriticalMassVerdict::AboveThreshold,
            Some(_) if conclusion_holds => CriticalMassVerdict::Holds,
            Some(_) => CriticalMassVerdict::Violated,
        }
    };
    Ok(CriticalMassReport {
        mu,
        gamma_threshold,
        precondition,
        measure_fraction,
        b,
        gamma,
        nu_star,
        gamma_star,
        threshold,
        inner_extreme,
        conclusion_level,
        conclusion_holds,
        verdict,
    })
}

/// `Y_j = |{u < k_j} cap Q_j| / |Q_j|` along the intrinsic schedule (mirrored on the upper side).
pub fn intrinsic_level_sequence(
    traj: &Trajectory,
    spec: &ProblemSpec,
    params: &CriticalMassParams,
    j_max: usize,
) -> Result<Vec<f64>> {
    let p = &spec.exponents;
    params.validate(p.dim())?;
    let double = Cylinder::intrinsic(p, &params.y, params.s, 2.0 * params.rho, params.m)?;
    let mu = resolve_mu(traj, &double, params)?;
    let sched = schedule(params, p, mu)?;
    (0..=j_max)
        .map(|j| {
            let cyl = sched.cylinder(p, j, &params.y, params.s)?;
            let k = sched.level(j);
            let cells = cylinder_cells(traj, &cyl)?;
            let (mut hit, mut total) = (0.0, 0.0);
            for (tc, w, m) in traj.time_cells() {
                if !cyl.contains_time(tc) {
                    continue;
                }
                let cnt = cells
                    .iter()
                    .filter(|&&c| {
                        let u = traj.mid_value(m, c);
                        match params.side {
                            Side::Lower => u < k,
                            Side::Upper => u > k,
                        }
                    })
                    .count();
                hit += w * cnt as f64;
                total += w * cells.len() as f64;
            }
            Ok(if total > 0.0 { hit / total } else { 0.0 })
        })
        .collect()
}

/// Smallest `gamma >= 1` with `Y_{j+1} <= gamma 2^(b j) Y_j^(1 + pbar/n)` on every sequence.
pub fn fit_gamma(sequences: &[Vec<f64>], p: &ExponentVector) -> f64 {
    let b = critical_mass_b(p);
    let e = 1.0 + p.harmonic_mean() / p.dim() as f64;
    let mut g: f64 = 1.0;
    for ys in sequences {
        for (j, w) in ys.windows(2).enumerate() {
            if w[0] > 0.0 {
                g = g.max(w[1] / (2f64.powf(b * j as f64) * w[0].powf(e)));
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::CoefficientField;
    use crate::solver::Grid;

    fn spec(delta: f64) -> ProblemSpec {
        ProblemSpec::new(
            ExponentVector::new(vec![2.0, 2.0]).unwrap(),
            vec![delta; 2],
            1.0,
            CoefficientField::Constant { values: vec![1.0, 1.0] },
        )
        .unwrap()
    }

    fn constant_traj(v: f64) -> Trajectory {
        let g = Grid::new(vec![-3.0, -3.0], vec![3.0, 3.0], vec![30, 30]).unwrap();
        let times: Vec<f64> = (0..=50).map(|k| -5.0 + 0.1 * k as f64).collect();
        Trajectory::from_fn(&g, &times, |_, _| v).unwrap()
    }

    #[test]
    fn precondition_failure_is_reported() {
        let params =
            CriticalMassParams { y: vec![0.0, 0.0], s: 0.0, rho: 1.0, m: 1.0, a: 0.5, side: Side::Lower, mu: None };
        let r = critical_mass_check(&constant_traj(1.0), &spec(1.0), &params, Some(1.0)).unwrap();
        assert!(!r.precondition);
        assert_eq!(r.verdict, CriticalMassVerdict::PreconditionFailed);
    }

    #[test]
    fn field_well_above_the_bound_has_no_mass_near_it() {
        let params = CriticalMassParams {
            y: vec![0.0, 0.0],
            s: 0.0,
            rho: 1.0,
            m: 1.0,
            a: 0.5,
            side: Side::Lower,
            mu: Some(0.0),
        };
        let r = critical_mass_check(&constant_traj(2.0), &spec(0.0), &params, Some(1.0)).unwrap();
        assert_eq!(r.measure_fraction, 0.0);
        assert!(r.conclusion_holds);
        assert_eq!(r.verdict, CriticalMassVerdict::Holds);
    }

    #[test]
    fn prescribed_bound_must_bound_the_data() {
        let params = CriticalMassParams {
            y: vec![0.0, 0.0],
            s: 0.0,
            rho: 1.0,
            m: 1.0,
            a: 0.5,
            side: Side::Lower,
            mu: Some(3.0),
        };
        assert!(critical_mass_check(&constant_traj(2.0), &spec(0.0), &params, None).is_err());
    }

    #[test]
    fn gamma_fit_is_tight() {
        let p = ExponentVector::new(vec![2.0, 2.0]).unwrap();
        let seqs = vec![vec![0.5, 0.2, 0.01]];
        let g = fit_gamma(&seqs, &p);
        let b = critical_mass_b(&p);
        assert!(g >= 1.0);
        assert!(0.2 <= g * 0.5f64.powf(2.0) + 1e-15);
        assert!(0.01 <= g * 2f64.powf(b) * 0.2f64.powf(2.0) + 1e-15);
    }
}
