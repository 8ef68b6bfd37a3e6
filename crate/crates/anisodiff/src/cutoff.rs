//! Smooth cut-off functions built from `Z(t) = exp(-1/t)` and their
//! derivative bounds.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::flux::ExponentVector;
use crate::geometry::IterationSchedule;

/// `exp(-1/t)` for `t > 0`; arguments at or below `1e-12` are treated as zero.
#[inline]
pub fn z_fn(t: f64) -> f64 {
    if t <= 1e-12 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`.
#[inline]
pub fn chi(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = z_fn(t);
    let b = z_fn(1.0 - t);
    a / (a + b)
}

/// Derivative of [`chi`], evaluated in logistic form to avoid `0/0` near the ends.
#[inline]
pub fn chi_prime(t: f64) -> f64 {
    if t <= 1e-12 || t >= 1.0 - 1e-12 {
        return 0.0;
    }
    let s = 1.0 / t - 1.0 / (1.0 - t);
    // chi = 1 / (1 + e^s)
    let e = (-s.abs()).exp();
    let sig = if s > 0.0 { e / (1.0 + e) } else { 1.0 / (1.0 + e) };
    sig * (1.0 - sig) * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t)))
}

/// `sup |chi'|`, found by dense sampling followed by golden-section refinement.
pub fn chi_prime_sup() -> f64 {
    static SUP: OnceLock<f64> = OnceLock::new();
    *SUP.get_or_init(|| {
        let n = 4000;
        let (mut best_t, mut best) = (0.5, 0.0);
        for k in 1..n {
            let t = k as f64 / n as f64;
            let v = chi_prime(t);
            if v > best {
                best = v;
                best_t = t;
            }
        }
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (best_t - 1.0 / n as f64, best_t + 1.0 / n as f64);
        for _ in 0..100 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if chi_prime(a) > chi_prime(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        best.max(chi_prime(0.5 * (lo + hi)))
    })
}

/// `t -> chi((t - start) / (end - start))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeRamp {
    pub start: f64,
    pub end: f64,
}

impl TimeRamp {
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        chi((t - self.start) / (self.end - self.start))
    }
    #[inline]
    pub fn derivative(&self, t: f64) -> f64 {
        let w = self.end - self.start;
        chi_prime((t - self.start) / w) / w
    }
}

/// Symmetric bump equal to 1 on `|s - center| <= inner`, vanishing for `|s - center| >= outer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBump {
    pub center: f64,
    pub outer: f64,
    pub inner: f64,
}

impl AxisBump {
    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        let d = s - self.center;
        let w = self.outer - self.inner;
        chi((d + self.outer) / w) * chi((self.outer - d) / w)
    }
    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        let d = s - self.center;
        let w = self.outer - self.inner;
        let (l, r) = ((d + self.outer) / w, (self.outer - d) / w);
        (chi_prime(l) * chi(r) - chi(l) * chi_prime(r)) / w
    }
}

/// `zeta(x, t) = psi(t) prod_i zeta_i(x_i)^p_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub ramp: TimeRamp,
    pub bumps: Vec<AxisBump>,
    pub exponents: Vec<f64>,
    /// Top of the cylinder the cut-off lives in.
    pub t_top: f64,
}

impl Cutoff {
    pub fn dim(&self) -> usize {
        self.bumps.len()
    }

    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        let psi = self.ramp.value(t);
        if psi == 0.0 {
            return 0.0;
        }
        psi * self.space_product(x, None)
    }

    fn space_product(&self, x: &[f64], skip: Option<usize>) -> f64 {
        let mut v = 1.0;
        for (i, b) in self.bumps.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            let z = b.value(x[i]);
            if z == 0.0 {
                return 0.0;
            }
            v *= z.powf(self.exponents[i]);
        }
        v
    }

    /// `d_t zeta`.
    pub fn dt(&self, x: &[f64], t: f64) -> f64 {
        let d = self.ramp.derivative(t);
        if d == 0.0 {
            return 0.0;
        }
        d * self.space_product(x, None)
    }

    /// `|d_i (zeta^(1/p_i))|^p_i = psi |zeta_i'|^p_i prod_{l != i} zeta_l^p_l`.
    pub fn space_factor(&self, i: usize, x: &[f64], t: f64) -> f64 {
        let psi = self.ramp.value(t);
        if psi == 0.0 {
            return 0.0;
        }
        let d = self.bumps[i].derivative(x[i]).abs();
        if d == 0.0 {
            return 0.0;
        }
        psi * d.powf(self.exponents[i]) * self.space_product(x, Some(i))
    }

    /// Spatial support half-widths.
    pub fn outer_half_widths(&self) -> Vec<f64> {
        self.bumps.iter().map(|b| b.outer).collect()
    }
}

fn validate_bumps(a: &[f64], b: &[f64], n: usize) -> Result<()> {
    if a.len() != n || b.len() != n {
        return Err(Error::DimensionMismatch("cut-off radii length".into()));
    }
    for (ai, bi) in a.iter().zip(b) {
        if !(*bi > 0.0 && bi < ai && ai.is_finite()) {
            return Err(invalid(format!("cut-off radii need 0 < b < a, got a = {ai}, b = {bi}")));
        }
    }
    Ok(())
}

/// Cut-off vanishing on the parabolic boundary of `Q_rho(x0, t0)`, equal
/// to 1 on `prod [-b_i, b_i] x [t0 - rho + eps, t0]`.
pub fn make_zeta(p: &ExponentVector, x0: &[f64], t0: f64, rho: f64, eps: f64, a: &[f64], b: &[f64]) -> Result<Cutoff> {
    let n = p.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch("cut-off centre".into()));
    }
    if !(rho > 0.0 && rho.is_finite()) || !(eps > 0.0 && eps < rho) {
        return Err(invalid(format!("need rho > 0 and 0 < eps < rho, got rho = {rho}, eps = {eps}")));
    }
    validate_bumps(a, b, n)?;
    for (i, ai) in a.iter().enumerate() {
        if *ai > rho.powf(1.0 / p.as_slice()[i]) * (1.0 + 1e-12) {
            return Err(invalid(format!("a[{i}] = {ai} exceeds the cube half-width")));
        }
    }
    Ok(Cutoff {
        ramp: TimeRamp { start: t0 - rho + 0.5 * eps, end: t0 - rho + eps },
        bumps: (0..n).map(|i| AxisBump { center: x0[i], outer: a[i], inner: b[i] }).collect(),
        exponents: p.as_slice().to_vec(),
        t_top: t0,
    })
}

/// [`make_zeta`] with `eps = rho/4` and `a_i = rho^(1/p_i)`, `b_i = (rho/2)^(1/p_i)`.
pub fn default_zeta(p: &ExponentVector, x0: &[f64], t0: f64, rho: f64) -> Result<Cutoff> {
    let a: Vec<f64> = p.as_slice().iter().map(|pi| rho.powf(1.0 / pi)).collect();
    let b: Vec<f64> = p.as_slice().iter().map(|pi| (0.5 * rho).powf(1.0 / pi)).collect();
    make_zeta(p, x0, t0, rho, 0.25 * rho, &a, &b)
}

/// Claimed derivative bounds of a family member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffBounds {
    pub constant: f64,
    pub time: f64,
    pub space: Vec<f64>,
}

/// The `j`-th cut-off of the shrinking sequence: supported in
/// `Q_{rho~_j}`, equal to 1 on `Q_{rho_{j+1}}`.
pub fn make_zeta_tilde_j(
    p: &ExponentVector,
    schedule: &IterationSchedule,
    j: usize,
    x0: &[f64],
    t0: f64,
) -> Result<(Cutoff, CutoffBounds)> {
    let (rho, sigma) = match *schedule {
        IterationSchedule::ShrinkOut { rho, sigma, .. } => (rho, sigma),
        _ => return Err(invalid("shrinking cut-offs need a shrink-out schedule")),
    };
    schedule.validate()?;
    if x0.len() != p.dim() {
        return Err(Error::DimensionMismatch("cut-off centre".into()));
    }
    let rt = 0.5 * (schedule.radius(j) + schedule.radius(j + 1));
    let rn = schedule.radius(j + 1);
    let cutoff = Cutoff {
        ramp: TimeRamp { start: t0 - rt, end: t0 - rn },
        bumps: p
            .as_slice()
            .iter()
            .zip(x0)
            .map(|(pi, c)| AxisBump { center: *c, outer: rt.powf(1.0 / pi), inner: rn.powf(1.0 / pi) })
            .collect(),
        exponents: p.as_slice().to_vec(),
        t_top: t0,
    };
    let pmax = p.max_exponent();
    let c = (8.0 * pmax * chi_prime_sup()).powf(pmax);
    let bounds = CutoffBounds {
        constant: c,
        time: c * 2f64.powi(j as i32) / ((1.0 - sigma) * rho),
        space: vec![c * 2f64.powf(j as f64 * pmax) / ((1.0 - sigma).powf(pmax) * rho); p.dim()],
    };
    Ok((cutoff, bounds))
}

/// The `j`-th cut-off of the intrinsic shrinking sequence: supported in the
/// `j`-th stretched cylinder, equal to 1 on the next one.
pub fn make_eta_j(
    p: &ExponentVector,
    schedule: &IterationSchedule,
    j: usize,
    y: &[f64],
    s: f64,
) -> Result<(Cutoff, CutoffBounds)> {
    let (rho, m, ell) = match *schedule {
        IterationSchedule::IntrinsicShrink { rho, m, ell, .. } => (rho, m, ell),
        _ => return Err(invalid("intrinsic cut-offs need an intrinsic schedule")),
    };
    schedule.validate()?;
    let pbar = p.harmonic_mean();
    let outer = schedule.cylinder(p, j, y, s)?;
    let inner = schedule.cylinder(p, j + 1, y, s)?;
    let (tj, tn) = (s - outer.t_lo, s - inner.t_lo);
    let cutoff = Cutoff {
        ramp: TimeRamp { start: s - 0.5 * (tj + tn), end: s - tn },
        bumps: (0..p.dim())
            .map(|i| AxisBump { center: y[i], outer: outer.half_widths[i], inner: inner.half_widths[i] })
            .collect(),
        exponents: p.as_slice().to_vec(),
        t_top: s,
    };
    let pmax = p.max_exponent();
    let c = (2f64.powi(ell as i32 + 2) * chi_prime_sup()).powf(pmax);
    let bounds = CutoffBounds {
        constant: c,
        time: c * 2f64.powf((j + 1) as f64 * pbar) / rho.powf(pbar),
        space: p
            .as_slice()
            .iter()
            .map(|pi| c * 2f64.powf(j as f64 * pmax) / (m.powf(pi - 2.0) * rho.powf(pbar)))
            .collect(),
    };
    Ok((cutoff, bounds))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffCheck {
    pub samples: usize,
    pub violations: usize,
    pub max_time: f64,
    pub max_space: Vec<f64>,
    pub time_bound: f64,
    pub space_bound: Vec<f64>,
}

impl CutoffCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Samples the cut-off's support with central finite differences and
/// counts points where a claimed bound is exceeded.
pub fn verify_bounds(cutoff: &Cutoff, bounds: &CutoffBounds, samples: usize, seed: u64) -> Result<CutoffCheck> {
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let n = cutoff.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ramp_w = cutoff.ramp.end - cutoff.ramp.start;
    let t_lo = cutoff.ramp.start - 0.25 * ramp_w;
    let mut out = CutoffCheck {
        samples,
        violations: 0,
        max_time: 0.0,
        max_space: vec![0.0; n],
        time_bound: bounds.time,
        space_bound: bounds.space.clone(),
    };
    let mut x = vec![0.0; n];
    for k in 0..samples {
        // Every other sample lands in the transition layers where the derivatives live.
        let focus = k % 2 == 1;
        for (i, b) in cutoff.bumps.iter().enumerate() {
            x[i] = if focus {
                let d = rng.gen_range(b.inner..b.outer);
                b.center + if rng.gen_bool(0.5) { d } else { -d }
            } else {
                b.center + rng.gen_range(-b.outer..b.outer)
            };
        }
        let t =
            if focus { rng.gen_range(cutoff.ramp.start..cutoff.ramp.end) } else { rng.gen_range(t_lo..cutoff.t_top) };

        let ht = 1e-7 * ramp_w;
        let dt = (cutoff.value(&x, t + ht) - cutoff.value(&x, t - ht)) / (2.0 * ht);
        out.max_time = out.max_time.max(dt);
        let mut bad = dt > bounds.time || dt < -1e-9 * bounds.time;

        for i in 0..n {
            let b = &cutoff.bumps[i];
            let hx = 1e-7 * (b.outer - b.inner);
            let pi = cutoff.exponents[i];
            let xi = x[i];
            x[i] = xi + hx;
            let up = cutoff.value(&x, t).powf(1.0 / pi);
            x[i] = xi - hx;
            let dn = cutoff.value(&x, t).powf(1.0 / pi);
            x[i] = xi;
            let g = ((up - dn) / (2.0 * hx)).abs().powf(pi);
            out.max_space[i] = out.max_space[i].max(g);
            bad |= g > bounds.space[i];
        }
        if bad {
            out.violations += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LevelRule;
    use approx::assert_relative_eq;

    #[test]
    fn chi_basics() {
        assert_eq!(chi(-1.0), 0.0);
        assert_eq!(chi(0.0), 0.0);
        assert_eq!(chi(1.0), 1.0);
        assert_relative_eq!(chi(0.5), 0.5, epsilon = 1e-15);
        for k in 1..100 {
            let t = k as f64 / 100.0;
            assert_relative_eq!(chi(t) + chi(1.0 - t), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn chi_prime_matches_difference_quotient() {
        for k in 1..200 {
            let t = k as f64 / 200.0;
            let h = 1e-6;
            let fd = (chi(t + h) - chi(t - h)) / (2.0 * h);
            assert_relative_eq!(chi_prime(t), fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn chi_prime_sup_is_two() {
        // chi'(1/2) = 2 Z'(1/2) Z(1/2) / (2 Z(1/2))^2 = 2, and that is the maximum.
        assert_relative_eq!(chi_prime_sup(), 2.0, epsilon = 1e-10);
    }

    #[test]
    fn zeta_is_zero_outside_and_one_inside() {
        let p = ExponentVector::new(vec![2.0, 3.0]).unwrap();
        let z = default_zeta(&p, &[0.0, 0.0], 0.0, 1.0).unwrap();
        assert_eq!(z.value(&[1.0, 0.0], -0.1), 0.0);
        assert_eq!(z.value(&[0.0, 0.0], -1.0), 0.0);
        assert_relative_eq!(z.value(&[0.0, 0.0], -0.1), 1.0, epsilon = 1e-15);
        assert!(make_zeta(&p, &[0.0, 0.0], 0.0, 1.0, 0.25, &[1.0, 1.0], &[1.0, 0.5]).is_err());
    }

    #[test]
    fn analytic_and_fd_space_factor_agree() {
        let p = ExponentVector::new(vec![2.0, 3.0]).unwrap();
        let s = IterationSchedule::ShrinkOut { rho: 1.0, sigma: 0.5, k: 1.0, levels: LevelRule::Approach };
        let (z, _) = make_zeta_tilde_j(&p, &s, 1, &[0.0, 0.0], 0.0).unwrap();
        let t = -0.1;
        for k in 0..50 {
            let x = [0.6 + 0.005 * k as f64, 0.1];
            let h = 1e-7;
            let up = z.value(&[x[0] + h, x[1]], t).sqrt();
            let dn = z.value(&[x[0] - h, x[1]], t).sqrt();
            let fd = ((up - dn) / (2.0 * h)).powi(2);
            assert_relative_eq!(z.space_factor(0, &x, t), fd, epsilon = 1e-5, max_relative = 1e-5);
        }
    }

    #[test]
    fn tilde_cutoff_bounds_hold() {
        let p = ExponentVector::new(vec![2.0, 3.0]).unwrap();
        let s = IterationSchedule::ShrinkOut { rho: 0.8, sigma: 0.25, k: 1.0, levels: LevelRule::Approach };
        for j in 0..4 {
            let (z, b) = make_zeta_tilde_j(&p, &s, j, &[0.0, 0.0], 0.0).unwrap();
            let chk = verify_bounds(&z, &b, 2000, j as u64).unwrap();
            assert!(chk.passed(), "{chk:?}");
        }
    }
}
