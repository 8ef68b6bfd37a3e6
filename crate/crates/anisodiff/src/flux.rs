//! Exponent bookkeeping, the degenerate flux and the problem description.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::pos_pow;

/// Per-direction growth exponents `p_1, ..., p_n`, each `> 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ExponentVector {
    p: Vec<f64>,
}

impl TryFrom<Vec<f64>> for ExponentVector {
    type Error = Error;
    fn try_from(p: Vec<f64>) -> Result<Self> {
        Self::new(p)
    }
}

impl From<ExponentVector> for Vec<f64> {
    fn from(e: ExponentVector) -> Self {
        e.p
    }
}

impl ExponentVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidExponents("empty exponent vector".into()));
        }
        for (i, &pi) in p.iter().enumerate() {
            if !pi.is_finite() || pi <= 1.0 {
                return Err(Error::InvalidExponents(format!("p[{i}] = {pi} must be finite and > 1")));
            }
        }
        Ok(Self { p })
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    /// Harmonic mean `n / sum(1/p_i)`.
    pub fn harmonic_mean(&self) -> f64 {
        let s: f64 = self.p.iter().map(|p| 1.0 / p).sum();
        self.p.len() as f64 / s
    }

    /// Largest exponent.
    pub fn max_exponent(&self) -> f64 {
        self.p.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max(2, max p_i)`.
    pub fn big_p(&self) -> f64 {
        self.max_exponent().max(2.0)
    }

    /// `pbar (1 + 2/n)`.
    pub fn q_exponent(&self) -> f64 {
        let n = self.dim() as f64;
        self.harmonic_mean() * (1.0 + 2.0 / n)
    }

    pub fn sobolev_conjugate(&self) -> Result<f64> {
        sobolev_conjugate(self.harmonic_mean(), self.dim())
    }
}

/// Harmonic mean of a raw exponent list.
pub fn harmonic_mean(p: &[f64]) -> Result<f64> {
    Ok(ExponentVector::new(p.to_vec())?.harmonic_mean())
}

/// `n pbar / (n - pbar)`, defined only for `pbar < n`.
pub fn sobolev_conjugate(pbar: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    if !(pbar.is_finite() && pbar > 0.0) {
        return Err(Error::InvalidParameter(format!("pbar = {pbar}")));
    }
    if pbar >= nf {
        return Err(Error::OutOfRange(format!("pbar = {pbar} is not below n = {n}")));
    }
    Ok(nf * pbar / (nf - pbar))
}

/// Admissible range: every `p_i < pbar (1 + 2/n)` and `pbar < n`.
pub fn validate_range(p: &ExponentVector) -> bool {
    let q = p.q_exponent();
    p.harmonic_mean() < p.dim() as f64 && p.as_slice().iter().all(|&pi| pi < q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubcriticalConstants {
    pub m: f64,
    /// `(m - 2 pbar (1/n + 1/2)) / (m - 2)`, always `>= 1`.
    pub frak_q: f64,
    /// `pbar (1/n + 1/2) / frak_q`.
    pub theta: f64,
    /// `m - 2 pbar (1/n + 1/2)`.
    pub nu: f64,
    /// `n nu / ((n + pbar)(m - 2))`, lies in `(0, 1)`.
    pub zeta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Regime {
    Supercritical,
    Subcritical(SubcriticalConstants),
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Supercritical => "supercritical",
            Regime::Subcritical(_) => "subcritical",
        }
    }
}

/// Supercritical iff `pbar > 2n/(n+2)`; otherwise an integrability exponent
/// `m > (n/pbar)(2 - pbar)` is required.
pub fn classify_regime(p: &ExponentVector, m: Option<f64>) -> Result<Regime> {
    let n = p.dim() as f64;
    let pbar = p.harmonic_mean();
    if pbar > 2.0 * n / (n + 2.0) {
        return Ok(Regime::Supercritical);
    }
    let need = (n / pbar) * (2.0 - pbar);
    let m = m.ok_or_else(|| Error::InvalidParameter(format!("subcritical exponents need m > {need}")))?;
    if !(m.is_finite() && m > need) {
        return Err(Error::InvalidParameter(format!("m = {m} must exceed {need}")));
    }
    let s = 2.0 * pbar * (1.0 / n + 0.5);
    let nu = m - s;
    let frak_q = nu / (m - 2.0);
    Ok(Regime::Subcritical(SubcriticalConstants {
        m,
        frak_q,
        theta: pbar * (1.0 / n + 0.5) / frak_q,
        nu,
        zeta: n * nu / ((n + pbar) * (m - 2.0)),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaForms {
    /// `P - (n/pbar)(q - P)`.
    pub direct: f64,
    /// `P - 2 + n (P/pbar - 1)`.
    pub alternate: f64,
}

pub fn omega_forms(p: &ExponentVector) -> Result<OmegaForms> {
    if !validate_range(p) {
        return Err(Error::OutOfRange(format!("{:?}", p.as_slice())));
    }
    let n = p.dim() as f64;
    let pbar = p.harmonic_mean();
    let big_p = p.big_p();
    let q = p.q_exponent();
    Ok(OmegaForms { direct: big_p - (n / pbar) * (q - big_p), alternate: big_p - 2.0 + n * (big_p / pbar - 1.0) })
}

/// Lower end of the admissible integrability window in the global sup bound.
pub fn omega(p: &ExponentVector) -> Result<f64> {
    Ok(omega_forms(p)?.direct)
}

/// `a (|g| - delta)_+^(p-1) sign(g)`.
#[inline]
pub fn flux(g: f64, a: f64, p: f64, delta: f64) -> f64 {
    let y = g.abs() - delta;
    if y > 0.0 {
        a * y.powf(p - 1.0) * g.signum()
    } else {
        0.0
    }
}

/// `sum a_i/p_i (|xi_i| - delta_i)_+^p_i`.
pub fn potential(xi: &[f64], a: &[f64], p: &[f64], delta: &[f64]) -> f64 {
    xi.iter().zip(a).zip(p).zip(delta).map(|(((x, a), p), d)| a / p * pos_pow(x.abs() - d, *p)).sum()
}

/// `Gamma = sum delta_i^p_i`.
pub fn gamma_threshold(delta: &[f64], p: &[f64]) -> f64 {
    delta.iter().zip(p).map(|(d, p)| d.powf(*p)).sum()
}

/// Coefficient families, all bounded in `[1/lambda, lambda]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CoefficientField {
    Constant {
        values: Vec<f64>,
    },
    /// `a_i = lambda^(contrast * cos(freq t) * prod_j sin(k x_j + i + 1))`.
    SeparableTrig {
        contrast: f64,
        wavenumber: f64,
        frequency: f64,
    },
    /// Piecewise constant with alternating values on a cubic lattice of side `cell`.
    Checkerboard {
        cell: f64,
        low: f64,
        high: f64,
    },
}

impl CoefficientField {
    pub fn validate(&self, n: usize, lambda: f64) -> Result<()> {
        let inside = |v: f64| v.is_finite() && v >= 1.0 / lambda && v <= lambda;
        match self {
            CoefficientField::Constant { values } => {
                if values.len() != n {
                    return Err(Error::DimensionMismatch(format!("{} coefficients for dimension {n}", values.len())));
                }
                if let Some(v) = values.iter().find(|v| !inside(**v)) {
                    return Err(Error::InvalidParameter(format!("coefficient {v} outside [1/{lambda}, {lambda}]")));
                }
            }
            CoefficientField::SeparableTrig { contrast, wavenumber, frequency } => {
                if !(0.0..=1.0).contains(contrast) || !wavenumber.is_finite() || !frequency.is_finite() {
                    return Err(Error::InvalidParameter("trig coefficient parameters".into()));
                }
            }
            CoefficientField::Checkerboard { cell, low, high } => {
                if !(cell.is_finite() && *cell > 0.0) || !inside(*low) || !inside(*high) {
                    return Err(Error::InvalidParameter("checkerboard coefficient parameters".into()));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, i: usize, x: &[f64], t: f64, lambda: f64) -> f64 {
        match self {
            CoefficientField::Constant { values } => values[i],
            CoefficientField::SeparableTrig { contrast, wavenumber, frequency } => {
                let s: f64 = x.iter().map(|xj| (wavenumber * xj + (i + 1) as f64).sin()).product();
                lambda.powf(contrast * s * (frequency * t).cos())
            }
            CoefficientField::Checkerboard { cell, low, high } => {
                let parity: i64 = x.iter().map(|xj| (xj / cell).floor() as i64).sum();
                if parity.rem_euclid(2) == 0 {
                    *high
                } else {
                    *low
                }
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, CoefficientField::Constant { .. })
    }
}

/// Structural data of one equation instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub exponents: ExponentVector,
    pub delta: Vec<f64>,
    pub lambda: f64,
    pub coefficients: CoefficientField,
}

impl ProblemSpec {
    pub fn new(
        exponents: ExponentVector,
        delta: Vec<f64>,
        lambda: f64,
        coefficients: CoefficientField,
    ) -> Result<Self> {
        let n = exponents.dim();
        if delta.len() != n {
            return Err(Error::DimensionMismatch(format!("{} delta entries for dimension {n}", delta.len())));
        }
        if let Some(d) = delta.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::InvalidParameter(format!("delta entry {d} must be finite and >= 0")));
        }
        if !(lambda.is_finite() && lambda >= 1.0) {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} must be >= 1")));
        }
        coefficients.validate(n, lambda)?;
        Ok(Self { exponents, delta, lambda, coefficients })
    }

    pub fn dim(&self) -> usize {
        self.exponents.dim()
    }

    pub fn p(&self) -> &[f64] {
        self.exponents.as_slice()
    }

    pub fn gamma(&self) -> f64 {
        gamma_threshold(&self.delta, self.p())
    }

    #[inline]
    pub fn coefficient(&self, i: usize, x: &[f64], t: f64) -> f64 {
        self.coefficients.eval(i, x, t, self.lambda)
    }
}
