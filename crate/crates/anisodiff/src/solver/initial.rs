use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

use super::grid::{Field, Grid};

/// Analytic initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InitialCondition {
    Constant {
        value: f64,
    },
    /// `offset + slope . x`.
    Affine {
        slope: Vec<f64>,
        offset: f64,
    },
    /// `amplitude prod_i sin(k_i x_i)`.
    SinProduct {
        amplitude: f64,
        wavenumbers: Vec<f64>,
    },
    /// `base + amplitude exp(-|x - center|^2 / width^2)`; a negative amplitude gives a dip.
    Gaussian {
        center: Vec<f64>,
        width: f64,
        amplitude: f64,
        base: f64,
    },
    /// Random low-frequency cosine series, deterministic in `seed`.
    Modes {
        modes: usize,
        amplitude: f64,
        seed: u64,
    },
}

impl InitialCondition {
    pub fn validate(&self, n: usize) -> Result<()> {
        let len_ok = |len: usize, what: &str| {
            if len == n {
                Ok(())
            } else {
                Err(Error::DimensionMismatch(format!("{what} has length {len}, expected {n}")))
            }
        };
        match self {
            InitialCondition::Constant { value } if !value.is_finite() => Err(invalid("non-finite constant")),
            InitialCondition::Affine { slope, .. } => len_ok(slope.len(), "slope"),
            InitialCondition::SinProduct { wavenumbers, .. } => len_ok(wavenumbers.len(), "wavenumbers"),
            InitialCondition::Gaussian { center, width, .. } => {
                len_ok(center.len(), "center")?;
                if *width > 0.0 {
                    Ok(())
                } else {
                    Err(invalid("gaussian width must be positive"))
                }
            }
            InitialCondition::Modes { modes, .. } if *modes == 0 || *modes > 64 => {
                Err(invalid("modes must lie in 1..=64"))
            }
            _ => Ok(()),
        }
    }

    /// Pointwise evaluator. Random families draw their coefficients once here.
    pub fn evaluator(&self, n: usize) -> Box<dyn Fn(&[f64]) -> f64 + Send + Sync> {
        match self.clone() {
            InitialCondition::Constant { value } => Box::new(move |_| value),
            InitialCondition::Affine { slope, offset } => {
                Box::new(move |x| offset + slope.iter().zip(x).map(|(s, x)| s * x).sum::<f64>())
            }
            InitialCondition::SinProduct { amplitude, wavenumbers } => {
                Box::new(move |x| amplitude * wavenumbers.iter().zip(x).map(|(k, x)| (k * x).sin()).product::<f64>())
            }
            InitialCondition::Gaussian { center, width, amplitude, base } => Box::new(move |x| {
                let r2: f64 = center.iter().zip(x).map(|(c, x)| (x - c) * (x - c)).sum();
                base + amplitude * (-r2 / (width * width)).exp()
            }),
            InitialCondition::Modes { modes, amplitude, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let terms: Vec<(f64, Vec<f64>, f64)> = (0..modes)
                    .map(|_| {
                        let c = rng.gen_range(-1.0..1.0) * amplitude / modes as f64;
                        let k = (0..n).map(|_| rng.gen_range(0..4) as f64 * std::f64::consts::PI).collect();
                        let ph = rng.gen_range(0.0..std::f64::consts::TAU);
                        (c, k, ph)
                    })
                    .collect();
                Box::new(move |x| {
                    terms
                        .iter()
                        .map(|(c, k, ph)| c * (k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() + ph).cos())
                        .sum()
                })
            }
        }
    }

    pub fn sample(&self, grid: &Grid, time: f64) -> Result<Field> {
        self.validate(grid.dim())?;
        let f = self.evaluator(grid.dim());
        Ok(Field::from_fn(grid, time, |x| f(x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_sampling() {
        let g = Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 2]).unwrap();
        let f = InitialCondition::Affine { slope: vec![1.0, 2.0], offset: 0.5 }.sample(&g, 0.0).unwrap();
        assert_eq!(f.values, vec![0.5 + 0.25 + 0.5, 0.5 + 0.25 + 1.5, 0.5 + 0.75 + 0.5, 0.5 + 0.75 + 1.5]);
    }

    #[test]
    fn modes_are_deterministic() {
        let g = Grid::new(vec![0.0], vec![1.0], vec![16]).unwrap();
        let ic = InitialCondition::Modes { modes: 5, amplitude: 1.0, seed: 9 };
        assert_eq!(ic.sample(&g, 0.0).unwrap(), ic.sample(&g, 0.0).unwrap());
    }
}
