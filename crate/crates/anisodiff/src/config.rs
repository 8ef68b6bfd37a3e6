//! Experiment configuration, read from TOML.
//!
//! Parsing problems (syntax, unknown keys, wrong types) are [`Error::Parse`];
//! inconsistent values found afterwards are validation errors.

use serde::{Deserialize, Serialize};

use crate::analysis::Sign;
use crate::degiorgi::{CriticalMassParams, SupBoundKind};
use crate::error::{invalid, Error, Result};
use crate::flux::{CoefficientField, ExponentVector, ProblemSpec};
use crate::geometry::{parabolic_boundary_distance, Cylinder, Side, SpaceTimeBox};
use crate::solver::{Grid, InitialCondition, SchemeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub initial: InitialCondition,
    pub scheme: SchemeConfig,
    pub time: TimeSection,
    #[serde(default)]
    pub exact: Option<ExactSolution>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub probes: Vec<ProbeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub exponents: Vec<f64>,
    pub delta: Vec<f64>,
    pub lambda: f64,
    pub coefficients: CoefficientField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
}

/// Closed-form solutions the final state can be compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExactSolution {
    /// The initial datum itself (time-independent solutions).
    Stationary,
    /// `amplitude exp(-|k|^2 (t - t_start)) prod_i sin(k_i x_i)`, valid for `p = 2`,
    /// `delta = 0` and unit coefficients.
    SeparableHeat { amplitude: f64, wavenumbers: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DumpFormat {
    Csv,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DumpSlices {
    None,
    Final,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_formats")]
    pub formats: Vec<DumpFormat>,
    #[serde(default = "default_slices")]
    pub slices: DumpSlices,
}

fn default_formats() -> Vec<DumpFormat> {
    vec![DumpFormat::Csv, DumpFormat::Binary]
}
fn default_slices() -> DumpSlices {
    DumpSlices::Final
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { formats: default_formats(), slices: default_slices() }
    }
}

// unknown keys are rejected by the probe variant itself (flatten and
// deny_unknown_fields do not combine)
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub name: String,
    #[serde(flatten)]
    pub probe: Probe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Probe {
    Energy(EnergyProbe),
    Troisi(TroisiProbe),
    Cutoff(CutoffProbe),
    Supbound(SupBoundProbe),
    Recursion(RecursionProbe),
    CriticalMass(CriticalMassParams),
    Regularize(RegularizeProbe),
}

impl Probe {
    pub fn kind(&self) -> &'static str {
        match self {
            Probe::Energy(_) => "energy",
            Probe::Troisi(_) => "troisi",
            Probe::Cutoff(_) => "cutoff",
            Probe::Supbound(_) => "supbound",
            Probe::Recursion(_) => "recursion",
            Probe::CriticalMass(_) => "critical-mass",
            Probe::Regularize(_) => "regularize",
        }
    }

    /// Whether the probe reads the trajectory.
    pub fn needs_trajectory(&self) -> bool {
        !matches!(self, Probe::Troisi(_) | Probe::Cutoff(_) | Probe::Recursion(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyProbe {
    pub center: Vec<f64>,
    pub t0: f64,
    pub rho: f64,
    pub k: f64,
    pub sign: Sign,
    /// Cut-off ramp length; defaults to `rho / 4`.
    #[serde(default)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TroisiProbe {
    /// Per-axis bump `(center, outer, inner)` half-widths on the problem grid.
    pub center: Vec<f64>,
    pub outer: Vec<f64>,
    pub inner: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffProbe {
    pub center: Vec<f64>,
    pub t0: f64,
    pub rho: f64,
    pub sigmas: Vec<f64>,
    #[serde(default = "default_j_max")]
    pub j_max: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_j_max() -> usize {
    8
}
fn default_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupBoundProbe {
    pub center: Vec<f64>,
    pub t0: f64,
    pub rho: f64,
    pub bound: SupBoundKind,
    #[serde(default = "default_sign")]
    pub sign: Sign,
    /// Optional level sequence `Y_j` on the shrinking cylinders towards the inner one.
    #[serde(default)]
    pub levels: Option<LevelsSpec>,
}

fn default_sign() -> Sign {
    Sign::Plus
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsSpec {
    pub k: f64,
    pub j_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecursionProbe {
    pub c: f64,
    pub b: f64,
    pub mu: f64,
    pub y0: f64,
    pub j_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizeProbe {
    pub side: Side,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let pr = &self.problem;
        ProblemSpec::new(
            ExponentVector::new(pr.exponents.clone())?,
            pr.delta.clone(),
            pr.lambda,
            pr.coefficients.clone(),
        )
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.lower.clone(), self.grid.upper.clone(), self.grid.counts.clone())
    }

    pub fn domain(&self) -> SpaceTimeBox {
        SpaceTimeBox {
            lower: self.grid.lower.clone(),
            upper: self.grid.upper.clone(),
            t_lo: self.time.t_start,
            t_hi: self.time.t_end,
        }
    }

    /// Everything that can be checked without running the solver.
    pub fn validate(&self) -> Result<()> {
        let spec = self.problem_spec()?;
        let grid = self.grid()?;
        let n = spec.dim();
        if grid.dim() != n {
            return Err(Error::DimensionMismatch(format!("grid has {} axes, exponents have {n}", grid.dim())));
        }
        self.initial.validate(n)?;
        self.scheme.validate()?;
        if !(self.time.t_start.is_finite() && self.time.t_end.is_finite() && self.time.t_end > self.time.t_start) {
            return Err(invalid("time.t_end must exceed time.t_start"));
        }
        if let Some(ExactSolution::SeparableHeat { wavenumbers, .. }) = &self.exact {
            if wavenumbers.len() != n {
                return Err(Error::DimensionMismatch("exact.wavenumbers".into()));
            }
            let heat = spec.p().iter().all(|p| *p == 2.0)
                && spec.delta.iter().all(|d| *d == 0.0)
                && matches!(&spec.coefficients, CoefficientField::Constant { values } if values.iter().all(|v| *v == 1.0));
            if !heat {
                return Err(invalid("exact separable-heat needs p = 2, delta = 0 and unit coefficients"));
            }
        }
        if self.output.formats.is_empty() && self.output.slices != DumpSlices::None {
            return Err(invalid("output.formats is empty"));
        }
        let mut names = std::collections::BTreeSet::new();
        for pc in &self.probes {
            if !names.insert(pc.name.as_str()) {
                return Err(invalid(format!("duplicate probe name {:?}", pc.name)));
            }
            self.validate_probe(pc, &spec, &grid).map_err(|e| prefix(e, &format!("probe {:?}", pc.name)))?;
        }
        Ok(())
    }

    fn contained(&self, cyl: &Cylinder, what: &str) -> Result<()> {
        let margin = parabolic_boundary_distance(cyl, &self.domain())?;
        if margin < 0.0 {
            return Err(Error::DomainMismatch(format!("{what} leaves the computed region by {}", -margin)));
        }
        Ok(())
    }

    fn validate_probe(&self, pc: &ProbeConfig, spec: &ProblemSpec, grid: &Grid) -> Result<()> {
        let p = &spec.exponents;
        let n = spec.dim();
        let dim = |v: &[f64], what: &str| {
            if v.len() == n {
                Ok(())
            } else {
                Err(Error::DimensionMismatch(format!("{what} has length {}, expected {n}", v.len())))
            }
        };
        match &pc.probe {
            Probe::Energy(e) => {
                dim(&e.center, "center")?;
                let cyl = Cylinder::standard(p, &e.center, e.t0, e.rho)?;
                self.contained(&cyl, "energy cylinder")?;
                if let Some(eps) = e.eps {
                    if !(eps > 0.0 && eps < e.rho) {
                        return Err(invalid(format!("eps = {eps} must lie in (0, rho)")));
                    }
                }
                if !e.k.is_finite() {
                    return Err(invalid("k must be finite"));
                }
            }
            Probe::Troisi(t) => {
                dim(&t.center, "center")?;
                dim(&t.outer, "outer")?;
                dim(&t.inner, "inner")?;
                p.sobolev_conjugate()?;
                for i in 0..n {
                    if !(t.inner[i] >= 0.0 && t.inner[i] < t.outer[i]) {
                        return Err(invalid(format!("axis {i}: need 0 <= inner < outer")));
                    }
                    // one empty cell layer on each side
                    let h = grid.h()[i];
                    if t.center[i] - t.outer[i] < grid.lower()[i] + h || t.center[i] + t.outer[i] > grid.upper()[i] - h
                    {
                        return Err(Error::DomainMismatch(format!("axis {i}: bump support reaches the grid edge")));
                    }
                }
            }
            Probe::Cutoff(c) => {
                dim(&c.center, "center")?;
                if !(c.rho > 0.0 && c.rho.is_finite()) {
                    return Err(invalid("rho must be positive"));
                }
                if c.sigmas.is_empty() || c.sigmas.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
                    return Err(invalid("sigmas must be non-empty and lie in (0, 1)"));
                }
                if c.samples == 0 || c.j_max > 60 {
                    return Err(invalid("samples must be positive and j_max at most 60"));
                }
            }
            Probe::Supbound(s) => {
                dim(&s.center, "center")?;
                let outer = match s.bound {
                    SupBoundKind::Local { .. } => s.rho,
                    _ => 2.0 * s.rho,
                };
                let cyl = Cylinder::standard(p, &s.center, s.t0, outer)?;
                self.contained(&cyl, "sup-bound cylinder")?;
            }
            Probe::Recursion(r) => {
                crate::degiorgi::Recursion::new(r.c, r.b, r.mu)?;
                if !(r.y0.is_finite() && r.y0 >= 0.0) || r.j_max == 0 || r.j_max > 100_000 {
                    return Err(invalid("need finite y0 >= 0 and 1 <= j_max <= 100000"));
                }
            }
            Probe::CriticalMass(cm) => {
                dim(&cm.y, "y")?;
                let cyl = Cylinder::intrinsic(p, &cm.y, cm.s, 2.0 * cm.rho, cm.m)?;
                self.contained(&cyl, "doubled intrinsic cylinder")?;
                if !(cm.a > 0.0 && cm.a < 1.0) {
                    return Err(invalid(format!("a = {} must lie in (0, 1)", cm.a)));
                }
            }
            Probe::Regularize(_) => {}
        }
        Ok(())
    }
}

fn prefix(e: Error, ctx: &str) -> Error {
    match e {
        Error::InvalidExponents(m) => Error::InvalidExponents(format!("{ctx}: {m}")),
        Error::OutOfRange(m) => Error::OutOfRange(format!("{ctx}: {m}")),
        Error::DimensionMismatch(m) => Error::DimensionMismatch(format!("{ctx}: {m}")),
        Error::InvalidParameter(m) => Error::InvalidParameter(format!("{ctx}: {m}")),
        Error::DomainMismatch(m) => Error::DomainMismatch(format!("{ctx}: {m}")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 3

[problem]
exponents = [2.5, 3.0]
delta = [0.5, 0.5]
lambda = 1.0
coefficients = { family = "constant", values = [1.0, 1.0] }

[grid]
lower = [-1.0, -1.0]
upper = [1.0, 1.0]
counts = [16, 16]

[initial]
family = "affine"
slope = [0.4, 0.3]
offset = 0.0

[scheme]
scheme = "explicit-euler"
dt_max = 0.01
boundary = "dirichlet-from-initial"

[time]
t_end = 0.5
"#;

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::from_toml_str(BASE).unwrap();
        c.validate().unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.output, OutputSection::default());
        assert!(c.probes.is_empty());
    }

    #[test]
    fn unknown_key_is_a_parse_error_naming_the_field() {
        let text = BASE.replace("lambda = 1.0", "lambda = 1.0\nlamda = 2.0");
        match ExperimentConfig::from_toml_str(&text) {
            Err(Error::Parse(msg)) => assert!(msg.contains("lamda"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cylinder_outside_the_domain_fails_validation() {
        let text = format!(
            "{BASE}\n[[probes]]\nname = \"e\"\nkind = \"energy\"\ncenter = [0.9, 0.0]\nt0 = 0.4\nrho = 0.2\nk = 0.0\nsign = \"plus\"\n"
        );
        let c = ExperimentConfig::from_toml_str(&text).unwrap();
        assert!(matches!(c.validate(), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn probes_parse_with_kind_tags() {
        let text = format!(
            "{BASE}\n[[probes]]\nname = \"r\"\nkind = \"recursion\"\nc = 1.0\nb = 2.0\nmu = 1.0\ny0 = 0.5\nj_max = 10\n\n[[probes]]\nname = \"lsc\"\nkind = \"regularize\"\nside = \"lower\"\n"
        );
        let c = ExperimentConfig::from_toml_str(&text).unwrap();
        c.validate().unwrap();
        assert_eq!(c.probes[0].probe.kind(), "recursion");
        assert_eq!(c.probes[1].probe.kind(), "regularize");
    }
}
