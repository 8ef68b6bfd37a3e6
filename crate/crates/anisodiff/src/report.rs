//! Machine-readable run reports: `report.json`, `summary.csv` and `metrics.json`.
//!
//! `report.json` holds nothing that depends on the machine or the clock, so
//! repeated runs of one configuration produce identical bytes. Timings go to
//! `metrics.json`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::solver::MonitorReport;

pub const SCHEMA: &str = "anisodiff-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// A precondition of the estimate does not hold (or nothing to compare
    /// against); the probe neither confirms nor refutes it.
    Skipped,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub name: String,
    pub kind: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub reason: Option<String>,
    #[serde(default)]
    pub regime: Option<String>,
    /// Compact JSON of the probe parameters.
    pub parameters: String,
    #[serde(default)]
    pub lhs: Option<f64>,
    #[serde(default)]
    pub rhs: Option<f64>,
    /// Non-negative when the checked inequality holds.
    #[serde(default)]
    pub margin: Option<f64>,
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactError {
    /// Largest nodal error over all stored slices.
    pub max_linf: f64,
    pub final_linf: f64,
    /// Root mean square error on the final slice.
    pub final_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub steps: usize,
    pub slices: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub dt_mean: f64,
    pub final_min: f64,
    pub final_max: f64,
    pub monitor: MonitorReport,
    pub error_vs_exact: Option<ExactError>,
    /// Paths of written field dumps, relative to the output directory.
    pub dumps: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub pass: usize,
    pub fail: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub command: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    /// Constants the probes were checked against (after calibration, the new ones).
    pub constants: Option<Constants>,
    pub simulation: Option<SimulationSummary>,
    pub probes: Vec<ProbeOutcome>,
    pub counts: Counts,
    /// Conjunction of the probe verdicts; skipped probes do not count.
    pub verdict: Verdict,
}

impl RunReport {
    pub fn new(
        command: &str,
        seed: u64,
        config: ExperimentConfig,
        constants: Option<Constants>,
        simulation: Option<SimulationSummary>,
        probes: Vec<ProbeOutcome>,
    ) -> Self {
        let mut counts = Counts::default();
        for p in &probes {
            match p.verdict {
                Verdict::Pass => counts.pass += 1,
                Verdict::Fail => counts.fail += 1,
                Verdict::Skipped => counts.skipped += 1,
            }
        }
        let verdict = if counts.fail > 0 { Verdict::Fail } else { Verdict::Pass };
        Self {
            schema: SCHEMA.to_string(),
            command: command.to_string(),
            seed,
            config,
            constants,
            simulation,
            probes,
            counts,
            verdict,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("report: {e}")))
    }

    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        wr.write_record(["probe", "kind", "regime", "parameters", "lhs", "rhs", "margin", "verdict", "error_vs_exact"])
            .map_err(csv_err)?;
        // same shortest round-trip text as report.json
        let num = |v: Option<f64>| v.map(|x| serde_json::to_string(&x).expect("f64 serializes")).unwrap_or_default();
        if let Some(sim) = &self.simulation {
            let err = sim.error_vs_exact.as_ref().map(|e| e.final_linf);
            wr.write_record(["simulation", "simulation", "", "", "", "", "", self.verdict_of_simulation(), &num(err)])
                .map_err(csv_err)?;
        }
        for p in &self.probes {
            wr.write_record([
                p.name.as_str(),
                p.kind.as_str(),
                p.regime.as_deref().unwrap_or(""),
                p.parameters.as_str(),
                &num(p.lhs),
                &num(p.rhs),
                &num(p.margin),
                p.verdict.as_str(),
                "",
            ])
            .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    fn verdict_of_simulation(&self) -> &'static str {
        match &self.simulation {
            Some(s) if s.monitor.violations > 0 => "monitor_violations",
            Some(_) => "ok",
            None => "",
        }
    }

    /// Writes `report.json` and `summary.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        let f = std::fs::File::create(dir.join("summary.csv"))?;
        self.write_summary_csv(std::io::BufWriter::new(f))
    }
}

/// Wall-clock timings of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub threads: usize,
    pub simulation_seconds: f64,
    pub probe_seconds: Vec<(String, f64)>,
    pub total_seconds: f64,
}

impl Metrics {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        std::fs::write(dir.join("metrics.json"), s)?;
        Ok(())
    }
}
