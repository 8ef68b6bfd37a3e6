//! Executes a configuration for one subcommand and writes the outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use crate::analysis::{energy_ledger, tensor_bump, troisi_check};
use crate::config::{
    CutoffProbe, DumpFormat, DumpSlices, EnergyProbe, ExactSolution, ExperimentConfig, Probe, ProbeConfig,
    RecursionProbe, SupBoundProbe, TroisiProbe,
};
use crate::constants::Constants;
use crate::cutoff::{make_zeta, make_zeta_tilde_j, verify_bounds, AxisBump};
use crate::degiorgi::{
    critical_mass_check, fit_gamma, intrinsic_level_sequence, level_sequence, lsc_regularize, sup_bound,
    CriticalMassParams, CriticalMassVerdict, Recursion, SupBoundKind,
};
use crate::error::{invalid, Error, Result};
use crate::flux::{classify_regime, ProblemSpec};
use crate::geometry::{IterationSchedule, LevelRule, Side};
use crate::report::{ExactError, Metrics, ProbeOutcome, RunReport, SimulationSummary, Verdict};
use crate::solver::{advance, dump, BoundaryData, BoundaryKind, Grid, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    VerifyEnergy,
    VerifyEmbedding,
    VerifyCutoff,
    DegiorgiReport,
    CriticalMass,
    Regularize,
    Calibrate,
    Run,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::VerifyEnergy => "verify-energy",
            Command::VerifyEmbedding => "verify-embedding",
            Command::VerifyCutoff => "verify-cutoff",
            Command::DegiorgiReport => "degiorgi-report",
            Command::CriticalMass => "critical-mass",
            Command::Regularize => "regularize",
            Command::Calibrate => "calibrate",
            Command::Run => "run",
        }
    }

    fn selects(self, probe: &Probe) -> bool {
        match self {
            Command::Simulate => false,
            Command::Run => true,
            Command::VerifyEnergy => matches!(probe, Probe::Energy(_)),
            Command::VerifyEmbedding => matches!(probe, Probe::Troisi(_)),
            Command::VerifyCutoff => matches!(probe, Probe::Cutoff(_)),
            Command::DegiorgiReport => matches!(probe, Probe::Supbound(_) | Probe::Recursion(_)),
            Command::CriticalMass => matches!(probe, Probe::CriticalMass(_)),
            Command::Regularize => matches!(probe, Probe::Regularize(_)),
            Command::Calibrate => matches!(probe, Probe::Energy(_) | Probe::Supbound(_) | Probe::CriticalMass(_)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub command: Command,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub constants_path: PathBuf,
}

/// Sets the size of the global thread pool; 0 picks the number of cores.
/// Only the first call has an effect.
pub fn configure_threads(n: usize) {
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

/// Validates, simulates if needed, evaluates the selected probes and writes
/// `report.json`, `summary.csv`, `metrics.json`, field dumps and, for
/// calibration, the constants file.
pub fn execute(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport> {
    let start = Instant::now();
    cfg.validate()?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let cmd = opts.command;
    let selected: Vec<&ProbeConfig> = cfg.probes.iter().filter(|p| cmd.selects(&p.probe)).collect();
    if selected.is_empty() && !matches!(cmd, Command::Simulate | Command::Run | Command::Calibrate) {
        return Err(invalid(format!("the configuration has no probes for {}", cmd.name())));
    }

    let existing = match Constants::load(&opts.constants_path) {
        Ok(c) => Some(c),
        Err(Error::MissingConstants(_)) => None,
        Err(e) => return Err(e),
    };
    let need = |f: fn(&Probe) -> bool| selected.iter().any(|p| f(&p.probe));
    match cmd {
        Command::VerifyEnergy | Command::DegiorgiReport | Command::CriticalMass => {
            let c = existing.clone().ok_or_else(|| {
                Error::MissingConstants(format!(
                    "{} not found; run the calibrate subcommand first",
                    opts.constants_path.display()
                ))
            })?;
            if need(|p| matches!(p, Probe::Energy(_))) {
                Constants::require(c.energy_constant, "energy_constant")?;
            }
            if need(|p| matches!(p, Probe::Supbound(_))) {
                Constants::require(c.supbound_constant, "supbound_constant")?;
            }
            if need(|p| matches!(p, Probe::CriticalMass(_))) {
                Constants::require(c.gamma, "gamma")?;
            }
        }
        _ => {}
    }

    let spec = cfg.problem_spec()?;
    let grid = cfg.grid()?;
    let simulate = matches!(cmd, Command::Simulate | Command::Run | Command::Calibrate)
        || selected.iter().any(|p| p.probe.needs_trajectory());
    let mut metrics = Metrics { threads: rayon::current_num_threads(), ..Default::default() };
    let (traj, simulation) = if simulate {
        let t = Instant::now();
        let traj = simulate_config(cfg, &spec, &grid)?;
        metrics.simulation_seconds = t.elapsed().as_secs_f64();
        let dumps = write_dumps(cfg, &traj, &opts.out_dir)?;
        let summary = summarize(cfg, &traj, dumps);
        (Some(traj), Some(summary))
    } else {
        (None, None)
    };

    let calibrating = cmd == Command::Calibrate;
    let ctx = Ctx { spec: &spec, grid: &grid, traj: traj.as_ref(), constants: existing.as_ref(), calibrating, seed };
    let timed: Vec<(Result<Evaluated>, f64)> = selected
        .par_iter()
        .enumerate()
        .map(|(i, pc)| {
            let t = Instant::now();
            let r = ctx.evaluate(i, pc);
            (r, t.elapsed().as_secs_f64())
        })
        .collect();
    let mut outcomes = Vec::with_capacity(timed.len());
    let mut calib = Calibration::default();
    for ((r, secs), pc) in timed.into_iter().zip(&selected) {
        let ev = r.map_err(|e| match e {
            // containment was checked up front, so a domain error here is a bug in the data
            Error::DomainMismatch(m) => Error::DomainMismatch(format!("probe {:?}: {m}", pc.name)),
            other => other,
        })?;
        calib.absorb(&ev.calibration);
        metrics.probe_seconds.push((pc.name.clone(), secs));
        outcomes.push(ev.outcome);
    }

    let constants = if calibrating {
        let c = calib.merge_into(existing.unwrap_or_default());
        c.save(&opts.constants_path)?;
        Some(c)
    } else {
        existing
    };
    let report = RunReport::new(cmd.name(), seed, cfg.clone(), constants, simulation, outcomes);
    report.write_to(&opts.out_dir)?;
    metrics.total_seconds = start.elapsed().as_secs_f64();
    metrics.write_to(&opts.out_dir)?;
    Ok(report)
}

/// Runs the solver over `[t_start, t_end]`.
pub fn simulate_config(cfg: &ExperimentConfig, spec: &ProblemSpec, grid: &Grid) -> Result<Trajectory> {
    let n = grid.dim();
    let initial = cfg.initial.sample(grid, cfg.time.t_start)?;
    let bc = match cfg.scheme.boundary {
        BoundaryKind::Periodic => BoundaryData::periodic(),
        BoundaryKind::DirichletFromInitial => {
            let eval = cfg.initial.evaluator(n);
            BoundaryData::dirichlet_from_fn(grid, |x| eval(x))
        }
    };
    advance(&initial, spec, &bc, &cfg.scheme, cfg.time.t_end)
}

fn exact_value(exact: &ExactSolution, cfg: &ExperimentConfig, x: &[f64], t: f64) -> f64 {
    match exact {
        ExactSolution::Stationary => cfg.initial.evaluator(x.len())(x),
        ExactSolution::SeparableHeat { amplitude, wavenumbers } => {
            let k2: f64 = wavenumbers.iter().map(|k| k * k).sum();
            let s: f64 = wavenumbers.iter().zip(x).map(|(k, xi)| (k * xi).sin()).product();
            amplitude * (-k2 * (t - cfg.time.t_start)).exp() * s
        }
    }
}

fn exact_error(cfg: &ExperimentConfig, exact: &ExactSolution, traj: &Trajectory) -> ExactError {
    let grid = &traj.grid;
    let centers: Vec<Vec<f64>> = (0..grid.len()).map(|c| grid.center(c)).collect();
    let eval = cfg.initial.evaluator(grid.dim());
    let mut max_linf: f64 = 0.0;
    let (mut final_linf, mut final_sq) = (0.0, 0.0);
    for (m, (&t, slice)) in traj.times.iter().zip(&traj.slices).enumerate() {
        let mut linf: f64 = 0.0;
        let mut sq = 0.0;
        for (c, x) in centers.iter().enumerate() {
            let e = match exact {
                ExactSolution::Stationary => eval(x),
                _ => exact_value(exact, cfg, x, t),
            };
            let d = (slice[c] - e).abs();
            linf = linf.max(d);
            sq += d * d;
        }
        max_linf = max_linf.max(linf);
        if m + 1 == traj.times.len() {
            final_linf = linf;
            final_sq = sq;
        }
    }
    ExactError { max_linf, final_linf, final_rms: (final_sq / grid.len() as f64).sqrt() }
}

fn summarize(cfg: &ExperimentConfig, traj: &Trajectory, dumps: Vec<String>) -> SimulationSummary {
    let steps = traj.dts.len();
    let (dt_min, dt_max, dt_mean) = if steps == 0 {
        (0.0, 0.0, 0.0)
    } else {
        let mn = traj.dts.iter().copied().fold(f64::INFINITY, f64::min);
        let mx = traj.dts.iter().copied().fold(0.0, f64::max);
        (mn, mx, (traj.t_last() - traj.t_first()) / steps as f64)
    };
    let last = traj.last();
    SimulationSummary {
        steps,
        slices: traj.len(),
        t_start: traj.t_first(),
        t_end: traj.t_last(),
        dt_min,
        dt_max,
        dt_mean,
        final_min: last.min(),
        final_max: last.max(),
        monitor: traj.monitor.clone(),
        error_vs_exact: cfg.exact.as_ref().map(|e| exact_error(cfg, e, traj)),
        dumps,
    }
}

fn write_dumps(cfg: &ExperimentConfig, traj: &Trajectory, out: &Path) -> Result<Vec<String>> {
    let which: Vec<usize> = match cfg.output.slices {
        DumpSlices::None => Vec::new(),
        DumpSlices::Final => vec![traj.len() - 1],
        DumpSlices::All => (0..traj.len()).collect(),
    };
    if which.is_empty() {
        return Ok(Vec::new());
    }
    let dir = out.join("fields");
    std::fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    for m in which {
        let stem = if cfg.output.slices == DumpSlices::Final { "final".to_string() } else { format!("slice_{m:05}") };
        let field = traj.slice(m);
        for fmt in &cfg.output.formats {
            let name = match fmt {
                DumpFormat::Csv => format!("{stem}.csv"),
                DumpFormat::Binary => format!("{stem}.bin"),
            };
            let f = std::io::BufWriter::new(std::fs::File::create(dir.join(&name))?);
            match fmt {
                DumpFormat::Csv => dump::write_csv(&field, f)?,
                DumpFormat::Binary => dump::write_binary(&field, f)?,
            }
            written.push(format!("fields/{name}"));
        }
    }
    Ok(written)
}

/// Values a probe contributes to calibration.
#[derive(Debug, Clone, Default)]
struct Calibration {
    energy: Option<f64>,
    supbound: Option<f64>,
    gamma: Option<f64>,
}

fn max_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

impl Calibration {
    fn absorb(&mut self, other: &Calibration) {
        self.energy = max_opt(self.energy, other.energy);
        self.supbound = max_opt(self.supbound, other.supbound);
        self.gamma = max_opt(self.gamma, other.gamma);
    }

    /// Running maximum with constants from earlier calibration runs.
    fn merge_into(&self, mut c: Constants) -> Constants {
        c.energy_constant = max_opt(c.energy_constant, self.energy);
        c.supbound_constant = max_opt(c.supbound_constant, self.supbound);
        c.gamma = max_opt(c.gamma, self.gamma);
        c
    }
}

struct Evaluated {
    outcome: ProbeOutcome,
    calibration: Calibration,
}

struct Ctx<'a> {
    spec: &'a ProblemSpec,
    grid: &'a Grid,
    traj: Option<&'a Trajectory>,
    constants: Option<&'a Constants>,
    calibrating: bool,
    seed: u64,
}

struct Outcome {
    verdict: Verdict,
    reason: Option<String>,
    regime: Option<String>,
    lhs: Option<f64>,
    rhs: Option<f64>,
    margin: Option<f64>,
    detail: serde_json::Value,
}

impl Outcome {
    fn new(verdict: Verdict, detail: serde_json::Value) -> Self {
        Self { verdict, reason: None, regime: None, lhs: None, rhs: None, margin: None, detail }
    }
    fn reason(mut self, r: impl Into<String>) -> Self {
        self.reason = Some(r.into());
        self
    }
    fn sides(mut self, lhs: f64, rhs: f64, margin: f64) -> Self {
        self.lhs = Some(lhs);
        self.rhs = Some(rhs);
        self.margin = Some(margin);
        self
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("probe detail serializes")
}

impl Ctx<'_> {
    fn traj(&self) -> Result<&Trajectory> {
        self.traj.ok_or_else(|| invalid("probe needs a simulated trajectory"))
    }

    fn evaluate(&self, index: usize, pc: &ProbeConfig) -> Result<Evaluated> {
        let mut calibration = Calibration::default();
        let out = match &pc.probe {
            Probe::Energy(e) => self.energy(e, &mut calibration)?,
            Probe::Troisi(t) => self.troisi(t)?,
            Probe::Cutoff(c) => self.cutoff(c, index)?,
            Probe::Supbound(s) => self.supbound(s, &mut calibration)?,
            Probe::Recursion(r) => recursion(r)?,
            Probe::CriticalMass(cm) => self.critical_mass(cm, &mut calibration)?,
            Probe::Regularize(r) => self.regularize(r.side)?,
        };
        let mut out = out;
        if out.regime.is_none() {
            out.regime = classify_regime(&self.spec.exponents, None).ok().map(|r| r.name().to_string());
        }
        let parameters = serde_json::to_string(&pc.probe).expect("probe serializes");
        Ok(Evaluated {
            outcome: ProbeOutcome {
                name: pc.name.clone(),
                kind: pc.probe.kind().to_string(),
                verdict: out.verdict,
                reason: out.reason,
                regime: out.regime,
                parameters,
                lhs: out.lhs,
                rhs: out.rhs,
                margin: out.margin,
                detail: out.detail,
            },
            calibration,
        })
    }

    fn energy(&self, e: &EnergyProbe, cal: &mut Calibration) -> Result<Outcome> {
        let traj = self.traj()?;
        let p = &self.spec.exponents;
        let cyl = crate::geometry::Cylinder::standard(p, &e.center, e.t0, e.rho)?;
        let a: Vec<f64> = p.as_slice().iter().map(|pi| e.rho.powf(1.0 / pi)).collect();
        let b: Vec<f64> = p.as_slice().iter().map(|pi| (0.5 * e.rho).powf(1.0 / pi)).collect();
        let zeta = make_zeta(p, &e.center, e.t0, e.rho, e.eps.unwrap_or(0.25 * e.rho), &a, &b)?;
        let ledger = energy_ledger(traj, self.spec, &cyl, &zeta, e.k, e.sign)?;
        let detail = to_value(&ledger);
        let Some(ratio) = ledger.ratio else {
            return Ok(Outcome::new(Verdict::Pass, detail).reason("both sides vanish").sides(0.0, 0.0, 0.0));
        };
        if self.calibrating {
            cal.energy = Some(ratio);
            return Ok(Outcome::new(Verdict::Pass, detail).reason("calibration sample"));
        }
        let Some(c) = self.constants.and_then(|c| c.energy_constant.map(|e| e * c.energy_slack)) else {
            return Ok(Outcome::new(Verdict::Skipped, detail).reason("energy constant not calibrated"));
        };
        let bound = c * ledger.rhs;
        let verdict = if ledger.lhs <= bound { Verdict::Pass } else { Verdict::Fail };
        Ok(Outcome::new(verdict, detail).sides(ledger.lhs, bound, bound - ledger.lhs))
    }

    fn troisi(&self, t: &TroisiProbe) -> Result<Outcome> {
        let p = &self.spec.exponents;
        let bumps: Vec<AxisBump> =
            (0..p.dim()).map(|i| AxisBump { center: t.center[i], outer: t.outer[i], inner: t.inner[i] }).collect();
        let base = troisi_check(&tensor_bump(self.grid, &bumps)?, p)?;
        let counts: Vec<usize> = self.grid.counts().iter().map(|c| 2 * c).collect();
        let fine = Grid::new(self.grid.lower().to_vec(), self.grid.upper().to_vec(), counts)?;
        let refined = troisi_check(&tensor_bump(&fine, &bumps)?, p)?;
        let detail = json!({ "base": to_value(&base), "refined": to_value(&refined) });
        let (Some(r0), Some(r1)) = (base.power_ratio, refined.power_ratio) else {
            return Ok(Outcome::new(Verdict::Skipped, detail).reason("bump has no resolved gradient"));
        };
        // the embedding constant must not drift under refinement
        let drift = (r1 / r0).max(r0 / r1);
        let verdict = if r0.is_finite() && r1.is_finite() && drift <= 2.0 { Verdict::Pass } else { Verdict::Fail };
        Ok(Outcome::new(verdict, detail).sides(base.power_lhs, base.power_rhs, 2.0 - drift))
    }

    fn cutoff(&self, c: &CutoffProbe, index: usize) -> Result<Outcome> {
        let p = &self.spec.exponents;
        let mut rows = Vec::new();
        let mut violations = 0usize;
        let mut worst: f64 = 0.0;
        for (si, &sigma) in c.sigmas.iter().enumerate() {
            let sched = IterationSchedule::ShrinkOut { rho: c.rho, sigma, k: 0.0, levels: LevelRule::Approach };
            for j in 0..=c.j_max {
                let (z, bounds) = make_zeta_tilde_j(p, &sched, j, &c.center, c.t0)?;
                let sample_seed = self.seed ^ ((index as u64) << 32) ^ ((si as u64) << 16) ^ j as u64;
                let chk = verify_bounds(&z, &bounds, c.samples, sample_seed)?;
                violations += chk.violations;
                let mut r = chk.max_time / chk.time_bound;
                for (m, b) in chk.max_space.iter().zip(&chk.space_bound) {
                    r = r.max(m / b);
                }
                worst = worst.max(r);
                rows.push(json!({ "sigma": sigma, "j": j, "check": to_value(&chk) }));
            }
        }
        let verdict = if violations == 0 { Verdict::Pass } else { Verdict::Fail };
        let detail = json!({ "violations": violations, "worst_ratio": worst, "members": rows });
        Ok(Outcome::new(verdict, detail).sides(worst, 1.0, 1.0 - worst))
    }

    fn supbound(&self, s: &SupBoundProbe, cal: &mut Calibration) -> Result<Outcome> {
        let traj = self.traj()?;
        let p = &self.spec.exponents;
        let constant = if self.calibrating { None } else { self.constants.and_then(|c| c.supbound_constant) };
        let rep = sup_bound(traj, p, (&s.center, s.t0), s.rho, s.bound, s.sign, constant)?;
        let levels = match s.levels {
            None => None,
            Some(lv) => {
                let (outer, sigma) = match s.bound {
                    SupBoundKind::Local { sigma } => (s.rho, sigma),
                    _ => (2.0 * s.rho, 0.5),
                };
                let sched = IterationSchedule::ShrinkOut { rho: outer, sigma, k: lv.k, levels: LevelRule::Approach };
                Some(level_sequence(traj, p, &sched, (&s.center, s.t0), 2.0, lv.j_max)?)
            }
        };
        let mut out = Outcome::new(Verdict::Pass, json!({ "bound": to_value(&rep), "levels": levels }));
        out.regime = Some(rep.regime.name().to_string());
        if self.calibrating {
            if rep.required_constant.is_finite() {
                cal.supbound = Some(rep.required_constant);
            }
            return Ok(out.reason("calibration sample"));
        }
        match (rep.bound, rep.margin) {
            (Some(b), Some(m)) => {
                out.verdict = if m >= 0.0 { Verdict::Pass } else { Verdict::Fail };
                Ok(out.sides(rep.inner_sup, b, m))
            }
            _ => {
                out.verdict = Verdict::Skipped;
                Ok(out.reason("sup-bound constant not calibrated"))
            }
        }
    }

    fn critical_mass(&self, cm: &CriticalMassParams, cal: &mut Calibration) -> Result<Outcome> {
        let traj = self.traj()?;
        if self.calibrating {
            let seq = intrinsic_level_sequence(traj, self.spec, cm, 8)?;
            let g = fit_gamma(std::slice::from_ref(&seq), &self.spec.exponents);
            cal.gamma = Some(g);
            return Ok(Outcome::new(Verdict::Pass, json!({ "levels": seq, "gamma": g })).reason("calibration sample"));
        }
        let gamma = self.constants.and_then(|c| c.gamma);
        let rep = critical_mass_check(traj, self.spec, cm, gamma)?;
        let (verdict, reason) = match rep.verdict {
            CriticalMassVerdict::Holds => (Verdict::Pass, None),
            CriticalMassVerdict::Violated => (Verdict::Fail, None),
            CriticalMassVerdict::PreconditionFailed => (Verdict::Skipped, Some("precondition_failed")),
            CriticalMassVerdict::Uncalibrated => (Verdict::Skipped, Some("gamma not calibrated")),
            CriticalMassVerdict::AboveThreshold => (Verdict::Skipped, Some("measure fraction above threshold")),
        };
        let margin = match cm.side {
            Side::Lower => rep.inner_extreme - rep.conclusion_level,
            Side::Upper => rep.conclusion_level - rep.inner_extreme,
        };
        let mut out = Outcome::new(verdict, to_value(&rep));
        out.reason = reason.map(str::to_string);
        if let Some(t) = rep.threshold {
            out = out.sides(rep.measure_fraction, t, margin);
        }
        Ok(out)
    }

    fn regularize(&self, side: Side) -> Result<Outcome> {
        let traj = self.traj()?;
        let p = &self.spec.exponents;
        let once = lsc_regularize(traj, p, side)?;
        let twice = lsc_regularize(&once.regularized, p, side)?;
        let idempotent = twice.summary.replaced == 0 && twice.regularized.slices == once.regularized.slices;
        let gap = once.summary.max_gap;
        let verdict = if idempotent && gap == 0.0 { Verdict::Pass } else { Verdict::Fail };
        let detail = json!({ "summary": to_value(&once.summary), "idempotent": idempotent });
        Ok(Outcome::new(verdict, detail).sides(gap, 0.0, 0.0 - gap))
    }
}

fn recursion(r: &RecursionProbe) -> Result<Outcome> {
    let rec = Recursion::new(r.c, r.b, r.mu)?;
    let threshold = rec.threshold();
    let run = rec.iterate(r.y0, r.j_max)?;
    let detail = json!({ "threshold": threshold, "outcome": to_value(&run) });
    if r.y0 > threshold {
        return Ok(Outcome::new(Verdict::Skipped, detail).reason("y0 above threshold"));
    }
    // below the threshold Y_j <= b^(-j/mu) Y_0
    let mut margin = f64::INFINITY;
    for (j, y) in run.values.iter().enumerate() {
        let cap = r.b.powf(-(j as f64) / r.mu) * r.y0;
        margin = margin.min(cap * (1.0 + 1e-9) - y);
    }
    let last = *run.values.last().expect("at least Y_0");
    let cap = r.b.powf(-(r.j_max as f64) / r.mu) * r.y0;
    let verdict = if !run.diverged && margin >= 0.0 { Verdict::Pass } else { Verdict::Fail };
    Ok(Outcome::new(verdict, detail).sides(last, cap, margin))
}
