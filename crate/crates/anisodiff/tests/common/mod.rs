#![allow(dead_code)]

use anisodiff::analysis::Sign;
use anisodiff::cutoff::{default_zeta, Cutoff};
use anisodiff::flux::{CoefficientField, ExponentVector, ProblemSpec};
use anisodiff::geometry::Cylinder;
use anisodiff::solver::{
    advance, BoundaryData, BoundaryKind, Grid, InitialCondition, Scheme, SchemeConfig, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn constant_spec(p: &[f64], delta: &[f64]) -> ProblemSpec {
    ProblemSpec::new(
        ExponentVector::new(p.to_vec()).unwrap(),
        delta.to_vec(),
        1.0,
        CoefficientField::Constant { values: vec![1.0; p.len()] },
    )
    .unwrap()
}

pub fn run(spec: &ProblemSpec, grid: &Grid, ic: &InitialCondition, cfg: &SchemeConfig, t_end: f64) -> Trajectory {
    let f = ic.sample(grid, 0.0).unwrap();
    let eval = ic.evaluator(grid.dim());
    let bc = match cfg.boundary {
        BoundaryKind::Periodic => BoundaryData::periodic(),
        BoundaryKind::DirichletFromInitial => BoundaryData::dirichlet_from_fn(grid, |x| eval(x)),
    };
    advance(&f, spec, &bc, cfg, t_end).unwrap()
}

/// One energy-inequality scenario: a solved trajectory, a cylinder with a
/// fitted cut-off and a truncation level.
pub struct EnergyCase {
    pub spec: ProblemSpec,
    pub traj: Trajectory,
    pub cyl: Cylinder,
    pub zeta: Cutoff,
    pub k: f64,
    pub sign: Sign,
    pub label: String,
}

pub fn energy_case(seed: u64) -> EnergyCase {
    let mut rng = ChaCha8Rng::seed_from_u64(0xE11E_0000 + seed);
    let sub = seed % 4 == 3;
    let (p, delta, grid, rho, eps_reg): (Vec<f64>, Vec<f64>, Grid, f64, f64) = if sub {
        let p: Vec<f64> = (0..3).map(|_| rng.gen_range(1.12..1.2)).collect();
        let d: Vec<f64> = (0..3).map(|_| rng.gen_range(0.05..0.3)).collect();
        let g = Grid::new(vec![-0.5; 3], vec![0.5; 3], vec![16; 3]).unwrap();
        (p, d, g, 0.1, 3e-2)
    } else {
        let p: Vec<f64> = (0..2).map(|_| rng.gen_range(1.7..3.2)).collect();
        let d: Vec<f64> =
            p.iter().map(|pi| if *pi < 2.0 { rng.gen_range(0.05..0.3) } else { rng.gen_range(0.0..0.3) }).collect();
        let g = Grid::new(vec![-1.0; 2], vec![1.0; 2], vec![48; 2]).unwrap();
        (p, d, g, rng.gen_range(0.04..0.08), 1e-2)
    };
    let n = p.len();
    let lambda = 2.0;
    let coefficients = match rng.gen_range(0..3) {
        0 => CoefficientField::Constant { values: (0..n).map(|_| rng.gen_range(0.5..2.0)).collect() },
        1 => CoefficientField::SeparableTrig { contrast: rng.gen_range(0.2..1.0), wavenumber: 3.0, frequency: 5.0 },
        _ => CoefficientField::Checkerboard { cell: 0.25, low: 0.6, high: 1.8 },
    };
    let spec = ProblemSpec::new(ExponentVector::new(p.clone()).unwrap(), delta, lambda, coefficients).unwrap();
    let ic = InitialCondition::Modes { modes: 6, amplitude: rng.gen_range(1.0..3.0), seed: rng.gen() };
    let mut cfg = SchemeConfig::new(Scheme::ExplicitEuler, 1e-3, BoundaryKind::DirichletFromInitial);
    cfg.eps_reg = eps_reg;
    cfg.output_interval = Some(rho / 200.0);
    let t0 = rho * 1.05;
    let traj = run(&spec, &grid, &ic, &cfg, t0);
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect();
    let cyl = Cylinder::standard(&spec.exponents, &x0, t0, rho).unwrap();
    let zeta = default_zeta(&spec.exponents, &x0, t0, rho).unwrap();
    let (lo, hi) = {
        let cells = grid.cells_in_box(&cyl.center, &cyl.half_widths).0;
        let last = traj.slices.last().unwrap();
        cells.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(last[c]), b.max(last[c])))
    };
    let k = lo + rng.gen_range(0.2..0.8) * (hi - lo);
    let sign = if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus };
    EnergyCase { label: format!("p={p:?} rho={rho:.3} k={k:.3} {sign:?}"), spec, traj, cyl, zeta, k, sign }
}

/// A solved supersolution scenario for the critical-mass probe: a flat state
/// with one Gaussian dip somewhere in the doubled intrinsic cylinder.
pub struct CriticalCase {
    pub spec: ProblemSpec,
    pub traj: Trajectory,
    pub params: anisodiff::degiorgi::CriticalMassParams,
}

pub fn critical_case(seed: u64) -> CriticalCase {
    use anisodiff::degiorgi::CriticalMassParams;
    use anisodiff::geometry::Side;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC417_0000 + seed);
    let p: Vec<f64> = (0..2).map(|_| rng.gen_range(2.0..2.4)).collect();
    let wide = seed % 5 == 4;
    let delta: Vec<f64> =
        (0..2).map(|_| if wide { rng.gen_range(0.5..1.0) } else { rng.gen_range(0.02..0.1) }).collect();
    let spec = constant_spec(&p, &delta);
    let pv = &spec.exponents;
    let pbar = pv.harmonic_mean();
    let rho: f64 = 0.2;
    // odd seeds scale the dip with M, even seeds use a fixed deep dip
    let scaled = seed % 2 == 1;
    let m = if scaled { rng.gen_range(0.1..0.5) } else { rng.gen_range(0.05..0.3) };
    let s = (2.0 * rho).powf(pbar);
    let double = Cylinder::intrinsic(pv, &[0.0, 0.0], s, 2.0 * rho, m).unwrap();
    // dip centre at a random angle, radius between 0.3 and 0.95 of the doubled box
    let r = rng.gen_range(0.3..0.95);
    let th = rng.gen_range(0.0..std::f64::consts::TAU);
    let center = vec![r * double.half_widths[0] * th.cos(), r * double.half_widths[1] * th.sin()];
    let ic = InitialCondition::Gaussian {
        center,
        width: if scaled { rng.gen_range(0.02..0.04) } else { rng.gen_range(0.025..0.05) },
        amplitude: if scaled { -rng.gen_range(3.0..8.0) * m } else { -rng.gen_range(1.0..3.0) },
        base: 1.0,
    };
    let grid = Grid::new(vec![-0.5; 2], vec![0.5; 2], vec![64; 2]).unwrap();
    let mut cfg = SchemeConfig::new(Scheme::ExplicitEuler, 1e-3, BoundaryKind::DirichletFromInitial);
    cfg.output_interval = Some(s / 400.0);
    let traj = run(&spec, &grid, &ic, &cfg, s);
    let params = CriticalMassParams { y: vec![0.0, 0.0], s, rho, m, a: 0.5, side: Side::Lower, mu: None };
    CriticalCase { spec, traj, params }
}
