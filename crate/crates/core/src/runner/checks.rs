//! Self-contained verification suites behind the `check` command.

use super::config::*;
use super::presets::{preset_rotating_body, Scale};
use super::{run_from_config, setup, RunStatus};
use crate::coefficients::{AdvectionKind, ConstantAdrParams, DeltaPolicy};
use crate::diagnostics::{check_coercivity, BoundCase, BoundOutcome, NormEvaluator};
use crate::error::{Error, Result};
use crate::fom::{FomSolver, FomState};
use crate::integrator::{Integrator, Scheme, SchemeConfig};
use crate::operator::Stabilization;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Coercivity,
    Bounds,
    Oracle,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coercivity" => Ok(Suite::Coercivity),
            "bounds" => Ok(Suite::Bounds),
            "oracle" => Ok(Suite::Oracle),
            other => Err(Error::Config(format!("unknown suite `{other}`"))),
        }
    }
}

/// One line per check.
#[derive(Clone, Debug, Default)]
pub struct SuiteReport {
    pub lines: Vec<(String, bool)>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.1)
    }

    fn push(&mut self, ok: bool, text: String) {
        self.lines.push((text, ok));
    }
}

impl std::fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (text, ok) in &self.lines {
            writeln!(f, "{} {text}", if *ok { "PASS" } else { "FAIL" })?;
        }
        Ok(())
    }
}

pub fn run_suite(suite: Suite, scratch: &Path) -> Result<SuiteReport> {
    match suite {
        Suite::Coercivity => coercivity_suite(),
        Suite::Bounds => bounds_suite(scratch),
        Suite::Oracle => oracle_suite(),
    }
}

/// Desk rotating body with δ from the coercivity bound, 500 random fields.
pub fn coercivity_suite() -> Result<SuiteReport> {
    let mut cfg = preset_rotating_body(Scale::Desk);
    cfg.scheme.delta = DeltaPolicy::Coercivity;
    let s = setup(&cfg)?;
    let norms = NormEvaluator::new(&s.problem, &s.analysis)?;
    let rep = check_coercivity(&norms, 500, 1);
    let mut out = SuiteReport::default();
    out.push(
        rep.passed(),
        format!(
            "coercivity: {} trials, {} violations, worst margin {:e}",
            rep.trials, rep.violations, rep.worst_margin
        ),
    );
    Ok(out)
}

/// Source-free decay problem with deterministic diffusion and a divergence-free
/// rotating field. Case (ii) must hold for both schemes.
pub fn decay_config(scheme: Scheme, dir: &Path) -> RunConfig {
    RunConfig {
        mesh: MeshConfig {
            n_per_side: 8,
            boundary: BoundaryLayout::Single,
            dirichlet: Default::default(),
        },
        samples: SamplesConfig::MonteCarlo {
            count: 16,
            seed: 7,
            distribution: "uniform".into(),
            bounds: vec![[-1.0, 1.0]],
        },
        model: ModelConfig::ConstantAdr {
            params: ConstantAdrParams {
                eps: 1e-3,
                advection: AdvectionKind::Rotating,
                ..Default::default()
            },
        },
        initial: InitialConfig::Sine { amplitude: 1.0, rank: 2 },
        scheme: SchemeSection {
            kind: scheme,
            stabilization: Stabilization::Supg,
            delta: DeltaPolicy::SemiImplicit,
            drop_p1_diffusion_bound: false,
            dt: 0.01,
            t0: 0.0,
            t_final: 2.0,
            solver: Solver::Dlr,
            max_condition: 1e12,
            blowup_factor: 1e12,
        },
        output: OutputConfig {
            dir: dir.to_path_buf(),
            ..Default::default()
        },
        diagnostics: DiagnosticsConfig::default(),
    }
}

pub fn bounds_suite(scratch: &Path) -> Result<SuiteReport> {
    let mut out = SuiteReport::default();
    for (scheme, name) in [
        (Scheme::ImplicitEulerDeterministic, "implicit_euler_deterministic"),
        (Scheme::SemiImplicit, "semi_implicit"),
    ] {
        let cfg = decay_config(scheme, &scratch.join(name));
        let res = run_from_config(&cfg);
        let case_ii = res
            .bounds
            .iter()
            .find(|b| matches!(b, BoundOutcome::Evaluated(l) if l.case == BoundCase::II));
        let ok = res.status == RunStatus::Ok && case_ii.is_some_and(|b| b.passed());
        let detail = match case_ii {
            Some(BoundOutcome::Evaluated(l)) => format!("lhs {:e} rhs {:e}", l.lhs, l.rhs),
            _ => res.message.clone().unwrap_or_else(|| "case (ii) not evaluated".into()),
        };
        out.push(ok, format!("bounds {name} case ii: {detail}"));
    }
    Ok(out)
}

/// Full-rank low-rank steps against the sample-wise solver.
pub fn oracle_suite() -> Result<SuiteReport> {
    let mut out = SuiteReport::default();
    for stab in [Stabilization::None, Stabilization::Supg] {
        let dev = full_rank_deviation(stab, 10)?;
        out.push(dev <= 1e-8, format!("oracle {stab:?}: max deviation {dev:e} over 10 steps"));
    }
    Ok(out)
}

/// Largest nodal deviation between rank `N_C - 1` DLR and the full-order model.
pub fn full_rank_deviation(stabilization: Stabilization, steps: usize) -> Result<f64> {
    let cfg = RunConfig {
        mesh: MeshConfig {
            n_per_side: 3,
            boundary: BoundaryLayout::Single,
            dirichlet: Default::default(),
        },
        samples: SamplesConfig::MonteCarlo {
            count: 4,
            seed: 3,
            distribution: "uniform".into(),
            bounds: vec![[-1.0, 1.0]],
        },
        model: ModelConfig::ConstantAdr {
            params: ConstantAdrParams {
                eps: 0.05,
                eps_fluct: 0.02,
                advection: AdvectionKind::Rotating,
                c: 0.5,
                c_fluct: 0.3,
                f: 1.0,
                ..Default::default()
            },
        },
        initial: InitialConfig::Sine { amplitude: 1.0, rank: 1 },
        scheme: SchemeSection {
            kind: Scheme::SemiImplicit,
            stabilization,
            delta: DeltaPolicy::Experiment,
            drop_p1_diffusion_bound: false,
            dt: 0.05,
            t0: 0.0,
            t_final: 0.05 * steps as f64,
            solver: Solver::Dlr,
            max_condition: 1e12,
            blowup_factor: 1e12,
        },
        output: OutputConfig::default(),
        diagnostics: DiagnosticsConfig {
            bounds: false,
            ..Default::default()
        },
    };
    let s = setup(&cfg)?;
    let p = &s.problem;
    let integ = Integrator::new(p, SchemeConfig::new(Scheme::SemiImplicit, cfg.scheme.dt))?;
    let fom = FomSolver::new(p, Scheme::SemiImplicit, cfg.scheme.dt)?;
    let mut dlr = random_state(p, p.n_samples() - 1, 11)?;
    let mut full = FomState::new(dlr.realizations(), dlr.t);
    let mut worst = 0.0f64;
    for _ in 0..steps {
        dlr = integ.step(&dlr)?.0;
        full = fom.step(&full)?;
        let diff = dlr.realizations() - &full.fields;
        worst = worst.max(diff.amax());
    }
    Ok(worst)
}

/// State with uniformly random interior modes and stochastic modes.
pub fn random_state(p: &crate::operator::DiscreteProblem<f64>, rank: usize, seed: u64) -> Result<crate::dlr::DlrState<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mesh = &p.space.mesh;
    let (nh, nc) = (p.ndofs(), p.n_samples());
    let mut draw = |v: usize| if mesh.is_boundary(v) { 0.0 } else { rng.random::<f64>() * 2.0 - 1.0 };
    let u0 = nalgebra::DVector::from_fn(nh, |v, _| draw(v));
    let u = nalgebra::DMatrix::from_fn(nh, rank, |v, _| draw(v));
    let y = nalgebra::DMatrix::from_fn(nc, rank, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    crate::dlr::DlrState::init_from_modes(u0, u, y, &p.samples, mesh)
}
