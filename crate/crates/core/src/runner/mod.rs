//! Configuration-driven batch runs and their output files.
//!
//! A run writes into `output.dir`:
//!
//! * `norms.csv`: one [`StepReport`] row per reported step
//! * `md.csv`: `max u - min u` of every tracked realisation
//! * `ledger.csv`: the stability bounds (when enabled)
//! * `dump_XXX.txt`: [`FieldDump`]s at the requested times
//! * `final_state.txt`: checkpoint of the last state
//! * `run.json`: resolved configuration, version, status and a summary

pub mod config;
pub mod dump;
pub mod initial;
pub mod checks;
pub mod presets;

pub use config::*;
pub use dump::FieldDump;
pub use presets::{preset_boundary_layer, preset_rotating_body, ParameterEcho, Scale};

use crate::coefficients::{
    cap_delta, delta_coercivity, delta_experiment, delta_semi_implicit, inverse_inequality_constant,
    local_peclet, moderate_stochasticity, CoefficientModel, DeltaPolicy, ModerateStochasticity, PecletReport,
    ReactionAnalysis, SampledCoefficients,
};
use crate::diagnostics::{
    check_coercivity, check_tangent_residual, evaluate_bound, md_metric, BoundCase, BoundContext, BoundOutcome,
    CoercivityReport, NormEvaluator, StepReport, Theorem,
};
use crate::dlr::{skewed_gram, DlrState, SnapshotInfo, Truncation};
use crate::error::{Error, Result};
use crate::fem::P1Space;
use crate::fom::{FomSolver, FomState};
use crate::integrator::{Integrator, Scheme, SchemeConfig};
use crate::mesh::{Mesh, QuadratureRule};
use crate::operator::DiscreteProblem;
use crate::stochastic::{Distribution, SampleSpace};
use nalgebra::DMatrix;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

/// Quadrature degree used for every assembled form.
pub const QUADRATURE_DEGREE: usize = 4;

/// Spatial dimension entering the stabilisation bounds.
const DIM: usize = 2;

/// Tag of the boundary layer inflow part: the bottom edge, the left edge up to
/// 0.2 and the right edge up to 0.02. Everything else is `outflow`.
pub fn boundary_layer_tag(x: [f64; 2]) -> String {
    let tol = 1e-12;
    let inflow = x[1] <= tol
        || (x[0] <= tol && x[1] <= 0.2 + tol)
        || (x[0] >= 1.0 - tol && x[1] <= 0.02 + tol);
    if inflow { "inflow" } else { "outflow" }.to_string()
}

pub fn build_mesh(cfg: &MeshConfig) -> Result<Mesh<f64>> {
    let mesh = Mesh::unit_square(cfg.n_per_side)?;
    Ok(match cfg.boundary {
        BoundaryLayout::Single => mesh,
        BoundaryLayout::BoundaryLayer => mesh.with_boundary_classifier(boundary_layer_tag),
    })
}

pub fn build_samples(cfg: &SamplesConfig) -> Result<SampleSpace<f64>> {
    let pairs = |b: &[[f64; 2]]| b.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>();
    match cfg {
        SamplesConfig::MonteCarlo {
            count,
            seed,
            distribution,
            bounds,
        } => SampleSpace::monte_carlo(&Distribution::from_name(distribution, pairs(bounds))?, *count, *seed),
        SamplesConfig::TensorGrid { points_per_axis, bounds } => {
            SampleSpace::tensor_grid(&pairs(bounds), *points_per_axis)
        }
        SamplesConfig::File { path } => {
            let f = File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
            SampleSpace::read_table(BufReader::new(f))
        }
    }
}

pub fn build_model(cfg: &ModelConfig, samples: &SampleSpace<f64>) -> Result<CoefficientModel<f64>> {
    Ok(match cfg {
        ModelConfig::RotatingBody => CoefficientModel::rotating_body(),
        ModelConfig::BoundaryLayer { k } => {
            if samples.dim() < 2 {
                return Err(Error::Config("boundary layer model needs four parameters".into()));
            }
            let k = match k {
                Some(k) => *k,
                None => {
                    let y2: Vec<f64> = (0..samples.len()).map(|i| samples.sample(i)[1]).collect();
                    samples.expectation(&y2)
                }
            };
            CoefficientModel::boundary_layer(k)
        }
        ModelConfig::ConstantAdr { params } => CoefficientModel::constant_adr(params),
    })
}

/// Per-element δ for a policy. Infinite entries are capped at `h_K/4`.
pub fn compute_delta(
    policy: DeltaPolicy,
    space: &P1Space<f64>,
    coeffs: &SampledCoefficients<f64>,
    analysis: &ReactionAnalysis<f64>,
    c_inverse: f64,
    dt: f64,
    drop_p1_diffusion_bound: bool,
) -> Vec<f64> {
    let h = space.diameters();
    let cap = delta_experiment(&h);
    match policy {
        DeltaPolicy::Experiment => cap,
        DeltaPolicy::Coercivity => cap_delta(
            &delta_coercivity(
                &h,
                &analysis.c_sup,
                coeffs.eps_hat,
                c_inverse,
                coeffs.c_e,
                DIM,
                drop_p1_diffusion_bound,
            ),
            &cap,
        ),
        DeltaPolicy::SemiImplicit => cap_delta(
            &delta_semi_implicit(&h, &analysis.c_sup, coeffs.eps_hat, c_inverse, coeffs.c_e, DIM, dt),
            &cap,
        ),
    }
}

/// Everything derived from a configuration before time stepping.
pub struct Setup {
    pub problem: DiscreteProblem<f64>,
    pub analysis: ReactionAnalysis<f64>,
    /// Inverse inequality constant, computed only when needed.
    pub c_inverse: Option<f64>,
    pub peclet: PecletReport<f64>,
    pub moderate: ModerateStochasticity<f64>,
    pub initial: DlrState<f64>,
    pub snapshot: Option<SnapshotInfo<f64>>,
}

pub fn setup(cfg: &RunConfig) -> Result<Setup> {
    cfg.validate()?;
    let mesh = build_mesh(&cfg.mesh)?;
    let space = P1Space::new(mesh, QuadratureRule::of_degree(QUADRATURE_DEGREE)?)?;
    let samples = build_samples(&cfg.samples)?;
    let model = build_model(&cfg.model, &samples)?;
    let coeffs = SampledCoefficients::new(&model, &samples)?;
    if cfg.scheme.kind == Scheme::ImplicitEulerDeterministic && !coeffs.is_deterministic() {
        return Err(Error::Config(format!(
            "scheme implicit_euler_deterministic needs deterministic coefficients, model `{}` has fluctuations",
            model.name
        )));
    }
    let analysis = ReactionAnalysis::new(&space, &coeffs)?;
    let needs_ci = cfg.scheme.delta != DeltaPolicy::Experiment || cfg.diagnostics.bounds;
    let c_inverse = if needs_ci {
        Some(inverse_inequality_constant(&space)?)
    } else {
        None
    };
    let delta = compute_delta(
        cfg.scheme.delta,
        &space,
        &coeffs,
        &analysis,
        c_inverse.unwrap_or(f64::NAN),
        cfg.scheme.dt,
        cfg.scheme.drop_p1_diffusion_bound,
    );
    let peclet = local_peclet(&space, &coeffs);
    let moderate = moderate_stochasticity(&space, &coeffs, &analysis);
    let boundary: BTreeMap<String, f64> = cfg.mesh.dirichlet.clone();
    let problem = DiscreteProblem::new(space, samples, &model, cfg.scheme.stabilization, delta, &boundary)?;
    let (mut initial, snapshot) = build_initial(&cfg.initial, &problem)?;
    if !matches!(cfg.initial, InitialConfig::Checkpoint { .. }) {
        initial.t = cfg.scheme.t0;
    }
    Ok(Setup {
        problem,
        analysis,
        c_inverse,
        peclet,
        moderate,
        initial,
        snapshot,
    })
}

fn build_initial(cfg: &InitialConfig, p: &DiscreteProblem<f64>) -> Result<(DlrState<f64>, Option<SnapshotInfo<f64>>)> {
    let space = &p.space;
    match cfg {
        InitialConfig::RotatingBody => {
            if p.samples.dim() < 3 {
                return Err(Error::Config("rotating body initial condition needs three parameters".into()));
            }
            Ok((initial::rotating_body_initial(space, &p.samples)?, None))
        }
        InitialConfig::BoundaryLayer { rank, tolerance } => {
            if p.samples.dim() < 4 {
                return Err(Error::Config("boundary layer initial condition needs four parameters".into()));
            }
            let trunc = match (rank, tolerance) {
                (Some(r), _) => Truncation::Rank(*r),
                (None, Some(t)) => Truncation::Tolerance(*t),
                (None, None) => return Err(Error::Config("initial: give `rank` or `tolerance`".into())),
            };
            let (state, info) = initial::boundary_layer_initial(space, &p.mass, &p.samples, trunc)?;
            if let Truncation::Rank(r) = trunc {
                if info.rank < r {
                    return Err(Error::RankLoss {
                        rank: info.rank,
                        requested: r,
                    });
                }
            }
            Ok((state, Some(info)))
        }
        InitialConfig::Sine { amplitude, rank } => Ok((initial::sine_initial(space, &p.samples, *amplitude, *rank)?, None)),
        InitialConfig::Checkpoint { path } => {
            let f = File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
            let state = DlrState::read_checkpoint(BufReader::new(f))?;
            state.validate(&p.samples, &space.mesh)?;
            Ok((state, None))
        }
    }
}

/// Report of the low-rank state after `step` steps.
pub fn dlr_report(
    norms: &NormEvaluator<'_, f64>,
    problem: &DiscreteProblem<f64>,
    step: usize,
    state: &DlrState<f64>,
    info: Option<&crate::integrator::StepInfo<f64>>,
    tangent_residual: Option<f64>,
) -> StepReport<f64> {
    let mode_norms = (0..state.rank())
        .map(|k| {
            let c = state.u.column(k);
            problem.mass.bilinear(c.as_slice(), c.as_slice()).sqrt()
        })
        .collect();
    let gram_condition = match info {
        Some(i) => i.skewed_gram_condition,
        None => skewed_gram(&state.u, &problem.mass, &problem.supg_mass).condition,
    };
    StepReport {
        step,
        t: state.t,
        l2_sq: norms.l2_sq(state),
        grad_sq: norms.grad_sq(state),
        supg: norms.supg_sq(state),
        forcing_sq: problem.forcing_norm_sq(state.t),
        mode_norms,
        gram_condition,
        orthogonality_defect: problem.samples.orthonormality_defect(&state.y),
        lemma_defect: info.map_or(0.0, |i| i.lemma_defect),
        tangent_residual,
    }
}

/// Report of a full-order state after `step` steps.
pub fn fom_report(
    norms: &NormEvaluator<'_, f64>,
    problem: &DiscreteProblem<f64>,
    step: usize,
    state: &FomState<f64>,
) -> StepReport<f64> {
    StepReport {
        step,
        t: state.t,
        l2_sq: norms.l2_sq_dense(&state.fields),
        grad_sq: norms.grad_sq_dense(&state.fields),
        supg: norms.supg_sq_dense(&state.fields),
        forcing_sq: problem.forcing_norm_sq(state.t),
        mode_norms: Vec::new(),
        gram_condition: 0.0,
        orthogonality_defect: 0.0,
        lemma_defect: 0.0,
        tangent_residual: None,
    }
}

/// Stability theorem covering a scheme, if any.
pub fn theorem_for(scheme: Scheme) -> Option<Theorem> {
    match scheme {
        Scheme::SemiImplicit => Some(Theorem::SiStab),
        Scheme::ImplicitEulerDeterministic => Some(Theorem::ImStab),
        Scheme::Explicit => None,
    }
}

/// Problem data for the bound checks; `initial` is the report at `t₀`.
pub fn bound_context(cfg: &RunConfig, s: &Setup, initial: &StepReport<f64>) -> BoundContext<f64> {
    let p = &s.problem;
    BoundContext {
        dt: cfg.scheme.dt,
        horizon: cfg.scheme.t_final - cfg.scheme.t0,
        nu: s.analysis.nu,
        mu0: s.analysis.mu0,
        delta: p.delta.clone(),
        h: p.space.diameters(),
        c_sup: s.analysis.c_sup.clone(),
        eps_hat: p.coeffs.eps_hat,
        c_inverse: s.c_inverse.unwrap_or(f64::NAN),
        c_e: p.coeffs.c_e,
        dim: DIM,
        drop_p1_diffusion_bound: cfg.scheme.drop_p1_diffusion_bound,
        moderate: s.moderate.clone(),
        forcing_zero: !p.coeffs.model.has_forcing(),
        initial_grad_sq: initial.grad_sq,
        initial_mu_sq: initial.supg.reaction,
    }
}

/// All three cases of the theorem that matches `scheme`.
pub fn evaluate_bounds(scheme: Scheme, trajectory: &[StepReport<f64>], ctx: &BoundContext<f64>) -> Vec<BoundOutcome<f64>> {
    let cases = [BoundCase::I, BoundCase::II, BoundCase::III];
    match theorem_for(scheme) {
        Some(th) => cases.iter().map(|c| evaluate_bound(trajectory, th, *c, ctx)).collect(),
        None => cases
            .iter()
            .map(|c| BoundOutcome::NotApplicable {
                theorem: Theorem::SiStab,
                case: *c,
                reason: "no stability theorem for the explicit scheme".into(),
            })
            .collect(),
    }
}

/// Index of the sample closest to `y` in the Euclidean distance.
pub fn nearest_sample(samples: &SampleSpace<f64>, y: &[f64]) -> Result<usize> {
    if y.len() != samples.dim() {
        return Err(Error::Config(format!(
            "dump parameter has {} components, the sample space has {}",
            y.len(),
            samples.dim()
        )));
    }
    let dist = |i: usize| samples.sample(i).iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    (0..samples.len())
        .min_by(|a, b| dist(*a).total_cmp(&dist(*b)))
        .ok_or_else(|| Error::Config("empty sample space".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    ConfigError,
    NumericalFailure,
    DiagnosticFailure,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::ConfigError => 1,
            RunStatus::NumericalFailure => 2,
            RunStatus::DiagnosticFailure => 3,
        }
    }
}

/// Oscillation metric of the tracked realisations, one row per reported step.
#[derive(Clone, Debug, Default, Serialize)]
pub struct MdTrack {
    pub samples: Vec<usize>,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    /// `values[row][j]` belongs to `samples[j]`.
    pub values: Vec<Vec<f64>>,
}

impl MdTrack {
    fn push(&mut self, step: usize, t: f64, row: Vec<f64>) {
        self.steps.push(step);
        self.times.push(t);
        self.values.push(row);
    }

    /// `|MD(t_end) - MD(t₀)|` per tracked realisation.
    pub fn final_deviation(&self) -> Vec<f64> {
        match (self.values.first(), self.values.last()) {
            (Some(a), Some(b)) => a.iter().zip(b).map(|(x, y)| (y - x).abs()).collect(),
            _ => Vec::new(),
        }
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let mut header = String::from("step,t");
        for s in &self.samples {
            header.push_str(&format!(",md_{s}"));
        }
        writeln!(w, "{header}")?;
        for ((step, t), row) in self.steps.iter().zip(&self.times).zip(&self.values) {
            let mut line = format!("{step},{t:e}");
            for v in row {
                line.push_str(&format!(",{v:e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Scalar facts about a run, echoed in `run.json`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunSummary {
    pub n_h: usize,
    pub n_c: usize,
    pub rank: usize,
    pub steps_completed: usize,
    pub final_t: Option<f64>,
    pub final_l2: Option<f64>,
    pub delta_max: Option<f64>,
    pub c_inverse: Option<f64>,
    pub eps_hat: Option<f64>,
    pub c_e: Option<f64>,
    pub nu: Option<f64>,
    pub mu0: Option<f64>,
    pub peclet_max: Option<f64>,
    pub advection_dominated: Option<bool>,
    pub moderate_stochasticity: Option<bool>,
    pub snapshot_rank: Option<usize>,
    pub snapshot_relative_tail: Option<f64>,
    pub max_tangent_residual: Option<f64>,
    pub coercivity_violations: Option<usize>,
    pub coercivity_worst_margin: Option<f64>,
    pub bound_failures: usize,
    pub dumps: Vec<String>,
}

/// Everything a run produced, also when it failed part-way.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub message: Option<String>,
    pub failing_step: Option<usize>,
    pub reports: Vec<StepReport<f64>>,
    pub bounds: Vec<BoundOutcome<f64>>,
    pub md: MdTrack,
    pub coercivity: Option<CoercivityReport<f64>>,
    pub summary: RunSummary,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    software: &'static str,
    version: &'static str,
    status: RunStatus,
    exit_code: i32,
    message: Option<&'a str>,
    failing_step: Option<usize>,
    config: &'a RunConfig,
    summary: &'a RunSummary,
}

struct Recorder<'a> {
    cfg: &'a RunConfig,
    outcome: RunOutcome,
    /// Pending dump times with their file index.
    dumps: Vec<(usize, f64)>,
    dump_indices: Vec<usize>,
    last_step: usize,
}

impl Recorder<'_> {
    fn wants_row(&self, step: usize, final_step: usize) -> bool {
        step.is_multiple_of(self.cfg.output.every) || step == final_step
    }

    fn record(&mut self, report: StepReport<f64>, md_row: Option<Vec<f64>>) {
        self.last_step = report.step;
        if let Some(row) = md_row {
            self.outcome.md.push(report.step, report.t, row);
        }
        if let Some(r) = report.tangent_residual {
            let m = self.outcome.summary.max_tangent_residual.get_or_insert(0.0);
            *m = m.max(r);
        }
        self.outcome.reports.push(report);
    }

    fn maybe_dump(&mut self, t: f64, rank: usize, n_samples: usize, field: impl Fn(usize) -> Vec<f64>) -> Result<()> {
        let half = 0.5 * self.cfg.scheme.dt;
        let due: Vec<usize> = self.dumps.iter().filter(|(_, tau)| (t - tau).abs() <= half).map(|d| d.0).collect();
        if due.is_empty() || self.dump_indices.is_empty() {
            return Ok(());
        }
        self.dumps.retain(|(k, _)| !due.contains(k));
        let dump = FieldDump {
            t,
            rank,
            n_per_side: self.cfg.mesh.n_per_side,
            n_samples,
            indices: self.dump_indices.clone(),
            fields: self.dump_indices.iter().map(|i| field(*i)).collect(),
        };
        std::fs::create_dir_all(&self.cfg.output.dir)?;
        for k in due {
            let name = format!("dump_{k:03}.txt");
            let mut w = BufWriter::new(File::create(self.cfg.output.dir.join(&name))?);
            dump.write(&mut w)?;
            w.flush()?;
            self.outcome.summary.dumps.push(name);
        }
        Ok(())
    }
}

/// Runs a configuration, writes all outputs and reports how it went.
pub fn run_from_config(cfg: &RunConfig) -> RunOutcome {
    let mut rec = Recorder {
        cfg,
        outcome: RunOutcome {
            status: RunStatus::Ok,
            message: None,
            failing_step: None,
            reports: Vec::new(),
            bounds: Vec::new(),
            md: MdTrack {
                samples: cfg.output.md_samples.clone(),
                ..Default::default()
            },
            coercivity: None,
            summary: RunSummary::default(),
        },
        dumps: cfg.output.dump_times.iter().copied().enumerate().collect(),
        dump_indices: Vec::new(),
        last_step: 0,
    };
    let result = execute(&mut rec);
    let mut outcome = rec.outcome;
    if let Err(e) = result {
        outcome.status = if e.exit_code() == 1 {
            RunStatus::ConfigError
        } else {
            RunStatus::NumericalFailure
        };
        if outcome.status == RunStatus::NumericalFailure {
            outcome.failing_step = Some(match e {
                Error::BlowUp { step, .. } => step,
                _ => rec.last_step + 1,
            });
        }
        outcome.message = Some(e.to_string());
    }
    if let Err(e) = write_outputs(cfg, &outcome) {
        if outcome.status == RunStatus::Ok {
            outcome.status = RunStatus::ConfigError;
            outcome.message = Some(format!("cannot write outputs: {e}"));
        }
    }
    outcome
}

fn execute(rec: &mut Recorder<'_>) -> Result<()> {
    let cfg = rec.cfg;
    let s = setup(cfg)?;
    let p = &s.problem;
    for &i in cfg.output.md_samples.iter().chain(&cfg.output.dump_samples) {
        if i >= p.n_samples() {
            return Err(Error::Config(format!("sample index {i} out of range (N_C = {})", p.n_samples())));
        }
    }
    let mut dump_indices = cfg.output.dump_samples.clone();
    for y in &cfg.output.dump_parameters {
        dump_indices.push(nearest_sample(&p.samples, y)?);
    }
    rec.dump_indices = dump_indices;
    if cfg.diagnostics.tangent_residual && p.n_samples() > 64 {
        return Err(Error::Config("tangent residual check supports at most 64 samples".into()));
    }

    let sum = &mut rec.outcome.summary;
    sum.n_h = p.ndofs();
    sum.n_c = p.n_samples();
    sum.rank = s.initial.rank();
    sum.delta_max = Some(p.delta.iter().fold(0.0, |a: f64, d| a.max(*d)));
    sum.c_inverse = s.c_inverse;
    sum.eps_hat = Some(p.coeffs.eps_hat);
    sum.c_e = Some(p.coeffs.c_e);
    sum.nu = Some(s.analysis.nu);
    sum.mu0 = Some(s.analysis.mu0);
    sum.peclet_max = Some(s.peclet.sample_max.iter().fold(0.0, |a: f64, v| a.max(*v)));
    sum.advection_dominated = Some(s.peclet.advection_dominated);
    sum.moderate_stochasticity = Some(s.moderate.holds());
    sum.snapshot_rank = s.snapshot.as_ref().map(|i| i.rank);
    sum.snapshot_relative_tail = s.snapshot.as_ref().map(|i| i.relative_tail);

    let norms = NormEvaluator::new(p, &s.analysis)?;
    if cfg.diagnostics.coercivity_trials > 0 {
        let rep = check_coercivity(&norms, cfg.diagnostics.coercivity_trials, cfg.diagnostics.coercivity_seed);
        rec.outcome.summary.coercivity_violations = Some(rep.violations);
        rec.outcome.summary.coercivity_worst_margin = Some(rep.worst_margin);
        rec.outcome.coercivity = Some(rep);
    }
    let dt = cfg.scheme.dt;
    let n_steps = crate::integrator::step_count(s.initial.t, cfg.scheme.t_final, dt);
    let md_samples = cfg.output.md_samples.clone();
    std::fs::create_dir_all(&cfg.output.dir)?;
    let final_path = cfg.output.dir.join("final_state.txt");

    match cfg.scheme.solver {
        Solver::Dlr => {
            let mut scfg = SchemeConfig::new(cfg.scheme.kind, dt);
            scfg.max_condition = cfg.scheme.max_condition;
            scfg.blowup_factor = cfg.scheme.blowup_factor;
            let integ = Integrator::new(p, scfg)?;
            let md_of = |st: &DlrState<f64>| -> Vec<f64> {
                md_samples.iter().map(|&i| md_metric(st.realization(i).as_slice())).collect()
            };
            let r0 = dlr_report(&norms, p, 0, &s.initial, None, None);
            rec.record(r0, Some(md_of(&s.initial)));
            let init = &s.initial;
            rec.maybe_dump(init.t, init.rank(), p.n_samples(), |i| init.realization(i).as_slice().to_vec())?;
            let last = integ.run(s.initial.clone(), cfg.scheme.t_final, |ev| {
                let tangent = if cfg.diagnostics.tangent_residual {
                    Some(check_tangent_residual(p, cfg.scheme.kind, dt, ev.previous, ev.current, &ev.info.u_tilde)?)
                } else {
                    None
                };
                let rep = dlr_report(&norms, p, ev.index, ev.current, Some(ev.info), tangent);
                let md = rec.wants_row(ev.index, n_steps).then(|| md_of(ev.current));
                rec.record(rep, md);
                let st = ev.current;
                rec.maybe_dump(st.t, st.rank(), p.n_samples(), |i| st.realization(i).as_slice().to_vec())
            })?;
            let mut w = BufWriter::new(File::create(&final_path)?);
            last.write_checkpoint(&p.space.mesh, &mut w)?;
            w.flush()?;
        }
        Solver::Fom => {
            let solver = FomSolver::new(p, cfg.scheme.kind, dt)?;
            let fields = s.initial.realizations();
            let md_of = |f: &DMatrix<f64>| -> Vec<f64> {
                md_samples.iter().map(|&i| md_metric(f.column(i).as_slice())).collect()
            };
            let init = FomState::new(fields, s.initial.t);
            rec.record(fom_report(&norms, p, 0, &init), Some(md_of(&init.fields)));
            rec.maybe_dump(init.t, 0, p.n_samples(), |i| init.fields.column(i).as_slice().to_vec())?;
            let last = solver.run(init.clone(), cfg.scheme.t_final, |step, st| {
                let rep = fom_report(&norms, p, step, st);
                let md = rec.wants_row(step, n_steps).then(|| md_of(&st.fields));
                rec.record(rep, md);
                rec.maybe_dump(st.t, 0, p.n_samples(), |i| st.fields.column(i).as_slice().to_vec())
            })?;
            let mut w = BufWriter::new(File::create(&final_path)?);
            last.write_checkpoint(&p.space.mesh, &mut w)?;
            w.flush()?;
        }
    }

    let sum = &mut rec.outcome.summary;
    sum.steps_completed = rec.last_step;
    if let Some(r) = rec.outcome.reports.last() {
        sum.final_t = Some(r.t);
        sum.final_l2 = Some(r.l2_sq.sqrt());
    }

    let mut failures = Vec::new();
    if cfg.diagnostics.bounds {
        let ctx = bound_context(cfg, &s, &rec.outcome.reports[0]);
        let outcomes = evaluate_bounds(cfg.scheme.kind, &rec.outcome.reports, &ctx);
        let n_fail = outcomes.iter().filter(|o| o.is_applicable() && !o.passed()).count();
        rec.outcome.summary.bound_failures = n_fail;
        if n_fail > 0 {
            failures.push(format!("{n_fail} stability bound(s) failed"));
        }
        rec.outcome.bounds = outcomes;
    }
    if let Some(c) = &rec.outcome.coercivity {
        if !c.passed() {
            failures.push(format!("{} coercivity violation(s)", c.violations));
        }
    }
    if let Some(r) = rec.outcome.summary.max_tangent_residual {
        if r > cfg.diagnostics.tangent_tolerance {
            failures.push(format!("tangent residual {r:e} above {:e}", cfg.diagnostics.tangent_tolerance));
        }
    }
    if !failures.is_empty() {
        rec.outcome.status = RunStatus::DiagnosticFailure;
        rec.outcome.message = Some(failures.join("; "));
    }
    Ok(())
}

fn write_outputs(cfg: &RunConfig, outcome: &RunOutcome) -> Result<()> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    if !outcome.reports.is_empty() {
        let last = outcome.reports.last().map_or(0, |r| r.step);
        let rank = outcome.reports[0].mode_norms.len();
        let mut w = BufWriter::new(File::create(dir.join("norms.csv"))?);
        writeln!(w, "{}", StepReport::<f64>::csv_header(rank))?;
        for r in &outcome.reports {
            if r.step % cfg.output.every == 0 || r.step == last {
                writeln!(w, "{}", r.csv_row())?;
            }
        }
        w.flush()?;
        let mut w = BufWriter::new(File::create(dir.join("md.csv"))?);
        outcome.md.write_csv(&mut w)?;
        w.flush()?;
    }
    if !outcome.bounds.is_empty() {
        let mut w = BufWriter::new(File::create(dir.join("ledger.csv"))?);
        writeln!(w, "{}", BoundOutcome::<f64>::csv_header())?;
        for b in &outcome.bounds {
            writeln!(w, "{}", b.csv_row())?;
        }
        w.flush()?;
    }
    write_manifest(&dir.join("run.json"), cfg, outcome)
}

fn write_manifest(path: &Path, cfg: &RunConfig, outcome: &RunOutcome) -> Result<()> {
    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        status: outcome.status,
        exit_code: outcome.exit_code(),
        message: outcome.message.as_deref(),
        failing_step: outcome.failing_step,
        config: cfg,
        summary: &outcome.summary,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes a configuration as TOML.
pub fn write_config(path: &Path, cfg: &RunConfig) -> Result<()> {
    std::fs::write(path, cfg.to_toml()?)?;
    Ok(())
}
