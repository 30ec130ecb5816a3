//! Ready-made configurations for the rotating body and boundary layer experiments.

use super::config::*;
use crate::coefficients::DeltaPolicy;
use crate::integrator::Scheme;
use crate::operator::Stabilization;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    /// Published parameters.
    Paper,
    /// Reduced sizes that run in seconds.
    Desk,
}

impl std::str::FromStr for Scale {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "paper" => Ok(Scale::Paper),
            "desk" => Ok(Scale::Desk),
            other => Err(crate::Error::Config(format!("unknown scale `{other}`"))),
        }
    }
}

/// Realisation dumped by the rotating body presets.
pub const ROTATING_BODY_DUMP_PARAMETER: [f64; 3] = [0.05, -0.63, 0.67];

/// Realisation dumped by the boundary layer presets, `ε ≈ 1.6·10⁻⁴`; resolved
/// to the nearest grid sample.
pub const BOUNDARY_LAYER_DUMP_PARAMETER: [f64; 4] = [6000.0, 1.0, -0.33, -0.77];

pub fn preset_rotating_body(scale: Scale) -> RunConfig {
    let (n, count, t_final, dt) = match scale {
        Scale::Paper => (128, 7000, 2.0 * PI, 2.0 * PI / 70000.0),
        Scale::Desk => (32, 200, 0.5, 0.5 / 800.0),
    };
    RunConfig {
        mesh: MeshConfig {
            n_per_side: n,
            boundary: BoundaryLayout::Single,
            dirichlet: Default::default(),
        },
        samples: SamplesConfig::MonteCarlo {
            count,
            seed: 2024,
            distribution: "uniform".into(),
            bounds: vec![[-1.0, 1.0]; 3],
        },
        model: ModelConfig::RotatingBody,
        initial: InitialConfig::RotatingBody,
        scheme: SchemeSection {
            kind: Scheme::SemiImplicit,
            stabilization: Stabilization::Supg,
            delta: DeltaPolicy::Experiment,
            drop_p1_diffusion_bound: false,
            dt,
            t0: 0.0,
            t_final,
            solver: Solver::Dlr,
            max_condition: 1e12,
            blowup_factor: 1e12,
        },
        output: OutputConfig {
            dir: "rotating_body".into(),
            every: 1,
            md_samples: (0..5).collect(),
            dump_times: vec![0.0, t_final],
            dump_samples: Vec::new(),
            dump_parameters: vec![ROTATING_BODY_DUMP_PARAMETER.to_vec()],
        },
        diagnostics: DiagnosticsConfig {
            bounds: false,
            ..Default::default()
        },
    }
}

pub fn preset_boundary_layer(scale: Scale) -> RunConfig {
    let (n, points, rank, tolerance) = match scale {
        Scale::Paper => (50, 10, Some(34), None),
        Scale::Desk => (20, 4, None, Some(1e-4)),
    };
    let t_final = 1.2;
    let mut dirichlet = std::collections::BTreeMap::new();
    dirichlet.insert("inflow".to_string(), 1.0);
    dirichlet.insert("outflow".to_string(), 0.0);
    RunConfig {
        mesh: MeshConfig {
            n_per_side: n,
            boundary: BoundaryLayout::BoundaryLayer,
            dirichlet,
        },
        samples: SamplesConfig::TensorGrid {
            points_per_axis: points,
            bounds: vec![[5000.0, 6000.0], [-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]],
        },
        model: ModelConfig::BoundaryLayer { k: None },
        initial: InitialConfig::BoundaryLayer { rank, tolerance },
        scheme: SchemeSection {
            kind: Scheme::SemiImplicit,
            stabilization: Stabilization::Supg,
            delta: DeltaPolicy::Experiment,
            drop_p1_diffusion_bound: false,
            dt: t_final / 50.0,
            t0: 0.0,
            t_final,
            solver: Solver::Dlr,
            max_condition: 1e12,
            blowup_factor: 1e12,
        },
        output: OutputConfig {
            dir: "boundary_layer".into(),
            every: 1,
            md_samples: vec![0],
            dump_times: vec![0.0, 0.6, t_final],
            dump_samples: Vec::new(),
            dump_parameters: vec![BOUNDARY_LAYER_DUMP_PARAMETER.to_vec()],
        },
        diagnostics: DiagnosticsConfig {
            bounds: false,
            ..Default::default()
        },
    }
}

/// Headline numbers of a configuration, as echoed by the `preset` command.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ParameterEcho {
    pub n_h: usize,
    pub n_c: usize,
    pub dt: f64,
    pub t_final: f64,
    pub delta_policy: DeltaPolicy,
    /// Fixed rank, or `None` when a snapshot tolerance decides it.
    pub rank: Option<usize>,
    pub snapshot_tolerance: Option<f64>,
}

impl ParameterEcho {
    pub fn of(cfg: &RunConfig) -> Self {
        let n_c = match &cfg.samples {
            SamplesConfig::MonteCarlo { count, .. } => *count,
            SamplesConfig::TensorGrid { points_per_axis, bounds } => points_per_axis.pow(bounds.len() as u32),
            SamplesConfig::File { .. } => 0,
        };
        let (rank, snapshot_tolerance) = match &cfg.initial {
            InitialConfig::RotatingBody => (Some(2), None),
            InitialConfig::BoundaryLayer { rank, tolerance } => (*rank, *tolerance),
            InitialConfig::Sine { rank, .. } => (Some(*rank), None),
            InitialConfig::Checkpoint { .. } => (None, None),
        };
        let np = cfg.mesh.n_per_side + 1;
        Self {
            n_h: np * np,
            n_c,
            dt: cfg.scheme.dt,
            t_final: cfg.scheme.t_final,
            delta_policy: cfg.scheme.delta,
            rank,
            snapshot_tolerance,
        }
    }
}

impl std::fmt::Display for ParameterEcho {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "N_h = {}", self.n_h)?;
        writeln!(f, "N_C = {}", self.n_c)?;
        writeln!(f, "dt = {:.17e}", self.dt)?;
        writeln!(f, "T = {:.17e}", self.t_final)?;
        let delta = match self.delta_policy {
            DeltaPolicy::Experiment => "h_K/4",
            DeltaPolicy::Coercivity => "coercivity",
            DeltaPolicy::SemiImplicit => "semi_implicit",
        };
        writeln!(f, "delta = {delta}")?;
        match (self.rank, self.snapshot_tolerance) {
            (Some(r), _) => write!(f, "R = {r}"),
            (None, Some(t)) => write!(f, "R = auto (tolerance {t:e})"),
            (None, None) => write!(f, "R = from checkpoint"),
        }
    }
}
