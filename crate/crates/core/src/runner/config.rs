use crate::coefficients::{ConstantAdrParams, DeltaPolicy};
use crate::error::{Error, Result};
use crate::integrator::Scheme;
use crate::operator::Stabilization;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Complete description of one run. Every field maps to a TOML key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    pub samples: SamplesConfig,
    pub model: ModelConfig,
    pub initial: InitialConfig,
    pub scheme: SchemeSection,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryLayout {
    /// One tag, `boundary`, on the whole boundary.
    Single,
    /// `inflow` (bottom edge, left edge up to 0.2, right edge up to 0.02) and `outflow`.
    BoundaryLayer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub n_per_side: usize,
    #[serde(default = "default_layout")]
    pub boundary: BoundaryLayout,
    /// Dirichlet value per boundary tag; missing tags are zero.
    #[serde(default)]
    pub dirichlet: std::collections::BTreeMap<String, f64>,
}

fn default_layout() -> BoundaryLayout {
    BoundaryLayout::Single
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplesConfig {
    MonteCarlo {
        count: usize,
        seed: u64,
        #[serde(default = "default_distribution")]
        distribution: String,
        bounds: Vec<[f64; 2]>,
    },
    TensorGrid {
        points_per_axis: usize,
        bounds: Vec<[f64; 2]>,
    },
    File {
        path: PathBuf,
    },
}

fn default_distribution() -> String {
    "uniform".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    RotatingBody,
    /// The shift `k` defaults to the sample mean of the second parameter.
    BoundaryLayer {
        #[serde(default)]
        k: Option<f64>,
    },
    ConstantAdr {
        #[serde(default)]
        params: ConstantAdrParams,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// Slotted cylinder mean with random hump and cone modes.
    RotatingBody,
    /// Compressed random sine field; give either `rank` or `tolerance`.
    BoundaryLayer {
        #[serde(default)]
        rank: Option<usize>,
        #[serde(default)]
        tolerance: Option<f64>,
    },
    /// `U₀ = a sin(πx)sin(πy)`, `U_k = sin((k+1)πx)sin((k+1)πy)/(k+1)`,
    /// `Ỹ_k = sin(kπω₁/2)`.
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        rank: usize,
    },
    Checkpoint {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Dlr,
    Fom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub kind: Scheme,
    pub stabilization: Stabilization,
    pub delta: DeltaPolicy,
    #[serde(default)]
    pub drop_p1_diffusion_bound: bool,
    pub dt: f64,
    #[serde(default)]
    pub t0: f64,
    pub t_final: f64,
    #[serde(default = "default_solver")]
    pub solver: Solver,
    #[serde(default = "default_limit")]
    pub max_condition: f64,
    #[serde(default = "default_limit")]
    pub blowup_factor: f64,
}

fn default_solver() -> Solver {
    Solver::Dlr
}

fn default_limit() -> f64 {
    1e12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write a norms row every this many steps (the last step is always written).
    pub every: usize,
    /// Realisations whose oscillation metric is tracked.
    pub md_samples: Vec<usize>,
    /// Times at which realisations are dumped.
    pub dump_times: Vec<f64>,
    pub dump_samples: Vec<usize>,
    /// Parameter vectors resolved to the nearest sample.
    pub dump_parameters: Vec<Vec<f64>>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            every: 1,
            md_samples: Vec::new(),
            dump_times: Vec::new(),
            dump_samples: Vec::new(),
            dump_parameters: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub tangent_residual: bool,
    pub bounds: bool,
    pub coercivity_trials: usize,
    pub coercivity_seed: u64,
    /// Fail the run when the tangent residual exceeds this value.
    pub tangent_tolerance: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            tangent_residual: false,
            bounds: true,
            coercivity_trials: 0,
            coercivity_seed: 1,
            tangent_tolerance: 1e-9,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks consistency that serde alone cannot express.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.mesh.n_per_side == 0 {
            return bad("mesh.n_per_side must be at least 1");
        }
        let s = &self.scheme;
        if !(s.dt > 0.0) || !s.dt.is_finite() {
            return bad("scheme.dt must be positive");
        }
        if !(s.t_final >= s.t0) {
            return bad("scheme.t_final must not precede scheme.t0");
        }
        if self.output.every == 0 {
            return bad("output.every must be at least 1");
        }
        if let InitialConfig::BoundaryLayer { rank, tolerance } = &self.initial {
            if rank.is_some() == tolerance.is_some() {
                return bad("initial: give exactly one of `rank` or `tolerance`");
            }
        }
        match &self.samples {
            SamplesConfig::MonteCarlo { count, bounds, .. } => {
                if *count == 0 || bounds.is_empty() {
                    return bad("samples: Monte Carlo needs a count and bounds");
                }
            }
            SamplesConfig::TensorGrid { points_per_axis, bounds } => {
                if *points_per_axis == 0 || bounds.is_empty() {
                    return bad("samples: tensor grid needs points and bounds");
                }
            }
            SamplesConfig::File { .. } => {}
        }
        Ok(())
    }
}
