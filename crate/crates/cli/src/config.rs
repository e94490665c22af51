//! Experiment configuration documents (TOML). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Solve,
    NpcCheck,
    EnergyConvergence,
    Regularity,
    Sharpness,
    HopfLax,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::Solve => "solve",
            ExperimentKind::NpcCheck => "npc-check",
            ExperimentKind::EnergyConvergence => "energy-convergence",
            ExperimentKind::Regularity => "regularity",
            ExperimentKind::Sharpness => "sharpness",
            ExperimentKind::HopfLax => "hopf-lax",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// May be omitted when the subcommand names the experiment.
    pub kind: Option<ExperimentKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub npc: NpcConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub regularity: RegularityConfig,
    #[serde(default)]
    pub sharpness: SharpnessConfig,
    #[serde(default)]
    pub hopf_lax: HopfLaxConfig,
}

/// Cone `C_θ` truncated at `radius`, or a mesh file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    /// `θ/π`.
    pub total_angle_pi: f64,
    pub radius: f64,
    pub level: u32,
    pub base_rings: usize,
    /// Replace the mesh's curvature bound by a weaker one.
    pub curvature_bound: Option<f64>,
    pub mesh_file: Option<PathBuf>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            total_angle_pi: 2.0,
            radius: 1.0,
            level: 3,
            base_rings: conelab_core::domain::DEFAULT_BASE_RINGS,
            curvature_bound: None,
            mesh_file: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    #[default]
    RealLine,
    Euclidean {
        dim: usize,
    },
    HyperbolicPlane,
    Tripod {
        #[serde(default = "unit")]
        leg: f64,
    },
    Tree {
        file: PathBuf,
    },
}

fn unit() -> f64 {
    1.0
}

/// Closed vocabulary of boundary data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryConfig {
    /// `amplitude · cos φ`.
    CosPhi {
        #[serde(default = "unit")]
        amplitude: f64,
    },
    /// `amplitude · cos(αφ)`, `α = 2π/θ` unless given; `αθ/2π` must be an
    /// integer.
    CosAlphaPhi {
        alpha: Option<f64>,
        #[serde(default = "unit")]
        amplitude: f64,
    },
    /// The boundary circle traverses a closed walk around the tree.
    TreeLegEmbed,
    /// CSV with a `phi` column followed by one column per coordinate,
    /// interpolated along geodesics and periodically in φ.
    Tabulated { file: PathBuf },
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig::CosPhi { amplitude: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitConfig {
    BoundaryBarycenter,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    GaussSeidel,
    Jacobi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub over_relaxation: Option<f64>,
    pub mode: ModeConfig,
    pub init: InitConfig,
    /// Solve again from a second random start and compare.
    pub uniqueness_probe: bool,
    /// Bound on the interior error against a closed-form solution.
    pub oracle_tol: f64,
    /// Bound on the maximum-principle residual of scalar solutions.
    pub max_principle_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-9,
            max_iter: 100_000,
            over_relaxation: None,
            mode: ModeConfig::GaussSeidel,
            init: InitConfig::BoundaryBarycenter,
            uniqueness_probe: true,
            oracle_tol: 1e-3,
            max_principle_tol: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NpcTargetName {
    Euclidean3,
    HyperbolicPlane,
    Tripod,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NpcConfig {
    pub quadruples: usize,
    pub targets: Vec<NpcTargetName>,
    /// Coordinate range of random points.
    pub scale: f64,
    pub tol: f64,
}

impl Default for NpcConfig {
    fn default() -> Self {
        NpcConfig {
            quadruples: 10_000,
            targets: vec![
                NpcTargetName::Euclidean3,
                NpcTargetName::HyperbolicPlane,
                NpcTargetName::Tripod,
            ],
            scale: 2.0,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub levels: Vec<u32>,
    /// Gradient `a` of the linear map `⟨a, x⟩`.
    pub slope: [f64; 2],
    pub p: f64,
    /// `ε = eps_factor · h · eps_growth^(L−1)`.
    pub eps_factor: f64,
    pub eps_growth: f64,
    /// Pointwise normalization check at `ε = normalization_eps_factor · h`.
    pub normalization_eps_factor: f64,
    pub normalization_tol: f64,
    pub exactness_tol: f64,
    pub region_radius: f64,
    pub max_relative_gap: f64,
    pub mean_value_tol: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            levels: vec![1, 2, 3],
            slope: [1.0, 0.5],
            p: 2.0,
            eps_factor: 4.0,
            eps_growth: std::f64::consts::SQRT_2,
            normalization_eps_factor: 8.0,
            normalization_tol: 0.05,
            exactness_tol: 1e-10,
            region_radius: 0.3,
            max_relative_gap: 0.05,
            mean_value_tol: 0.10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularityConfig {
    pub levels: Vec<u32>,
    /// Hölder fit radii in units of the mesh spacing.
    pub holder_radii_h: Vec<f64>,
    pub holder_tol: f64,
    /// Radius of the pointwise Lipschitz probe in units of `h`.
    pub lip_radius_h: f64,
    /// Sampled pairs for the product check; 0 checks all pairs.
    pub product_pairs: usize,
    pub composition_tol_constant: f64,
    pub max_violation_fraction: f64,
    pub mean_value_radii: Vec<f64>,
    pub mean_value_tol: f64,
}

impl Default for RegularityConfig {
    fn default() -> Self {
        RegularityConfig {
            levels: vec![1, 2, 3],
            holder_radii_h: vec![2.0, 4.0, 8.0, 16.0],
            holder_tol: 0.07,
            lip_radius_h: 2.0,
            product_pairs: 200_000,
            composition_tol_constant: 1.0,
            max_violation_fraction: 0.01,
            mean_value_radii: vec![0.2, 0.4],
            mean_value_tol: 5e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SharpnessConfig {
    pub angles_pi: Vec<f64>,
    pub levels: Vec<u32>,
    pub base_rings: usize,
    /// `R` in `B_q(R)`.
    pub radius: f64,
    pub min_growth: f64,
    pub max_spread: f64,
    pub holder_radii_h: Vec<f64>,
    pub holder_base_rings: usize,
    pub holder_tol: f64,
}

impl Default for SharpnessConfig {
    fn default() -> Self {
        SharpnessConfig {
            angles_pi: vec![1.0, 2.0, 3.0],
            levels: vec![1, 2, 3],
            base_rings: 48,
            radius: 0.5,
            min_growth: 1.2,
            max_spread: 2.0,
            holder_radii_h: vec![2.0, 4.0, 8.0, 16.0],
            holder_base_rings: conelab_core::domain::DEFAULT_BASE_RINGS,
            holder_tol: 0.07,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HopfLaxConfig {
    pub levels: Vec<u32>,
    /// Lower curvature bounds to run; each must not exceed the domain's.
    pub curvatures: Vec<f64>,
    /// `t = t_fraction · t_0`.
    pub t_fraction: f64,
    pub lambda_step: f64,
    pub inner_radius: f64,
    /// `Ω'`; the whole domain when absent.
    pub outer_radius: Option<f64>,
    pub argmin_tol: f64,
    pub probes: usize,
    /// `c` in the super-solution tolerance `c · h · Lip f_t`.
    pub supersolution_c: f64,
    pub max_violation_fraction: f64,
    /// Time-derivative tolerance `time_c · C_* · h`.
    pub time_c: f64,
    pub probe_pass_fraction: f64,
    /// Forward time steps as fractions of `min(t, t_0 − t)`.
    pub time_steps: Vec<f64>,
    /// λ values for the super-solution check, rounded to the grid.
    pub supersolution_lambdas: Vec<f64>,
}

impl Default for HopfLaxConfig {
    fn default() -> Self {
        HopfLaxConfig {
            levels: vec![1, 2, 3],
            curvatures: vec![0.0, -1.0],
            t_fraction: 0.25,
            lambda_step: 0.02,
            inner_radius: 0.5,
            outer_radius: None,
            argmin_tol: conelab_core::hopf_lax::DEFAULT_ARGMIN_TOL,
            probes: 20,
            supersolution_c: 1.0,
            max_violation_fraction: 0.01,
            time_c: 1.0,
            probe_pass_fraction: 0.95,
            time_steps: vec![0.5, 0.25, 0.125],
            supersolution_lambdas: vec![0.0, 0.5, 1.0],
        }
    }
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind: Some(kind),
            seed: 0,
            domain: DomainConfig::default(),
            target: TargetConfig::default(),
            boundary: BoundaryConfig::default(),
            solver: SolverConfig::default(),
            npc: NpcConfig::default(),
            convergence: ConvergenceConfig::default(),
            regularity: RegularityConfig::default(),
            sharpness: SharpnessConfig::default(),
            hopf_lax: HopfLaxConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Load a config; relative file references resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.domain.mesh_file.as_mut() {
            resolve(p);
        }
        if let TargetConfig::Tree { file } = &mut cfg.target {
            resolve(file);
        }
        if let BoundaryConfig::Tabulated { file } = &mut cfg.boundary {
            resolve(file);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Settle the experiment kind against the one requested on the command
    /// line and check referenced files.
    pub fn resolve_kind(&mut self, requested: Option<ExperimentKind>) -> Result<ExperimentKind, CliError> {
        let kind = match (self.kind, requested) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::Config(format!(
                    "config declares kind {} but {} was requested",
                    a.label(),
                    b.label()
                )))
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(CliError::Config("experiment kind is not set".into())),
        };
        self.kind = Some(kind);
        let mut files: Vec<&Path> = Vec::new();
        if let Some(p) = &self.domain.mesh_file {
            files.push(p);
        }
        if let TargetConfig::Tree { file } = &self.target {
            files.push(file);
        }
        if let BoundaryConfig::Tabulated { file } = &self.boundary {
            files.push(file);
        }
        if let Some(missing) = files.iter().find(|p| !p.exists()) {
            return Err(CliError::Config(format!(
                "referenced file {} does not exist",
                missing.display()
            )));
        }
        Ok(kind)
    }
}
