//! TOML experiment configuration and its translation into solver inputs.

use std::path::{Path, PathBuf};

use mcgpc_core::{
    Axis, CuckerSmaleParams, GpcBasis, InitialCondition, Integrator, ModelSpec, MorseSwarmParams, PolynomialFamily,
    ResamplePolicy, SolverConfig, TensorBasis2D, UncertainScalar, Uncertainty, VelocityGrid,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Space-homogeneous 1D alignment with a position-independent kernel.
    Homogeneous,
    #[serde(rename = "cs_1d")]
    Cs1d,
    #[serde(rename = "cs_2d")]
    Cs2d,
    #[serde(rename = "mill_2d")]
    Mill2d,
    /// Alignment plus Morse forces with independent inputs for each.
    #[serde(rename = "combined_2d_uncertainty")]
    Combined2dUncertainty,
}

impl Experiment {
    pub fn dim(self) -> usize {
        match self {
            Experiment::Homogeneous | Experiment::Cs1d => 1,
            _ => 2,
        }
    }

    fn needs_alignment(self) -> bool {
        !matches!(self, Experiment::Mill2d)
    }

    fn needs_morse(self) -> bool {
        matches!(self, Experiment::Mill2d | Experiment::Combined2dUncertainty)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Experiment,
    pub particles: ParticlesConfig,
    pub gpc: GpcConfig,
    pub time: TimeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<AlignmentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morse: Option<MorseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticlesConfig {
    pub n: usize,
    /// Defaults to `n` (full interaction).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpcConfig {
    #[serde(default = "default_family")]
    pub family: String,
    pub order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_points: Option<usize>,
    /// Second input (potential strengths) of the combined experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family2: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order2: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_points2: Option<usize>,
}

fn default_family() -> String {
    "legendre".to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorName {
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleName {
    PerStep,
    PerStage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Statistics are recorded every `stride` steps.
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default = "default_integrator")]
    pub integrator: IntegratorName,
    #[serde(default = "default_resample")]
    pub resample: ResampleName,
}

fn one() -> usize {
    1
}

fn default_integrator() -> IntegratorName {
    IntegratorName::Rk4
}

fn default_resample() -> ResampleName {
    ResampleName::PerStep
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentConfig {
    /// `c0 + c1*theta`.
    pub k: String,
    #[serde(default = "zero_string")]
    pub gamma: String,
}

fn zero_string() -> String {
    "0.0".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorseConfig {
    pub a: f64,
    pub b: f64,
    pub c_a: String,
    pub c_r: String,
    pub ell_a: f64,
    pub ell_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    BimodalVelocity {
        mu: f64,
        sigma2: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        position_variance: Option<f64>,
    },
    BivariateBimodal {
        v_bar: f64,
        sigma_x2: f64,
        sigma_v2: f64,
        #[serde(default)]
        duplicate_mode: bool,
    },
    Annulus {
        inner_radius: f64,
        outer_radius: f64,
        speed: f64,
        #[serde(default = "yes")]
        counterclockwise: bool,
    },
}

fn yes() -> bool {
    true
}

impl InitialConfig {
    fn to_core(&self) -> InitialCondition {
        match *self {
            InitialConfig::BimodalVelocity { mu, sigma2, position_variance } => {
                InitialCondition::BimodalVelocity1D { mu, sigma2, position_variance }
            }
            InitialConfig::BivariateBimodal { v_bar, sigma_x2, sigma_v2, duplicate_mode } => {
                InitialCondition::BivariateBimodal1D { v_bar, sigma_x2, sigma_v2, duplicate_mode }
            }
            InitialConfig::Annulus { inner_radius, outer_radius, speed, counterclockwise } => {
                InitialCondition::AnnulusRotating2D { inner_radius, outer_radius, speed, counterclockwise }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    /// Extra times at which density grids are written (t=0 and the final
    /// time are always written).
    #[serde(default)]
    pub density_times: Vec<f64>,
    /// `[min, max, bins]` per axis.
    #[serde(default = "default_grid")]
    pub position_grid: (f64, f64, usize),
    #[serde(default = "default_grid")]
    pub velocity_grid: (f64, f64, usize),
    #[serde(default)]
    pub pgm: bool,
    /// Write gPC coefficient snapshots of the initial and final ensembles.
    #[serde(default = "yes")]
    pub snapshots: bool,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_grid() -> (f64, f64, usize) {
    (-2.0, 2.0, 50)
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out_dir(),
            density_times: Vec::new(),
            position_grid: default_grid(),
            velocity_grid: default_grid(),
            pgm: false,
            snapshots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "minus_two")]
    pub v_min: f64,
    #[serde(default = "two")]
    pub v_max: f64,
    /// Defaults to `dv²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Steps between rows of the temperature series.
    #[serde(default = "default_oracle_stride")]
    pub stride: usize,
}

fn default_grid_points() -> usize {
    801
}

fn minus_two() -> f64 {
    -2.0
}

fn two() -> f64 {
    2.0
}

fn default_oracle_stride() -> usize {
    100
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            grid_points: default_grid_points(),
            v_min: -2.0,
            v_max: 2.0,
            dt: None,
            stride: default_oracle_stride(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// Full-interaction particle run with the same seed.
    Particles,
    /// Mean-field grid solver (homogeneous experiment only).
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    #[serde(default = "default_reference")]
    pub reference: ReferenceKind,
    /// gPC order of the particle reference; defaults to the swept run's order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_order: Option<usize>,
    /// Particle count of the reference; defaults to the swept run's `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_n: Option<usize>,
    #[serde(default = "one")]
    pub replicates: usize,
}

fn default_reference() -> ReferenceKind {
    ReferenceKind::Particles
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        ConvergeConfig { reference: default_reference(), reference_order: None, reference_n: None, replicates: 1 }
    }
}

/// Everything a run needs, validated.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: ModelSpec,
    pub solver: SolverConfig,
    pub initial: InitialCondition,
    pub n: usize,
    pub dim: usize,
    pub position_axes: Vec<Axis>,
    pub velocity_axes: Vec<Axis>,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }

    pub fn subsample(&self) -> usize {
        self.particles.subsample.unwrap_or(self.particles.n)
    }

    /// The initial condition, falling back to the experiment's standard data.
    pub fn initial_condition(&self) -> InitialCondition {
        match &self.initial {
            Some(ic) => ic.to_core(),
            None => match self.experiment {
                Experiment::Homogeneous => InitialCondition::homogeneous_default(),
                Experiment::Cs1d => InitialCondition::cs_1d_default(),
                _ => InitialCondition::annulus_default(),
            },
        }
    }

    fn basis(family: &str, order: usize, quad_points: Option<usize>) -> Result<GpcBasis> {
        let family: PolynomialFamily = family.parse()?;
        let basis = match quad_points {
            Some(q) => GpcBasis::new(family, order, q)?,
            None => GpcBasis::with_default_quadrature(family, order)?,
        };
        Ok(basis)
    }

    pub fn uncertainty(&self) -> Result<Uncertainty> {
        let g = &self.gpc;
        let first = Self::basis(&g.family, g.order, g.quad_points)?;
        if self.experiment == Experiment::Combined2dUncertainty {
            let family2 = g.family2.as_deref().unwrap_or(&g.family);
            let second = Self::basis(family2, g.order2.unwrap_or(g.order), g.quad_points2)?;
            Ok(Uncertainty::TwoD(TensorBasis2D::new(first, second)))
        } else {
            if g.family2.is_some() || g.order2.is_some() || g.quad_points2.is_some() {
                return Err(CliError::Config(
                    "gpc.family2/order2/quad_points2 only apply to the combined_2d_uncertainty experiment".into(),
                ));
            }
            Ok(Uncertainty::OneD(first))
        }
    }

    /// Full validation; nothing is written before this succeeds.
    pub fn prepare(&self) -> Result<Prepared> {
        let exp = self.experiment;
        let dim = exp.dim();
        let n = self.particles.n;
        if n == 0 {
            return Err(CliError::Config("particles.n must be positive".into()));
        }
        let uncertainty = self.uncertainty()?;

        let alignment = match (&self.alignment, exp.needs_alignment()) {
            (Some(a), true) => {
                let k: UncertainScalar = a.k.parse()?;
                let gamma: UncertainScalar = a.gamma.parse()?;
                if exp == Experiment::Homogeneous && gamma != UncertainScalar::Constant(0.0) {
                    return Err(CliError::Config(
                        "the homogeneous experiment needs a position-independent kernel (alignment.gamma = \"0\")"
                            .into(),
                    ));
                }
                Some(CuckerSmaleParams::new(k, gamma, uncertainty.alignment_nodes())?)
            }
            (None, true) => return Err(CliError::Config(format!("experiment {exp:?} needs an [alignment] section"))),
            (Some(_), false) => {
                return Err(CliError::Config(format!("experiment {exp:?} does not use an [alignment] section")))
            }
            (None, false) => None,
        };
        let morse = match (&self.morse, exp.needs_morse()) {
            (Some(m), true) => Some(MorseSwarmParams::new(m.a, m.b, m.c_a.parse()?, m.c_r.parse()?, m.ell_a, m.ell_r)?),
            (None, true) => return Err(CliError::Config(format!("experiment {exp:?} needs a [morse] section"))),
            (Some(_), false) => {
                return Err(CliError::Config(format!("experiment {exp:?} does not use a [morse] section")))
            }
            (None, false) => None,
        };
        let spec = ModelSpec::new(alignment, morse, uncertainty)?;

        let initial = self.initial_condition();
        initial.validate()?;
        if initial.dim() != dim {
            return Err(CliError::Config(format!(
                "initial condition is {}-dimensional but experiment {exp:?} is {dim}-dimensional",
                initial.dim()
            )));
        }

        let t = &self.time;
        let mut solver = SolverConfig::new(t.dt, t.t_end, self.subsample(), self.particles.seed);
        solver.integrator = match t.integrator {
            IntegratorName::Rk4 => Integrator::Rk4,
            IntegratorName::Euler => Integrator::Euler,
        };
        solver.resample = match t.resample {
            ResampleName::PerStep => ResamplePolicy::PerStep,
            ResampleName::PerStage => ResamplePolicy::PerStage,
        };
        if t.stride == 0 {
            return Err(CliError::Config("time.stride must be >= 1".into()));
        }
        solver.validate(n)?;

        let o = &self.output;
        if let Some(bad) = o.density_times.iter().find(|&&x| !(0.0..=t.t_end).contains(&x)) {
            return Err(CliError::Config(format!("output.density_times entry {bad} is outside [0, t_end]")));
        }
        let axis = |g: (f64, f64, usize)| Axis::new(g.0, g.1, g.2);
        let position_axes = vec![axis(o.position_grid)?; dim];
        let velocity_axes = vec![axis(o.velocity_grid)?; dim];

        if let Some(c) = &self.converge {
            if c.replicates == 0 {
                return Err(CliError::Config("converge.replicates must be >= 1".into()));
            }
            if c.reference == ReferenceKind::Oracle && exp != Experiment::Homogeneous {
                return Err(CliError::Config("the grid-solver reference needs the homogeneous experiment".into()));
            }
        }
        if self.oracle.is_some() && exp != Experiment::Homogeneous {
            return Err(CliError::Config("the [oracle] section only applies to the homogeneous experiment".into()));
        }

        Ok(Prepared { spec, solver, initial, n, dim, position_axes, velocity_axes })
    }

    /// Grid, step and initial density of the mean-field oracle.
    pub fn oracle_setup(&self) -> Result<(VelocityGrid, f64, (f64, f64))> {
        if self.experiment != Experiment::Homogeneous {
            return Err(CliError::Config("the oracle solves the homogeneous experiment only".into()));
        }
        let o = self.oracle.clone().unwrap_or_default();
        let grid = VelocityGrid::new(o.v_min, o.v_max, o.grid_points)?;
        let dt = o.dt.unwrap_or_else(|| grid.max_dt());
        if o.stride == 0 {
            return Err(CliError::Config("oracle.stride must be >= 1".into()));
        }
        let (mu, sigma2) = match self.initial_condition() {
            InitialCondition::BimodalVelocity1D { mu, sigma2, .. } => (mu, sigma2),
            _ => return Err(CliError::Config("the oracle needs bimodal_velocity initial data".into())),
        };
        Ok((grid, dt, (mu, sigma2)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "homogeneous"
[particles]
n = 100
[gpc]
order = 3
[time]
dt = 0.01
t_end = 0.1
[alignment]
k = "1 + 0.5*theta"
"#;

    #[test]
    fn minimal_config_prepares_with_defaults() {
        let cfg = Config::from_toml(MINIMAL).unwrap();
        let p = cfg.prepare().unwrap();
        assert_eq!(p.solver.subsample, 100);
        assert_eq!(p.spec.n_modes(), 4);
        assert_eq!(p.initial, InitialCondition::homogeneous_default());
        assert_eq!(cfg.output.position_grid, (-2.0, 2.0, 50));
        let echoed = Config::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(echoed, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("order = 3", "order = 3\nbogus = 1");
        assert!(matches!(Config::from_toml(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn semantic_errors() {
        let cases = [
            MINIMAL.replace("k = \"1 + 0.5*theta\"", "k = \"1 + 0.5*theta\"\ngamma = \"0.2\""),
            MINIMAL.replace("n = 100", "n = 100\nsubsample = 101"),
            MINIMAL.replace("k = \"1 + 0.5*theta\"", "k = \"0.5 + theta\""),
            MINIMAL.replace("order = 3", "order = 3\nfamily = \"jacobi\""),
            MINIMAL.replace("dt = 0.01", "dt = -0.01"),
            MINIMAL.replace("experiment = \"homogeneous\"", "experiment = \"mill_2d\""),
        ];
        for text in cases {
            let cfg = Config::from_toml(&text).unwrap();
            assert!(cfg.prepare().is_err(), "{text}");
        }
    }

    #[test]
    fn initial_section_is_tagged() {
        let text = format!("{MINIMAL}\n[initial]\nkind = \"bimodal_velocity\"\nmu = 0.5\nsigma2 = 0.2\n");
        let cfg = Config::from_toml(&text).unwrap();
        assert_eq!(
            cfg.initial_condition(),
            InitialCondition::BimodalVelocity1D { mu: 0.5, sigma2: 0.2, position_variance: None }
        );
        let text = format!("{MINIMAL}\n[initial]\nkind = \"spiral\"\n");
        assert!(Config::from_toml(&text).is_err());
    }
}
