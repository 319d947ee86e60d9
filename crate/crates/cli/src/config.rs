//! Experiment configuration files (TOML). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fallgas::density::DensityProfile;
use fallgas::simulator::ScalingRegime;
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "FALLGAS_SEED";
pub const THREADS_ENV: &str = "FALLGAS_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub experiment: Experiment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Simulate(SimulateParams),
    VerifyMoments(MomentCheck),
    VerifyFluctuations(FluctuationParams),
    Invariance(InvarianceCheck),
    Recurrence(RecurrenceParams),
    Limits(LimitCheck),
    Reflection(ReflectionParams),
    Clock(ClockParams),
    Reproducibility(ReproducibilityParams),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Simulate(_) => "simulate",
            Experiment::VerifyMoments(_) => "verify-moments",
            Experiment::VerifyFluctuations(_) => "verify-fluctuations",
            Experiment::Invariance(_) => "invariance",
            Experiment::Recurrence(_) => "recurrence",
            Experiment::Limits(_) => "limits",
            Experiment::Reflection(_) => "reflection",
            Experiment::Clock(_) => "clock",
            Experiment::Reproducibility(_) => "reproducibility",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensitySpec {
    Constant { c: f64 },
    PowerLaw { c: f64, lambda: f64 },
    Builtin { name: String },
}

impl DensitySpec {
    pub fn build(&self) -> fallgas::Result<DensityProfile> {
        match self {
            DensitySpec::Constant { c } => DensityProfile::constant(*c),
            DensitySpec::PowerLaw { c, lambda } => DensityProfile::power_law(*c, *lambda),
            DensitySpec::Builtin { name } => DensityProfile::builtin(name),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegimeSpec {
    Raw,
    Rescaled { n: f64 },
    Window { n: f64 },
}

impl RegimeSpec {
    pub fn build(&self) -> ScalingRegime {
        match *self {
            RegimeSpec::Raw => ScalingRegime::Raw,
            RegimeSpec::Rescaled { n } => ScalingRegime::RescaledDynamics { n },
            RegimeSpec::Window { n } => ScalingRegime::PowerLawWindow { n },
        }
    }
}

fn default_g() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub d: usize,
    #[serde(default = "default_g")]
    pub g: f64,
    pub density: DensitySpec,
    pub regime: RegimeSpec,
    pub y_init: f64,
    pub paths: usize,
    pub max_events: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_clock: Option<f64>,
    /// upper level v
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_level: Option<f64>,
    /// lower level z
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_level: Option<f64>,
    /// interior path samples per flight; 0 writes events only
    #[serde(default)]
    pub refine: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum MomentCheck {
    SurvivalTail(SurvivalTailParams),
    MomentLimits(MomentLimitParams),
    Martingale(MartingaleParams),
    Entrance(EntranceParams),
    OneStep(OneStepParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurvivalTailParams {
    pub d: usize,
    pub g: f64,
    pub density: DensitySpec,
    pub ys: Vec<f64>,
    pub t_max: f64,
    pub t_points: usize,
    pub u_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentLimitParams {
    pub d: usize,
    pub g: f64,
    pub densities: Vec<DensitySpec>,
    pub ys: Vec<f64>,
    pub u_d: f64,
    pub powers: Vec<u32>,
    pub ns: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MartingaleCase {
    pub density: DensitySpec,
    pub y: f64,
    pub u_d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MartingaleParams {
    pub d: usize,
    pub g: f64,
    pub samples: usize,
    pub cases: Vec<MartingaleCase>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntranceParams {
    pub d: usize,
    pub g: f64,
    pub c: f64,
    pub lambdas: Vec<f64>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimLambda {
    pub d: usize,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneStepParams {
    pub g: f64,
    pub c: f64,
    pub cases: Vec<DimLambda>,
    pub xs: Vec<f64>,
    pub paths: usize,
    /// also evaluate the deterministic one-step quadrature at each rung
    #[serde(default)]
    pub quadrature: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluctuationParams {
    pub d: usize,
    pub g: f64,
    pub u_d: f64,
    /// rescaled-regime ladder
    pub densities: Vec<DensitySpec>,
    pub y: f64,
    pub ns: Vec<f64>,
    /// unrescaled power-law ladder in |y|
    pub c: f64,
    pub lambdas: Vec<f64>,
    pub depths: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum InvarianceCheck {
    RawPowerLaw(RawInvarianceParams),
    RescaledCutoff(CutoffInvarianceParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInvarianceParams {
    pub g: f64,
    pub c: f64,
    pub cases: Vec<DimLambda>,
    pub t: f64,
    pub ns: Vec<u64>,
    pub paths: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffInvarianceParams {
    pub g: f64,
    pub y0: f64,
    pub v: f64,
    pub s: f64,
    pub n: f64,
    pub paths: usize,
    /// exact Bessel steps per reference path
    pub reference_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrenceCase {
    pub d: usize,
    pub lambda: f64,
    pub level: f64,
    pub drop_factors: Vec<f64>,
    pub horizons: Vec<u64>,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrenceParams {
    pub g: f64,
    pub c: f64,
    pub cases: Vec<RecurrenceCase>,
    pub growth_paths: usize,
    pub growth_events: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum LimitCheck {
    ScaleSpeed(ScaleSpeedParams),
    DimensionArithmetic(DimensionParams),
    UnitStep(UnitStepParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSpeedParams {
    /// constant or power-law profile for the scale and kappa checks
    pub d: usize,
    pub density: DensitySpec,
    pub y: f64,
    /// profile whose kappa(0) should be flagged divergent
    pub singular: DensitySpec,
    pub harmonic_densities: Vec<DensitySpec>,
    pub dims: Vec<usize>,
    pub grid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionParams {
    pub dims: Vec<usize>,
    pub lambdas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitStepParams {
    pub g: f64,
    pub y: f64,
    pub theta: f64,
    pub ns: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflectionParams {
    pub dims: Vec<usize>,
    pub samples: usize,
    pub plot_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockParams {
    pub g: f64,
    pub density: DensitySpec,
    pub d: usize,
    pub y0: f64,
    pub v: f64,
    pub ns: Vec<f64>,
    pub paths: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproducibilityParams {
    /// worker counts to compare
    pub threads: Vec<usize>,
    pub runs: Vec<ExperimentConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).context("invalid experiment config")?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Applies `FALLGAS_SEED` and `FALLGAS_THREADS` if set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(s) = std::env::var(SEED_ENV) {
            self.seed = s.trim().parse().with_context(|| format!("{SEED_ENV} must be an unsigned integer"))?;
        }
        if let Ok(s) = std::env::var(THREADS_ENV) {
            let t: usize = s.trim().parse().with_context(|| format!("{THREADS_ENV} must be a positive integer"))?;
            if t == 0 {
                bail!("{THREADS_ENV} must be positive");
            }
            self.threads = Some(t);
        }
        Ok(())
    }
}
