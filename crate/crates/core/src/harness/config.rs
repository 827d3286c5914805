//! Experiment configuration (TOML). Every field has the default used in the
//! IEEE-57 study; a config only needs `case`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::grid::{import_matpower, read_case, ImportOptions, NetworkCase};
use crate::saddle::{EgVariant, StepSchedule, StopRule};
use crate::statevector::{AnsatzSpec, Entangler};
use crate::variational::{EvalMode, GradientBackend};
use crate::{Error, Result};

/// One row of the results table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Model {
    /// Classical PD on the raw QCQP.
    #[serde(rename = "qcqp-pd")]
    QcqpPd,
    #[serde(rename = "qcqp-eg")]
    QcqpEg,
    /// Doubly variational model, PD.
    #[serde(rename = "qcqp-theta-pd")]
    QcqpThetaPd,
    #[serde(rename = "qcqp-theta-eg")]
    QcqpThetaEg,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::QcqpPd, Model::QcqpEg, Model::QcqpThetaPd, Model::QcqpThetaEg];

    pub fn label(self) -> &'static str {
        match self {
            Model::QcqpPd => "QCQP-PD",
            Model::QcqpEg => "QCQP-EG",
            Model::QcqpThetaPd => "QCQPθ-PD",
            Model::QcqpThetaEg => "QCQPθ-EG",
        }
    }

    pub fn is_quantum(self) -> bool {
        matches!(self, Model::QcqpThetaPd | Model::QcqpThetaEg)
    }

    pub fn method(self) -> crate::saddle::Method {
        match self {
            Model::QcqpPd | Model::QcqpThetaPd => crate::saddle::Method::Pd,
            Model::QcqpEg | Model::QcqpThetaEg => crate::saddle::Method::Eg,
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstanceConfig {
    pub count: usize,
    /// Load scaling factors are drawn uniformly from `[scale[0], scale[1]]`.
    pub scale: [f64; 2],
    /// Zero generator-bus loads and set `q_d = 0.33·p_d` before scaling.
    pub simplify_loads: bool,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        InstanceConfig { count: 15, scale: [0.90, 1.05], simplify_loads: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzConfig {
    /// Architecture row 1–8.
    pub row: u8,
    pub layers: usize,
    #[serde(default)]
    pub entangler: Entangler,
}

impl AnsatzConfig {
    pub fn spec(&self, n_qubits: usize) -> Result<AnsatzSpec> {
        Ok(AnsatzSpec::from_table(self.row, self.layers, n_qubits)?.with_entangler(self.entangler))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    /// Initial `α`; default `√N`.
    pub alpha: Option<f64>,
    /// Initial `β`; default `2|𝒩_ℓ|`.
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub eg_variant: EgVariant,
    pub divergence_ceiling: f64,
    pub record_every: usize,
    pub backend: GradientBackend,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { eg_variant: EgVariant::Literal, divergence_ceiling: 1e9, record_every: 1, backend: GradientBackend::Adjoint }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    /// Default `1.1√N`.
    pub alpha_bar: Option<f64>,
    /// Default: twice the initial `β`.
    pub beta_bar: Option<f64>,
    pub rho: f64,
    pub epsilon: f64,
    pub dist0: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig { alpha_bar: None, beta_bar: None, rho: 0.0, epsilon: 1.0, dist0: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Primal candidates `(row, layers)`; default: the architecture table.
    pub primal: Vec<(u8, usize)>,
    pub dual: Vec<(u8, usize)>,
    pub iterations: usize,
    pub step: f64,
    pub restarts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            primal: vec![(1, 20), (2, 20), (3, 20), (4, 10), (5, 10), (6, 10), (7, 6), (8, 7)],
            dual: vec![(1, 35), (2, 35), (3, 35), (4, 18), (5, 18), (6, 18), (7, 12), (8, 12)],
            iterations: 2000,
            step: 0.1,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Case file: the text case format, or MATPOWER (`.m`).
    pub case: PathBuf,
    #[serde(default)]
    pub drop_quadratic_cost: bool,
    #[serde(default)]
    pub instances: InstanceConfig,
    #[serde(default = "default_primal")]
    pub primal: AnsatzConfig,
    #[serde(default = "default_dual")]
    pub dual: AnsatzConfig,
    #[serde(default = "default_models")]
    pub models: Vec<Model>,
    #[serde(default = "default_mode")]
    pub mode: EvalMode,
    #[serde(default = "StepSchedule::default_quantum")]
    pub quantum_schedule: StepSchedule,
    #[serde(default = "StepSchedule::default_classical")]
    pub classical_schedule: StepSchedule,
    #[serde(default)]
    pub stop: StopRule,
    #[serde(default)]
    pub classical_stop: StopRule,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rcm_runs")]
    pub rcm_runs: usize,
    /// Reference solutions (JSON), or the literal `"oracle"` to compute them
    /// with the brute-force solver (at most 4 buses).
    #[serde(default)]
    pub reference: Option<String>,
    /// Per-instance power-flow voltages at the found setpoints (JSON), used
    /// for violation checks instead of the recovered voltages.
    #[serde(default)]
    pub power_flow: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_primal() -> AnsatzConfig {
    AnsatzConfig { row: 6, layers: 10, entangler: Entangler::Linear }
}

fn default_dual() -> AnsatzConfig {
    AnsatzConfig { row: 2, layers: 35, entangler: Entangler::Linear }
}

fn default_models() -> Vec<Model> {
    Model::ALL.to_vec()
}

fn default_mode() -> EvalMode {
    EvalMode::Exact
}

fn default_rcm_runs() -> usize {
    200
}

impl ExperimentConfig {
    pub fn new(case: impl Into<PathBuf>) -> Self {
        toml::from_str::<ExperimentConfig>(&format!("case = {:?}", case.into().display().to_string())).expect("defaults parse")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.case);
        if let Some(r) = cfg.reference.as_mut().filter(|r| r.as_str() != "oracle") {
            let mut p = PathBuf::from(&*r);
            rebase(&mut p);
            *r = p.display().to_string();
        }
        if let Some(p) = cfg.power_flow.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.output_dir.as_mut() {
            rebase(p);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.instances.scale;
        if !(lo > 0.0 && lo <= hi && hi < 2.0) {
            return Err(Error::validation(format!("load scaling range [{lo}, {hi}] must lie in (0, 2)")));
        }
        self.mode.validate()?;
        self.quantum_schedule.validate()?;
        self.classical_schedule.validate()?;
        self.stop.validate()?;
        self.classical_stop.validate()?;
        for a in [self.primal, self.dual] {
            AnsatzSpec::from_table(a.row, a.layers, 1)?;
        }
        if self.models.is_empty() {
            return Err(Error::validation("at least one model must be selected"));
        }
        if self.rcm_runs == 0 {
            return Err(Error::validation("rcm_runs must be at least 1"));
        }
        Ok(())
    }

    pub fn load_case(&self) -> Result<NetworkCase> {
        load_case_file(&self.case, self.drop_quadratic_cost)
    }
}

/// Reads a case in either supported format, by extension.
pub fn load_case_file(path: &Path, drop_quadratic_cost: bool) -> Result<NetworkCase> {
    if path.extension().is_some_and(|e| e == "m") {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        import_matpower(&text, &name, &ImportOptions { drop_quadratic_cost })
    } else {
        read_case(path)
    }
}
