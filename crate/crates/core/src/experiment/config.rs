use crate::data::Schema;
use crate::discrete::{SearchLimits, SelectionConfig};
use crate::error::Error;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Shift interventions on predictors only.
    DiscreteX,
    /// Coefficient and shift interventions on the response only.
    DiscreteY,
    /// Both, with a non-intervened child of the response kept.
    DiscreteXy,
    /// Sinusoidal interventions indexed by a continuous environment value.
    ContinuousXy,
    /// Every parameter intervened except one child of `Y`, which is
    /// perturbed with strength `λ`.
    RobustnessSweep,
    /// Train and test panels read from CSV files.
    CsvPanel,
}

impl ExperimentKind {
    pub fn is_discrete_simulation(self) -> bool {
        matches!(self, ExperimentKind::DiscreteX | ExperimentKind::DiscreteY | ExperimentKind::DiscreteXy | ExperimentKind::RobustnessSweep)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Imp,
    ImpInv,
    Ols,
    AnchorCv,
    /// Population `E[Y | X]` of the test environment.
    Oracle,
}

impl MethodName {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodName::Imp => "imp",
            MethodName::ImpInv => "imp_inv",
            MethodName::Ols => "ols",
            MethodName::AnchorCv => "anchor_cv",
            MethodName::Oracle => "oracle",
        }
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Settings used only by the continuous-environment recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuousSettings {
    pub num_nodes: usize,
    pub intervened_x: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub u_train: (f64, f64),
    pub u_test: (f64, f64),
    pub amplitude_train: f64,
    pub amplitude_test: f64,
    /// Range of the frequency `w` in `a sin(2π w u)`.
    pub frequency: (f64, f64),
    pub bandwidth: f64,
}

impl Default for ContinuousSettings {
    fn default() -> Self {
        ContinuousSettings {
            num_nodes: 5,
            intervened_x: 2,
            n_train: 800,
            n_test: 800,
            u_train: (0.0, 1.0),
            u_test: (1.0, 2.0),
            amplitude_train: 2.0,
            amplitude_test: 5.0,
            frequency: (0.5, 2.0),
            bandwidth: 0.1,
        }
    }
}

/// Settings used only by the robustness sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustnessSettings {
    pub lambdas: Vec<f64>,
    pub train_range: (f64, f64),
    pub test_range: (f64, f64),
    pub noise_var_train: (f64, f64),
    pub noise_var_test: (f64, f64),
}

impl Default for RobustnessSettings {
    fn default() -> Self {
        RobustnessSettings {
            lambdas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            train_range: (-2.0, 2.0),
            test_range: (-5.0, 5.0),
            noise_var_train: (0.75, 1.25),
            noise_var_test: (0.5, 1.5),
        }
    }
}

/// Input files of a CSV experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSettings {
    pub train: PathBuf,
    pub test: PathBuf,
    pub schema: Schema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Variables per generated model, response included.
    pub num_nodes: usize,
    pub edge_prob: f64,
    /// Sample size of every discrete environment.
    pub n_e: usize,
    pub train_envs: usize,
    pub test_envs: usize,
    pub intervened_x: usize,
    /// Perturbations are uniform on these ranges.
    pub train_range: (f64, f64),
    pub test_range: (f64, f64),
    pub replicates: usize,
    pub seed: u64,
    pub methods: Vec<MethodName>,
    pub limits: SearchLimits,
    pub selection: SelectionConfig,
    pub anchor_grid: Vec<f64>,
    pub anchor_folds: usize,
    /// Draws of a model and interventions before a replicate is skipped.
    pub max_attempts: usize,
    pub continuous: ContinuousSettings,
    pub robustness: RobustnessSettings,
    pub csv: Option<CsvSettings>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: ExperimentKind::DiscreteY,
            num_nodes: 9,
            edge_prob: 0.5,
            n_e: 300,
            train_envs: 5,
            test_envs: 5,
            intervened_x: 4,
            train_range: (-2.0, 2.0),
            test_range: (-10.0, 10.0),
            replicates: 50,
            seed: 0,
            methods: vec![MethodName::Imp, MethodName::ImpInv, MethodName::Ols, MethodName::AnchorCv, MethodName::Oracle],
            limits: SearchLimits::NONE,
            selection: SelectionConfig::default(),
            anchor_grid: crate::baselines::default_gamma_grid(),
            anchor_folds: 5,
            max_attempts: 100,
            continuous: ContinuousSettings::default(),
            robustness: RobustnessSettings::default(),
            csv: None,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<(), Error> {
    if lo.is_finite() && hi.is_finite() && lo <= hi {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must satisfy lo <= hi, got ({lo}, {hi})")))
    }
}

impl ExperimentConfig {
    /// Defaults of one recipe.
    pub fn preset(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig { kind, ..Default::default() };
        match kind {
            ExperimentKind::ContinuousXy => c.methods = vec![MethodName::Imp, MethodName::Ols, MethodName::Oracle],
            ExperimentKind::RobustnessSweep => {
                c.methods = vec![MethodName::Imp, MethodName::Oracle];
                c.replicates = 20;
            }
            ExperimentKind::CsvPanel => {
                c.methods = vec![MethodName::Imp, MethodName::ImpInv, MethodName::Ols, MethodName::AnchorCv];
                c.replicates = 1;
            }
            _ => {}
        }
        c
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        for (name, r) in [
            ("train_range", self.train_range),
            ("test_range", self.test_range),
            ("continuous.u_train", self.continuous.u_train),
            ("continuous.u_test", self.continuous.u_test),
            ("continuous.frequency", self.continuous.frequency),
            ("robustness.train_range", self.robustness.train_range),
            ("robustness.test_range", self.robustness.test_range),
            ("robustness.noise_var_train", self.robustness.noise_var_train),
            ("robustness.noise_var_test", self.robustness.noise_var_test),
        ] {
            check_range(name, r)?;
        }
        if self.robustness.noise_var_train.0 <= 0.0 || self.robustness.noise_var_test.0 <= 0.0 {
            return Err(Error::Config("noise variances must be positive".into()));
        }
        if self.kind.is_discrete_simulation() && (self.train_envs < 2 || self.test_envs < 1 || self.n_e == 0) {
            return Err(Error::Config("need at least 2 training and 1 test environment with n_e > 0".into()));
        }
        if self.kind == ExperimentKind::RobustnessSweep {
            if self.robustness.lambdas.is_empty() {
                return Err(Error::Config("robustness sweep needs at least one lambda".into()));
            }
            if self.robustness.lambdas.iter().any(|&l| !(0.0..=1.0).contains(&l)) {
                return Err(Error::Config("lambda must lie in [0, 1]".into()));
            }
        }
        if self.kind == ExperimentKind::CsvPanel && self.csv.is_none() {
            return Err(Error::Config("csv_panel needs a `csv` section".into()));
        }
        if self.anchor_grid.is_empty() || self.anchor_folds < 2 {
            return Err(Error::Config("anchor CV needs a non-empty grid and at least 2 folds".into()));
        }
        self.selection.validate()?;
        Ok(())
    }
}
