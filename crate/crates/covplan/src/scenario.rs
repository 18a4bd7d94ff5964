//! Scenario configuration: a TOML file describing the mission space, reward
//! field, sensing and battery parameters, team size, and run settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::formation::SolverOptions;
use crate::geom::Point2;
use crate::mission::{MissionSpace, RewardField, SensingModel};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub space: SpaceConfig,
    #[serde(default)]
    pub field: FieldConfig,
    pub sensing: SensingConfig,
    pub energy: EnergyConfig,
    pub agents: AgentsConfig,
    pub sim: SimConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub station: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    /// Constant reward density; ignored when `file` is set.
    #[serde(default = "default_sigma")]
    pub uniform: f64,
    /// Optional gridded reward file (relative paths resolve against the
    /// scenario file).
    #[serde(default)]
    pub file: Option<PathBuf>,
    /// Integration cell size.
    #[serde(default = "default_cell")]
    pub cell: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig { uniform: default_sigma(), file: None, cell: default_cell() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingConfig {
    pub range: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    pub motion_cost: f64,
    pub sensing_cost: f64,
    pub charge_rate: f64,
    pub max_speed: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsConfig {
    pub count: usize,
    /// One value for the whole team or one per agent.
    #[serde(default = "default_soc")]
    pub initial_soc: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Simulation horizon in seconds.
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_multistarts")]
    pub multistarts: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_step")]
    pub step_init: f64,
    #[serde(default)]
    pub grad_tol: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            multistarts: default_multistarts(),
            max_iters: default_max_iters(),
            step_init: default_step(),
            grad_tol: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    /// SOC below which a baseline agent heads for the outlet.
    #[serde(default = "default_q_low")]
    pub low_soc_threshold: f64,
    /// Standoff distance while queueing for an occupied outlet.
    #[serde(default = "default_wait_offset")]
    pub wait_offset: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { low_soc_threshold: default_q_low(), wait_offset: default_wait_offset() }
    }
}

fn default_sigma() -> f64 {
    1.0
}
fn default_cell() -> f64 {
    2.0
}
fn default_soc() -> Vec<f64> {
    vec![1.0]
}
fn default_dt() -> f64 {
    0.1
}
fn default_multistarts() -> usize {
    16
}
fn default_max_iters() -> usize {
    500
}
fn default_step() -> f64 {
    50.0
}
fn default_q_low() -> f64 {
    0.3
}
fn default_wait_offset() -> f64 {
    1.0
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read scenario {}: {e}", path.display()))
        })?;
        let mut scenario: Scenario = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("scenario {}: {e}", path.display())))?;
        if let Some(file) = &scenario.field.file {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    scenario.field.file = Some(dir.join(file));
                }
            }
        }
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.count == 0 {
            return Err(Error::Config("agent count must be at least 1".into()));
        }
        if !(self.sim.horizon >= 0.0) {
            return Err(Error::Config(format!(
                "horizon must be >= 0, got {}",
                self.sim.horizon
            )));
        }
        if !(self.sim.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.sim.dt)));
        }
        let socs = self.initial_soc();
        if socs.len() != self.agents.count {
            return Err(Error::Config(format!(
                "{} initial SOC values for {} agents (give one value or one per agent)",
                self.agents.initial_soc.len(),
                self.agents.count
            )));
        }
        if socs.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::Config("initial SOC must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.baseline.low_soc_threshold) {
            return Err(Error::Config("baseline low_soc_threshold must lie in [0, 1]".into()));
        }
        // Constructors re-validate, but fail early with config context.
        self.mission_space()?;
        self.sensing_model()?;
        self.energy_model()?;
        Ok(())
    }

    pub fn mission_space(&self) -> Result<MissionSpace> {
        MissionSpace::new(
            self.space.width,
            self.space.height,
            Point2::new(self.space.station[0], self.space.station[1]),
        )
    }

    pub fn reward_field(&self) -> Result<RewardField> {
        let space = self.mission_space()?;
        match &self.field.file {
            Some(path) => {
                let field = RewardField::load(path)?;
                if !field.matches_space(&space) {
                    return Err(Error::Config(format!(
                        "reward field {} does not match the {} x {} mission space",
                        path.display(),
                        space.width,
                        space.height
                    )));
                }
                Ok(field)
            }
            None => RewardField::uniform(&space, self.field.uniform, self.field.cell),
        }
    }

    pub fn sensing_model(&self) -> Result<SensingModel> {
        SensingModel::quadratic(self.sensing.range)
    }

    pub fn energy_model(&self) -> Result<EnergyModel> {
        EnergyModel::linear(
            self.energy.motion_cost,
            self.energy.sensing_cost,
            self.energy.charge_rate,
            self.energy.max_speed,
        )
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            step_init: self.solver.step_init,
            max_iters: self.solver.max_iters,
            grad_tol: self.solver.grad_tol,
            multistarts: self.solver.multistarts,
            seed: self.sim.seed,
            warm_starts: Vec::new(),
        }
    }

    /// Initial SOC expanded to one value per agent.
    pub fn initial_soc(&self) -> Vec<f64> {
        if self.agents.initial_soc.len() == 1 {
            vec![self.agents.initial_soc[0]; self.agents.count]
        } else {
            self.agents.initial_soc.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[space]
width = 600.0
height = 500.0

[sensing]
range = 220.0

[energy]
motion_cost = 0.0005
sensing_cost = 0.0005
charge_rate = 0.01
max_speed = 50.0

[agents]
count = 3

[sim]
horizon = 1000.0
"#;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let s: Scenario = toml::from_str(MINIMAL).unwrap();
        s.validate().unwrap();
        assert_eq!(s.field.cell, 2.0);
        assert_eq!(s.field.uniform, 1.0);
        assert_eq!(s.sim.dt, 0.1);
        assert_eq!(s.initial_soc(), vec![1.0, 1.0, 1.0]);
        assert_eq!(s.baseline.low_soc_threshold, 0.3);
        assert_eq!(s.solver.multistarts, 16);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = format!("{MINIMAL}\n[typo_section]\nx = 1\n");
        assert!(toml::from_str::<Scenario>(&bad).is_err());
    }

    #[test]
    fn soc_broadcast_and_mismatch() {
        let mut s: Scenario = toml::from_str(MINIMAL).unwrap();
        s.agents.initial_soc = vec![0.5, 0.6];
        assert!(s.validate().is_err());
        s.agents.initial_soc = vec![0.5, 0.6, 0.7];
        s.validate().unwrap();
    }

    #[test]
    fn zero_horizon_is_allowed() {
        let mut s: Scenario = toml::from_str(MINIMAL).unwrap();
        s.sim.horizon = 0.0;
        s.validate().unwrap();
        s.sim.horizon = -1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn field_file_resolves_relative_to_scenario() {
        let dir = tempfile::tempdir().unwrap();
        let field_path = dir.path().join("rewards.txt");
        let space = MissionSpace::new(20.0, 10.0, Point2::new(0.0, 0.0)).unwrap();
        RewardField::uniform(&space, 2.0, 2.0).unwrap().write(&field_path).unwrap();
        let scen_path = dir.path().join("scenario.toml");
        let text = MINIMAL
            .replace("width = 600.0", "width = 20.0")
            .replace("height = 500.0", "height = 10.0")
            + "\n[field]\nfile = \"rewards.txt\"\n";
        std::fs::write(&scen_path, text).unwrap();
        let s = Scenario::load(&scen_path).unwrap();
        let field = s.reward_field().unwrap();
        assert_eq!(field.uniform_value(), None);
        assert_eq!(field.cell(), 2.0);
    }
}
