//! JSON scenario documents.
//!
//! All quantities are SI: distances in m, speeds in m/s, accelerations in
//! m/s², times in s. Unknown keys are rejected at every level.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintParams, ConstraintStrategy};
use crate::dynamics::{AccParams, DisturbanceSpec};
use crate::error::{Error, Result};
use crate::feasibility::GridSpec;
use crate::ocp::{CostSpec, SolverSettings};
use crate::sim::{PlantKind, Scenario, VIOLATION_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub model: PlantKind,
    /// `[Δd, Δv, a_f]` for ACC, `[d, v]` for braking.
    pub initial_state: Vec<f64>,
    /// Defaults to the plant's standard cost.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    /// Prediction horizon N.
    pub horizon: usize,
    /// Real steps.
    pub steps: usize,
    pub seed: u64,
    /// Tolerance on `h` before a step counts as a violation.
    pub violation_tol: f64,
    pub relax: bool,
    pub allow_unsafe_start: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            horizon: 50,
            steps: 300,
            seed: 0,
            violation_tol: VIOLATION_TOL,
            relax: false,
            allow_unsafe_start: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub plant: PlantSection,
    #[serde(default)]
    pub params: AccParams,
    #[serde(default)]
    pub constraint_params: ConstraintParams,
    #[serde(default)]
    pub disturbance: DisturbanceSpec,
    pub strategy: ConstraintStrategy,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

impl ScenarioFile {
    /// Parses and validates a document, reporting the failing key path and
    /// source position.
    pub fn parse(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Scenario {
                path,
                message: format!("{inner}"),
            }
        })?;
        de.end().map_err(|e| Error::Scenario {
            path: ".".into(),
            message: e.to_string(),
        })?;
        file.to_scenario()?.validate()?;
        if let Some(g) = &file.grid {
            g.validate()?;
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        let cost = match (&self.plant.cost, self.plant.model) {
            (Some(c), _) => c.clone(),
            (None, PlantKind::Acc) => CostSpec::acc(),
            (None, PlantKind::Braking) => CostSpec::braking(),
        };
        Ok(Scenario {
            plant: self.plant.model,
            params: self.params,
            limits: self.constraint_params.normalized()?,
            initial_state: self.plant.initial_state.clone(),
            disturbance: self.disturbance.clone(),
            cost,
            horizon: self.simulation.horizon,
            strategy: self.strategy,
            solver: self.solver,
            steps: self.simulation.steps,
            seed: self.simulation.seed,
            violation_tol: self.simulation.violation_tol,
            relax: self.simulation.relax,
            allow_unsafe_start: self.simulation.allow_unsafe_start,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "plant": { "model": "acc", "initial_state": [0, 0, 0] },
        "strategy": { "name": "gcbf", "lambda": 0.01, "m": 2 }
    }"#;

    #[test]
    fn minimal_document_uses_defaults() {
        let f = ScenarioFile::parse(MINIMAL).unwrap();
        let s = f.to_scenario().unwrap();
        assert_eq!(s, Scenario::acc_default());
    }

    #[test]
    fn round_trip() {
        let f = ScenarioFile::parse(MINIMAL).unwrap();
        let again = ScenarioFile::parse(&f.to_json().unwrap()).unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn unknown_key_reports_path() {
        let text = MINIMAL.replace("\"m\": 2", "\"m\": 2, \"mu\": 3");
        match ScenarioFile::parse(&text) {
            Err(Error::Scenario { path, message }) => {
                assert_eq!(path, "strategy");
                assert!(message.contains("mu"), "{message}");
                assert!(message.contains("line"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("\"initial_state\"", "\"initial_sate\"");
        assert!(matches!(
            ScenarioFile::parse(&text),
            Err(Error::Scenario { .. })
        ));
    }

    #[test]
    fn nested_type_error_reports_path() {
        let text = MINIMAL.replace(
            "\"initial_state\": [0, 0, 0]",
            "\"initial_state\": [0, \"x\", 0]",
        );
        match ScenarioFile::parse(&text) {
            Err(Error::Scenario { path, .. }) => assert_eq!(path, "plant.initial_state[1]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors_are_config_errors() {
        let text = MINIMAL.replace("\"m\": 2", "\"m\": 0");
        assert!(matches!(ScenarioFile::parse(&text), Err(Error::Config(_))));
    }

    #[test]
    fn swapped_input_bounds_are_normalized() {
        let text = MINIMAL.replace(
            "\"strategy\"",
            "\"constraint_params\": {\"d_s0\": 5, \"TTC\": -2.5, \"a_fmin\": 5, \"a_fmax\": -5}, \"strategy\"",
        );
        let s = ScenarioFile::parse(&text).unwrap().to_scenario().unwrap();
        assert_eq!((s.limits.a_fmin, s.limits.a_fmax), (-5.0, 5.0));
    }
}
