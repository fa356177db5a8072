use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{signed_distance, Obstacle, Workspace};
use crate::control::ControlConfig;
use crate::kernelnet::{FeatureMap, KernelConfig};
use crate::sensor::SensorConfig;
use crate::svm::SvmConfig;
use crate::{Error, Point, Result};

/// Hyperparameters of the data generator and the two-layer kernel classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    /// Pull-back distance for positive samples along each beam.
    pub offset_d: f64,
    /// Same-label samples closer than this are merged on aggregation.
    pub dedup_tol: f64,
    /// Spacing of the mapping-pass vantage grid (offline mode).
    pub vantage_spacing: f64,
    /// First-layer center spacing; defaults to the larger workspace extent / 20.
    pub grid_spacing: Option<f64>,
    /// First-layer bandwidth; defaults to twice the grid spacing.
    pub sigma1: Option<f64>,
    /// Second-layer bandwidth in feature space.
    pub sigma2: f64,
    pub c_plus: f64,
    pub c_minus_init: f64,
    pub kkt_tolerance: f64,
    pub max_iters: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            offset_d: 0.1,
            dedup_tol: 0.02,
            vantage_spacing: 0.25,
            grid_spacing: None,
            sigma1: None,
            sigma2: 1.0,
            c_plus: 10.0,
            c_minus_init: 1e4,
            kkt_tolerance: 1e-3,
            max_iters: 2_000_000,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Validation(format!("learner.{name} must be > 0, got {v}")))
            }
        };
        positive("offset_d", self.offset_d)?;
        positive("vantage_spacing", self.vantage_spacing)?;
        positive("sigma2", self.sigma2)?;
        if let Some(s) = self.grid_spacing {
            positive("grid_spacing", s)?;
        }
        if let Some(s) = self.sigma1 {
            positive("sigma1", s)?;
        }
        if !(self.dedup_tol.is_finite() && self.dedup_tol >= 0.0) {
            return Err(Error::Validation(format!(
                "learner.dedup_tol must be >= 0, got {}",
                self.dedup_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Validation("learner.max_iters must be > 0".into()));
        }
        self.svm_config().validate()
    }

    pub fn grid_spacing_for(&self, workspace: &Workspace) -> f64 {
        self.grid_spacing
            .unwrap_or_else(|| workspace.width().max(workspace.height()) / 20.0)
    }

    pub fn kernel_config(&self, workspace: &Workspace) -> KernelConfig {
        let grid_spacing = self.grid_spacing_for(workspace);
        KernelConfig {
            sigma1: self.sigma1.unwrap_or(2.0 * grid_spacing),
            sigma2: self.sigma2,
            grid_spacing,
        }
    }

    pub fn feature_map(&self, workspace: &Workspace) -> FeatureMap {
        FeatureMap::covering(workspace, &self.kernel_config(workspace))
    }

    pub fn svm_config(&self) -> SvmConfig {
        SvmConfig {
            c_plus: self.c_plus,
            c_minus: self.c_minus_init,
            tolerance: self.kkt_tolerance,
            max_iters: self.max_iters,
            ..SvmConfig::default()
        }
    }
}

/// A complete, validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub workspace: Workspace,
    pub obstacles: Vec<Obstacle>,
    pub starts: Vec<Point>,
    pub goal: Point,
    pub goal_radius: f64,
    pub sensor: SensorConfig,
    pub learner: LearnerConfig,
    pub control: ControlConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.workspace.validate()?;
        for (i, o) in self.obstacles.iter().enumerate() {
            o.validate()
                .map_err(|e| Error::Validation(format!("obstacle {i}: {e}")))?;
        }
        if !self.workspace.contains_strictly(&self.goal) {
            return Err(Error::Validation(format!(
                "goal ({}, {}) must lie strictly inside the workspace",
                self.goal.x, self.goal.y
            )));
        }
        if signed_distance(&self.obstacles, &self.goal) <= 0.0 {
            return Err(Error::Validation(format!(
                "goal ({}, {}) lies inside an obstacle",
                self.goal.x, self.goal.y
            )));
        }
        if !(self.goal_radius.is_finite() && self.goal_radius > 0.0) {
            return Err(Error::Validation(format!(
                "goal_radius must be > 0, got {}",
                self.goal_radius
            )));
        }
        for (i, s) in self.starts.iter().enumerate() {
            if !self.workspace.contains(s) {
                return Err(Error::Validation(format!(
                    "start {i} ({}, {}) lies outside the workspace",
                    s.x, s.y
                )));
            }
        }
        self.sensor.validate()?;
        if let Some(min_feature) = self
            .obstacles
            .iter()
            .map(Obstacle::min_feature_size)
            .reduce(f64::min)
        {
            let arc = self.sensor.max_range * self.sensor.theta_res();
            if arc >= min_feature {
                log::warn!(
                    "sensor arc spacing {arc:.4} m at max range is not below the smallest obstacle feature {min_feature:.4} m"
                );
            }
        }
        self.learner.validate()?;
        self.control.validate()?;
        Ok(())
    }

    /// Serializes back to the scenario file format.
    pub fn to_toml_string(&self) -> String {
        let file = ScenarioFile {
            workspace: self.workspace,
            goal: [self.goal.x, self.goal.y],
            goal_radius: self.goal_radius,
            start: self
                .starts
                .iter()
                .map(|p| StartEntry { point: [p.x, p.y] })
                .collect(),
            obstacle: self.obstacles.clone(),
            sensor: self.sensor.clone(),
            learner: self.learner.clone(),
            control: self.control.clone(),
        };
        toml::to_string(&file).expect("scenario serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StartEntry {
    point: [f64; 2],
}

fn default_goal_radius() -> f64 {
    0.1
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    workspace: Workspace,
    goal: [f64; 2],
    #[serde(default = "default_goal_radius")]
    goal_radius: f64,
    #[serde(default)]
    start: Vec<StartEntry>,
    #[serde(default)]
    obstacle: Vec<Obstacle>,
    #[serde(default)]
    sensor: SensorConfig,
    #[serde(default)]
    learner: LearnerConfig,
    #[serde(default)]
    control: ControlConfig,
}

impl From<ScenarioFile> for Scenario {
    fn from(f: ScenarioFile) -> Self {
        Scenario {
            workspace: f.workspace,
            obstacles: f.obstacle,
            starts: f
                .start
                .into_iter()
                .map(|s| Point::new(s.point[0], s.point[1]))
                .collect(),
            goal: Point::new(f.goal[0], f.goal[1]),
            goal_radius: f.goal_radius,
            sensor: f.sensor,
            learner: f.learner,
            control: f.control,
        }
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    load_scenario_with_overrides(path, &[])
}

/// Reads a scenario file and applies dotted `section.key=value` overrides
/// before validation.
pub fn load_scenario_with_overrides(
    path: impl AsRef<Path>,
    overrides: &[String],
) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario_with_overrides(&text, &path.display().to_string(), overrides)
}

pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario> {
    parse_scenario_with_overrides(text, origin, &[])
}

pub fn parse_scenario_with_overrides(
    text: &str,
    origin: &str,
    overrides: &[String],
) -> Result<Scenario> {
    let parse_err = |message: String| Error::Parse {
        origin: origin.to_string(),
        message,
    };
    // Typed parse of the untouched text first, so diagnostics carry line numbers.
    let file: ScenarioFile = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    let file = if overrides.is_empty() {
        file
    } else {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| parse_err(format!("after overrides: {e}")))?
    };
    let scenario = Scenario::from(file);
    scenario.validate()?;
    Ok(scenario)
}

/// Applies one `a.b.c=value` override. The value is read as a TOML
/// literal when possible and as a bare string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidArgument(format!("override '{assignment}' is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let path: Vec<&str> = key.split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidArgument(format!("bad override key '{key}'")));
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cursor = table;
    for p in parents {
        cursor = cursor
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::InvalidArgument(format!("override key '{key}': '{p}' is not a table")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
goal = [2.5, 1.0]

[[start]]
point = [0.3, 1.0]

[[obstacle]]
kind = "circle"
center = [1.5, 1.0]
radius = 0.3
"#;

    #[test]
    fn minimal_file_round_trips() {
        let s = parse_scenario(MINIMAL, "minimal").unwrap();
        assert_eq!(s.obstacles.len(), 1);
        assert_eq!(s.workspace, Workspace::default());
        assert_eq!(s.goal_radius, 0.1);
        let again = parse_scenario(&s.to_toml_string(), "again").unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn goal_inside_obstacle_is_rejected() {
        let text = MINIMAL.replace("goal = [2.5, 1.0]", "goal = [1.5, 1.1]");
        let err = parse_scenario(&text, "bad").unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("inside an obstacle")), "{err}");
    }

    #[test]
    fn goal_outside_workspace_is_rejected() {
        let text = MINIMAL.replace("goal = [2.5, 1.0]", "goal = [3.2, 1.0]");
        assert!(matches!(parse_scenario(&text, "bad"), Err(Error::Validation(_))));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = MINIMAL.replace("radius = 0.3", "radius = \"wide\"");
        let err = parse_scenario(&text, "typo").unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
        assert!(err.contains("radius") || err.contains("invalid type"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = format!("{MINIMAL}\n[control]\ngamam = 2.0\n");
        assert!(matches!(parse_scenario(&text, "x"), Err(Error::Parse { .. })));
    }

    #[test]
    fn overrides_reach_nested_tables() {
        let s = parse_scenario_with_overrides(
            MINIMAL,
            "ov",
            &["control.gamma=2.0".to_string(), "learner.sigma2=1.5".to_string()],
        )
        .unwrap();
        assert_eq!(s.control.gamma, 2.0);
        assert_eq!(s.learner.sigma2, 1.5);
    }

    #[test]
    fn malformed_override_is_rejected() {
        let err = parse_scenario_with_overrides(MINIMAL, "ov", &["control.gamma".to_string()]);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }
}
