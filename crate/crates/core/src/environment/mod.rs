//! Workspace, obstacles, scenario ingestion and the ground-truth signed
//! distance barrier.

mod scenario;
mod sdf;
mod shapes;

pub(crate) mod shapes_internal {
    pub(crate) use super::shapes::{edges, to_local};
}

pub use scenario::{
    apply_override, load_scenario, load_scenario_with_overrides, parse_scenario,
    parse_scenario_with_overrides, LearnerConfig, Scenario,
};
pub use sdf::{build_sdf_grid, SignedDistanceGrid};
pub use shapes::Obstacle;

use serde::{Deserialize, Serialize};

use crate::{Error, Point, Result};

/// Distance reported when there is nothing to be distant from.
pub const EMPTY_DISTANCE: f64 = 1e9;

/// Axis-aligned rectangular workspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workspace {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: 3.2,
            y_min: 0.0,
            y_max: 2.0,
        }
    }
}

impl Workspace {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let ws = Self {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        ws.validate()?;
        Ok(ws)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::Validation(format!(
                "workspace requires x_min < x_max and y_min < y_max, got [{}, {}] x [{}, {}]",
                self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Closed containment.
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn contains_strictly(&self, p: &Point) -> bool {
        p.x > self.x_min && p.x < self.x_max && p.y > self.y_min && p.y < self.y_max
    }
}

/// Signed distance to the nearest obstacle boundary: positive in free
/// space, negative inside any obstacle.
pub fn signed_distance(obstacles: &[Obstacle], x: &Point) -> f64 {
    obstacles
        .iter()
        .map(|o| o.signed_distance(x))
        .fold(EMPTY_DISTANCE, f64::min)
}

/// Ground-truth barrier of a scenario at `x`.
pub fn true_signed_distance(scenario: &Scenario, x: &Point) -> f64 {
    signed_distance(&scenario.obstacles, x)
}

/// Scenarios bundled with the library, by name.
pub const SHIPPED_SCENARIOS: [(&str, &str); 3] = [
    ("five_ellipse", include_str!("../../scenarios/five_ellipse.toml")),
    ("single_circle", include_str!("../../scenarios/single_circle.toml")),
    ("mixed_shapes", include_str!("../../scenarios/mixed_shapes.toml")),
];

/// Parses a bundled scenario. `None` for an unknown name.
pub fn shipped_scenario(name: &str, overrides: &[String]) -> Option<Result<Scenario>> {
    SHIPPED_SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| parse_scenario_with_overrides(text, n, overrides))
}

/// Bundled scenario by name, otherwise a scenario file path.
pub fn resolve_scenario(name_or_path: &str, overrides: &[String]) -> Result<Scenario> {
    match shipped_scenario(name_or_path, overrides) {
        Some(s) => s,
        None => load_scenario_with_overrides(name_or_path, overrides),
    }
}
