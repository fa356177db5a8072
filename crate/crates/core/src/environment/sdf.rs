use rayon::prelude::*;

use super::{signed_distance, Scenario};
use crate::{Barrier, Error, Point, Result};

/// Ground-truth signed distance sampled on a regular grid, with bilinear
/// interpolation of values and of central-difference node gradients.
#[derive(Debug, Clone)]
pub struct SignedDistanceGrid {
    pub origin: Point,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `values[iy * nx + ix]`.
    pub values: Vec<f64>,
    gradients: Vec<Point>,
}

/// Samples the true signed distance of `scenario` on a grid covering the
/// workspace.
pub fn build_sdf_grid(scenario: &Scenario, spacing: f64) -> Result<SignedDistanceGrid> {
    let ws = &scenario.workspace;
    let max_spacing = ws.width().min(ws.height()) / 10.0;
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "grid spacing must be > 0, got {spacing}"
        )));
    }
    if spacing > max_spacing {
        return Err(Error::InvalidArgument(format!(
            "grid spacing {spacing} is too coarse for this workspace (max {max_spacing})"
        )));
    }
    let nx = (ws.width() / spacing - 1e-9).ceil() as usize + 1;
    let ny = (ws.height() / spacing - 1e-9).ceil() as usize + 1;
    let origin = Point::new(ws.x_min, ws.y_min);

    let values: Vec<f64> = (0..nx * ny)
        .into_par_iter()
        .map(|k| {
            let p = origin + Point::new((k % nx) as f64, (k / nx) as f64) * spacing;
            signed_distance(&scenario.obstacles, &p)
        })
        .collect();

    let at = |ix: usize, iy: usize| values[iy * nx + ix];
    let gradients = (0..nx * ny)
        .map(|k| {
            let (ix, iy) = (k % nx, k / nx);
            let (x0, x1) = (ix.saturating_sub(1), (ix + 1).min(nx - 1));
            let (y0, y1) = (iy.saturating_sub(1), (iy + 1).min(ny - 1));
            Point::new(
                (at(x1, iy) - at(x0, iy)) / ((x1 - x0) as f64 * spacing),
                (at(ix, y1) - at(ix, y0)) / ((y1 - y0) as f64 * spacing),
            )
        })
        .collect();

    Ok(SignedDistanceGrid {
        origin,
        spacing,
        nx,
        ny,
        values,
        gradients,
    })
}

impl SignedDistanceGrid {
    pub fn node(&self, ix: usize, iy: usize) -> Point {
        self.origin + Point::new(ix as f64, iy as f64) * self.spacing
    }

    pub fn value_at_node(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    /// Cell index and fractional offsets; queries outside are clamped to the grid.
    fn locate(&self, x: &Point) -> (usize, usize, f64, f64) {
        let gx = ((x.x - self.origin.x) / self.spacing).clamp(0.0, (self.nx - 1) as f64);
        let gy = ((x.y - self.origin.y) / self.spacing).clamp(0.0, (self.ny - 1) as f64);
        let ix = (gx.floor() as usize).min(self.nx - 2);
        let iy = (gy.floor() as usize).min(self.ny - 2);
        (ix, iy, gx - ix as f64, gy - iy as f64)
    }

    fn bilinear<T>(&self, data: &[T], x: &Point) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let (ix, iy, fx, fy) = self.locate(x);
        let i00 = iy * self.nx + ix;
        let i01 = i00 + self.nx;
        data[i00] * ((1.0 - fx) * (1.0 - fy))
            + data[i00 + 1] * (fx * (1.0 - fy))
            + data[i01] * ((1.0 - fx) * fy)
            + data[i01 + 1] * (fx * fy)
    }

    pub fn interpolate(&self, x: &Point) -> f64 {
        self.bilinear(&self.values, x)
    }

    pub fn interpolate_gradient(&self, x: &Point) -> Point {
        self.bilinear(&self.gradients, x)
    }
}

impl Barrier for SignedDistanceGrid {
    fn value(&self, x: &Point) -> f64 {
        self.interpolate(x)
    }

    fn gradient(&self, x: &Point) -> Point {
        self.interpolate_gradient(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{parse_scenario, EMPTY_DISTANCE};
    use approx::assert_abs_diff_eq;

    fn unit_circle() -> Scenario {
        parse_scenario(
            r#"
            workspace = { x_min = -3.0, x_max = 3.0, y_min = -3.0, y_max = 3.0 }
            goal = [2.5, 2.5]
            [[obstacle]]
            kind = "circle"
            center = [0.0, 0.0]
            radius = 1.0
            "#,
            "test",
        )
        .unwrap()
    }

    #[test]
    fn circle_value_off_grid() {
        let grid = build_sdf_grid(&unit_circle(), 0.01).unwrap();
        assert_abs_diff_eq!(grid.interpolate(&Point::new(2.0, 0.0)), 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(grid.interpolate(&Point::new(0.0, 0.0)), -1.0, epsilon = 1e-3);
    }

    #[test]
    fn circle_gradient_is_radial() {
        let grid = build_sdf_grid(&unit_circle(), 0.01).unwrap();
        let p = Point::new(1.3, -0.9);
        let g = grid.interpolate_gradient(&p);
        assert!((g - p.normalize()).norm() < 1e-3, "{g:?}");
    }

    #[test]
    fn empty_scenario_is_flat() {
        let sc = parse_scenario("goal = [1.0, 1.0]", "test").unwrap();
        let grid = build_sdf_grid(&sc, 0.05).unwrap();
        assert!(grid.values.iter().all(|v| *v == EMPTY_DISTANCE));
        assert_eq!(grid.interpolate_gradient(&Point::new(1.0, 1.0)), Point::zeros());
    }

    #[test]
    fn nodes_cover_the_workspace() {
        let grid = build_sdf_grid(&unit_circle(), 0.25).unwrap();
        assert_eq!((grid.nx, grid.ny), (25, 25));
        assert_eq!(grid.node(24, 24), Point::new(3.0, 3.0));
    }

    #[test]
    fn spacing_is_validated() {
        let sc = unit_circle();
        assert!(build_sdf_grid(&sc, 0.0).is_err());
        assert!(build_sdf_grid(&sc, f64::NAN).is_err());
        assert!(build_sdf_grid(&sc, 0.7).is_err());
    }
}
