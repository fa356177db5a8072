//! Simulated 2D LiDAR with exact ray/shape intersection.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::environment::shapes_internal::{edges, to_local};
use crate::environment::{Obstacle, Scenario};
use crate::{Error, Point, Result};

const HIT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub num_beams: usize,
    pub max_range: f64,
    /// Standard deviation of additive range noise, meters.
    pub noise_sigma: f64,
    /// Field of view; both absent means a full sweep.
    pub fov_start: Option<f64>,
    pub fov_end: Option<f64>,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            num_beams: 360,
            max_range: 1.0,
            noise_sigma: 0.0,
            fov_start: None,
            fov_end: None,
        }
    }
}

impl SensorConfig {
    pub fn full_sweep(num_beams: usize, max_range: f64) -> Self {
        Self {
            num_beams,
            max_range,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_beams < 3 {
            return Err(Error::Validation(format!(
                "sensor.num_beams must be >= 3, got {}",
                self.num_beams
            )));
        }
        if !(self.max_range.is_finite() && self.max_range > 0.0) {
            return Err(Error::Validation(format!(
                "sensor.max_range must be > 0, got {}",
                self.max_range
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Validation(format!(
                "sensor.noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        match (self.fov_start, self.fov_end) {
            (None, None) => {}
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() && b > a && b - a <= TAU => {}
            _ => {
                return Err(Error::Validation(
                    "sensor.fov_start and sensor.fov_end must be given together with 0 < fov_end - fov_start <= 2*pi".into(),
                ))
            }
        }
        Ok(())
    }

    /// Angle between consecutive beams.
    pub fn theta_res(&self) -> f64 {
        match (self.fov_start, self.fov_end) {
            (Some(a), Some(b)) => (b - a) / (self.num_beams - 1) as f64,
            _ => TAU / self.num_beams as f64,
        }
    }

    /// World-frame beam directions.
    pub fn beam_angles(&self) -> Vec<f64> {
        let start = self.fov_start.unwrap_or(0.0);
        let res = self.theta_res();
        (0..self.num_beams).map(|i| start + res * i as f64).collect()
    }
}

/// One beam reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Range {
    Finite(f64),
    NoReturn,
}

impl Range {
    pub fn finite(self) -> Option<f64> {
        match self {
            Range::Finite(r) => Some(r),
            Range::NoReturn => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaserScan {
    pub pose: Point,
    pub timestamp: f64,
    pub ranges: Vec<Range>,
    pub beam_angles: Vec<f64>,
}

impl LaserScan {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn finite_count(&self) -> usize {
        self.ranges.iter().filter(|r| r.finite().is_some()).count()
    }
}

/// Distance along the unit ray `origin + t * dir` to the first boundary
/// crossing of `obstacle`, if any.
pub fn ray_obstacle_distance(obstacle: &Obstacle, origin: &Point, dir: &Point) -> Option<f64> {
    match obstacle {
        Obstacle::Circle { center, radius } => {
            let m = origin - center;
            smallest_quadratic_root(1.0, m.dot(dir), m.norm_squared() - radius * radius)
        }
        Obstacle::Ellipse {
            center,
            semi_axes,
            rotation,
        } => {
            let o = to_local(origin, center, *rotation);
            let d = to_local(&(center + dir), center, *rotation);
            let (a, b) = (semi_axes[0], semi_axes[1]);
            let o = Point::new(o.x / a, o.y / b);
            let d = Point::new(d.x / a, d.y / b);
            smallest_quadratic_root(d.norm_squared(), o.dot(&d), o.norm_squared() - 1.0)
        }
        Obstacle::Polygon { vertices } => edges(vertices)
            .filter_map(|(a, b)| ray_segment_distance(origin, dir, a, b))
            .reduce(f64::min),
    }
}

/// Smallest positive root of `a t^2 + 2 half_b t + c = 0`.
fn smallest_quadratic_root(a: f64, half_b: f64, c: f64) -> Option<f64> {
    let disc = half_b * half_b - a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = (-half_b - sq) / a;
    let t1 = (-half_b + sq) / a;
    if t0 > HIT_EPS {
        Some(t0)
    } else if t1 > HIT_EPS {
        Some(t1)
    } else {
        None
    }
}

fn ray_segment_distance(origin: &Point, dir: &Point, a: &Point, b: &Point) -> Option<f64> {
    let e = b - a;
    let denom = dir.x * e.y - dir.y * e.x;
    if denom.abs() < 1e-15 {
        return None;
    }
    let w = a - origin;
    let t = (w.x * e.y - w.y * e.x) / denom;
    let s = (w.x * dir.y - w.y * dir.x) / denom;
    (t > HIT_EPS && (0.0..=1.0).contains(&s)).then_some(t)
}

/// Casts every beam of `config` from `pose`.
pub fn scan<R: Rng + ?Sized>(
    scenario: &Scenario,
    pose: &Point,
    config: &SensorConfig,
    timestamp: f64,
    rng: &mut R,
) -> Result<LaserScan> {
    scan_obstacles(&scenario.obstacles, pose, config, timestamp, rng)
}

pub fn scan_obstacles<R: Rng + ?Sized>(
    obstacles: &[Obstacle],
    pose: &Point,
    config: &SensorConfig,
    timestamp: f64,
    rng: &mut R,
) -> Result<LaserScan> {
    if crate::environment::signed_distance(obstacles, pose) < 0.0 {
        return Err(Error::PoseInsideObstacle { x: pose.x, y: pose.y });
    }
    let noise = (config.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, config.noise_sigma).expect("sigma validated"));
    let beam_angles = config.beam_angles();
    let ranges = beam_angles
        .iter()
        .map(|&theta| {
            let dir = Point::new(theta.cos(), theta.sin());
            let hit = obstacles
                .iter()
                .filter_map(|o| ray_obstacle_distance(o, pose, &dir))
                .reduce(f64::min);
            match hit {
                Some(t) if t <= config.max_range => {
                    let noisy = match &noise {
                        Some(n) => (t + n.sample(rng)).clamp(f64::MIN_POSITIVE, config.max_range),
                        None => t,
                    };
                    Range::Finite(noisy)
                }
                _ => Range::NoReturn,
            }
        })
        .collect();
    Ok(LaserScan {
        pose: *pose,
        timestamp,
        ranges,
        beam_angles,
    })
}

/// Maps a range along beam `beam_index` of `scan` to world coordinates.
pub fn scan_to_world(scan: &LaserScan, beam_index: usize, range: f64) -> Point {
    let theta = scan.beam_angles[beam_index];
    scan.pose + Point::new(theta.cos(), theta.sin()) * range
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn four_beams(max_range: f64) -> SensorConfig {
        SensorConfig::full_sweep(4, max_range)
    }

    #[test]
    fn circle_hit_and_miss() {
        let obstacles = [Obstacle::circle(Point::new(2.0, 0.0), 1.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = scan_obstacles(&obstacles, &Point::zeros(), &four_beams(5.0), 0.0, &mut rng).unwrap();
        // beam 0 points along +x, beam 2 along -x
        assert_abs_diff_eq!(s.ranges[0].finite().unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(s.ranges[2], Range::NoReturn);
    }

    /// Oracle: independent ray/segment intersection by solving the 2x2
    /// system with Cramer's rule over every edge.
    fn ray_polygon_oracle(o: &Point, d: &Point, poly: &[Point]) -> Option<f64> {
        let mut best: Option<f64> = None;
        for i in 0..poly.len() {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            let m = nalgebra::Matrix2::new(d.x, a.x - b.x, d.y, a.y - b.y);
            if let Some(inv) = m.try_inverse() {
                let ts = inv * (a - o);
                if ts[0] > 0.0 && (0.0..=1.0).contains(&ts[1]) {
                    best = Some(best.map_or(ts[0], |v: f64| v.min(ts[0])));
                }
            }
        }
        best
    }

    #[test]
    fn polygon_square_hit_matches_oracle() {
        let square = vec![
            Point::new(1.0, -1.0),
            Point::new(3.0, -1.0),
            Point::new(3.0, 1.0),
            Point::new(1.0, 1.0),
        ];
        let obstacles = [Obstacle::polygon(square.clone())];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = scan_obstacles(&obstacles, &Point::zeros(), &four_beams(5.0), 0.0, &mut rng).unwrap();
        let oracle = ray_polygon_oracle(&Point::zeros(), &Point::new(1.0, 0.0), &square).unwrap();
        assert_abs_diff_eq!(oracle, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.ranges[0].finite().unwrap(), oracle, epsilon = 1e-12);
    }

    #[test]
    fn ellipse_hit_lies_on_boundary() {
        let e = Obstacle::ellipse(Point::new(1.0, 0.5), [0.4, 0.2], 0.6);
        for k in 0..32 {
            let theta = PI / 4.0 + 0.01 * k as f64;
            let dir = Point::new(theta.cos(), theta.sin());
            if let Some(t) = ray_obstacle_distance(&e, &Point::zeros(), &dir) {
                assert!(e.signed_distance(&(dir * t)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn out_of_range_is_no_return() {
        let obstacles = [Obstacle::circle(Point::new(2.0, 0.0), 1.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = scan_obstacles(&obstacles, &Point::zeros(), &four_beams(0.5), 0.0, &mut rng).unwrap();
        assert!(s.ranges.iter().all(|r| *r == Range::NoReturn));
    }

    #[test]
    fn pose_inside_obstacle_is_an_error() {
        let obstacles = [Obstacle::circle(Point::zeros(), 1.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = scan_obstacles(&obstacles, &Point::zeros(), &four_beams(5.0), 0.0, &mut rng);
        assert!(matches!(r, Err(Error::PoseInsideObstacle { .. })));
    }

    #[test]
    fn scan_to_world_examples() {
        let scan = LaserScan {
            pose: Point::new(0.0, 0.0),
            timestamp: 0.0,
            ranges: vec![Range::NoReturn; 3],
            beam_angles: vec![0.0, FRAC_PI_2, FRAC_PI_4],
        };
        let p = scan_to_world(&scan, 0, 2.0);
        assert_abs_diff_eq!(p, Point::new(2.0, 0.0), epsilon = 1e-12);
        let p = scan_to_world(&scan, 2, 2f64.sqrt());
        assert_abs_diff_eq!(p, Point::new(1.0, 1.0), epsilon = 1e-12);
        let shifted = LaserScan {
            pose: Point::new(1.0, 1.0),
            ..scan
        };
        let p = scan_to_world(&shifted, 1, 0.5);
        assert_abs_diff_eq!(p, Point::new(1.0, 1.5), epsilon = 1e-12);
    }

    #[test]
    fn noisy_ranges_stay_in_bounds_and_are_seeded() {
        let obstacles = [Obstacle::circle(Point::new(0.0, 0.0), 0.5)];
        let cfg = SensorConfig {
            noise_sigma: 0.3,
            ..SensorConfig::full_sweep(90, 1.0)
        };
        let pose = Point::new(1.2, 0.0);
        let a = scan_obstacles(&obstacles, &pose, &cfg, 0.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = scan_obstacles(&obstacles, &pose, &cfg, 0.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        for r in a.ranges.iter().filter_map(|r| r.finite()) {
            assert!(r > 0.0 && r <= cfg.max_range);
        }
    }

    #[test]
    fn partial_fov_spans_endpoints() {
        let cfg = SensorConfig {
            fov_start: Some(-FRAC_PI_2),
            fov_end: Some(FRAC_PI_2),
            ..SensorConfig::full_sweep(5, 1.0)
        };
        cfg.validate().unwrap();
        let angles = cfg.beam_angles();
        assert_abs_diff_eq!(angles[0], -FRAC_PI_2);
        assert_abs_diff_eq!(angles[4], FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(cfg.theta_res(), FRAC_PI_4);
    }

    #[test]
    fn config_validation() {
        assert!(SensorConfig::full_sweep(2, 1.0).validate().is_err());
        assert!(SensorConfig::full_sweep(10, 0.0).validate().is_err());
        let one_sided = SensorConfig {
            fov_start: Some(0.0),
            ..SensorConfig::default()
        };
        assert!(one_sided.validate().is_err());
    }
}
