use std::f64::consts::TAU;

use nalgebra::Rotation2;
use serde::{Deserialize, Serialize};

use crate::{Error, Point, Result};

const ELLIPSE_INIT_SAMPLES: usize = 64;
const ELLIPSE_NEWTON_TOL: f64 = 1e-10;
const ELLIPSE_MAX_ITERS: usize = 100;

/// An unsafe region of the workspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Obstacle {
    Circle {
        #[serde(with = "point_serde")]
        center: Point,
        radius: f64,
    },
    Ellipse {
        #[serde(with = "point_serde")]
        center: Point,
        /// Semi-axis lengths along the local x and y axes.
        semi_axes: [f64; 2],
        /// Counterclockwise rotation of the local frame, radians.
        #[serde(default)]
        rotation: f64,
    },
    /// Simple polygon with counterclockwise vertices.
    Polygon {
        #[serde(with = "points_serde")]
        vertices: Vec<Point>,
    },
}

impl Obstacle {
    pub fn circle(center: Point, radius: f64) -> Self {
        Obstacle::Circle { center, radius }
    }

    pub fn ellipse(center: Point, semi_axes: [f64; 2], rotation: f64) -> Self {
        Obstacle::Ellipse {
            center,
            semi_axes,
            rotation,
        }
    }

    pub fn polygon(vertices: Vec<Point>) -> Self {
        Obstacle::Polygon { vertices }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Obstacle::Circle { center, radius } => {
                if !(center.iter().all(|v| v.is_finite()) && radius.is_finite() && *radius > 0.0)
                {
                    return Err(Error::Validation(format!(
                        "circle radius must be positive and finite, got {radius}"
                    )));
                }
            }
            Obstacle::Ellipse {
                center,
                semi_axes,
                rotation,
            } => {
                let ok = center.iter().all(|v| v.is_finite())
                    && rotation.is_finite()
                    && semi_axes.iter().all(|a| a.is_finite() && *a > 0.0);
                if !ok {
                    return Err(Error::Validation(format!(
                        "ellipse semi_axes must both be positive, got {semi_axes:?}"
                    )));
                }
            }
            Obstacle::Polygon { vertices } => validate_polygon(vertices)?,
        }
        Ok(())
    }

    /// Point-in-shape predicate (strict interior), independent of the
    /// distance computation.
    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Obstacle::Circle { center, radius } => (p - center).norm_squared() < radius * radius,
            Obstacle::Ellipse {
                center,
                semi_axes,
                rotation,
            } => {
                let q = to_local(p, center, *rotation);
                (q.x / semi_axes[0]).powi(2) + (q.y / semi_axes[1]).powi(2) < 1.0
            }
            Obstacle::Polygon { vertices } => point_in_polygon(vertices, p),
        }
    }

    /// Signed distance to the boundary, negative inside.
    pub fn signed_distance(&self, p: &Point) -> f64 {
        match self {
            Obstacle::Circle { center, radius } => (p - center).norm() - radius,
            Obstacle::Ellipse {
                center,
                semi_axes,
                rotation,
            } => {
                let q = to_local(p, center, *rotation);
                let d = ellipse_boundary_distance(&q, semi_axes[0], semi_axes[1]);
                let level = (q.x / semi_axes[0]).powi(2) + (q.y / semi_axes[1]).powi(2);
                if level < 1.0 {
                    -d
                } else {
                    d
                }
            }
            Obstacle::Polygon { vertices } => {
                let d = polygon_boundary_distance(vertices, p);
                if point_in_polygon(vertices, p) {
                    -d
                } else {
                    d
                }
            }
        }
    }

    /// Smallest length scale of the shape, used for sensor-resolution warnings.
    pub fn min_feature_size(&self) -> f64 {
        match self {
            Obstacle::Circle { radius, .. } => 2.0 * radius,
            Obstacle::Ellipse { semi_axes, .. } => 2.0 * semi_axes[0].min(semi_axes[1]),
            Obstacle::Polygon { vertices } => edges(vertices)
                .map(|(a, b)| (b - a).norm())
                .fold(f64::INFINITY, f64::min),
        }
    }
}

pub(crate) fn to_local(p: &Point, center: &Point, rotation: f64) -> Point {
    Rotation2::new(-rotation) * (p - center)
}

pub(crate) fn edges(vertices: &[Point]) -> impl Iterator<Item = (&Point, &Point)> {
    vertices
        .iter()
        .zip(vertices.iter().cycle().skip(1))
        .take(vertices.len())
}

/// Unsigned distance from `q` (ellipse-local coordinates) to the boundary
/// of the axis-aligned ellipse with semi-axes `a`, `b`.
///
/// Minimizes the squared distance over the boundary angle by damped Newton
/// iteration started from the best of a uniform angular sampling.
fn ellipse_boundary_distance(q: &Point, a: f64, b: f64) -> f64 {
    let dist2 = |t: f64| {
        let dx = a * t.cos() - q.x;
        let dy = b * t.sin() - q.y;
        dx * dx + dy * dy
    };

    let mut theta = 0.0;
    let mut best = f64::INFINITY;
    for k in 0..ELLIPSE_INIT_SAMPLES {
        let t = TAU * k as f64 / ELLIPSE_INIT_SAMPLES as f64;
        let f = dist2(t);
        if f < best {
            best = f;
            theta = t;
        }
    }

    let max_step = TAU / ELLIPSE_INIT_SAMPLES as f64;
    for _ in 0..ELLIPSE_MAX_ITERS {
        let (s, c) = theta.sin_cos();
        let (bx, by) = (a * c, b * s);
        let (dx, dy) = (-a * s, b * c);
        let (rx, ry) = (bx - q.x, by - q.y);
        // half-derivatives of the squared distance
        let g = rx * dx + ry * dy;
        let h = dx * dx + dy * dy - (rx * bx + ry * by);
        let mut step = if h > 0.0 { -g / h } else { -g.signum() * max_step };
        step = step.clamp(-max_step, max_step);

        let mut accepted = false;
        for _ in 0..40 {
            let f = dist2(theta + step);
            if f <= best {
                theta += step;
                best = f;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || step.abs() < ELLIPSE_NEWTON_TOL {
            break;
        }
    }
    best.sqrt()
}

fn segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

fn polygon_boundary_distance(vertices: &[Point], p: &Point) -> f64 {
    edges(vertices)
        .map(|(a, b)| segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

/// Crossing-number test.
fn point_in_polygon(vertices: &[Point], p: &Point) -> bool {
    let mut inside = false;
    for (a, b) in edges(vertices) {
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

fn signed_area(vertices: &[Point]) -> f64 {
    0.5 * edges(vertices)
        .map(|(a, b)| a.x * b.y - b.x * a.y)
        .sum::<f64>()
}

fn cross(o: &Point, a: &Point, b: &Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn on_segment(a: &Point, b: &Point, p: &Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_intersect(p1: &Point, p2: &Point, q1: &Point, q2: &Point) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn validate_polygon(vertices: &[Point]) -> Result<()> {
    let n = vertices.len();
    if n < 3 {
        return Err(Error::Validation(format!(
            "polygon needs at least 3 vertices, got {n}"
        )));
    }
    if !vertices.iter().all(|v| v.x.is_finite() && v.y.is_finite()) {
        return Err(Error::Validation("polygon vertices must be finite".into()));
    }
    if signed_area(vertices) <= 0.0 {
        return Err(Error::Validation(
            "polygon vertices must be listed counterclockwise".into(),
        ));
    }
    for i in 0..n {
        let (a1, a2) = (&vertices[i], &vertices[(i + 1) % n]);
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (b1, b2) = (&vertices[j], &vertices[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return Err(Error::Validation(format!(
                    "polygon is not simple: edges {i} and {j} intersect"
                )));
            }
        }
    }
    Ok(())
}

mod point_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::Point;

    pub fn serialize<S: Serializer>(p: &Point, s: S) -> Result<S::Ok, S::Error> {
        [p.x, p.y].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Point, D::Error> {
        let [x, y] = <[f64; 2]>::deserialize(d)?;
        Ok(Point::new(x, y))
    }
}

mod points_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::Point;

    pub fn serialize<S: Serializer>(ps: &[Point], s: S) -> Result<S::Ok, S::Error> {
        ps.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Point>, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(raw.into_iter().map(|[x, y]| Point::new(x, y)).collect())
    }
}
