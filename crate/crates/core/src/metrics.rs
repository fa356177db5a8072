//! Trajectory similarity: per-coordinate Pearson correlation after
//! arc-length resampling, and the discrete Fréchet distance.

use crate::{Error, Point, Result};

pub const DEFAULT_RESAMPLE: usize = 256;

/// Sequences with a standard deviation below this are treated as constant.
const CONSTANT_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Point>,
}

impl Polyline {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a polyline needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::InvalidArgument("polyline has non-finite coordinates".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

/// `m` points at equal arc-length fractions along `traj`.
pub fn resample_by_arclength(traj: &Polyline, m: usize) -> Result<Polyline> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("resample count must be >= 2, got {m}")));
    }
    let pts = traj.points();
    let mut cumulative = Vec::with_capacity(pts.len());
    cumulative.push(0.0);
    for w in pts.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + (w[1] - w[0]).norm());
    }
    let total = *cumulative.last().unwrap();
    if total == 0.0 {
        return Ok(Polyline {
            points: vec![pts[0]; m],
        });
    }
    let mut out = Vec::with_capacity(m);
    let mut seg = 0;
    for k in 0..m {
        if k == 0 {
            out.push(pts[0]);
            continue;
        }
        if k == m - 1 {
            out.push(*pts.last().unwrap());
            continue;
        }
        let s = total * k as f64 / (m - 1) as f64;
        while seg + 2 < cumulative.len() && cumulative[seg + 1] < s {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let f = if len > 0.0 { (s - cumulative[seg]) / len } else { 0.0 };
        out.push(pts[seg] + (pts[seg + 1] - pts[seg]) * f.clamp(0.0, 1.0));
    }
    Ok(Polyline { points: out })
}

fn std_dev(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Pearson correlation; a constant sequence correlates 1 with another
/// constant sequence and 0 with anything else.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ma, sa) = std_dev(a);
    let (mb, sb) = std_dev(b);
    match (sa <= CONSTANT_STD, sb <= CONSTANT_STD) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => {
            let n = a.len() as f64;
            let cov = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - ma) * (y - mb))
                .sum::<f64>()
                / n;
            (cov / (sa * sb)).clamp(-1.0, 1.0)
        }
    }
}

/// Mean of the x and y Pearson correlations of two equally long sample
/// sequences.
pub fn correlation_of_samples(a: &[Point], b: &[Point]) -> f64 {
    let ax: Vec<f64> = a.iter().map(|p| p.x).collect();
    let ay: Vec<f64> = a.iter().map(|p| p.y).collect();
    let bx: Vec<f64> = b.iter().map(|p| p.x).collect();
    let by: Vec<f64> = b.iter().map(|p| p.y).collect();
    0.5 * (pearson(&ax, &bx) + pearson(&ay, &by))
}

/// Trajectory correlation coefficient `R` in `[-1, 1]`.
pub fn correlation(a: &Polyline, b: &Polyline, m: usize) -> Result<f64> {
    let ra = resample_by_arclength(a, m)?;
    let rb = resample_by_arclength(b, m)?;
    Ok(correlation_of_samples(ra.points(), rb.points()))
}

/// Discrete Fréchet distance, `O(|a| |b|)` dynamic program.
pub fn frechet_distance(a: &[Point], b: &[Point]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let m = b.len();
    let mut prev = vec![0.0_f64; m];
    let mut cur = vec![0.0_f64; m];
    for (i, pa) in a.iter().enumerate() {
        for (j, pb) in b.iter().enumerate() {
            let d = (pa - pb).norm();
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

pub fn frechet(a: &Polyline, b: &Polyline) -> f64 {
    frechet_distance(a.points(), b.points())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line(pts: &[(f64, f64)]) -> Polyline {
        Polyline::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
    }

    #[test]
    fn resample_segment() {
        let r = resample_by_arclength(&line(&[(0.0, 0.0), (1.0, 0.0)]), 3).unwrap();
        assert_eq!(
            r.points(),
            &[Point::new(0.0, 0.0), Point::new(0.5, 0.0), Point::new(1.0, 0.0)]
        );
    }

    #[test]
    fn resample_uniform_is_identity() {
        let pts: Vec<(f64, f64)> = (0..9).map(|i| (i as f64 * 0.125, 0.0)).collect();
        let l = line(&pts);
        let r = resample_by_arclength(&l, 9).unwrap();
        for (p, q) in r.points().iter().zip(l.points()) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-12);
        }
    }

    #[test]
    fn resample_preserves_quarter_circle_length() {
        let pts: Vec<Point> = (0..=1000)
            .map(|k| {
                let t = std::f64::consts::FRAC_PI_2 * k as f64 / 1000.0;
                Point::new(t.cos(), t.sin())
            })
            .collect();
        let r = resample_by_arclength(&Polyline::new(pts).unwrap(), 256).unwrap();
        let exact = std::f64::consts::FRAC_PI_2;
        assert!((r.arc_length() - exact).abs() / exact < 1e-3);
        assert_eq!(r.points()[0], Point::new(1.0, 0.0));
    }

    #[test]
    fn zero_length_resamples_to_copies() {
        let r = resample_by_arclength(&line(&[(1.0, 2.0), (1.0, 2.0)]), 4).unwrap();
        assert_eq!(r.points(), &[Point::new(1.0, 2.0); 4]);
    }

    #[test]
    fn polyline_needs_two_points() {
        assert!(Polyline::new(vec![Point::zeros()]).is_err());
        assert!(resample_by_arclength(&line(&[(0.0, 0.0), (1.0, 0.0)]), 1).is_err());
    }

    #[test]
    fn correlation_self_and_shift() {
        let t = line(&[(0.0, 0.0), (1.0, 0.5), (1.5, 1.5), (2.0, 1.7)]);
        assert_abs_diff_eq!(correlation(&t, &t, 256).unwrap(), 1.0, epsilon = 1e-12);
        let shifted = Polyline::new(t.points().iter().map(|p| p + Point::new(10.0, 10.0)).collect()).unwrap();
        assert_abs_diff_eq!(correlation(&t, &shifted, 256).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_coordinate_convention() {
        let a = line(&[(0.0, 1.0), (2.0, 1.0)]);
        let b = line(&[(0.0, 1.0), (2.0, 1.0)]);
        assert_eq!(correlation(&a, &b, 16).unwrap(), 1.0);
        let c = line(&[(0.0, 1.0), (2.0, 2.0)]);
        assert_abs_diff_eq!(correlation(&a, &c, 16).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn frechet_examples() {
        let t = line(&[(0.0, 0.0), (1.0, 0.2), (2.0, 0.0)]);
        assert_eq!(frechet(&t, &t), 0.0);
        let a: Vec<Point> = (0..11).map(|i| Point::new(i as f64 * 0.1, 0.0)).collect();
        let b: Vec<Point> = a.iter().map(|p| p + Point::new(0.0, 0.3)).collect();
        assert_abs_diff_eq!(frechet_distance(&a, &b), 0.3, epsilon = 1e-15);
    }
}
