//! Labeled safe/unsafe samples generated from laser scans.

use std::collections::HashMap;

use crate::sensor::{scan_to_world, LaserScan};
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Safe,
    Unsafe,
}

impl Label {
    /// `+1` for safe, `-1` for unsafe.
    pub fn sign(self) -> f64 {
        match self {
            Label::Safe => 1.0,
            Label::Unsafe => -1.0,
        }
    }

    pub fn from_sign(v: i32) -> Option<Self> {
        match v {
            1 => Some(Label::Safe),
            -1 => Some(Label::Unsafe),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub position: Point,
    pub label: Label,
    /// Timestamp of the scan that produced the sample.
    pub t: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub samples: Vec<LabeledSample>,
}

impl TrainingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    pub fn has_both_labels(&self) -> bool {
        self.count(Label::Safe) > 0 && self.count(Label::Unsafe) > 0
    }

    pub fn iter_label(&self, label: Label) -> impl Iterator<Item = &LabeledSample> {
        self.samples.iter().filter(move |s| s.label == label)
    }
}

/// Turns one scan into training pairs: an unsafe sample at every finite
/// return and a safe sample pulled back toward the sensor by `offset_d`.
///
/// Beams whose range does not exceed `offset_d` contribute only their
/// unsafe sample.
pub fn generate_training_data(scan: &LaserScan, offset_d: f64) -> Result<TrainingSet> {
    if !(offset_d.is_finite() && offset_d > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "offset_d must be > 0, got {offset_d}"
        )));
    }
    let mut samples = Vec::with_capacity(2 * scan.finite_count());
    for (i, range) in scan.ranges.iter().enumerate() {
        let Some(z) = range.finite() else { continue };
        samples.push(LabeledSample {
            position: scan_to_world(scan, i, z),
            label: Label::Unsafe,
            t: scan.timestamp,
        });
        if z > offset_d {
            samples.push(LabeledSample {
                position: scan_to_world(scan, i, z - offset_d),
                label: Label::Safe,
                t: scan.timestamp,
            });
        }
    }
    Ok(TrainingSet { samples })
}

/// Voxel hash of sample positions, one table per label, used to reject
/// near-duplicates in O(1) per query.
#[derive(Debug, Clone)]
pub struct DedupIndex {
    tol: f64,
    cell: f64,
    cells: HashMap<(Label, i64, i64), Vec<Point>>,
}

impl DedupIndex {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            // a zero tolerance still needs a finite cell size for hashing
            cell: if tol > 0.0 { tol } else { 1e-6 },
            cells: HashMap::new(),
        }
    }

    pub fn from_set(set: &TrainingSet, tol: f64) -> Self {
        let mut index = Self::new(tol);
        for s in &set.samples {
            index.insert(s);
        }
        index
    }

    fn key(&self, p: &Point) -> (i64, i64) {
        (
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
        )
    }

    pub fn is_duplicate(&self, s: &LabeledSample) -> bool {
        let (kx, ky) = self.key(&s.position);
        let tol2 = self.tol * self.tol;
        (kx - 1..=kx + 1).any(|ix| {
            (ky - 1..=ky + 1).any(|iy| {
                self.cells.get(&(s.label, ix, iy)).is_some_and(|pts| {
                    pts.iter()
                        .any(|p| (p - s.position).norm_squared() <= tol2)
                })
            })
        })
    }

    pub fn insert(&mut self, s: &LabeledSample) {
        let (kx, ky) = self.key(&s.position);
        self.cells
            .entry((s.label, kx, ky))
            .or_default()
            .push(s.position);
    }

    /// Appends `new` samples to `set` unless a same-label sample already
    /// lies within the tolerance. Returns how many were added.
    pub fn extend(&mut self, set: &mut TrainingSet, new: &TrainingSet) -> usize {
        let before = set.len();
        for s in &new.samples {
            if !self.is_duplicate(s) {
                self.insert(s);
                set.samples.push(*s);
            }
        }
        set.len() - before
    }
}

/// Union of `accumulated` and `new` with spatial deduplication against
/// same-label samples. Existing samples keep their order; survivors of
/// `new` are appended.
pub fn aggregate(accumulated: &TrainingSet, new: &TrainingSet, dedup_tol: f64) -> Result<TrainingSet> {
    if !(dedup_tol.is_finite() && dedup_tol >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dedup_tol must be >= 0, got {dedup_tol}"
        )));
    }
    let mut out = accumulated.clone();
    let mut index = DedupIndex::from_set(accumulated, dedup_tol);
    index.extend(&mut out, new);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor::Range;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn scan(pose: Point, angles: Vec<f64>, ranges: Vec<Range>) -> LaserScan {
        LaserScan {
            pose,
            timestamp: 0.5,
            ranges,
            beam_angles: angles,
        }
    }

    fn positions(set: &TrainingSet, label: Label) -> Vec<Point> {
        set.iter_label(label).map(|s| s.position).collect()
    }

    #[test]
    fn single_beam_substitution() {
        let s = scan(Point::zeros(), vec![0.0], vec![Range::Finite(2.0)]);
        let t = generate_training_data(&s, 0.5).unwrap();
        assert_eq!(t.len(), 2);
        assert_abs_diff_eq!(positions(&t, Label::Unsafe)[0], Point::new(2.0, 0.0));
        assert_abs_diff_eq!(positions(&t, Label::Safe)[0], Point::new(1.5, 0.0));
        assert!(t.samples.iter().all(|s| s.t == 0.5));
    }

    #[test]
    fn all_no_return_gives_empty_set() {
        let s = scan(Point::zeros(), vec![0.0, 1.0], vec![Range::NoReturn; 2]);
        assert!(generate_training_data(&s, 0.1).unwrap().is_empty());
    }

    #[test]
    fn two_beams_hand_evaluated() {
        let s = scan(
            Point::zeros(),
            vec![0.0, FRAC_PI_2],
            vec![Range::Finite(1.0), Range::Finite(3.0)],
        );
        let t = generate_training_data(&s, 0.25).unwrap();
        let neg = positions(&t, Label::Unsafe);
        let pos = positions(&t, Label::Safe);
        assert_abs_diff_eq!(neg[0], Point::new(1.0, 0.0), epsilon = 1e-12);
        assert_abs_diff_eq!(neg[1], Point::new(0.0, 3.0), epsilon = 1e-12);
        assert_abs_diff_eq!(pos[0], Point::new(0.75, 0.0), epsilon = 1e-12);
        assert_abs_diff_eq!(pos[1], Point::new(0.0, 2.75), epsilon = 1e-12);
    }

    #[test]
    fn short_beam_keeps_only_unsafe_sample() {
        let s = scan(Point::zeros(), vec![0.0], vec![Range::Finite(0.05)]);
        let t = generate_training_data(&s, 0.1).unwrap();
        assert_eq!(t.count(Label::Unsafe), 1);
        assert_eq!(t.count(Label::Safe), 0);
    }

    #[test]
    fn nonpositive_offset_rejected() {
        let s = scan(Point::zeros(), vec![0.0], vec![Range::Finite(1.0)]);
        assert!(generate_training_data(&s, 0.0).is_err());
    }

    fn sample(x: f64, y: f64, label: Label) -> LabeledSample {
        LabeledSample {
            position: Point::new(x, y),
            label,
            t: 0.0,
        }
    }

    #[test]
    fn aggregate_identity_and_idempotence() {
        let s = TrainingSet {
            samples: vec![
                sample(0.0, 0.0, Label::Unsafe),
                sample(1.0, 0.0, Label::Safe),
                sample(0.0, 1.0, Label::Unsafe),
            ],
        };
        assert_eq!(aggregate(&TrainingSet::new(), &s, 0.05).unwrap(), s);
        assert_eq!(aggregate(&s, &s, 0.05).unwrap(), s);
    }

    #[test]
    fn dedup_is_label_aware() {
        let a = TrainingSet {
            samples: vec![sample(0.0, 0.0, Label::Unsafe)],
        };
        let b = TrainingSet {
            samples: vec![sample(0.001, 0.0, Label::Safe), sample(0.001, 0.0, Label::Unsafe)],
        };
        let out = aggregate(&a, &b, 0.01).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out.count(Label::Safe), 1);
    }

    /// Pairwise-distance oracle for the number of survivors of a
    /// sequential dedup.
    fn naive_dedup_count(samples: &[LabeledSample], tol: f64) -> usize {
        let mut kept: Vec<LabeledSample> = Vec::new();
        for s in samples {
            if !kept
                .iter()
                .any(|k| k.label == s.label && (k.position - s.position).norm() <= tol)
            {
                kept.push(*s);
            }
        }
        kept.len()
    }

    #[test]
    fn nearby_scans_of_same_wall_shrink_union() {
        use crate::environment::Obstacle;
        use crate::sensor::{scan_obstacles, SensorConfig};
        use rand::SeedableRng;
        let wall = [Obstacle::polygon(vec![
            Point::new(1.0, -1.0),
            Point::new(1.2, -1.0),
            Point::new(1.2, 1.0),
            Point::new(1.0, 1.0),
        ])];
        let cfg = SensorConfig::full_sweep(360, 2.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let s1 = scan_obstacles(&wall, &Point::new(0.0, 0.0), &cfg, 0.0, &mut rng).unwrap();
        let s2 = scan_obstacles(&wall, &Point::new(0.003, 0.002), &cfg, 0.1, &mut rng).unwrap();
        let t1 = generate_training_data(&s1, 0.1).unwrap();
        let t2 = generate_training_data(&s2, 0.1).unwrap();
        let a = aggregate(&aggregate(&TrainingSet::new(), &t1, 0.01).unwrap(), &t2, 0.01).unwrap();
        let all: Vec<_> = t1.samples.iter().chain(&t2.samples).copied().collect();
        assert_eq!(a.len(), naive_dedup_count(&all, 0.01));
        assert!(a.len() < t1.len() + t2.len());
    }

    fn arb_set(offset: f64) -> impl Strategy<Value = TrainingSet> {
        prop::collection::btree_map((0..20i32, 0..20i32), any::<bool>(), 0..30).prop_map(move |v| {
            let samples: Vec<LabeledSample> = v
                .into_iter()
                .map(|((i, j), safe)| {
                    sample(
                        offset + i as f64 * 0.5,
                        j as f64 * 0.5,
                        if safe { Label::Safe } else { Label::Unsafe },
                    )
                })
                .collect();
            TrainingSet { samples }
        })
    }

    proptest! {
        #[test]
        fn aggregate_associative_on_disjoint_sets(
            a in arb_set(0.0), b in arb_set(100.0), c in arb_set(200.0)
        ) {
            let tol = 0.1;
            let left = aggregate(&aggregate(&a, &b, tol).unwrap(), &c, tol).unwrap();
            let right = aggregate(&a, &aggregate(&b, &c, tol).unwrap(), tol).unwrap();
            let key = |s: &LabeledSample| (s.position.x.to_bits(), s.position.y.to_bits(), s.label);
            let mut l: Vec<_> = left.samples.iter().map(key).collect();
            let mut r: Vec<_> = right.samples.iter().map(key).collect();
            l.sort();
            r.sort();
            prop_assert_eq!(l, r);
        }

        #[test]
        fn aggregate_size_is_monotone(a in arb_set(0.0), b in arb_set(3.0)) {
            let out = aggregate(&a, &b, 0.2).unwrap();
            prop_assert!(out.len() >= a.len());
            prop_assert!(out.len() <= a.len() + b.len());
        }
    }
}
