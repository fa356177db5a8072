//! Biased-penalty kernel SVM. The decision margin of the trained model is
//! the learned barrier: positive on the safe side, negative on every unsafe
//! training sample.

mod smo;

pub use smo::{DualSolver, SolveStats};

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::dataset::{Label, LabeledSample, TrainingSet};
use crate::kernelnet::{pairwise_sq_distances, row_sq_norms, FeatureMap, KernelConfig};
use crate::{Barrier, Error, Point, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    /// Slack penalty on safe samples.
    pub c_plus: f64,
    /// Initial slack penalty on unsafe samples; escalated as needed.
    pub c_minus: f64,
    /// Stop when the maximal KKT violation falls below this.
    pub tolerance: f64,
    /// Pair updates allowed per solve.
    pub max_iters: usize,
    pub c_minus_growth: f64,
    pub c_minus_cap: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c_plus: 10.0,
            c_minus: 1e4,
            tolerance: 1e-3,
            max_iters: 2_000_000,
            c_minus_growth: 10.0,
            c_minus_cap: 1e8,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_plus.is_finite() && self.c_plus > 1.0) {
            return Err(Error::Validation(format!("c_plus must be > 1, got {}", self.c_plus)));
        }
        if !(self.c_minus.is_finite() && self.c_minus >= self.c_plus) {
            return Err(Error::Validation(format!(
                "c_minus ({}) must be >= c_plus ({})",
                self.c_minus, self.c_plus
            )));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Validation(format!(
                "kkt tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Validation("max_iters must be > 0".into()));
        }
        if !(self.c_minus_growth > 1.0 && self.c_minus_cap >= self.c_minus) {
            return Err(Error::Validation("invalid c_minus escalation schedule".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingDiagnostics {
    pub iterations: usize,
    /// Unsafe training samples with nonnegative decision value.
    pub negative_margin_violations: usize,
    pub c_minus: f64,
    pub escalations: usize,
    pub converged: bool,
    pub kkt_gap: f64,
    pub dual_objective: f64,
    pub training_samples: usize,
}

/// Trained two-layer classifier; its decision value is the barrier.
#[derive(Debug, Clone)]
pub struct BarrierModel {
    pub support_points: Vec<Point>,
    pub support_labels: Vec<Label>,
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelConfig,
    pub feature_map: Arc<FeatureMap>,
    pub diagnostics: TrainingDiagnostics,
    // alpha_i * y_i, and support features flattened row-major
    coef: Vec<f64>,
    support_features: Vec<f64>,
    support_sq_norms: Vec<f64>,
}

impl BarrierModel {
    /// Assembles a model from dual coefficients. Zero coefficients are dropped.
    pub fn from_parts(
        points: Vec<Point>,
        labels: Vec<Label>,
        alphas: Vec<f64>,
        bias: f64,
        kernel: KernelConfig,
        feature_map: Arc<FeatureMap>,
    ) -> Self {
        assert_eq!(points.len(), labels.len());
        assert_eq!(points.len(), alphas.len());
        let mut model = BarrierModel {
            support_points: Vec::new(),
            support_labels: Vec::new(),
            alphas: Vec::new(),
            bias,
            kernel,
            feature_map,
            diagnostics: TrainingDiagnostics::default(),
            coef: Vec::new(),
            support_features: Vec::new(),
            support_sq_norms: Vec::new(),
        };
        let dim = model.feature_map.dim();
        let mut buf = vec![0.0; dim];
        for ((p, l), a) in points.into_iter().zip(labels).zip(alphas) {
            if a > 0.0 {
                model.feature_map.featurize_into(&p, &mut buf);
                model.support_features.extend_from_slice(&buf);
                model.coef.push(a * l.sign());
                model.support_points.push(p);
                model.support_labels.push(l);
                model.alphas.push(a);
            }
        }
        model.support_sq_norms = row_sq_norms(&model.support_features, dim);
        model
    }

    pub fn num_supports(&self) -> usize {
        self.alphas.len()
    }

    fn inv_sigma2_sq(&self) -> f64 {
        1.0 / (self.kernel.sigma2 * self.kernel.sigma2)
    }

    /// Learned barrier value `h(x) = sum_i alpha_i y_i k(x, x_i) + b`.
    pub fn decision(&self, x: &Point) -> f64 {
        let fx = self.feature_map.featurize(x);
        let dim = fx.len();
        let s = self.inv_sigma2_sq();
        self.coef
            .iter()
            .zip(self.support_features.chunks_exact(dim))
            .map(|(c, fi)| c * (-crate::kernelnet::feature_distance_sq(&fx, fi) * s).exp())
            .sum::<f64>()
            + self.bias
    }

    /// Decision values at many points through one matrix product. Agrees
    /// with [`decision`](Self::decision) up to rounding.
    pub fn decision_batch(&self, xs: &[Point]) -> Vec<f64> {
        let dim = self.feature_map.dim();
        if xs.is_empty() {
            return Vec::new();
        }
        let mut fq = vec![0.0; xs.len() * dim];
        for (x, out) in xs.iter().zip(fq.chunks_exact_mut(dim)) {
            self.feature_map.featurize_into(x, out);
        }
        let q_sq = row_sq_norms(&fq, dim);
        let d = pairwise_sq_distances(&fq, &q_sq, &self.support_features, &self.support_sq_norms, dim);
        let s = self.inv_sigma2_sq();
        (0..xs.len())
            .map(|i| {
                self.coef
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * (-d[(i, j)] * s).exp())
                    .sum::<f64>()
                    + self.bias
            })
            .collect()
    }

    /// Analytic gradient of [`decision`](Self::decision).
    pub fn decision_gradient(&self, x: &Point) -> Point {
        self.decision_with_gradient(x).1
    }

    pub fn decision_with_gradient(&self, x: &Point) -> (f64, Point) {
        let fx = self.feature_map.featurize(x);
        let dim = fx.len();
        let s = self.inv_sigma2_sq();
        let mut value = self.bias;
        // acc_j = sum_i c_i k_i (phi_x_j - phi_i_j)
        let mut acc = vec![0.0; dim];
        for (c, fi) in self.coef.iter().zip(self.support_features.chunks_exact(dim)) {
            let ck = c * (-crate::kernelnet::feature_distance_sq(&fx, fi) * s).exp();
            value += ck;
            for ((a, q), v) in acc.iter_mut().zip(&fx).zip(fi) {
                *a += ck * (q - v);
            }
        }
        let mut grad = Point::zeros();
        for ((a, q), center) in acc.iter().zip(&fx).zip(&self.feature_map.centers) {
            grad += (x - center) * (a * q);
        }
        let scale = 4.0 * s / (self.kernel.sigma1 * self.kernel.sigma1);
        (value, grad * scale)
    }
}

impl Barrier for BarrierModel {
    fn value(&self, x: &Point) -> f64 {
        self.decision(x)
    }

    fn gradient(&self, x: &Point) -> Point {
        self.decision_gradient(x)
    }

    fn value_and_gradient(&self, x: &Point) -> (f64, Point) {
        self.decision_with_gradient(x)
    }

    fn values(&self, xs: &[Point]) -> Vec<f64> {
        self.decision_batch(xs)
    }
}

/// Learned barrier value at `x`.
pub fn decision(model: &BarrierModel, x: &Point) -> f64 {
    model.decision(x)
}

pub fn decision_gradient(model: &BarrierModel, x: &Point) -> Point {
    model.decision_gradient(x)
}

/// Trains a barrier model on `data` from scratch.
pub fn train(
    data: &TrainingSet,
    svm_config: &SvmConfig,
    kernel_config: &KernelConfig,
    feature_map: Arc<FeatureMap>,
) -> Result<BarrierModel> {
    let mut trainer = Trainer::new(svm_config.clone(), *kernel_config, feature_map)?;
    trainer.extend(&data.samples);
    trainer.fit()
}

/// Training state that can grow: features, the Gram matrix and the dual
/// coefficients persist, so appending samples and refitting warm-starts
/// from the previous solution and only computes new kernel entries.
pub struct Trainer {
    svm: SvmConfig,
    kernel: KernelConfig,
    map: Arc<FeatureMap>,
    points: Vec<Point>,
    labels: Vec<Label>,
    y: Vec<f64>,
    features: Vec<f64>,
    sq_norms: Vec<f64>,
    gram: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    c_minus: f64,
}

impl Trainer {
    pub fn new(svm: SvmConfig, kernel: KernelConfig, map: Arc<FeatureMap>) -> Result<Self> {
        svm.validate()?;
        kernel.validate()?;
        let c_minus = svm.c_minus;
        Ok(Self {
            svm,
            kernel,
            map,
            points: Vec::new(),
            labels: Vec::new(),
            y: Vec::new(),
            features: Vec::new(),
            sq_norms: Vec::new(),
            gram: Vec::new(),
            alpha: Vec::new(),
            c_minus,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn feature_map(&self) -> &Arc<FeatureMap> {
        &self.map
    }

    /// Forgets all samples and the warm-start state.
    pub fn clear(&mut self) {
        self.points.clear();
        self.labels.clear();
        self.y.clear();
        self.features.clear();
        self.sq_norms.clear();
        self.gram.clear();
        self.alpha.clear();
        self.c_minus = self.svm.c_minus;
    }

    /// Appends samples; their dual coefficients start at zero.
    pub fn extend(&mut self, samples: &[LabeledSample]) {
        if samples.is_empty() {
            return;
        }
        let dim = self.map.dim();
        let old = self.points.len();
        let mut new_features = vec![0.0; samples.len() * dim];
        new_features
            .par_chunks_mut(dim)
            .zip(samples.par_iter())
            .for_each(|(out, s)| self.map.featurize_into(&s.position, out));
        for s in samples {
            self.points.push(s.position);
            self.labels.push(s.label);
            self.y.push(s.label.sign());
            self.alpha.push(0.0);
        }
        self.sq_norms.extend(row_sq_norms(&new_features, dim));
        self.features.extend_from_slice(&new_features);
        let n = self.points.len();
        self.gram.resize_with(n, Vec::new);

        // d[(a - old, b)] for a new sample a and any sample b; every entry
        // comes from the row of the later sample so the matrix is symmetric
        let d = pairwise_sq_distances(&new_features, &self.sq_norms[old..], &self.features, &self.sq_norms, dim);
        let inv = 1.0 / (self.kernel.sigma2 * self.kernel.sigma2);
        self.gram.par_iter_mut().enumerate().for_each(|(i, row)| {
            let from = if i < old { old } else { 0 };
            row.reserve(n - row.len());
            for j in from..n {
                let v = match i.cmp(&j) {
                    std::cmp::Ordering::Equal => 1.0,
                    std::cmp::Ordering::Less => (-d[(j - old, i)] * inv).exp(),
                    std::cmp::Ordering::Greater => (-d[(i - old, j)] * inv).exp(),
                };
                row.push(v);
            }
        });
    }

    fn check_trainable(&self) -> Result<()> {
        let n_pos = self.labels.iter().filter(|l| **l == Label::Safe).count();
        let n_neg = self.labels.len() - n_pos;
        if n_pos == 0 || n_neg == 0 {
            return Err(Error::DegenerateTrainingSet(format!(
                "need both labels, got {n_pos} safe and {n_neg} unsafe samples"
            )));
        }
        let mut seen: HashMap<(u64, u64), Label> = HashMap::with_capacity(self.points.len());
        let mut conflicts = 0;
        for (p, l) in self.points.iter().zip(&self.labels) {
            let key = ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits());
            match seen.get(&key) {
                Some(prev) if prev != l => conflicts += 1,
                Some(_) => {}
                None => {
                    seen.insert(key, *l);
                }
            }
        }
        if conflicts > 0 {
            return Err(Error::HardMarginInfeasible {
                c_minus: self.c_minus,
                violations: conflicts,
            });
        }
        Ok(())
    }

    fn upper_bounds(&self) -> Vec<f64> {
        self.labels
            .iter()
            .map(|l| match l {
                Label::Safe => self.svm.c_plus,
                Label::Unsafe => self.c_minus,
            })
            .collect()
    }

    /// Decision values at the unsafe training samples, from cached kernel rows.
    fn unsafe_violations(&self, alpha: &[f64], bias: f64) -> usize {
        let support: Vec<usize> = (0..alpha.len()).filter(|&j| alpha[j] > 0.0).collect();
        (0..self.points.len())
            .into_par_iter()
            .filter(|&i| self.labels[i] == Label::Unsafe)
            .filter(|&i| {
                let row = &self.gram[i];
                let f: f64 = support.iter().map(|&j| alpha[j] * self.y[j] * row[j]).sum::<f64>() + bias;
                f >= 0.0
            })
            .count()
    }

    /// Solves the dual, escalating the unsafe-class penalty until every
    /// unsafe sample is classified unsafe.
    pub fn fit(&mut self) -> Result<BarrierModel> {
        self.check_trainable()?;
        let alpha0 = std::mem::take(&mut self.alpha);
        let mut solver = DualSolver::new(&self.gram, &self.y, self.upper_bounds(), alpha0);
        let mut escalations = 0;
        let mut c_minus = self.c_minus;
        let mut stats;
        let mut violations;
        loop {
            stats = solver.solve(self.svm.tolerance, self.svm.max_iters);
            if !stats.converged {
                log::warn!(
                    "svm solver stopped after {} iterations with KKT gap {:.3e}",
                    stats.iterations,
                    stats.kkt_gap
                );
            }
            violations = self.unsafe_violations(solver.alpha(), solver.bias());
            if violations == 0 {
                break;
            }
            let next = c_minus * self.svm.c_minus_growth;
            if next > self.svm.c_minus_cap * (1.0 + 1e-12) {
                let alpha = solver.into_alpha();
                self.alpha = alpha;
                self.c_minus = c_minus;
                return Err(Error::HardMarginInfeasible { c_minus, violations });
            }
            c_minus = next;
            escalations += 1;
            let upper = self
                .labels
                .iter()
                .map(|l| match l {
                    Label::Safe => self.svm.c_plus,
                    Label::Unsafe => c_minus,
                })
                .collect();
            solver.raise_upper(upper);
        }
        let bias = solver.bias();
        let diagnostics = TrainingDiagnostics {
            iterations: solver.iterations(),
            negative_margin_violations: violations,
            c_minus,
            escalations,
            converged: stats.converged,
            kkt_gap: stats.kkt_gap,
            dual_objective: solver.objective(),
            training_samples: self.points.len(),
        };
        self.alpha = solver.into_alpha();
        self.c_minus = c_minus;

        let mut model = BarrierModel::from_parts(
            self.points.clone(),
            self.labels.clone(),
            self.alpha.clone(),
            bias,
            self.kernel,
            Arc::clone(&self.map),
        );
        model.diagnostics = diagnostics;
        Ok(model)
    }

    /// Current dual coefficients, aligned with the appended samples.
    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }
}
