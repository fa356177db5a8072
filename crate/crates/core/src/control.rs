//! Minimum-norm barrier QP over single-integrator dynamics.
//!
//! With `x' = u` the barrier condition `grad h(x) . u >= -gamma h(x)` is a
//! single half-space in `u`, so the QP reduces to a projection of the
//! nominal input onto that half-space.

use serde::{Deserialize, Serialize};

use crate::{Barrier, Error, Point, Result};

/// Distances below this count as "at the goal" for the nominal policy.
const GOAL_EPS: f64 = 1e-9;
const DEGENERATE_GRADIENT: f64 = 1e-12;
const ADMISSIBLE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    /// Nominal speed, m/s.
    pub delta: f64,
    /// Linear class-K gain, 1/s.
    pub gamma: f64,
    /// Euler step, s.
    pub dt: f64,
    /// Optional per-axis input bound, m/s.
    pub u_max: Option<f64>,
    pub max_steps: usize,
    /// Online modes refit every this many steps.
    pub retrain_every: usize,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            gamma: 1.0,
            dt: 0.02,
            u_max: None,
            max_steps: 100_000,
            retrain_every: 1,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("delta", self.delta), ("gamma", self.gamma), ("dt", self.dt)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("control.{name} must be > 0, got {v}")));
            }
        }
        if let Some(u) = self.u_max {
            if !(u.is_finite() && u > 0.0) {
                return Err(Error::Validation(format!("control.u_max must be > 0, got {u}")));
            }
        }
        if self.max_steps == 0 || self.retrain_every == 0 {
            return Err(Error::Validation(
                "control.max_steps and control.retrain_every must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// Linear extended class-K function.
    pub fn alpha(&self, h: f64) -> f64 {
        self.gamma * h
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub u: Point,
    pub nominal: Point,
    pub constraint_active: bool,
    pub h_value: f64,
    pub h_gradient: Point,
    pub infeasible_fallback: bool,
}

/// Go-to-goal direction scaled to speed `delta`.
pub fn nominal_policy(x: &Point, x_goal: &Point, delta: f64) -> Point {
    let e = x_goal - x;
    let n = e.norm();
    if n < GOAL_EPS {
        Point::zeros()
    } else {
        e * (delta / n)
    }
}

/// Projects `nominal` onto `{u : a . u >= rhs}`.
///
/// Returns `(u, active, infeasible)`.
pub fn project_half_space(a: &Point, rhs: f64, nominal: &Point) -> (Point, bool, bool) {
    let slack = a.dot(nominal) - rhs;
    if slack >= 0.0 {
        return (*nominal, false, false);
    }
    let a2 = a.norm_squared();
    if a2.sqrt() < DEGENERATE_GRADIENT {
        // no input can satisfy a positive requirement with zero gradient
        return (Point::zeros(), true, true);
    }
    (nominal + a * (-slack / a2), true, false)
}

/// Filters the nominal policy through the barrier QP at `x`.
pub fn safe_control<B: Barrier + ?Sized>(
    x: &Point,
    barrier: &B,
    config: &ControlConfig,
    x_goal: &Point,
) -> ControlOutput {
    let (h, grad) = barrier.value_and_gradient(x);
    filter(h, grad, &nominal_policy(x, x_goal, config.delta), config)
}

/// QP core on an already-evaluated barrier value and gradient.
pub fn filter(h: f64, grad: Point, nominal: &Point, config: &ControlConfig) -> ControlOutput {
    let rhs = -config.alpha(h);
    let (mut u, active, mut infeasible) = project_half_space(&grad, rhs, nominal);
    if let Some(bound) = config.u_max {
        let clamped = u.map(|v| v.clamp(-bound, bound));
        if clamped != u {
            u = clamped;
            if grad.dot(&u) - rhs < -ADMISSIBLE_SLACK {
                infeasible = true;
            }
        }
    }
    ControlOutput {
        u,
        nominal: *nominal,
        constraint_active: active,
        h_value: h,
        h_gradient: grad,
        infeasible_fallback: infeasible,
    }
}

/// Whether `u` satisfies the barrier condition at `x`.
pub fn admissible<B: Barrier + ?Sized>(x: &Point, u: &Point, barrier: &B, config: &ControlConfig) -> bool {
    let (h, grad) = barrier.value_and_gradient(x);
    grad.dot(u) + config.alpha(h) >= -ADMISSIBLE_SLACK
}
