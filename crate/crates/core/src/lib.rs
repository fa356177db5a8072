//! Learning zeroing control barrier functions from simulated 2D LiDAR.
//!
//! The pipeline, bottom-up:
//!
//! - [`environment`]: workspace, obstacle shapes, scenario files and the
//!   ground-truth signed distance (analytic and gridded).
//! - [`sensor`]: exact-geometry raycasting LiDAR.
//! - [`dataset`]: scan → labeled safe/unsafe samples, with aggregation.
//! - [`kernelnet`]: fixed Gaussian feature grid plus the second-layer kernel.
//! - [`svm`]: biased-penalty kernel SVM whose margin is the learned barrier.
//! - [`control`]: go-to-goal policy filtered through the barrier QP.
//! - [`sim`]: ground-truth, offline and online closed-loop drivers.
//! - [`metrics`]: correlation and discrete Fréchet trajectory comparison.
//! - [`io`]: CSV formats shared by the CLI.

pub mod control;
pub mod dataset;
pub mod environment;
mod error;
pub mod io;
pub mod kernelnet;
pub mod metrics;
pub mod sensor;
pub mod sim;
pub mod svm;

pub use error::{Error, Result};

/// A point (or vector) in the plane, in meters.
pub type Point = nalgebra::Vector2<f64>;

/// Anything that can serve as the barrier `h` in the safety filter:
/// positive on the safe side, with a gradient.
pub trait Barrier {
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Point;

    fn value_and_gradient(&self, x: &Point) -> (f64, Point) {
        (self.value(x), self.gradient(x))
    }

    fn values(&self, xs: &[Point]) -> Vec<f64> {
        xs.iter().map(|x| self.value(x)).collect()
    }
}
