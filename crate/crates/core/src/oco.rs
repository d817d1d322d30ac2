//! Problem definition: run parameters, convex domains, white-box losses, and
//! interval regret over a recorded run.

use serde::{Deserialize, Serialize};

use crate::intervals::Interval;
use crate::numerics::{self, dot, norm2, project_ball, project_box};
use crate::scalar::Scalar;
use crate::trace::RunTrace;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OcoError {
    #[error("invalid problem parameters: {0}")]
    InvalidParams(String),
    #[error("interval [{start}, {end}] is outside the recorded rounds 1..={len}")]
    BadInterval {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Bounds that govern a whole run.
///
/// `diameter` bounds `||x||_2` over the domain, `box_bound` bounds `||x||_inf`,
/// and `grad_bound` bounds every subgradient norm. All three must exceed 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams<S> {
    pub dim: usize,
    pub horizon: usize,
    pub diameter: S,
    pub box_bound: S,
    pub grad_bound: S,
}

impl<S: Scalar> ProblemParams<S> {
    pub fn new(
        dim: usize,
        horizon: usize,
        diameter: S,
        box_bound: S,
        grad_bound: S,
    ) -> Result<Self, OcoError> {
        let p = Self {
            dim,
            horizon,
            diameter,
            box_bound,
            grad_bound,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), OcoError> {
        if self.dim == 0 {
            return Err(OcoError::InvalidParams("dimension must be positive".into()));
        }
        if self.horizon < 2 {
            return Err(OcoError::InvalidParams(format!(
                "horizon must be at least 2, got {}",
                self.horizon
            )));
        }
        for (name, v) in [
            ("diameter", self.diameter),
            ("box_bound", self.box_bound),
            ("grad_bound", self.grad_bound),
        ] {
            if !(v > S::one()) || !v.is_finite() {
                return Err(OcoError::InvalidParams(format!(
                    "{name} must be a finite value > 1, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// `ln(d T D^2 G^2)`
    pub fn log_scale(&self) -> S {
        let d = S::from_count(self.dim);
        let t = S::from_count(self.horizon);
        (d * t * self.diameter * self.diameter * self.grad_bound * self.grad_bound).ln()
    }

    pub fn cast<T: Scalar>(&self) -> ProblemParams<T> {
        ProblemParams {
            dim: self.dim,
            horizon: self.horizon,
            diameter: T::lit(self.diameter.as_f64()),
            box_bound: T::lit(self.box_bound.as_f64()),
            grad_bound: T::lit(self.grad_bound.as_f64()),
        }
    }
}

/// Convex feasible set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Domain<S> {
    /// `{x : ||x||_2 <= radius}`
    Ball { radius: S },
    /// `{x : ||x||_inf <= halfwidth}`
    Box { halfwidth: S },
}

impl<S: Scalar> Domain<S> {
    pub fn contains(&self, x: &[S]) -> bool {
        match *self {
            Domain::Ball { radius } => norm2(x) <= radius,
            Domain::Box { halfwidth } => x.iter().all(|v| v.abs() <= halfwidth),
        }
    }

    pub fn project(&self, x: &[S]) -> Vec<S> {
        match *self {
            Domain::Ball { radius } => project_ball(x, radius),
            Domain::Box { halfwidth } => project_box(x, halfwidth),
        }
    }

    pub fn center(&self, dim: usize) -> Vec<S> {
        numerics::zeros(dim)
    }

    /// Radius in the norm the domain is defined by.
    pub fn radius(&self) -> S {
        match *self {
            Domain::Ball { radius } => radius,
            Domain::Box { halfwidth } => halfwidth,
        }
    }

    /// Largest Euclidean norm of a feasible point.
    pub fn l2_radius(&self, dim: usize) -> S {
        match *self {
            Domain::Ball { radius } => radius,
            Domain::Box { halfwidth } => halfwidth * S::from_count(dim).sqrt(),
        }
    }

    pub fn cast<T: Scalar>(&self) -> Domain<T> {
        match *self {
            Domain::Ball { radius } => Domain::Ball {
                radius: T::lit(radius.as_f64()),
            },
            Domain::Box { halfwidth } => Domain::Box {
                halfwidth: T::lit(halfwidth.as_f64()),
            },
        }
    }
}

/// A convex loss with exact value and subgradient oracles.
///
/// The family is closed: quadratic, linear, and coordinate-wise absolute
/// value. New kinds need `eval`, `subgrad`, and a closed-form or iterative
/// comparator in `regret_lab::best_fixed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossFn<S> {
    /// `x -> scale * ||x - center||^2`
    Quadratic { center: Vec<S>, scale: S },
    /// `x -> g^T x`
    Linear { g: Vec<S> },
    /// `x -> ||x - center||_1`
    Abs { center: Vec<S> },
}

impl<S: Scalar> LossFn<S> {
    pub fn quadratic(center: Vec<S>, scale: S) -> Self {
        LossFn::Quadratic { center, scale }
    }

    pub fn linear(g: Vec<S>) -> Self {
        LossFn::Linear { g }
    }

    pub fn abs(center: Vec<S>) -> Self {
        LossFn::Abs { center }
    }

    pub fn dim(&self) -> usize {
        match self {
            LossFn::Quadratic { center, .. } | LossFn::Abs { center } => center.len(),
            LossFn::Linear { g } => g.len(),
        }
    }

    pub fn eval(&self, x: &[S]) -> S {
        match self {
            LossFn::Quadratic { center, scale } => {
                let d = numerics::distance(x, center);
                *scale * d * d
            }
            LossFn::Linear { g } => dot(g, x),
            LossFn::Abs { center } => x
                .iter()
                .zip(center)
                .fold(S::zero(), |acc, (&xi, &ci)| acc + (xi - ci).abs()),
        }
    }

    /// A subgradient at `x`; at kinks of `Abs` the zero element is returned.
    pub fn subgrad(&self, x: &[S]) -> Vec<S> {
        match self {
            LossFn::Quadratic { center, scale } => {
                let k = S::lit(2.0) * *scale;
                x.iter()
                    .zip(center)
                    .map(|(&xi, &ci)| k * (xi - ci))
                    .collect()
            }
            LossFn::Linear { g } => g.clone(),
            LossFn::Abs { center } => x
                .iter()
                .zip(center)
                .map(|(&xi, &ci)| {
                    let diff = xi - ci;
                    if diff > S::zero() {
                        S::one()
                    } else if diff < S::zero() {
                        -S::one()
                    } else {
                        S::zero()
                    }
                })
                .collect(),
        }
    }

    pub fn cast<T: Scalar>(&self) -> LossFn<T> {
        let cv = |v: &[S]| v.iter().map(|x| T::lit(x.as_f64())).collect::<Vec<T>>();
        match self {
            LossFn::Quadratic { center, scale } => LossFn::Quadratic {
                center: cv(center),
                scale: T::lit(scale.as_f64()),
            },
            LossFn::Linear { g } => LossFn::Linear { g: cv(g) },
            LossFn::Abs { center } => LossFn::Abs { center: cv(center) },
        }
    }
}

/// `sum_{tau in I} l_tau(x_tau) - sum_{tau in I} l_tau(u)` for predictions
/// `points` (indexed from round 1) against a fixed comparator `u`.
pub fn regret_of_points<S: Scalar>(
    stream: &[LossFn<S>],
    points: &[Vec<S>],
    interval: Interval,
    comparator: &[S],
) -> Result<S, OcoError> {
    let len = points.len().min(stream.len());
    if interval.start < 1 || interval.end > len || interval.start > interval.end {
        return Err(OcoError::BadInterval {
            start: interval.start,
            end: interval.end,
            len,
        });
    }
    let mut total = S::zero();
    for tau in interval.start..=interval.end {
        let loss = &stream[tau - 1];
        total += loss.eval(&points[tau - 1]) - loss.eval(comparator);
    }
    Ok(total)
}

/// Regret of a recorded run over `interval` against `comparator`.
pub fn regret<S: Scalar>(
    trace: &RunTrace<S>,
    stream: &[LossFn<S>],
    interval: Interval,
    comparator: &[S],
) -> Result<S, OcoError> {
    let len = trace.len().min(stream.len());
    if interval.start < 1 || interval.end > len || interval.start > interval.end {
        return Err(OcoError::BadInterval {
            start: interval.start,
            end: interval.end,
            len,
        });
    }
    let mut total = S::zero();
    for tau in interval.start..=interval.end {
        let loss = &stream[tau - 1];
        total += trace.rounds[tau - 1].loss - loss.eval(comparator);
    }
    Ok(total)
}
