//! Online convex optimization learners run as experts on covering intervals.
//!
//! Every learner keeps its own iterate and updates on the subgradient at that
//! iterate, so an expert born at round `s` is an ordinary OCO run over
//! `[s, ...]` regardless of what the aggregator plays.

use serde::{Deserialize, Serialize};

use crate::numerics::{self, all_finite, eigh, project_mahalanobis_ball, NumericsError, SymMatrix};
use crate::oco::{Domain, LossFn};
use crate::scalar::Scalar;
use crate::trace::{RoundRecord, RunTrace};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExpertError {
    #[error("non-finite gradient at step {step} of expert born at round {birth}")]
    NonFiniteGradient { birth: usize, step: usize },
    #[error("invalid expert configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpertKind {
    FullAdagrad,
    DiagAdagrad,
    /// Projected gradient descent with step `eta / sqrt(k)`.
    OgdSqrt,
    /// Projected gradient descent with step `eta / k`.
    OgdInvT,
    /// Full-matrix Adagrad over an exponentially decayed outer-product sum.
    DecayedAdagrad,
}

/// How adaptive experts map an unconstrained step back into the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionMode {
    /// Project in the norm induced by the current preconditioner (ball
    /// domains only; boxes fall back to clamping).
    #[default]
    Mahalanobis,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertConfig<S> {
    pub kind: ExpertKind,
    pub step_scale: S,
    /// Decay factor in `(0, 1]`; only read by `DecayedAdagrad`.
    pub decay: S,
    /// Eigenvalue floor `epsilon` added to the preconditioner.
    pub floor: S,
    pub projection: ProjectionMode,
}

impl<S: Scalar> ExpertConfig<S> {
    pub fn new(kind: ExpertKind, step_scale: S) -> Self {
        Self {
            kind,
            step_scale,
            decay: S::one(),
            floor: S::lit(numerics::DEFAULT_FLOOR),
            projection: ProjectionMode::default(),
        }
    }

    /// Step scale equal to the domain radius.
    pub fn for_domain(kind: ExpertKind, domain: &Domain<S>) -> Self {
        Self::new(kind, domain.radius())
    }

    pub fn with_decay(mut self, decay: S) -> Self {
        self.decay = decay;
        self
    }

    pub fn with_floor(mut self, floor: S) -> Self {
        self.floor = floor;
        self
    }

    pub fn with_projection(mut self, projection: ProjectionMode) -> Self {
        self.projection = projection;
        self
    }

    pub fn validate(&self) -> Result<(), ExpertError> {
        if !(self.step_scale > S::zero()) || !self.step_scale.is_finite() {
            return Err(ExpertError::InvalidConfig(format!(
                "step scale must be positive, got {}",
                self.step_scale
            )));
        }
        if !(self.floor > S::zero()) {
            return Err(ExpertError::InvalidConfig(format!(
                "floor must be positive, got {}",
                self.floor
            )));
        }
        if !(self.decay > S::zero() && self.decay <= S::one()) {
            return Err(ExpertError::InvalidConfig(format!(
                "decay must lie in (0, 1], got {}",
                self.decay
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Accumulator<S> {
    /// Raw (possibly decayed) sum of gradient outer products.
    Matrix(SymMatrix<S>),
    /// Per-coordinate sum of squared gradients.
    Diagonal(Vec<S>),
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertInstance<S> {
    config: ExpertConfig<S>,
    domain: Domain<S>,
    x: Vec<S>,
    accumulator: Accumulator<S>,
    steps: usize,
    birth: usize,
}

impl<S: Scalar> ExpertInstance<S> {
    /// Starts a learner at `start` (projected into the domain if needed).
    pub fn spawn(
        config: ExpertConfig<S>,
        domain: Domain<S>,
        start: &[S],
        birth: usize,
    ) -> Result<Self, ExpertError> {
        config.validate()?;
        let x = if domain.contains(start) {
            start.to_vec()
        } else {
            log::warn!("expert born at round {birth}: start point outside domain, projecting");
            domain.project(start)
        };
        let d = x.len();
        let accumulator = match config.kind {
            ExpertKind::FullAdagrad | ExpertKind::DecayedAdagrad => {
                Accumulator::Matrix(SymMatrix::zeros(d))
            }
            ExpertKind::DiagAdagrad => Accumulator::Diagonal(vec![S::zero(); d]),
            ExpertKind::OgdSqrt | ExpertKind::OgdInvT => Accumulator::None,
        };
        Ok(Self {
            config,
            domain,
            x,
            accumulator,
            steps: 0,
            birth,
        })
    }

    pub fn predict(&self) -> &[S] {
        &self.x
    }

    pub fn birth(&self) -> usize {
        self.birth
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn config(&self) -> &ExpertConfig<S> {
        &self.config
    }

    /// The matrix whose inverse square root preconditions the next step,
    /// `epsilon I + sum g g^T`; `None` for non-matrix learners.
    pub fn preconditioner(&self) -> Option<SymMatrix<S>> {
        match &self.accumulator {
            Accumulator::Matrix(m) => Some(m.plus_scaled_identity(self.config.floor)),
            Accumulator::Diagonal(a) => Some(SymMatrix::from_diag(
                &a.iter().map(|&v| v + self.config.floor).collect::<Vec<_>>(),
            )),
            Accumulator::None => None,
        }
    }

    /// One online step on `loss`, using the subgradient at the current iterate.
    pub fn update(&mut self, loss: &LossFn<S>) -> Result<(), ExpertError> {
        let g = loss.subgrad(&self.x);
        self.step_with_gradient(&g)
    }

    pub fn step_with_gradient(&mut self, g: &[S]) -> Result<(), ExpertError> {
        if !all_finite(g) {
            return Err(ExpertError::NonFiniteGradient {
                birth: self.birth,
                step: self.steps + 1,
            });
        }
        self.steps += 1;
        let eta = self.config.step_scale;
        let eps = self.config.floor;
        match &mut self.accumulator {
            Accumulator::Matrix(m) => {
                if self.config.kind == ExpertKind::DecayedAdagrad {
                    m.scale_in_place(self.config.decay);
                }
                m.add_outer(g, S::one());
                let eig = eigh(&m.plus_scaled_identity(eps))?;
                let precond = eig.map(|l| S::one() / l.max(eps).sqrt());
                let mut y = self.x.clone();
                numerics::axpy(&mut y, -eta, &precond.mat_vec(g));
                self.x = match (self.config.projection, self.domain) {
                    (ProjectionMode::Mahalanobis, Domain::Ball { radius }) => {
                        let metric = eig.map(|l| l.max(S::zero()).sqrt());
                        project_mahalanobis_ball(&y, radius, &metric)?
                    }
                    _ => self.domain.project(&y),
                };
            }
            Accumulator::Diagonal(acc) => {
                let mut y = self.x.clone();
                for ((yi, ai), &gi) in y.iter_mut().zip(acc.iter_mut()).zip(g) {
                    *ai += gi * gi;
                    *yi -= eta * gi / (*ai + eps).sqrt();
                }
                self.x = match (self.config.projection, self.domain) {
                    (ProjectionMode::Mahalanobis, Domain::Ball { radius }) => {
                        let metric = SymMatrix::from_diag(
                            &acc.iter().map(|&a| (a + eps).sqrt()).collect::<Vec<_>>(),
                        );
                        project_mahalanobis_ball(&y, radius, &metric)?
                    }
                    _ => self.domain.project(&y),
                };
            }
            Accumulator::None => {
                let k = S::from_count(self.steps);
                let step = match self.config.kind {
                    ExpertKind::OgdSqrt => eta / k.sqrt(),
                    _ => eta / k,
                };
                let mut y = self.x.clone();
                numerics::axpy(&mut y, -step, g);
                self.x = self.domain.project(&y);
            }
        }
        Ok(())
    }
}

/// Runs one learner alone over the whole stream, starting at the domain center.
pub fn run_solo<S: Scalar>(
    config: ExpertConfig<S>,
    domain: Domain<S>,
    dim: usize,
    stream: &[LossFn<S>],
) -> Result<RunTrace<S>, ExpertError> {
    let mut expert = ExpertInstance::spawn(config, domain, &domain.center(dim), 1)?;
    let mut trace = RunTrace::new(0);
    for (i, loss) in stream.iter().enumerate() {
        let x = expert.predict().to_vec();
        trace.rounds.push(RoundRecord {
            tau: i + 1,
            loss: loss.eval(&x),
            prediction: x,
            total_weight: S::one(),
            alive_slots: 1,
            slots: Vec::new(),
        });
        expert.update(loss)?;
    }
    Ok(trace)
}
