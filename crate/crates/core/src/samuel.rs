//! Multiplicative weights over `(interval, step-size)` expert slots.
//!
//! Each covering interval `I` owns one learner; its `Q` slots share that
//! learner's iterate and differ only in the multiplicative-weights rate
//! `eta_q = 1 / (2 G D 2^q)`. A slot is alive exactly while the current round
//! lies in its interval. Per round:
//!
//! 1. play `x = sum w(I,q) x(I) / W` (or sample a slot with probability `w / W`);
//! 2. score `r(I) = l(x) - l(x(I))` for every alive interval;
//! 3. continuing slots take `w <- w (1 + eta_q r(I))`, finished ones retire,
//!    and intervals starting next round are born at `min(1/2, eta_q)`;
//! 4. continuing learners step on the loss at their own iterate.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::experts::{ExpertConfig, ExpertError, ExpertInstance};
use crate::intervals::{CoverError, GeometricCover, Interval, IntervalId};
use crate::numerics::{self, all_finite};
use crate::oco::{Domain, LossFn, OcoError, ProblemParams};
use crate::scalar::Scalar;
use crate::trace::{RoundRecord, RunTrace, SlotRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetaError {
    #[error("update called before predict in round {tau}")]
    NotPredicted { tau: usize },
    #[error("corrupted state in round {tau}: {detail}")]
    CorruptedState { tau: usize, detail: String },
    #[error(
        "assumption violated in round {tau}: |eta * r| = {product:e} > 1 for interval {interval} \
         (r = {regret:e}); the loss breaks the gradient or diameter bound"
    )]
    AssumptionViolation {
        tau: usize,
        interval: String,
        regret: f64,
        product: f64,
    },
    #[error("loss stream has {found} rounds, expected {expected}")]
    StreamLength { expected: usize, found: usize },
    #[error("run already finished after round {horizon}")]
    Finished { horizon: usize },
    #[error(transparent)]
    Expert(#[from] ExpertError),
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Oco(#[from] OcoError),
}

/// `ceil(4 ln(d T D^2 G^2))`, at least 1.
pub fn q_count<S: Scalar>(params: &ProblemParams<S>) -> usize {
    let q = (S::lit(4.0) * params.log_scale()).ceil();
    q.to_usize().unwrap_or(1).max(1)
}

/// Multiplicative-weights rates, strictly decreasing in `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaGrid<S> {
    values: Vec<S>,
}

impl<S: Scalar> EtaGrid<S> {
    /// `eta_q = 1 / (2 G D 2^q)` for `q = 1..=count`.
    pub fn for_params(params: &ProblemParams<S>, count: usize) -> Self {
        let base = S::lit(2.0) * params.grad_bound * params.diameter;
        Self::geometric(base, count)
    }

    /// `eta_q = 1 / 2^q` for `q = 1..=count`.
    pub fn unscaled(count: usize) -> Self {
        Self::geometric(S::one(), count)
    }

    fn geometric(base: S, count: usize) -> Self {
        let two = S::lit(2.0);
        let mut values = Vec::with_capacity(count);
        let mut denom = base;
        for _ in 0..count.max(1) {
            denom *= two;
            values.push(S::one() / denom);
        }
        Self { values }
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest rate, `eta_1`.
    pub fn max(&self) -> S {
        self.values[0]
    }

    /// Birth weights `min(1/2, eta_q)`.
    pub fn birth_weights(&self) -> Vec<S> {
        let half = S::lit(0.5);
        self.values.iter().map(|&e| e.min(half)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum CombineMode {
    /// Weighted average of expert predictions.
    Average,
    /// Play one expert's prediction drawn with probability `w / W`.
    Sample { seed: u64 },
}

/// Where a newly born learner starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BirthPoint {
    #[default]
    Center,
    /// The aggregate played in the round before birth.
    WarmStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaOptions {
    pub combine: CombineMode,
    pub birth: BirthPoint,
    /// Clip `r` to `[-2GD, 2GD]` instead of failing on an assumption breach.
    pub clip_regret: bool,
    /// Overrides `q_count`.
    pub q: Option<usize>,
}

impl Default for MetaOptions {
    fn default() -> Self {
        Self {
            combine: CombineMode::Average,
            birth: BirthPoint::Center,
            clip_regret: false,
            q: None,
        }
    }
}

#[derive(Debug, Clone)]
struct Slot<S> {
    interval: Interval,
    weights: Vec<S>,
    expert: ExpertInstance<S>,
}

#[derive(Debug, Clone)]
struct Pending<S> {
    prediction: Vec<S>,
    total_weight: S,
}

/// Full state of one run.
#[derive(Debug, Clone)]
pub struct MetaState<S> {
    params: ProblemParams<S>,
    cover: Arc<GeometricCover>,
    domain: Domain<S>,
    expert_config: ExpertConfig<S>,
    eta: EtaGrid<S>,
    slots: BTreeMap<IntervalId, Slot<S>>,
    tau: usize,
    options: MetaOptions,
    rng: ChaCha8Rng,
    pending: Option<Pending<S>>,
}

impl<S: Scalar> MetaState<S> {
    pub fn new(
        params: ProblemParams<S>,
        cover: Arc<GeometricCover>,
        domain: Domain<S>,
        expert_config: ExpertConfig<S>,
        options: MetaOptions,
    ) -> Result<Self, MetaError> {
        params.validate()?;
        if cover.horizon() != params.horizon {
            return Err(MetaError::CorruptedState {
                tau: 0,
                detail: format!(
                    "cover built for horizon {}, params say {}",
                    cover.horizon(),
                    params.horizon
                ),
            });
        }
        expert_config.validate()?;
        let q = options.q.unwrap_or_else(|| q_count(&params));
        let eta = EtaGrid::for_params(&params, q);
        let seed = match options.combine {
            CombineMode::Sample { seed } => seed,
            CombineMode::Average => 0,
        };
        let mut state = Self {
            params,
            cover,
            domain,
            expert_config,
            eta,
            slots: BTreeMap::new(),
            tau: 1,
            options,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: None,
        };
        let start = domain.center(params.dim);
        state.spawn_starting_at(1, &start)?;
        Ok(state)
    }

    fn spawn_starting_at(&mut self, tau: usize, start: &[S]) -> Result<(), MetaError> {
        for (id, interval) in self.cover.starting_at(tau) {
            let expert = ExpertInstance::spawn(self.expert_config, self.domain, start, tau)?;
            self.slots.insert(
                id,
                Slot {
                    interval,
                    weights: self.eta.birth_weights(),
                    expert,
                },
            );
        }
        Ok(())
    }

    pub fn round(&self) -> usize {
        self.tau
    }

    pub fn eta(&self) -> &EtaGrid<S> {
        &self.eta
    }

    pub fn params(&self) -> &ProblemParams<S> {
        &self.params
    }

    pub fn alive_intervals(&self) -> Vec<(IntervalId, Interval)> {
        self.slots.iter().map(|(&id, s)| (id, s.interval)).collect()
    }

    /// Weight vector over `q` for an alive interval.
    pub fn weights(&self, id: IntervalId) -> Option<&[S]> {
        self.slots.get(&id).map(|s| s.weights.as_slice())
    }

    pub fn expert_prediction(&self, id: IntervalId) -> Option<&[S]> {
        self.slots.get(&id).map(|s| s.expert.predict())
    }

    /// `W = sum over alive (I, q) of w(I, q)`, summed in id order.
    pub fn total_weight(&self) -> S {
        self.slots
            .values()
            .flat_map(|s| s.weights.iter())
            .fold(S::zero(), |acc, &w| acc + w)
    }

    pub fn alive_slot_count(&self) -> usize {
        self.slots.len() * self.eta.len()
    }

    /// The point played this round.
    pub fn predict(&mut self) -> Result<Vec<S>, MetaError> {
        if self.tau > self.params.horizon {
            return Err(MetaError::Finished {
                horizon: self.params.horizon,
            });
        }
        let total = self.total_weight();
        if !(total > S::zero()) || !total.is_finite() {
            return Err(MetaError::CorruptedState {
                tau: self.tau,
                detail: format!("total weight {total}"),
            });
        }
        let prediction = match self.options.combine {
            CombineMode::Average => {
                let mut acc = numerics::zeros(self.params.dim);
                for slot in self.slots.values() {
                    let w = slot.weights.iter().fold(S::zero(), |a, &v| a + v);
                    numerics::axpy(&mut acc, w, slot.expert.predict());
                }
                let mut x: Vec<S> = acc.into_iter().map(|v| v / total).collect();
                // Rounding can push a convex combination of feasible points
                // an ulp outside the domain.
                if !self.domain.contains(&x) {
                    x = self.domain.project(&x);
                }
                x
            }
            CombineMode::Sample { .. } => {
                let u = S::lit(self.rng.random::<f64>()) * total;
                let mut acc = S::zero();
                let mut chosen = None;
                'outer: for slot in self.slots.values() {
                    for &w in &slot.weights {
                        acc += w;
                        if u < acc {
                            chosen = Some(slot.expert.predict().to_vec());
                            break 'outer;
                        }
                    }
                }
                chosen.unwrap_or_else(|| {
                    let last = self.slots.values().next_back().expect("alive slots");
                    last.expert.predict().to_vec()
                })
            }
        };
        if !all_finite(&prediction) {
            return Err(MetaError::CorruptedState {
                tau: self.tau,
                detail: "non-finite prediction".into(),
            });
        }
        self.pending = Some(Pending {
            prediction: prediction.clone(),
            total_weight: total,
        });
        Ok(prediction)
    }

    /// Consumes this round's loss and advances to the next round.
    pub fn update(&mut self, loss: &LossFn<S>) -> Result<RoundRecord<S>, MetaError> {
        let pending = self
            .pending
            .take()
            .ok_or(MetaError::NotPredicted { tau: self.tau })?;
        let tau = self.tau;
        let next = tau + 1;
        let played_loss = loss.eval(&pending.prediction);
        let two_gd = S::lit(2.0) * self.params.grad_bound * self.params.diameter;
        let eta_max = self.eta.max();

        let mut records = Vec::with_capacity(self.slots.len());
        let mut regrets = BTreeMap::new();
        for (id, slot) in &self.slots {
            let expert_loss = loss.eval(slot.expert.predict());
            let mut r = played_loss - expert_loss;
            if self.options.clip_regret {
                r = r.max(-two_gd).min(two_gd);
            }
            let product = (eta_max * r).abs();
            if !(product <= S::one()) {
                return Err(MetaError::AssumptionViolation {
                    tau,
                    interval: slot.interval.to_string(),
                    regret: r.as_f64(),
                    product: product.as_f64(),
                });
            }
            let (weight_sum, pseudo) = slot
                .weights
                .iter()
                .zip(self.eta.values())
                .fold((S::zero(), S::zero()), |(ws, ps), (&w, &e)| {
                    (ws + w, ps + w / e)
                });
            records.push(SlotRecord {
                slot: id.level,
                interval: Some(slot.interval),
                expert_loss,
                regret: r,
                weight_sum,
                pseudo_weight_sum: pseudo,
            });
            regrets.insert(*id, r);
        }
        let alive_slots = self.alive_slot_count();

        let eta = self.eta.values().to_vec();
        self.slots.retain(|_, slot| slot.interval.contains(next));
        for (id, slot) in self.slots.iter_mut() {
            let r = regrets[id];
            for (w, &e) in slot.weights.iter_mut().zip(&eta) {
                *w *= S::one() + e * r;
            }
            slot.expert.update(loss)?;
        }

        if next <= self.params.horizon {
            let start = match self.options.birth {
                BirthPoint::Center => self.domain.center(self.params.dim),
                BirthPoint::WarmStart => pending.prediction.clone(),
            };
            self.spawn_starting_at(next, &start)?;
        }
        self.tau = next;

        Ok(RoundRecord {
            tau,
            prediction: pending.prediction,
            loss: played_loss,
            total_weight: pending.total_weight,
            alive_slots,
            slots: records,
        })
    }
}

/// Runs the meta-algorithm over a full stream.
pub fn run<S: Scalar>(
    params: ProblemParams<S>,
    cover: Arc<GeometricCover>,
    domain: Domain<S>,
    expert_config: ExpertConfig<S>,
    options: MetaOptions,
    stream: &[LossFn<S>],
) -> Result<RunTrace<S>, MetaError> {
    if stream.len() != params.horizon {
        return Err(MetaError::StreamLength {
            expected: params.horizon,
            found: stream.len(),
        });
    }
    let mut state = MetaState::new(params, Arc::clone(&cover), domain, expert_config, options)?;
    let mut trace = RunTrace::new(cover.level_count());
    for loss in stream {
        state.predict()?;
        trace.rounds.push(state.update(loss)?);
    }
    Ok(trace)
}
