//! Per-round records of a run.

use crate::intervals::Interval;
use crate::numerics::norm2;
use crate::scalar::Scalar;

/// What the aggregator saw of one expert slot group in one round.
///
/// Weights are the values used for that round's prediction, summed over the
/// `Q` step-size copies; the instantaneous regret `r` is shared by all copies.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord<S> {
    /// Canonical level of the covering interval, or the candidate index for
    /// the fixed-expert variant.
    pub slot: usize,
    pub interval: Option<Interval>,
    pub expert_loss: S,
    pub regret: S,
    pub weight_sum: S,
    /// `sum_q w(I, q) / eta_q`
    pub pseudo_weight_sum: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord<S> {
    pub tau: usize,
    pub prediction: Vec<S>,
    pub loss: S,
    pub total_weight: S,
    pub alive_slots: usize,
    pub slots: Vec<SlotRecord<S>>,
}

impl<S: Scalar> RoundRecord<S> {
    /// `sum_{I, q} w(I, q) r(I)`
    pub fn weighted_regret(&self) -> S {
        self.slots
            .iter()
            .fold(S::zero(), |acc, s| acc + s.weight_sum * s.regret)
    }

    /// Total pseudo-weight over alive slots.
    pub fn pseudo_weight_total(&self) -> S {
        self.slots
            .iter()
            .fold(S::zero(), |acc, s| acc + s.pseudo_weight_sum)
    }

    pub fn prediction_norm(&self) -> S {
        norm2(&self.prediction)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace<S> {
    pub rounds: Vec<RoundRecord<S>>,
    /// Number of slot column groups (cover levels, or candidates).
    pub slot_columns: usize,
    /// Rounds after which the fixed-expert variant reset its weights.
    pub reinit_events: Vec<usize>,
}

impl<S: Scalar> RunTrace<S> {
    pub fn new(slot_columns: usize) -> Self {
        Self {
            rounds: Vec::new(),
            slot_columns,
            reinit_events: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn predictions(&self) -> Vec<Vec<S>> {
        self.rounds.iter().map(|r| r.prediction.clone()).collect()
    }

    pub fn total_loss(&self) -> S {
        self.rounds.iter().fold(S::zero(), |acc, r| acc + r.loss)
    }

    pub fn loss_over(&self, interval: Interval) -> S {
        self.rounds[interval.start - 1..interval.end]
            .iter()
            .fold(S::zero(), |acc, r| acc + r.loss)
    }
}
