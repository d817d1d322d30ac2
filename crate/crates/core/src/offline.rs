//! Fixed-expert variant: one decayed full-matrix Adagrad learner per
//! `(step scale, decay)` candidate, sampled by multiplicative weights with
//! `eta_q = 1 / 2^q`. Every `K` rounds the weights reset to their birth values
//! and every learner restarts from the point just played.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::experts::{ExpertConfig, ExpertInstance, ExpertKind};
use crate::numerics::DEFAULT_FLOOR;
use crate::oco::{Domain, LossFn, ProblemParams};
use crate::samuel::{q_count, EtaGrid, MetaError};
use crate::scalar::Scalar;
use crate::trace::{RoundRecord, RunTrace, SlotRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineConfig {
    pub step_scales: Vec<f64>,
    pub decays: Vec<f64>,
    pub reinit_period: usize,
    /// Overrides `q_count`.
    pub q: Option<usize>,
    pub seed: u64,
    pub floor: f64,
    /// Clip `r` to `[-1 / (2 eta_1), 1 / (2 eta_1)]` instead of failing when a
    /// weight would turn negative.
    pub clip_regret: bool,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        Self {
            step_scales: vec![1.0, 0.1, 0.01],
            decays: vec![1.0, 0.99, 0.9],
            reinit_period: 64,
            q: None,
            seed: 0,
            floor: DEFAULT_FLOOR,
            clip_regret: false,
        }
    }
}

impl OfflineConfig {
    pub fn validate(&self) -> Result<(), MetaError> {
        let bad = |detail: String| MetaError::CorruptedState { tau: 0, detail };
        if self.step_scales.is_empty() || self.decays.is_empty() {
            return Err(bad("offline candidate lists must be nonempty".into()));
        }
        if self.reinit_period == 0 {
            return Err(bad("reinit period must be at least 1".into()));
        }
        Ok(())
    }

    /// One decayed Adagrad configuration per `(step scale, decay)` pair.
    pub fn candidates<S: Scalar>(&self) -> Vec<ExpertConfig<S>> {
        self.step_scales
            .iter()
            .flat_map(|&eta| {
                self.decays.iter().map(move |&alpha| {
                    ExpertConfig::new(ExpertKind::DecayedAdagrad, S::lit(eta))
                        .with_decay(S::lit(alpha))
                        .with_floor(S::lit(self.floor))
                })
            })
            .collect()
    }
}

pub fn run_offline<S: Scalar>(
    params: ProblemParams<S>,
    domain: Domain<S>,
    config: &OfflineConfig,
    stream: &[LossFn<S>],
) -> Result<RunTrace<S>, MetaError> {
    params.validate()?;
    config.validate()?;
    if stream.len() != params.horizon {
        return Err(MetaError::StreamLength {
            expected: params.horizon,
            found: stream.len(),
        });
    }
    let q = config.q.unwrap_or_else(|| q_count(&params));
    let eta = EtaGrid::<S>::unscaled(q);
    let candidates = config.candidates::<S>();
    let start = domain.center(params.dim);
    let spawn_all = |from: &[S], birth: usize| -> Result<Vec<ExpertInstance<S>>, MetaError> {
        candidates
            .iter()
            .map(|&c| ExpertInstance::spawn(c, domain, from, birth).map_err(MetaError::from))
            .collect()
    };
    let mut experts = spawn_all(&start, 1)?;
    let mut weights: Vec<Vec<S>> = vec![eta.birth_weights(); experts.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace = RunTrace::new(experts.len());
    let clip = S::one() / (S::lit(2.0) * eta.max());

    for (i, loss) in stream.iter().enumerate() {
        let tau = i + 1;
        let total = weights.iter().flatten().fold(S::zero(), |acc, &w| acc + w);
        if !(total > S::zero()) || !total.is_finite() {
            return Err(MetaError::CorruptedState {
                tau,
                detail: format!("total weight {total}"),
            });
        }
        let u = S::lit(rng.random::<f64>()) * total;
        let mut acc = S::zero();
        let mut chosen = experts.len() - 1;
        'pick: for (k, ws) in weights.iter().enumerate() {
            for &w in ws {
                acc += w;
                if u < acc {
                    chosen = k;
                    break 'pick;
                }
            }
        }
        let played = experts[chosen].predict().to_vec();
        let played_loss = loss.eval(&played);

        let mut records = Vec::with_capacity(experts.len());
        for (k, expert) in experts.iter().enumerate() {
            let expert_loss = loss.eval(expert.predict());
            let mut r = played_loss - expert_loss;
            if config.clip_regret {
                r = r.max(-clip).min(clip);
            }
            let product = (eta.max() * r).abs();
            if !(product <= S::one()) {
                return Err(MetaError::AssumptionViolation {
                    tau,
                    interval: format!("candidate {k}"),
                    regret: r.as_f64(),
                    product: product.as_f64(),
                });
            }
            let (weight_sum, pseudo) = weights[k]
                .iter()
                .zip(eta.values())
                .fold((S::zero(), S::zero()), |(ws, ps), (&w, &e)| {
                    (ws + w, ps + w / e)
                });
            records.push(SlotRecord {
                slot: k,
                interval: None,
                expert_loss,
                regret: r,
                weight_sum,
                pseudo_weight_sum: pseudo,
            });
        }
        for (ws, rec) in weights.iter_mut().zip(&records) {
            for (w, &e) in ws.iter_mut().zip(eta.values()) {
                *w *= S::one() + e * rec.regret;
            }
        }
        for expert in experts.iter_mut() {
            expert.update(loss)?;
        }
        if tau % config.reinit_period == 0 && tau < params.horizon {
            weights = vec![eta.birth_weights(); experts.len()];
            experts = spawn_all(&played, tau + 1)?;
            trace.reinit_events.push(tau);
        }
        trace.rounds.push(RoundRecord {
            tau,
            prediction: played,
            loss: played_loss,
            total_weight: total,
            alive_slots: experts.len() * eta.len(),
            slots: records,
        });
    }
    Ok(trace)
}
