//! Verification oracles: best fixed comparators, the full-matrix energy
//! `min_H sum g^T H^-1 g`, bound evaluation, and trace-level invariant checks.
//!
//! Nothing here shares code paths with the algorithm beyond the loss oracles;
//! the checker rebuilds every quantity it asserts from the trace alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::intervals::{GeometricCover, Interval};
use crate::numerics::{self, norm2, trace_sqrt, NumericsError, SymMatrix};
use crate::oco::{Domain, LossFn, ProblemParams};
use crate::samuel::{q_count, EtaGrid};
use crate::scalar::Scalar;
use crate::trace::RunTrace;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TraceError {
    #[error("trace has {found} rounds, expected {expected}")]
    Truncated { expected: usize, found: usize },
    #[error("round counter at position {position} is {tau}")]
    NonMonotone { position: usize, tau: usize },
    #[error("malformed trace: {0}")]
    Malformed(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

const DESCENT_ITERS: usize = 50_000;
const POLISH_ITERS: usize = 5_000;

/// Minimizer of `sum l(x)` over the domain and the minimum value.
///
/// Quadratic, linear, and (on a box) absolute-value intervals have exact
/// closed forms; anything else falls back to averaged projected subgradient
/// descent followed by a short polish from the best iterate.
pub fn best_fixed<S: Scalar>(losses: &[LossFn<S>], domain: &Domain<S>) -> (Vec<S>, S) {
    assert!(!losses.is_empty(), "best_fixed needs at least one loss");
    let dim = losses[0].dim();
    let point = closed_form(losses, domain, dim).unwrap_or_else(|| descend(losses, domain, dim));
    let value = total_loss(losses, &point);
    (point, value)
}

fn closed_form<S: Scalar>(losses: &[LossFn<S>], domain: &Domain<S>, dim: usize) -> Option<Vec<S>> {
    match &losses[0] {
        LossFn::Quadratic { .. } => {
            // sum a_k ||x - c_k||^2 = A ||x - c_bar||^2 + const, so the
            // Euclidean projection of the weighted mean is exact.
            let mut acc = numerics::zeros(dim);
            let mut mass = S::zero();
            for l in losses {
                let LossFn::Quadratic { center, scale } = l else {
                    return None;
                };
                numerics::axpy(&mut acc, *scale, center);
                mass += *scale;
            }
            if !(mass > S::zero()) {
                return None;
            }
            Some(domain.project(&numerics::scaled(&acc, S::one() / mass)))
        }
        LossFn::Linear { .. } => {
            let mut sum = numerics::zeros(dim);
            for l in losses {
                let LossFn::Linear { g } = l else {
                    return None;
                };
                numerics::axpy(&mut sum, S::one(), g);
            }
            Some(match *domain {
                Domain::Ball { radius } => {
                    let n = norm2(&sum);
                    if n > S::zero() {
                        domain.project(&numerics::scaled(&sum, -radius / n))
                    } else {
                        domain.center(dim)
                    }
                }
                Domain::Box { halfwidth } => sum
                    .iter()
                    .map(|&s| {
                        if s > S::zero() {
                            -halfwidth
                        } else if s < S::zero() {
                            halfwidth
                        } else {
                            S::zero()
                        }
                    })
                    .collect(),
            })
        }
        LossFn::Abs { .. } => {
            let Domain::Box { halfwidth } = *domain else {
                return None;
            };
            // Separable: each coordinate is a sum of |x - c|, minimized at a median.
            let mut point = Vec::with_capacity(dim);
            for i in 0..dim {
                let mut cs = Vec::with_capacity(losses.len());
                for l in losses {
                    let LossFn::Abs { center } = l else {
                        return None;
                    };
                    cs.push(center[i]);
                }
                cs.sort_by(|a, b| a.partial_cmp(b).expect("finite centers"));
                let m = cs[(cs.len() - 1) / 2];
                point.push(m.max(-halfwidth).min(halfwidth));
            }
            Some(point)
        }
    }
}

fn descend<S: Scalar>(losses: &[LossFn<S>], domain: &Domain<S>, dim: usize) -> Vec<S> {
    let reach = domain.l2_radius(dim);
    let x0 = domain.center(dim);
    let mut best = (x0.clone(), total_loss(losses, &x0));
    let avg = subgradient_run(losses, domain, x0, reach, DESCENT_ITERS, &mut best);
    let avg_value = total_loss(losses, &avg);
    let start = if avg_value < best.1 {
        avg
    } else {
        best.0.clone()
    };
    if avg_value < best.1 {
        best = (start.clone(), avg_value);
    }
    subgradient_run(
        losses,
        domain,
        start,
        reach * S::lit(1e-3),
        POLISH_ITERS,
        &mut best,
    );
    best.0
}

fn total_loss<S: Scalar>(losses: &[LossFn<S>], x: &[S]) -> S {
    losses.iter().fold(S::zero(), |acc, l| acc + l.eval(x))
}

/// Normalized projected subgradient steps `scale / sqrt(k)`; tracks the best
/// iterate in `best` and returns the running average.
fn subgradient_run<S: Scalar>(
    losses: &[LossFn<S>],
    domain: &Domain<S>,
    mut x: Vec<S>,
    scale: S,
    iters: usize,
    best: &mut (Vec<S>, S),
) -> Vec<S> {
    let mut avg = x.clone();
    for k in 1..=iters {
        let mut g = numerics::zeros(x.len());
        for l in losses {
            numerics::axpy(&mut g, S::one(), &l.subgrad(&x));
        }
        let n = norm2(&g);
        if !(n > S::zero()) {
            break;
        }
        let step = scale / (n * S::from_count(k).sqrt());
        x = domain.project(&numerics::sub(&x, &numerics::scaled(&g, step)));
        let v = total_loss(losses, &x);
        if v < best.1 {
            *best = (x.clone(), v);
        }
        let w = S::one() / S::from_count(k + 1);
        for (a, &xi) in avg.iter_mut().zip(&x) {
            *a += w * (xi - *a);
        }
    }
    avg
}

/// `sum g g^T` over a gradient sequence.
pub fn gradient_outer_sum<S: Scalar>(grads: &[Vec<S>], dim: usize) -> SymMatrix<S> {
    let mut m = SymMatrix::zeros(dim);
    for g in grads {
        m.add_outer(g, S::one());
    }
    m
}

/// `inf { sum g^T H^-1 g : H psd, tr H <= d } = tr(M^{1/2})^2 / d` with
/// `M = sum g g^T`.
///
/// For rank-deficient `M` this is an infimum approached as `H` loses rank,
/// not a minimum.
pub fn min_h_energy<S: Scalar>(grads: &[Vec<S>], dim: usize) -> Result<S, NumericsError> {
    energy_of(&gradient_outer_sum(grads, dim))
}

fn energy_of<S: Scalar>(m: &SymMatrix<S>) -> Result<S, NumericsError> {
    let t = trace_sqrt(m)?;
    Ok(t * t / S::from_count(m.dim()))
}

/// `D ln T max{G sqrt(ln T), sqrt(d E)}` with `E = min_h_energy`, constant 1.
pub fn theorem1_bound<S: Scalar>(
    grads: &[Vec<S>],
    params: &ProblemParams<S>,
) -> Result<S, NumericsError> {
    Ok(bound_from_energy(min_h_energy(grads, params.dim)?, params))
}

fn bound_from_energy<S: Scalar>(energy: S, params: &ProblemParams<S>) -> S {
    let ln_t = S::from_count(params.horizon).ln();
    let first = params.grad_bound * ln_t.sqrt();
    let second = (S::from_count(params.dim) * energy).sqrt();
    params.diameter * ln_t * first.max(second)
}

/// `D_inf sum_i sqrt(sum_tau g_{tau,i}^2)`: per-coordinate norms of the
/// gradient sequence.
pub fn diag_bound<S: Scalar>(grads: &[Vec<S>], params: &ProblemParams<S>) -> S {
    let mut sq = numerics::zeros::<S>(params.dim);
    for g in grads {
        for (s, &v) in sq.iter_mut().zip(g) {
            *s += v * v;
        }
    }
    params.box_bound * sq.into_iter().fold(S::zero(), |acc, s| acc + s.sqrt())
}

/// `D_inf sum_i |sum_tau g_{tau,i}|`: the coordinate-of-the-sum reading.
/// Reported alongside [`diag_bound`], never checked.
pub fn diag_bound_summed<S: Scalar>(grads: &[Vec<S>], params: &ProblemParams<S>) -> S {
    let mut sum = numerics::zeros::<S>(params.dim);
    for g in grads {
        numerics::axpy(&mut sum, S::one(), g);
    }
    params.box_bound * numerics::norm1(&sum)
}

/// Gradients of each round's loss at the point played that round.
pub fn played_gradients<S: Scalar>(trace: &RunTrace<S>, stream: &[LossFn<S>]) -> Vec<Vec<S>> {
    trace
        .rounds
        .iter()
        .zip(stream)
        .map(|(r, l)| l.subgrad(&r.prediction))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub interval: Interval,
    pub algo_loss: f64,
    pub comparator: Vec<f64>,
    pub comparator_loss: f64,
    pub regret: f64,
    /// [`theorem1_bound`] over the interval, constant 1.
    pub full_matrix_bound: f64,
    pub diag_bound: f64,
    pub diag_bound_summed: f64,
    pub slack: f64,
    /// `regret <= slack * full_matrix_bound`
    pub bound_satisfied: bool,
}

/// Regret of a recorded run over `interval` against the best fixed point.
pub fn regret_report<S: Scalar>(
    trace: &RunTrace<S>,
    stream: &[LossFn<S>],
    domain: &Domain<S>,
    params: &ProblemParams<S>,
    interval: Interval,
    slack: f64,
) -> Result<RegretReport, TraceError> {
    if interval.start < 1 || interval.end > trace.len().min(stream.len()) {
        return Err(TraceError::Malformed(format!(
            "interval {interval} outside the {} recorded rounds",
            trace.len()
        )));
    }
    let range = interval.start - 1..interval.end;
    let (comparator, comparator_loss) = best_fixed(&stream[range.clone()], domain);
    let algo_loss = trace.loss_over(interval);
    let grads: Vec<Vec<S>> = trace.rounds[range.clone()]
        .iter()
        .zip(&stream[range])
        .map(|(r, l)| l.subgrad(&r.prediction))
        .collect();
    let bound = theorem1_bound(&grads, params)?.as_f64();
    let regret = (algo_loss - comparator_loss).as_f64();
    Ok(RegretReport {
        interval,
        algo_loss: algo_loss.as_f64(),
        comparator: comparator.iter().map(|v| v.as_f64()).collect(),
        comparator_loss: comparator_loss.as_f64(),
        regret,
        full_matrix_bound: bound,
        diag_bound: diag_bound(&grads, params).as_f64(),
        diag_bound_summed: diag_bound_summed(&grads, params).as_f64(),
        slack,
        bound_satisfied: regret <= slack * bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub theorem1_slack: f64,
    pub eq3_slack: f64,
    /// Relative tolerance of the non-positivity check, in units of `W G D`.
    pub tolerance: f64,
    /// Must match the run's `q` override, if any.
    pub q: Option<usize>,
    /// The aggregate was a weighted average (the non-positivity identity only
    /// holds then).
    pub averaged: bool,
    /// Check the pseudo-weight bound (meaningful for the interval
    /// meta-algorithm only).
    pub pseudo_weights: bool,
    /// Check every cover member, not just `segments`.
    pub cover_members: bool,
    /// Extra intervals checked through their decomposition.
    pub segments: Vec<Interval>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            theorem1_slack: 10.0,
            eq3_slack: 2.0,
            tolerance: 1e-9,
            q: None,
            averaged: true,
            pseudo_weights: true,
            cover_members: true,
            segments: Vec::new(),
        }
    }
}

/// One line of a checker report; `pass` iff `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check_name: String,
    pub interval: Option<Interval>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckRecord {
    fn new(name: &str, interval: Option<Interval>, lhs: f64, rhs: f64, slack: f64) -> Self {
        Self {
            check_name: name.to_string(),
            interval,
            lhs,
            rhs,
            slack,
            pass: lhs <= rhs,
            detail: None,
        }
    }

    fn with_detail(mut self, detail: String) -> Self {
        self.detail = Some(detail);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CheckReport {
    pub checks: Vec<CheckRecord>,
}

impl CheckReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Records whose name is `name`.
    pub fn named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a CheckRecord> + 'a {
        self.checks.iter().filter(move |c| c.check_name == name)
    }

    /// Passes, ignoring the named checks.
    pub fn passes_except(&self, ignored: &[&str]) -> bool {
        self.failures()
            .all(|c| ignored.contains(&c.check_name.as_str()))
    }
}

/// Structural validation: length, round numbering, dimensions, finiteness.
pub fn validate_trace<S: Scalar>(
    trace: &RunTrace<S>,
    params: &ProblemParams<S>,
) -> Result<(), TraceError> {
    if trace.len() != params.horizon {
        return Err(TraceError::Truncated {
            expected: params.horizon,
            found: trace.len(),
        });
    }
    for (k, r) in trace.rounds.iter().enumerate() {
        if r.tau != k + 1 {
            return Err(TraceError::NonMonotone {
                position: k,
                tau: r.tau,
            });
        }
        if r.prediction.len() != params.dim {
            return Err(TraceError::DimensionMismatch {
                expected: params.dim,
                found: r.prediction.len(),
            });
        }
        let finite = r.loss.is_finite()
            && r.total_weight.is_finite()
            && r.slots.iter().all(|s| {
                s.regret.is_finite() && s.weight_sum.is_finite() && s.pseudo_weight_sum.is_finite()
            });
        if !finite {
            return Err(TraceError::Malformed(format!(
                "non-finite value in round {}",
                r.tau
            )));
        }
    }
    Ok(())
}

/// Right-hand side of the pseudo-weight bound before slack:
/// `tau (ln tau + 1) ln(d T D^2 G^2) ln T`.
pub fn pseudo_weight_rhs(tau: usize, params: &ProblemParams<f64>) -> f64 {
    let t = tau as f64;
    t * (t.ln() + 1.0) * params.log_scale() * (params.horizon as f64).ln()
}

/// Runs every trace-level check.
///
/// Meta-algorithm traces (slots labelled by interval) additionally get the
/// alive-set and weight-replay checks.
pub fn check_trace<S: Scalar>(
    trace: &RunTrace<S>,
    stream: &[LossFn<S>],
    cover: &GeometricCover,
    params: &ProblemParams<S>,
    domain: &Domain<S>,
    config: &CheckConfig,
) -> Result<CheckReport, TraceError> {
    validate_trace(trace, params)?;
    if stream.len() != trace.len() {
        return Err(TraceError::Truncated {
            expected: trace.len(),
            found: stream.len(),
        });
    }
    let mut report = CheckReport::default();
    report.checks.push(CheckRecord::new(
        "trace_complete",
        Some(Interval::new(1, params.horizon)),
        trace.len() as f64,
        params.horizon as f64,
        1.0,
    ));
    let meta = trace.rounds.iter().any(|r| !r.slots.is_empty())
        && trace
            .rounds
            .iter()
            .all(|r| r.slots.iter().all(|s| s.interval.is_some()));
    if meta {
        check_alive_sets(trace, cover, &mut report)?;
        check_weight_replay(trace, params, config, &mut report);
    }
    if config.averaged {
        check_nonpositive(trace, params, config, &mut report);
    }
    if config.pseudo_weights {
        check_pseudo_weights(trace, params, config, meta, &mut report);
    }
    check_regret(trace, stream, cover, params, domain, config, &mut report)?;
    Ok(report)
}

fn check_alive_sets<S: Scalar>(
    trace: &RunTrace<S>,
    cover: &GeometricCover,
    report: &mut CheckReport,
) -> Result<(), TraceError> {
    let mut mismatches = 0usize;
    let mut first = None;
    for r in &trace.rounds {
        let mut logged: Vec<Interval> = r.slots.iter().filter_map(|s| s.interval).collect();
        logged.sort();
        let mut expect: Vec<Interval> = cover
            .active(r.tau)
            .map_err(|e| TraceError::Malformed(e.to_string()))?
            .into_iter()
            .map(|(_, i)| i)
            .collect();
        expect.sort();
        if logged != expect {
            mismatches += 1;
            first.get_or_insert(r.tau);
        }
    }
    let mut rec = CheckRecord::new("alive_set", None, mismatches as f64, 0.0, 1.0);
    if let Some(tau) = first {
        rec.interval = Some(Interval::new(tau, tau));
        rec = rec.with_detail(format!("first mismatch in round {tau}"));
    }
    report.checks.push(rec);
    Ok(())
}

fn eta_grid<S: Scalar>(params: &ProblemParams<S>, config: &CheckConfig) -> EtaGrid<S> {
    EtaGrid::for_params(params, config.q.unwrap_or_else(|| q_count(params)))
}

/// Rebuilds each interval's per-`q` weights from birth values and the logged
/// regrets, and compares their sums with the logged ones.
fn check_weight_replay<S: Scalar>(
    trace: &RunTrace<S>,
    params: &ProblemParams<S>,
    config: &CheckConfig,
    report: &mut CheckReport,
) {
    let eta = eta_grid(params, config);
    let mut live: BTreeMap<Interval, Vec<S>> = BTreeMap::new();
    let mut worst = (0.0f64, None);
    for r in &trace.rounds {
        for s in &r.slots {
            let interval = s.interval.expect("meta trace");
            let w = live.entry(interval).or_insert_with(|| eta.birth_weights());
            let (ws, ps) = w
                .iter()
                .zip(eta.values())
                .fold((S::zero(), S::zero()), |(a, b), (&w, &e)| {
                    (a + w, b + w / e)
                });
            let err = ((ws - s.weight_sum).abs() / ws.max(S::min_positive_value()))
                .max((ps - s.pseudo_weight_sum).abs() / ps.max(S::min_positive_value()))
                .as_f64();
            if !(err <= worst.0) {
                worst = (err, Some(Interval::new(r.tau, r.tau)));
            }
            for (wq, &e) in w.iter_mut().zip(eta.values()) {
                *wq *= S::one() + e * s.regret;
            }
        }
        live.retain(|i, _| i.contains(r.tau + 1));
    }
    let tol = 1e3 * S::epsilon().as_f64();
    report.checks.push(CheckRecord::new(
        "weight_replay",
        worst.1,
        worst.0,
        tol,
        1.0,
    ));
}

fn check_nonpositive<S: Scalar>(
    trace: &RunTrace<S>,
    params: &ProblemParams<S>,
    config: &CheckConfig,
    report: &mut CheckReport,
) {
    let gd = (params.grad_bound * params.diameter).as_f64();
    let mut worst: Option<(f64, f64, usize)> = None;
    for r in &trace.rounds {
        let lhs = r.weighted_regret().as_f64();
        let rhs = config.tolerance * r.total_weight.as_f64() * gd;
        let margin = lhs - rhs;
        if worst.is_none_or(|(l, h, _)| margin > l - h) {
            worst = Some((lhs, rhs, r.tau));
        }
    }
    if let Some((lhs, rhs, tau)) = worst {
        report.checks.push(CheckRecord::new(
            "nonpositive_aggregate_regret",
            Some(Interval::new(tau, tau)),
            lhs,
            rhs,
            config.tolerance,
        ));
    }
}

/// The pseudo-weight bound, once over alive slots and once including the
/// frozen pseudo-weights of retired intervals. Each record holds the round
/// with the largest `lhs / rhs`; the detail names the first round from which
/// the bound holds through the end of the run.
fn check_pseudo_weights<S: Scalar>(
    trace: &RunTrace<S>,
    params: &ProblemParams<S>,
    config: &CheckConfig,
    meta: bool,
    report: &mut CheckReport,
) {
    let p64 = params.cast::<f64>();
    let mut frozen = 0.0f64;
    let mut series = [
        Vec::with_capacity(trace.len()),
        Vec::with_capacity(trace.len()),
    ];
    for r in &trace.rounds {
        let alive = r.pseudo_weight_total().as_f64();
        series[0].push(alive);
        series[1].push(alive + frozen);
        if meta {
            for s in &r.slots {
                if s.interval.is_some_and(|i| i.end == r.tau) {
                    // pseudo-weight after the final update: sum_q (w/eta)(1 + eta r)
                    frozen += (s.pseudo_weight_sum + s.regret * s.weight_sum).as_f64();
                }
            }
        }
    }
    let names = ["pseudo_weight_bound", "pseudo_weight_bound_with_frozen"];
    let count = if meta { 2 } else { 1 };
    for (name, values) in names.iter().zip(&series).take(count) {
        let mut worst = (f64::NEG_INFINITY, 0.0, 0.0, 1usize);
        let mut holds_from = values.len() + 1;
        for (k, &lhs) in values.iter().enumerate().rev() {
            let tau = k + 1;
            let rhs = config.eq3_slack * pseudo_weight_rhs(tau, &p64);
            if lhs <= rhs && holds_from == tau + 1 {
                holds_from = tau;
            }
            let ratio = lhs / rhs;
            if ratio >= worst.0 {
                worst = (ratio, lhs, rhs, tau);
            }
        }
        let (_, lhs, rhs, tau) = worst;
        let detail = if holds_from <= values.len() {
            format!("holds for every round from {holds_from} on")
        } else {
            "fails in the final round".to_string()
        };
        report.checks.push(
            CheckRecord::new(
                name,
                Some(Interval::new(tau, tau)),
                lhs,
                rhs,
                config.eq3_slack,
            )
            .with_detail(detail),
        );
    }
}

struct RegretContext<'a, S> {
    trace: &'a RunTrace<S>,
    stream: &'a [LossFn<S>],
    domain: &'a Domain<S>,
    params: &'a ProblemParams<S>,
    /// `prefix[k] = sum_{tau <= k} g g^T` at played points.
    prefix: Vec<SymMatrix<S>>,
}

impl<S: Scalar> RegretContext<'_, S> {
    fn regret(&self, i: Interval) -> f64 {
        let (_, best) = best_fixed(&self.stream[i.start - 1..i.end], self.domain);
        (self.trace.loss_over(i) - best).as_f64()
    }

    fn bound(&self, i: Interval) -> Result<f64, TraceError> {
        let m = self.prefix[i.end].sub(&self.prefix[i.start - 1]);
        Ok(bound_from_energy(energy_of(&m)?, self.params).as_f64())
    }
}

fn check_regret<S: Scalar>(
    trace: &RunTrace<S>,
    stream: &[LossFn<S>],
    cover: &GeometricCover,
    params: &ProblemParams<S>,
    domain: &Domain<S>,
    config: &CheckConfig,
    report: &mut CheckReport,
) -> Result<(), TraceError> {
    let mut prefix = Vec::with_capacity(trace.len() + 1);
    let mut acc = SymMatrix::zeros(params.dim);
    prefix.push(acc.clone());
    for g in played_gradients(trace, stream) {
        acc.add_outer(&g, S::one());
        prefix.push(acc.clone());
    }
    let ctx = RegretContext {
        trace,
        stream,
        domain,
        params,
        prefix,
    };
    let slack = config.theorem1_slack;

    if config.cover_members {
        let mut worst: Option<(f64, f64, Interval)> = None;
        let mut failures = Vec::new();
        for (_, i) in cover.members() {
            let lhs = ctx.regret(i);
            let rhs = slack * ctx.bound(i)?;
            if lhs > rhs {
                failures.push(CheckRecord::new(
                    "interval_regret",
                    Some(i),
                    lhs,
                    rhs,
                    slack,
                ));
            }
            if worst.is_none_or(|(l, r, _)| lhs / rhs > l / r) {
                worst = Some((lhs, rhs, i));
            }
        }
        if let Some((lhs, rhs, i)) = worst {
            report.checks.push(
                CheckRecord::new("interval_regret_worst", Some(i), lhs, rhs, slack).with_detail(
                    format!(
                        "{} cover members, {} violations",
                        cover.member_count(),
                        failures.len()
                    ),
                ),
            );
        }
        report.checks.extend(failures);
    }

    for &j in &config.segments {
        if j.start < 1 || j.end > trace.len() || j.start > j.end {
            return Err(TraceError::Malformed(format!(
                "segment {j} outside the run"
            )));
        }
        let pieces = cover
            .decompose(j)
            .map_err(|e| TraceError::Malformed(e.to_string()))?;
        let lhs = ctx.regret(j);
        let mut bound = 0.0;
        let mut piece_regret = 0.0;
        for &(_, i) in &pieces {
            bound += ctx.bound(i)?;
            piece_regret += ctx.regret(i);
        }
        report.checks.push(
            CheckRecord::new("segment_regret", Some(j), lhs, slack * bound, slack)
                .with_detail(format!("{} cover pieces", pieces.len())),
        );
        // One comparator for all of J can only do worse than one per piece.
        let tol = 1e-9 * (1.0 + piece_regret.abs());
        report.checks.push(CheckRecord::new(
            "segment_stitching",
            Some(j),
            lhs,
            piece_regret + tol,
            1.0,
        ));
    }
    Ok(())
}
