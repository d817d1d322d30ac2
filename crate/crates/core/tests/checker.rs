use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use samuel_core::numerics::{sqrt_psd, SymMatrix};
use samuel_core::regret_lab::{gradient_outer_sum, pseudo_weight_rhs};
use samuel_core::{
    best_fixed, check_trace, min_h_energy, regret, run, CheckConfig, ExpertConfig, ExpertKind,
    GeometricCover, Interval, MetaOptions, RunTrace, Scenario, ScenarioKind, TraceError,
};

fn shifting_run(horizon: usize) -> (Scenario, RunTrace<f64>) {
    let s = Scenario::shifting_quadratic(horizon);
    let params = s.assumptions().unwrap();
    let domain = s.domain();
    let cover = Arc::new(GeometricCover::build(horizon).unwrap());
    let cfg = ExpertConfig::for_domain(ExpertKind::FullAdagrad, &domain);
    let trace = run(
        params,
        cover,
        domain,
        cfg,
        MetaOptions::default(),
        &s.generate().unwrap(),
    )
    .unwrap();
    (s, trace)
}

fn check(
    s: &Scenario,
    trace: &RunTrace<f64>,
    cfg: &CheckConfig,
) -> Result<samuel_core::CheckReport, TraceError> {
    let cover = GeometricCover::build(s.horizon).unwrap();
    check_trace(
        trace,
        &s.generate().unwrap(),
        &cover,
        &s.assumptions().unwrap(),
        &s.domain(),
        cfg,
    )
}

const EQ3: [&str; 2] = ["pseudo_weight_bound", "pseudo_weight_bound_with_frozen"];

#[test]
fn correct_runs_pass_everything_but_the_early_pseudo_weight_rounds() {
    for seed in 0..10u64 {
        let s = Scenario::new(ScenarioKind::RandomLinear, 128, 2, seed);
        let params = s.assumptions().unwrap();
        let domain = s.domain();
        let stream = s.generate().unwrap();
        let cover = Arc::new(GeometricCover::build(128).unwrap());
        let cfg = ExpertConfig::for_domain(ExpertKind::FullAdagrad, &domain);
        let trace = run(params, cover, domain, cfg, MetaOptions::default(), &stream).unwrap();
        let cfg = CheckConfig {
            segments: vec![Interval::new(1, 128), Interval::new(5, 77)],
            ..CheckConfig::default()
        };
        let report = check(&s, &trace, &cfg).unwrap();
        let failing: Vec<_> = report.failures().map(|c| c.check_name.clone()).collect();
        assert!(report.passes_except(&EQ3), "seed {seed}: {failing:?}");
        for name in [
            "weight_replay",
            "alive_set",
            "nonpositive_aggregate_regret",
            "segment_stitching",
        ] {
            assert!(report.named(name).count() >= 1, "{name} missing");
        }
    }
}

#[test]
fn pseudo_weight_bound_fails_only_at_the_start() {
    let (s, trace) = shifting_run(1024);
    let report = check(&s, &trace, &CheckConfig::default()).unwrap();
    let rec = report.named("pseudo_weight_bound").next().unwrap();
    // Round 1 carries one unit of pseudo-weight per slot: levels * Q.
    let params = s.assumptions().unwrap();
    let q = samuel_core::q_count(&params) as f64;
    let w1 = trace.rounds[0].pseudo_weight_total();
    assert!((w1 - 11.0 * q).abs() < 1e-9 * w1);
    assert!(w1 > 2.0 * pseudo_weight_rhs(1, &params));
    assert!(!rec.pass);
    let detail = rec.detail.as_deref().unwrap();
    let from: usize = detail.split_whitespace().nth(5).unwrap().parse().unwrap();
    assert!(from <= 8, "{detail}");
}

#[test]
fn injected_weight_fault_is_caught() {
    let (s, mut trace) = shifting_run(256);
    let clean = check(&s, &trace, &CheckConfig::default()).unwrap();
    let before = clean.named("pseudo_weight_bound").next().unwrap().lhs;
    let slot = &mut trace.rounds[100].slots[0];
    slot.weight_sum *= 1e6;
    slot.pseudo_weight_sum *= 1e6;
    let report = check(&s, &trace, &CheckConfig::default()).unwrap();
    let eq3 = report.named("pseudo_weight_bound").next().unwrap();
    assert!(!eq3.pass);
    assert_eq!(eq3.interval, Some(Interval::new(101, 101)));
    assert!(eq3.lhs > 1e3 * before);
    assert!(!report.named("weight_replay").next().unwrap().pass);
}

#[test]
fn malformed_traces_are_errors() {
    let (s, trace) = shifting_run(64);
    let mut cut = trace.clone();
    cut.rounds.truncate(40);
    assert!(matches!(
        check(&s, &cut, &CheckConfig::default()),
        Err(TraceError::Truncated {
            expected: 64,
            found: 40
        })
    ));
    let mut shuffled = trace.clone();
    shuffled.rounds.swap(3, 4);
    assert!(matches!(
        check(&s, &shuffled, &CheckConfig::default()),
        Err(TraceError::NonMonotone {
            position: 3,
            tau: 5
        })
    ));
}

#[test]
fn regret_additivity_with_shared_comparator() {
    let (s, trace) = shifting_run(128);
    let stream = s.generate::<f64>().unwrap();
    let cover = GeometricCover::build(128).unwrap();
    let j = Interval::new(9, 100);
    let (u, _) = best_fixed(&stream[8..100], &s.domain());
    let whole = regret(&trace, &stream, j, &u).unwrap();
    let pieces: f64 = cover
        .decompose(j)
        .unwrap()
        .iter()
        .map(|&(_, i)| regret(&trace, &stream, i, &u).unwrap())
        .sum();
    assert!((whole - pieces).abs() < 1e-9);
}

/// `tr(H^{-1} M)` via a hand-rolled Cholesky factorization of `H`.
fn energy_under(h: &[f64], m: &SymMatrix<f64>, d: usize) -> Option<f64> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = h[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    // tr(H^-1 M) = sum_k e_k^T M H^-1 e_k; solve H z = M e_k column by column.
    let mut total = 0.0;
    for k in 0..d {
        let b: Vec<f64> = (0..d).map(|i| m.get(i, k)).collect();
        let mut y = vec![0.0; d];
        for i in 0..d {
            let s: f64 = (0..i).map(|j| l[i * d + j] * y[j]).sum();
            y[i] = (b[i] - s) / l[i * d + i];
        }
        let mut z = vec![0.0; d];
        for i in (0..d).rev() {
            let s: f64 = (i + 1..d).map(|j| l[j * d + i] * z[j]).sum();
            z[i] = (y[i] - s) / l[i * d + i];
        }
        total += z[k];
    }
    Some(total)
}

/// Feasible `H` (psd, trace `d`): Wishart draws, diagonals, and
/// perturbations of the optimizer `M^{1/2}`.
fn sample_h(rng: &mut ChaCha8Rng, d: usize, root: &[f64]) -> Vec<f64> {
    let mut h = vec![0.0; d * d];
    match rng.random_range(0..3) {
        0 => {
            let b: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            for i in 0..d {
                for j in 0..d {
                    h[i * d + j] = (0..d).map(|k| b[i * d + k] * b[j * d + k]).sum();
                }
            }
        }
        1 => {
            for i in 0..d {
                h[i * d + i] = rng.random_range(1e-3..1.0);
            }
        }
        _ => {
            let t = rng.random_range(1e-6..1e-1);
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            for i in 0..d {
                for j in 0..d {
                    h[i * d + j] = root[i * d + j] + t * v[i] * v[j];
                }
                h[i * d + i] += 1e-9;
            }
        }
    }
    let tr: f64 = (0..d).map(|i| h[i * d + i]).sum();
    h.iter_mut().for_each(|v| *v *= d as f64 / tr);
    h
}

#[test]
fn closed_form_energy_lower_bounds_sampled_preconditioners() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..6 {
        let d = rng.random_range(2..=4);
        let len = rng.random_range(1..=64);
        let grads: Vec<Vec<f64>> = (0..len)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let m = gradient_outer_sum(&grads, d);
        let closed = min_h_energy(&grads, d).unwrap();
        let root = sqrt_psd(&m).unwrap().to_dense();
        let mut best = f64::INFINITY;
        for _ in 0..5_000 {
            let h = sample_h(&mut rng, d, &root);
            if let Some(e) = energy_under(&h, &m, d) {
                assert!(
                    e >= closed - 1e-9 * (1.0 + closed),
                    "sampled {e} < closed form {closed}"
                );
                best = best.min(e);
            }
        }
        // The perturbed optimizers get close: the bound is tight.
        assert!(
            best <= closed * 1.05 + 1e-9,
            "best sample {best}, closed {closed}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn best_fixed_beats_random_feasible_points(
        seed in 0u64..1000,
        kind in 0usize..3,
        boxed in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dom = if boxed {
            samuel_core::Domain::Box { halfwidth: 1.2 }
        } else {
            samuel_core::Domain::Ball { radius: 1.2 }
        };
        let losses: Vec<samuel_core::LossFn<f64>> = (0..9)
            .map(|_| {
                let v = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                match kind {
                    0 => samuel_core::LossFn::quadratic(v, rng.random_range(0.1..2.0)),
                    1 => samuel_core::LossFn::linear(v),
                    _ => samuel_core::LossFn::abs(v),
                }
            })
            .collect();
        let (x, v) = best_fixed(&losses, &dom);
        prop_assert!(dom.contains(&x));
        for _ in 0..300 {
            let y = dom.project(&[rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)]);
            let vy: f64 = losses.iter().map(|l| l.eval(&y)).sum();
            prop_assert!(v <= vy + 1e-6, "{v} > {vy}");
        }
    }
}

#[test]
fn solo_traces_skip_the_slot_checks() {
    let s = Scenario::new(ScenarioKind::RandomLinear, 64, 2, 3);
    let domain = s.domain();
    let stream = s.generate().unwrap();
    let cfg = ExpertConfig::for_domain(ExpertKind::FullAdagrad, &domain);
    let trace = samuel_core::run_solo(cfg, domain, 2, &stream).unwrap();
    let cfg = CheckConfig {
        averaged: false,
        pseudo_weights: false,
        cover_members: false,
        ..CheckConfig::default()
    };
    let report = check(&s, &trace, &cfg).unwrap();
    assert!(report.all_pass());
    assert_eq!(report.named("alive_set").count(), 0);
    assert_eq!(report.named("weight_replay").count(), 0);
}
