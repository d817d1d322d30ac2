//! Projections onto the Euclidean ball and the axis-aligned box, and the
//! metric-weighted projection onto the ball used by full-matrix Adagrad.

use crate::scalar::Scalar;

use super::{eigh, norm2, NumericsError, SymMatrix};

const MAX_ROOT_ITERATIONS: usize = 200;

/// Scales `y` down until its computed norm is at most `radius`.
///
/// A single `radius / norm` rescale can land one ulp outside the ball, which
/// would break idempotence of the projection.
fn shrink_into_ball<S: Scalar>(y: &mut [S], radius: S) {
    let norm = norm2(y);
    if norm <= radius {
        return;
    }
    let original: Vec<S> = y.to_vec();
    let mut factor = S::one();
    loop {
        for (yi, &oi) in y.iter_mut().zip(&original) {
            *yi = (oi * radius) / norm * factor;
        }
        if norm2(y) <= radius {
            return;
        }
        factor *= S::one() - S::epsilon();
    }
}

/// Euclidean projection onto `{y : ||y||_2 <= radius}`.
pub fn project_ball<S: Scalar>(x: &[S], radius: S) -> Vec<S> {
    let mut y = x.to_vec();
    shrink_into_ball(&mut y, radius);
    y
}

/// Coordinate-wise clamp to `[-halfwidth, halfwidth]`.
pub fn project_box<S: Scalar>(x: &[S], halfwidth: S) -> Vec<S> {
    x.iter()
        .map(|&v| v.max(-halfwidth).min(halfwidth))
        .collect()
}

/// `argmin_{||y|| <= radius} (y - x)^T A (y - x)` for positive definite `A`.
///
/// With `A = V diag(lambda) V^T` and `z = V^T x`, the KKT point is
/// `y(mu) = V diag(lambda / (lambda + mu)) z`, whose norm decreases in `mu`.
/// The multiplier solves `1 / ||y(mu)|| = 1 / radius`; that secular function is
/// close to linear, so safeguarded Newton converges in a handful of steps.
pub fn project_mahalanobis_ball<S: Scalar>(
    x: &[S],
    radius: S,
    metric: &SymMatrix<S>,
) -> Result<Vec<S>, NumericsError> {
    if x.len() != metric.dim() {
        return Err(NumericsError::DimensionMismatch {
            expected: metric.dim(),
            found: x.len(),
        });
    }
    let norm_x = norm2(x);
    if norm_x <= radius {
        return Ok(x.to_vec());
    }
    let eig = eigh(metric)?;
    let tiny = S::min_positive_value().sqrt();
    let lambdas: Vec<S> = eig.values.iter().map(|&l| l.max(tiny)).collect();
    let z = eig.to_eigenbasis(x);
    let weighted: Vec<S> = lambdas.iter().zip(&z).map(|(&l, &zi)| l * zi).collect();

    // ||y(mu)|| and d/dmu of the secular function 1/||y(mu)||.
    let eval = |mu: S| -> (S, S) {
        let mut sq = S::zero();
        let mut cube = S::zero();
        for (&a, &l) in weighted.iter().zip(&lambdas) {
            let den = l + mu;
            let t = a / den;
            sq += t * t;
            cube += t * t / den;
        }
        let norm = sq.sqrt();
        (norm, cube / (norm * norm * norm))
    };

    let inv_r = S::one() / radius;
    let mut lo = S::zero();
    let mut hi = eig.max_value().max(tiny) * norm_x / radius;
    let mut mu = S::zero();
    let tol = S::lit(16.0) * S::epsilon();
    let mut converged = false;
    for _ in 0..MAX_ROOT_ITERATIONS {
        let (norm, slope) = eval(mu);
        let phi = S::one() / norm - inv_r;
        if (norm - radius).abs() <= tol * radius {
            converged = true;
            break;
        }
        if phi < S::zero() {
            lo = lo.max(mu);
        } else {
            hi = hi.min(mu);
        }
        if hi - lo <= tol * hi.max(S::one()) {
            converged = true;
            break;
        }
        let newton = mu - phi / slope;
        mu = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) / S::lit(2.0)
        };
    }
    if !converged {
        return Err(NumericsError::ProjectionFailure {
            iterations: MAX_ROOT_ITERATIONS,
        });
    }

    let yz: Vec<S> = weighted
        .iter()
        .zip(&lambdas)
        .map(|(&a, &l)| a / (l + mu))
        .collect();
    let mut y = eig.from_eigenbasis(&yz);
    shrink_into_ball(&mut y, radius);
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ball_interior_and_radial() {
        assert_eq!(project_ball(&[0.3f64, 0.4], 1.0), vec![0.3, 0.4]);
        let y = project_ball(&[3.0f64, 4.0], 1.0);
        assert!((y[0] - 0.6).abs() < 1e-15 && (y[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn box_examples() {
        assert_eq!(project_box(&[0.5f64, -0.2], 1.0), vec![0.5, -0.2]);
        assert_eq!(project_box(&[2.0f64, -3.0], 1.0), vec![1.0, -1.0]);
    }

    #[test]
    fn mahalanobis_identity_reduces_to_euclidean() {
        let y = project_mahalanobis_ball(&[3.0f64, 4.0], 1.0, &SymMatrix::identity(2)).unwrap();
        assert!((y[0] - 0.6).abs() < 1e-12 && (y[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn mahalanobis_interior_point_fixed() {
        let metric = SymMatrix::from_diag(&[1.0f64, 50.0]);
        let x = [0.1, -0.7];
        assert_eq!(
            project_mahalanobis_ball(&x, 1.0, &metric).unwrap(),
            x.to_vec()
        );
    }

    #[test]
    fn mahalanobis_matches_grid_search() {
        let metric = SymMatrix::from_diag(&[1.0f64, 100.0]);
        let x = [2.0, 2.0];
        let y = project_mahalanobis_ball(&x, 1.0, &metric).unwrap();
        // Oracle: the minimizer lies on the unit circle since x is outside.
        let cost = |p: [f64; 2]| (p[0] - x[0]).powi(2) + 100.0 * (p[1] - x[1]).powi(2);
        let mut best = ([0.0, 0.0], f64::INFINITY);
        for k in 0..10_000 {
            let t = 2.0 * std::f64::consts::PI * k as f64 / 10_000.0;
            let p = [t.cos(), t.sin()];
            let c = cost(p);
            if c < best.1 {
                best = (p, c);
            }
        }
        assert!((y[0] - best.0[0]).abs() < 1e-3, "{y:?} vs {:?}", best.0);
        assert!((y[1] - best.0[1]).abs() < 1e-3, "{y:?} vs {:?}", best.0);
        assert!(cost([y[0], y[1]]) <= best.1 + 1e-9);
    }

    #[test]
    fn mahalanobis_full_metric_feasible_and_optimal_vs_perturbations() {
        let mut metric = SymMatrix::scaled_identity(3, 1e-8f64);
        metric.add_outer(&[1.0, 2.0, -1.0], 1.0);
        metric.add_outer(&[0.0, 1.0, 3.0], 1.0);
        let x = [4.0, -3.0, 2.0];
        let y = project_mahalanobis_ball(&x, 1.5, &metric).unwrap();
        assert!(norm2(&y) <= 1.5 + 1e-10);
        let cost = |p: &[f64]| metric.quad_form(&crate::numerics::sub(p, &x));
        let c0 = cost(&y);
        for k in 0..500 {
            let t = k as f64 * 0.37;
            let dir = [t.cos(), t.sin() * 0.5, (1.3 * t).sin()];
            let cand: Vec<f64> = y.iter().zip(dir).map(|(a, b)| a + 1e-3 * b).collect();
            let cand = project_ball(&cand, 1.5);
            assert!(cost(&cand) >= c0 - 1e-9);
        }
    }

    fn vec2() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 3)
    }

    proptest! {
        #[test]
        fn ball_projection_idempotent_and_nonexpansive(x in vec2(), y in vec2(), r in 0.5f64..3.0) {
            let px = project_ball(&x, r);
            prop_assert_eq!(project_ball(&px, r), px.clone());
            prop_assert!(norm2(&px) <= r);
            if norm2(&x) > r {
                prop_assert!((norm2(&px) - r).abs() <= 1e-12);
            }
            let py = project_ball(&y, r);
            prop_assert!(crate::numerics::distance(&px, &py) <= crate::numerics::distance(&x, &y) + 1e-12);
        }

        #[test]
        fn box_projection_idempotent_and_bounded(x in vec2(), h in 0.5f64..3.0) {
            let px = project_box(&x, h);
            prop_assert_eq!(project_box(&px, h), px.clone());
            prop_assert!(px.iter().all(|v| v.abs() <= h));
        }

        #[test]
        fn mahalanobis_projection_idempotent(x in vec2(), a in 0.01f64..50.0, b in 0.01f64..50.0, c in -0.5f64..0.5) {
            let off = c * (a * b).sqrt();
            let metric = SymMatrix::from_fn(3, |i, j| match (i, j) {
                (0, 0) => a,
                (1, 1) => b,
                (2, 2) => 1.0,
                (0, 1) => off,
                _ => 0.0,
            });
            let px = project_mahalanobis_ball(&x, 1.0, &metric).unwrap();
            prop_assert!(norm2(&px) <= 1.0 + 1e-10);
            prop_assert_eq!(project_mahalanobis_ball(&px, 1.0, &metric).unwrap(), px.clone());
        }
    }
}
