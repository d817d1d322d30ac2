//! Seeded adversarial loss streams.
//!
//! Every generator is a pure function of the scenario description; the same
//! description always produces the same stream. The attached bounds come from
//! [`Scenario::assumptions`] and hold for every loss over the whole domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::intervals::Interval;
use crate::numerics::{norm2, scaled};
use crate::oco::{Domain, LossFn, ProblemParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("bad scenario: {0}")]
    BadScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// `(x + 1)^2` on the first half, `(x - 1)^2` on the second, in one dimension.
    ShiftingQuadratic,
    /// Unit-scale quadratics whose center jumps at each change point.
    PiecewiseDrift,
    /// i.i.d. linear losses with uniformly random directions.
    RandomLinear,
    /// Linear losses supported on one coordinate per phase, on a box.
    SparseCoordinate,
    /// Linear losses whose direction rotates slowly in the first two coordinates.
    RotatingLinear,
}

fn default_radius() -> f64 {
    2.0
}

fn default_one() -> f64 {
    1.0
}

fn default_changes() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub horizon: usize,
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    /// Rounds at which a new segment starts. When empty, segmented kinds draw
    /// `num_changes` of them from the seed (the shifting quadratic always
    /// switches at `T/2 + 1`).
    #[serde(default)]
    pub change_points: Vec<usize>,
    #[serde(default = "default_changes")]
    pub num_changes: usize,
    /// Ball radius, or box half-width for `SparseCoordinate`.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Radius of the ball that drifting centers are drawn from.
    #[serde(default = "default_one")]
    pub center_radius: f64,
    /// Norm of every linear-loss gradient.
    #[serde(default = "default_one")]
    pub gradient_scale: f64,
    /// Radians per round for `RotatingLinear`; defaults to half a turn over the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular_speed: Option<f64>,
    /// Claimed gradient bound; rejected if the stream can exceed it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_bound: Option<f64>,
}

/// Raises a bound that does not strictly exceed 1 to 1.01.
fn above_one(v: f64) -> f64 {
    if v > 1.0 {
        v
    } else {
        1.01
    }
}

impl Scenario {
    pub fn new(kind: ScenarioKind, horizon: usize, dim: usize, seed: u64) -> Self {
        Self {
            kind,
            horizon,
            dim,
            seed,
            change_points: Vec::new(),
            num_changes: default_changes(),
            radius: default_radius(),
            center_radius: default_one(),
            gradient_scale: default_one(),
            angular_speed: None,
            grad_bound: None,
        }
    }

    pub fn shifting_quadratic(horizon: usize) -> Self {
        Self::new(ScenarioKind::ShiftingQuadratic, horizon, 1, 0)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::BadScenario(m));
        if self.horizon < 2 {
            return bad(format!("horizon must be at least 2, got {}", self.horizon));
        }
        if self.dim == 0 {
            return bad("dimension must be positive".into());
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        match self.kind {
            ScenarioKind::ShiftingQuadratic if self.dim != 1 => {
                return bad(format!(
                    "shifting quadratic is one-dimensional, got dim {}",
                    self.dim
                ))
            }
            ScenarioKind::RotatingLinear if self.dim < 2 => {
                return bad("rotating linear needs at least two dimensions".into())
            }
            _ => {}
        }
        if !(self.gradient_scale > 0.0) || !(self.center_radius >= 0.0) {
            return bad("gradient scale must be positive and center radius nonnegative".into());
        }
        if !self.change_points.is_empty() {
            let sorted = self.change_points.windows(2).all(|w| w[0] < w[1]);
            let in_range = self
                .change_points
                .iter()
                .all(|&c| 2 <= c && c <= self.horizon);
            if !sorted || !in_range {
                return bad(format!(
                    "change points must be strictly increasing within [2, {}]",
                    self.horizon
                ));
            }
        } else if self.num_changes >= self.horizon {
            return bad(format!(
                "{} change points do not fit in horizon {}",
                self.num_changes, self.horizon
            ));
        }
        if let Some(g) = self.grad_bound {
            let needed = self.required_grad_bound();
            if g < needed {
                return bad(format!(
                    "claimed gradient bound {g} is below the stream's {needed}"
                ));
            }
        }
        Ok(())
    }

    pub fn domain<S: Scalar>(&self) -> Domain<S> {
        let r = S::lit(self.radius);
        match self.kind {
            ScenarioKind::SparseCoordinate => Domain::Box { halfwidth: r },
            _ => Domain::Ball { radius: r },
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Segment start rounds, excluding round 1.
    pub fn resolved_change_points(&self) -> Vec<usize> {
        if !self.change_points.is_empty() {
            return self.change_points.clone();
        }
        match self.kind {
            ScenarioKind::ShiftingQuadratic => vec![self.horizon / 2 + 1],
            ScenarioKind::PiecewiseDrift | ScenarioKind::SparseCoordinate => {
                let mut rng = self.rng(1);
                let mut points = std::collections::BTreeSet::new();
                while points.len() < self.num_changes {
                    points.insert(rng.random_range(2..=self.horizon));
                }
                points.into_iter().collect()
            }
            ScenarioKind::RandomLinear | ScenarioKind::RotatingLinear => Vec::new(),
        }
    }

    /// Maximal runs of rounds between consecutive change points.
    pub fn segments(&self) -> Vec<Interval> {
        let mut starts = vec![1];
        starts.extend(self.resolved_change_points());
        starts
            .iter()
            .enumerate()
            .map(|(k, &s)| {
                let end = starts.get(k + 1).map_or(self.horizon, |&n| n - 1);
                Interval::new(s, end)
            })
            .collect()
    }

    fn drift_centers(&self) -> Vec<Vec<f64>> {
        let mut rng = self.rng(2);
        (0..self.segments().len())
            .map(|_| {
                let dir = unit_direction(&mut rng, self.dim);
                let r = self.center_radius * rng.random::<f64>().powf(1.0 / self.dim as f64);
                scaled(&dir, r)
            })
            .collect()
    }

    fn required_grad_bound(&self) -> f64 {
        match self.kind {
            ScenarioKind::ShiftingQuadratic => 2.0 * (self.radius + 1.0),
            ScenarioKind::PiecewiseDrift => {
                let far = self
                    .drift_centers()
                    .iter()
                    .map(|c| norm2(c))
                    .fold(0.0, f64::max);
                2.0 * (self.radius + far)
            }
            ScenarioKind::RandomLinear
            | ScenarioKind::SparseCoordinate
            | ScenarioKind::RotatingLinear => self.gradient_scale,
        }
    }

    /// Bounds `D`, `D_inf`, `G` for this stream over its domain.
    pub fn assumptions(&self) -> Result<ProblemParams<f64>, ScenarioError> {
        self.validate()?;
        let (diameter, box_bound) = match self.kind {
            ScenarioKind::SparseCoordinate => (self.radius * (self.dim as f64).sqrt(), self.radius),
            _ => (self.radius, self.radius),
        };
        let grad = self
            .grad_bound
            .unwrap_or_else(|| self.required_grad_bound());
        ProblemParams::new(
            self.dim,
            self.horizon,
            above_one(diameter),
            above_one(box_bound),
            above_one(grad),
        )
        .map_err(|e| ScenarioError::BadScenario(e.to_string()))
    }

    pub fn generate<S: Scalar>(&self) -> Result<Vec<LossFn<S>>, ScenarioError> {
        self.validate()?;
        let t_len = self.horizon;
        let lit = |v: &[f64]| v.iter().map(|&x| S::lit(x)).collect::<Vec<S>>();
        let stream = match self.kind {
            ScenarioKind::ShiftingQuadratic | ScenarioKind::PiecewiseDrift => {
                let centers = if self.kind == ScenarioKind::ShiftingQuadratic {
                    vec![vec![-1.0], vec![1.0]]
                } else {
                    self.drift_centers()
                };
                let mut out = Vec::with_capacity(t_len);
                for (seg, c) in self.segments().iter().zip(centers.iter().cycle()) {
                    for _ in seg.rounds() {
                        out.push(LossFn::quadratic(lit(c), S::one()));
                    }
                }
                out
            }
            ScenarioKind::RandomLinear => {
                let mut rng = self.rng(3);
                (0..t_len)
                    .map(|_| {
                        let g = scaled(&unit_direction(&mut rng, self.dim), self.gradient_scale);
                        LossFn::linear(lit(&g))
                    })
                    .collect()
            }
            ScenarioKind::SparseCoordinate => {
                let mut rng = self.rng(4);
                let mut out = Vec::with_capacity(t_len);
                for seg in self.segments() {
                    let coord = rng.random_range(0..self.dim);
                    let bias = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    for _ in seg.rounds() {
                        let sign = if rng.random::<f64>() < 0.7 {
                            bias
                        } else {
                            -bias
                        };
                        let mut g = vec![0.0; self.dim];
                        g[coord] = sign * self.gradient_scale;
                        out.push(LossFn::linear(lit(&g)));
                    }
                }
                out
            }
            ScenarioKind::RotatingLinear => {
                let mut rng = self.rng(5);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                let speed = self
                    .angular_speed
                    .unwrap_or(std::f64::consts::PI / t_len as f64);
                (0..t_len)
                    .map(|k| {
                        let theta = phase + speed * k as f64;
                        let mut g = vec![0.0; self.dim];
                        g[0] = self.gradient_scale * theta.cos();
                        g[1] = self.gradient_scale * theta.sin();
                        LossFn::linear(lit(&g))
                    })
                    .collect()
            }
        };
        Ok(stream)
    }
}

fn unit_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm2(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::norm2;

    fn all_kinds() -> Vec<Scenario> {
        vec![
            Scenario::shifting_quadratic(64),
            Scenario::new(ScenarioKind::PiecewiseDrift, 200, 3, 4),
            Scenario::new(ScenarioKind::RandomLinear, 200, 4, 5),
            Scenario::new(ScenarioKind::SparseCoordinate, 200, 5, 6),
            Scenario::new(ScenarioKind::RotatingLinear, 200, 3, 7),
        ]
    }

    #[test]
    fn shifting_quadratic_four_rounds() {
        let s = Scenario::shifting_quadratic(4).generate::<f64>().unwrap();
        let expect = [-1.0, -1.0, 1.0, 1.0];
        for (loss, c) in s.iter().zip(expect) {
            assert_eq!(*loss, LossFn::quadratic(vec![c], 1.0));
        }
    }

    #[test]
    fn shifting_quadratic_bounds() {
        let p = Scenario::shifting_quadratic(16).assumptions().unwrap();
        assert_eq!(p.grad_bound, 6.0);
        assert_eq!(p.diameter, 2.0);
    }

    #[test]
    fn unit_linear_bound_padded() {
        let p = Scenario::new(ScenarioKind::RandomLinear, 10, 3, 0)
            .assumptions()
            .unwrap();
        assert_eq!(p.grad_bound, 1.01);
    }

    #[test]
    fn sparse_box_bound_is_halfwidth() {
        let mut s = Scenario::new(ScenarioKind::SparseCoordinate, 10, 3, 0);
        s.radius = 1.5;
        let p = s.assumptions().unwrap();
        assert_eq!(p.box_bound, 1.5);
        assert!((p.diameter - 1.5 * 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn determinism() {
        for s in all_kinds() {
            assert_eq!(s.generate::<f64>().unwrap(), s.generate::<f64>().unwrap());
        }
        let a = Scenario::new(ScenarioKind::RandomLinear, 50, 2, 1)
            .generate::<f64>()
            .unwrap();
        let b = Scenario::new(ScenarioKind::RandomLinear, 50, 2, 2)
            .generate::<f64>()
            .unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn sparse_gradients_have_one_support_coordinate_per_phase() {
        let s = Scenario::new(ScenarioKind::SparseCoordinate, 300, 4, 9);
        let stream = s.generate::<f64>().unwrap();
        for seg in s.segments() {
            let mut support = None;
            for tau in seg.rounds() {
                let g = stream[tau - 1].subgrad(&[0.0; 4]);
                let nz: Vec<usize> = (0..4).filter(|&k| g[k] != 0.0).collect();
                assert_eq!(nz.len(), 1);
                assert_eq!(*support.get_or_insert(nz[0]), nz[0]);
            }
        }
    }

    #[test]
    fn gradients_respect_bound_over_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for s in all_kinds() {
            let p = s.assumptions().unwrap();
            let dom = s.domain::<f64>();
            let stream = s.generate::<f64>().unwrap();
            for _ in 0..10_000 {
                let raw: Vec<f64> = (0..s.dim).map(|_| rng.random_range(-3.0..3.0)).collect();
                let x = dom.project(&raw);
                let loss = &stream[rng.random_range(0..stream.len())];
                assert!(
                    norm2(&loss.subgrad(&x)) <= p.grad_bound + 1e-12,
                    "{:?}",
                    s.kind
                );
            }
        }
    }

    #[test]
    fn losses_constant_within_segments() {
        for s in [
            Scenario::shifting_quadratic(33),
            Scenario::new(ScenarioKind::PiecewiseDrift, 500, 2, 12),
        ] {
            let stream = s.generate::<f64>().unwrap();
            let segs = s.segments();
            assert_eq!(segs.last().unwrap().end, s.horizon);
            for w in segs.windows(2) {
                assert_eq!(w[0].end + 1, w[1].start);
                assert_ne!(stream[w[0].end - 1], stream[w[1].start - 1]);
            }
            for seg in segs {
                assert!(seg.rounds().all(|t| stream[t - 1] == stream[seg.start - 1]));
            }
        }
    }

    #[test]
    fn invalid_scenarios_rejected() {
        let mut s = Scenario::shifting_quadratic(8);
        s.dim = 2;
        assert!(s.generate::<f64>().is_err());
        let mut s = Scenario::shifting_quadratic(8);
        s.grad_bound = Some(5.0);
        assert!(matches!(
            s.assumptions(),
            Err(ScenarioError::BadScenario(_))
        ));
        let mut s = Scenario::new(ScenarioKind::PiecewiseDrift, 8, 2, 0);
        s.change_points = vec![5, 3];
        assert!(s.validate().is_err());
        assert!(Scenario::new(ScenarioKind::RotatingLinear, 8, 1, 0)
            .validate()
            .is_err());
    }
}
