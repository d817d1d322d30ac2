//! Run configuration: a TOML file with `[scenario]`, `[algorithm]`,
//! `[checks]` and `[output]` sections plus a top-level `seeds` list.

use std::path::{Path, PathBuf};

use samuel_core::{
    q_count, BirthPoint, ExpertKind, GeometricCover, Interval, ProblemParams, ProjectionMode,
    Scenario,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Environment variable supplying the seed when the config lists none.
pub const SEED_ENV: &str = "SAMUEL_SEED";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: cannot read config: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}:{}: {message}", line.map_or("?".to_string(), |l| l.to_string()))]
    Invalid {
        path: String,
        line: Option<usize>,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmName {
    Samuel,
    SamuelOffline,
    AdagradFull,
    AdagradDiag,
    OgdSqrt,
    OgdInvt,
}

impl AlgorithmName {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlgorithmName::Samuel => "samuel",
            AlgorithmName::SamuelOffline => "samuel-offline",
            AlgorithmName::AdagradFull => "adagrad-full",
            AlgorithmName::AdagradDiag => "adagrad-diag",
            AlgorithmName::OgdSqrt => "ogd-sqrt",
            AlgorithmName::OgdInvt => "ogd-invt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            AlgorithmName::Samuel,
            AlgorithmName::SamuelOffline,
            AlgorithmName::AdagradFull,
            AlgorithmName::AdagradDiag,
            AlgorithmName::OgdSqrt,
            AlgorithmName::OgdInvt,
        ]
        .into_iter()
        .find(|a| a.as_str() == s)
    }
}

impl std::fmt::Display for AlgorithmName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Combine {
    #[default]
    Average,
    /// Draw one expert per round; seeded by the cell seed.
    Sample,
}

fn default_names() -> Vec<AlgorithmName> {
    vec![AlgorithmName::Samuel]
}
fn default_expert() -> ExpertKind {
    ExpertKind::FullAdagrad
}
fn default_floor() -> f64 {
    samuel_core::numerics::DEFAULT_FLOOR
}
fn default_step_scales() -> Vec<f64> {
    vec![1.0, 0.1, 0.01]
}
fn default_decays() -> Vec<f64> {
    vec![1.0, 0.99, 0.9]
}
fn default_reinit() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    #[serde(default = "default_names")]
    pub names: Vec<AlgorithmName>,
    /// Learner on each covering interval.
    #[serde(default = "default_expert")]
    pub expert: ExpertKind,
    #[serde(default)]
    pub combine: Combine,
    /// Overrides the computed number of step-size copies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    /// Expert step scale; defaults to the domain radius (1 for `ogd-invt`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_scale: Option<f64>,
    /// Preconditioner floor epsilon.
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default)]
    pub projection: ProjectionMode,
    #[serde(default)]
    pub birth: BirthPoint,
    #[serde(default)]
    pub clip: bool,
    /// Offline candidate step scales.
    #[serde(default = "default_step_scales")]
    pub step_scales: Vec<f64>,
    /// Offline candidate decays; the first also sets a decayed interval expert.
    #[serde(default = "default_decays")]
    pub decays: Vec<f64>,
    #[serde(default = "default_reinit")]
    pub reinit_period: usize,
}

impl Default for AlgorithmSpec {
    fn default() -> Self {
        Self {
            names: default_names(),
            expert: default_expert(),
            combine: Combine::Average,
            q: None,
            step_scale: None,
            floor: default_floor(),
            projection: ProjectionMode::default(),
            birth: BirthPoint::default(),
            clip: false,
            step_scales: default_step_scales(),
            decays: default_decays(),
            reinit_period: default_reinit(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedIntervals {
    /// Every covering interval.
    AllDyadic,
    /// `[1,T]`, `[1,T/2]`, `[T/2+1,T]`.
    Halves,
    /// `[1,T]` and the scenario's change-point segments.
    Segments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReportIntervals {
    Named(NamedIntervals),
    Explicit(Vec<[usize; 2]>),
}

impl Default for ReportIntervals {
    fn default() -> Self {
        ReportIntervals::Named(NamedIntervals::Halves)
    }
}

fn default_true() -> bool {
    true
}
fn default_theorem1_slack() -> f64 {
    10.0
}
fn default_eq3_slack() -> f64 {
    2.0
}
fn default_tolerance() -> f64 {
    1e-9
}

pub const CHECK_NAMES: &[&str] = &[
    "trace_complete",
    "alive_set",
    "weight_replay",
    "nonpositive_aggregate_regret",
    "pseudo_weight_bound",
    "pseudo_weight_bound_with_frozen",
    "interval_regret_worst",
    "interval_regret",
    "segment_regret",
    "segment_stitching",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSpec {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_theorem1_slack")]
    pub theorem1_slack: f64,
    #[serde(default = "default_eq3_slack")]
    pub eq3_slack: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Checks that are computed and reported but do not affect the exit code.
    #[serde(default)]
    pub ignore: Vec<String>,
    #[serde(default)]
    pub report_intervals: ReportIntervals,
}

impl Default for ChecksSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            theorem1_slack: default_theorem1_slack(),
            eq3_slack: default_eq3_slack(),
            tolerance: default_tolerance(),
            ignore: Vec::new(),
            report_intervals: ReportIntervals::default(),
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_log_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write every k-th round to trace.csv (checks always see every round).
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    /// Include the `x{i}` prediction columns.
    #[serde(default = "default_true")]
    pub write_x: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            log_every: 1,
            write_x: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    /// Its `seed` field is replaced by each cell's seed.
    pub scenario: Scenario,
    #[serde(default)]
    pub algorithm: AlgorithmSpec,
    #[serde(default)]
    pub checks: ChecksSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn line_of(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, column)
}

/// Line of `key = ...` inside `[section]`, if present.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line
                .trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string();
            continue;
        }
        let name = line.split('=').next().unwrap_or("").trim();
        if current == section && name == key && line.contains('=') {
            return Some(k + 1);
        }
    }
    // Fall back to the section header.
    text.lines()
        .position(|l| l.trim() == format!("[{section}]"))
        .map(|k| k + 1)
}

impl RunConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_of(text, s.start));
            ConfigError::Parse {
                path: path.to_string(),
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })?;
        if let Err((section, key, message)) = cfg.check() {
            return Err(ConfigError::Invalid {
                path: path.to_string(),
                line: locate(text, section, key),
                message,
            });
        }
        cfg.resolve_seeds(std::env::var(SEED_ENV).ok().as_deref())
            .map_err(|message| ConfigError::Invalid {
                path: path.to_string(),
                line: None,
                message,
            })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: shown.clone(),
            source,
        })?;
        Self::parse(&text, &shown)
    }

    /// Fills an empty seed list from `env` (the `SAMUEL_SEED` value), then 0.
    pub fn resolve_seeds(&mut self, env: Option<&str>) -> Result<(), String> {
        if !self.seeds.is_empty() {
            return Ok(());
        }
        self.seeds = match env {
            Some(v) => vec![v
                .trim()
                .parse()
                .map_err(|_| format!("{SEED_ENV}={v:?} is not an unsigned integer"))?],
            None => vec![0],
        };
        Ok(())
    }

    fn check(&self) -> Result<(), (&'static str, &'static str, String)> {
        let s = &self.scenario;
        s.validate()
            .map_err(|e| ("scenario", "kind", e.to_string()))?;
        let a = &self.algorithm;
        if a.names.is_empty() {
            return Err((
                "algorithm",
                "names",
                "at least one algorithm is required".into(),
            ));
        }
        if a.q == Some(0) {
            return Err(("algorithm", "q", "q must be at least 1".into()));
        }
        if a.step_scale.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
            return Err((
                "algorithm",
                "step_scale",
                "step_scale must be positive".into(),
            ));
        }
        if !(a.floor > 0.0 && a.floor.is_finite()) {
            return Err(("algorithm", "floor", "floor must be positive".into()));
        }
        if a.step_scales.is_empty() || a.step_scales.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err((
                "algorithm",
                "step_scales",
                "step_scales must be a nonempty list of positive values".into(),
            ));
        }
        if a.decays.is_empty() || a.decays.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
            return Err((
                "algorithm",
                "decays",
                "decays must be a nonempty list in (0, 1]".into(),
            ));
        }
        if a.reinit_period == 0 {
            return Err((
                "algorithm",
                "reinit_period",
                "reinit_period must be at least 1".into(),
            ));
        }
        let c = &self.checks;
        for (key, v) in [
            ("theorem1_slack", c.theorem1_slack),
            ("eq3_slack", c.eq3_slack),
            ("tolerance", c.tolerance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(("checks", key, format!("{key} must be positive")));
            }
        }
        if let Some(bad) = c.ignore.iter().find(|n| !CHECK_NAMES.contains(&n.as_str())) {
            return Err(("checks", "ignore", format!("unknown check {bad:?}")));
        }
        if let ReportIntervals::Explicit(list) = &c.report_intervals {
            if let Some([a, b]) = list
                .iter()
                .find(|[a, b]| !(1 <= *a && a <= b && *b <= s.horizon))
            {
                return Err((
                    "checks",
                    "report_intervals",
                    format!("interval [{a}, {b}] is not within [1, {}]", s.horizon),
                ));
            }
        }
        if self.output.log_every == 0 {
            return Err(("output", "log_every", "log_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// SHA-256 of the scenario with its seed cleared, shared by all cells.
    pub fn scenario_hash(&self) -> String {
        let mut s = self.scenario.clone();
        s.seed = 0;
        hex::encode(Sha256::digest(
            toml::to_string(&s).expect("scenario serializes").as_bytes(),
        ))
    }

    pub fn scenario_for(&self, seed: u64) -> Scenario {
        Scenario {
            seed,
            ..self.scenario.clone()
        }
    }

    pub fn params(&self) -> ProblemParams<f64> {
        self.scenario
            .assumptions()
            .expect("scenario validated at load time")
    }

    pub fn q(&self) -> usize {
        self.algorithm.q.unwrap_or_else(|| q_count(&self.params()))
    }

    pub fn report_intervals(&self, seed: u64) -> Vec<Interval> {
        let t = self.scenario.horizon;
        let whole = Interval::new(1, t);
        match &self.checks.report_intervals {
            ReportIntervals::Named(NamedIntervals::AllDyadic) => GeometricCover::build(t)
                .expect("valid horizon")
                .members()
                .into_iter()
                .map(|(_, i)| i)
                .collect(),
            ReportIntervals::Named(NamedIntervals::Halves) => {
                vec![whole, Interval::new(1, t / 2), Interval::new(t / 2 + 1, t)]
            }
            ReportIntervals::Named(NamedIntervals::Segments) => {
                let mut v = vec![whole];
                v.extend(self.scenario_for(seed).segments());
                v
            }
            ReportIntervals::Explicit(list) => {
                list.iter().map(|&[a, b]| Interval::new(a, b)).collect()
            }
        }
    }

    /// Human-readable resolved configuration with derived quantities.
    pub fn describe(&self) -> String {
        let p = self.params();
        let mut out = self.to_toml();
        out.push_str(&format!(
            "\n# derived\n# dim = {}\n# horizon = {}\n# D = {}\n# D_inf = {}\n# G = {}\n# Q = {}\n# cells = {}\n# config_hash = {}\n",
            p.dim,
            p.horizon,
            p.diameter,
            p.box_bound,
            p.grad_bound,
            self.q(),
            self.algorithm.names.len() * self.seeds.len(),
            self.config_hash(),
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[scenario]
kind = "shifting-quadratic"
horizon = 64
dim = 1
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let mut cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        cfg.resolve_seeds(None).unwrap();
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.algorithm.names, vec![AlgorithmName::Samuel]);
        assert_eq!(cfg.checks.theorem1_slack, 10.0);
        assert_eq!(cfg.params().grad_bound, 6.0);
    }

    #[test]
    fn env_seed_has_lowest_precedence() {
        let mut cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        cfg.resolve_seeds(Some("17")).unwrap();
        assert_eq!(cfg.seeds, vec![17]);
        let mut cfg: RunConfig = toml::from_str(&format!("seeds = [3]\n{MINIMAL}")).unwrap();
        cfg.resolve_seeds(Some("17")).unwrap();
        assert_eq!(cfg.seeds, vec![3]);
        assert!(cfg.clone().resolve_seeds(Some("x")).is_ok());
        let mut bad: RunConfig = toml::from_str(MINIMAL).unwrap();
        assert!(bad.resolve_seeds(Some("x")).is_err());
    }

    #[test]
    fn missing_field_reports_line() {
        let text = "[scenario]\nhorizon = 64\ndim = 1\n";
        match RunConfig::parse(text, "c.toml") {
            Err(ConfigError::Parse { line, message, .. }) => {
                assert!(message.contains("kind"), "{message}");
                assert!(line >= 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_value_is_anchored_to_its_line() {
        let text = format!("{MINIMAL}\n[algorithm]\nnames = [\"samuel\"]\nreinit_period = 0\n");
        match RunConfig::parse(&text, "c.toml") {
            Err(ConfigError::Invalid { line, .. }) => assert_eq!(line, Some(9)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_algorithm_rejected() {
        let text = format!("{MINIMAL}\n[algorithm]\nnames = [\"sgd\"]\n");
        assert!(matches!(
            RunConfig::parse(&text, "c"),
            Err(ConfigError::Parse { line: 8, .. })
        ));
    }

    #[test]
    fn report_interval_forms() {
        for (src, n) in [
            ("\"all-dyadic\"", 127),
            ("\"halves\"", 3),
            ("[[1, 5], [6, 64]]", 2),
        ] {
            let text = format!("{MINIMAL}\n[checks]\nreport_intervals = {src}\n");
            let cfg = RunConfig::parse(&text, "c").unwrap();
            assert_eq!(cfg.report_intervals(0).len(), n, "{src}");
        }
        let text = format!("{MINIMAL}\n[checks]\nreport_intervals = [[1, 65]]\n");
        assert!(RunConfig::parse(&text, "c").is_err());
    }

    #[test]
    fn hashes_are_stable_under_reserialization() {
        let cfg = RunConfig::parse(MINIMAL, "c").unwrap();
        let again = RunConfig::parse(&cfg.to_toml(), "c").unwrap();
        assert_eq!(cfg.to_toml(), again.to_toml());
        assert_eq!(cfg.config_hash(), again.config_hash());
        let mut reseeded = cfg.clone();
        reseeded.scenario.seed = 99;
        assert_eq!(reseeded.scenario_hash(), cfg.scenario_hash());
        assert_ne!(reseeded.config_hash(), cfg.config_hash());
    }
}
