//! Executes the (algorithm x seed) grid and writes each cell's artifacts.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use samuel_core::{
    check_trace, regret_lab::regret_report, run, run_offline, run_solo, CheckConfig, CheckRecord,
    CombineMode, Domain, ExpertConfig, ExpertError, ExpertKind, GeometricCover, LossFn, MetaError,
    MetaOptions, OfflineConfig, RegretReport, RunTrace, ScenarioError, TraceError,
};
use serde::{Deserialize, Serialize};

use crate::config::{AlgorithmName, Combine, ConfigError, RunConfig};
use crate::io::{self, FormatError};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{algorithm} seed {seed}: {source}")]
    Meta {
        algorithm: AlgorithmName,
        seed: u64,
        source: MetaError,
    },
    #[error("{algorithm} seed {seed}: {source}")]
    Expert {
        algorithm: AlgorithmName,
        seed: u64,
        source: ExpertError,
    },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

/// Identity of a trace, written next to it as meta.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub algorithm: AlgorithmName,
    pub seed: u64,
    pub config_hash: String,
    pub scenario_hash: String,
    pub code_version: String,
    pub log_every: usize,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub algorithm: AlgorithmName,
    pub seed: u64,
    pub scenario_hash: String,
    pub config_hash: String,
    pub code_version: String,
    pub horizon: usize,
    pub dim: usize,
    pub total_loss: f64,
    pub reports: Vec<RegretReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChecksFile {
    pub algorithm: AlgorithmName,
    pub seed: u64,
    /// Every check passed.
    pub pass: bool,
    /// Every check outside `ignored` passed; this decides the exit code.
    pub gated_pass: bool,
    pub ignored: Vec<String>,
    pub checks: Vec<CheckRecord>,
}

impl ChecksFile {
    pub fn new(
        algorithm: AlgorithmName,
        seed: u64,
        ignored: &[String],
        checks: Vec<CheckRecord>,
    ) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        let gated_pass = checks
            .iter()
            .all(|c| c.pass || ignored.contains(&c.check_name));
        Self {
            algorithm,
            seed,
            pass,
            gated_pass,
            ignored: ignored.to_vec(),
            checks,
        }
    }
}

/// Everything one cell produces, before it touches the disk.
#[derive(Debug, Clone)]
pub struct CellOutput {
    pub trace: RunTrace<f64>,
    pub meta: TraceMeta,
    pub report: ReportFile,
    pub checks: ChecksFile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub algorithm: AlgorithmName,
    pub seed: u64,
    pub dir: PathBuf,
    pub total_loss: f64,
    pub gated_pass: bool,
    pub failed_checks: Vec<String>,
}

pub fn expert_config(cfg: &RunConfig, kind: ExpertKind, domain: &Domain<f64>) -> ExpertConfig<f64> {
    let a = &cfg.algorithm;
    let default_step = if kind == ExpertKind::OgdInvT {
        1.0
    } else {
        domain.radius()
    };
    let mut ec = ExpertConfig::new(kind, a.step_scale.unwrap_or(default_step))
        .with_floor(a.floor)
        .with_projection(a.projection);
    if kind == ExpertKind::DecayedAdagrad {
        ec = ec.with_decay(a.decays[0]);
    }
    ec
}

/// Trace of one algorithm on one stream.
pub fn run_algorithm(
    cfg: &RunConfig,
    algorithm: AlgorithmName,
    seed: u64,
    stream: &[LossFn<f64>],
) -> Result<RunTrace<f64>, HarnessError> {
    let scenario = cfg.scenario_for(seed);
    let params = scenario.assumptions()?;
    let domain = scenario.domain::<f64>();
    let a = &cfg.algorithm;
    let meta_err = |source| HarnessError::Meta {
        algorithm,
        seed,
        source,
    };
    let solo = |kind| {
        run_solo(
            expert_config(cfg, kind, &domain),
            domain,
            params.dim,
            stream,
        )
        .map_err(|source| HarnessError::Expert {
            algorithm,
            seed,
            source,
        })
    };
    match algorithm {
        AlgorithmName::Samuel => {
            let cover =
                Arc::new(GeometricCover::build(params.horizon).map_err(|e| meta_err(e.into()))?);
            let options = MetaOptions {
                combine: match a.combine {
                    Combine::Average => CombineMode::Average,
                    Combine::Sample => CombineMode::Sample { seed },
                },
                birth: a.birth,
                clip_regret: a.clip,
                q: a.q,
            };
            run(
                params,
                cover,
                domain,
                expert_config(cfg, a.expert, &domain),
                options,
                stream,
            )
            .map_err(meta_err)
        }
        AlgorithmName::SamuelOffline => {
            let oc = OfflineConfig {
                step_scales: a.step_scales.clone(),
                decays: a.decays.clone(),
                reinit_period: a.reinit_period,
                q: a.q,
                seed,
                floor: a.floor,
                clip_regret: a.clip,
            };
            run_offline(params, domain, &oc, stream).map_err(meta_err)
        }
        AlgorithmName::AdagradFull => solo(ExpertKind::FullAdagrad),
        AlgorithmName::AdagradDiag => solo(ExpertKind::DiagAdagrad),
        AlgorithmName::OgdSqrt => solo(ExpertKind::OgdSqrt),
        AlgorithmName::OgdInvt => solo(ExpertKind::OgdInvT),
    }
}

/// Checker settings for one algorithm: the interval meta-algorithm gets every
/// invariant and bound check; other learners only the structural ones.
pub fn check_config(cfg: &RunConfig, algorithm: AlgorithmName, seed: u64) -> CheckConfig {
    let c = &cfg.checks;
    let samuel = algorithm == AlgorithmName::Samuel;
    let dyadic = matches!(
        c.report_intervals,
        crate::config::ReportIntervals::Named(crate::config::NamedIntervals::AllDyadic)
    );
    CheckConfig {
        theorem1_slack: c.theorem1_slack,
        eq3_slack: c.eq3_slack,
        tolerance: c.tolerance,
        q: cfg.algorithm.q,
        averaged: samuel && cfg.algorithm.combine == Combine::Average,
        pseudo_weights: samuel,
        cover_members: samuel,
        segments: if samuel && !dyadic {
            cfg.report_intervals(seed)
        } else {
            Vec::new()
        },
    }
}

pub fn check_cell(
    cfg: &RunConfig,
    algorithm: AlgorithmName,
    seed: u64,
    trace: &RunTrace<f64>,
    stream: &[LossFn<f64>],
) -> Result<ChecksFile, HarnessError> {
    let scenario = cfg.scenario_for(seed);
    let params = scenario.assumptions()?;
    let checks = if cfg.checks.enabled {
        let cover = GeometricCover::build(params.horizon).map_err(|e| HarnessError::Meta {
            algorithm,
            seed,
            source: e.into(),
        })?;
        check_trace(
            trace,
            stream,
            &cover,
            &params,
            &scenario.domain(),
            &check_config(cfg, algorithm, seed),
        )?
        .checks
    } else {
        Vec::new()
    };
    Ok(ChecksFile::new(algorithm, seed, &cfg.checks.ignore, checks))
}

/// Runs and checks one cell in memory.
pub fn run_cell(
    cfg: &RunConfig,
    algorithm: AlgorithmName,
    seed: u64,
) -> Result<CellOutput, HarnessError> {
    let scenario = cfg.scenario_for(seed);
    let params = scenario.assumptions()?;
    let domain = scenario.domain::<f64>();
    let stream = scenario.generate::<f64>()?;
    let trace = run_algorithm(cfg, algorithm, seed, &stream)?;
    let reports = cfg
        .report_intervals(seed)
        .into_iter()
        .map(|i| {
            regret_report(
                &trace,
                &stream,
                &domain,
                &params,
                i,
                cfg.checks.theorem1_slack,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let checks = check_cell(cfg, algorithm, seed, &trace, &stream)?;
    let config_hash = cfg.config_hash();
    let scenario_hash = cfg.scenario_hash();
    Ok(CellOutput {
        meta: TraceMeta {
            algorithm,
            seed,
            config_hash: config_hash.clone(),
            scenario_hash: scenario_hash.clone(),
            code_version: CODE_VERSION.to_string(),
            log_every: cfg.output.log_every,
            rounds: trace.len(),
        },
        report: ReportFile {
            algorithm,
            seed,
            scenario_hash,
            config_hash,
            code_version: CODE_VERSION.to_string(),
            horizon: params.horizon,
            dim: params.dim,
            total_loss: trace.total_loss(),
            reports,
        },
        checks,
        trace,
    })
}

pub fn cell_dir(root: &Path, algorithm: AlgorithmName, seed: u64) -> PathBuf {
    root.join(algorithm.as_str()).join(format!("seed-{seed}"))
}

pub fn write_cell(dir: &Path, cfg: &RunConfig, out: &CellOutput) -> Result<(), FormatError> {
    io::write_atomic(
        &dir.join("trace.csv"),
        &io::write_trace_csv(&out.trace, cfg.output.log_every, cfg.output.write_x),
    )?;
    io::write_atomic(&dir.join("meta.json"), &io::to_json(&out.meta))?;
    io::write_atomic(&dir.join("regret_report.json"), &io::to_json(&out.report))?;
    io::write_atomic(&dir.join("checks.json"), &io::to_json(&out.checks))
}

/// Runs every cell on `workers` threads (all cores when `None`). Output is
/// independent of the worker count.
pub fn execute(cfg: &RunConfig, workers: Option<usize>) -> Result<Vec<CellSummary>, HarnessError> {
    let cells: Vec<(AlgorithmName, u64)> = cfg
        .algorithm
        .names
        .iter()
        .flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|&(algorithm, seed)| {
                let out = run_cell(cfg, algorithm, seed)?;
                let dir = cell_dir(&cfg.output.dir, algorithm, seed);
                write_cell(&dir, cfg, &out)?;
                log::info!(
                    "{algorithm} seed {seed}: total loss {:.6}, checks {}",
                    out.report.total_loss,
                    if out.checks.gated_pass {
                        "pass"
                    } else {
                        "FAIL"
                    }
                );
                Ok(CellSummary {
                    algorithm,
                    seed,
                    dir,
                    total_loss: out.report.total_loss,
                    gated_pass: out.checks.gated_pass,
                    failed_checks: out
                        .checks
                        .checks
                        .iter()
                        .filter(|c| !c.pass)
                        .map(|c| match c.interval {
                            Some(i) => format!("{} {i}", c.check_name),
                            None => c.check_name.clone(),
                        })
                        .collect(),
                })
            })
            .collect()
    })
}

/// Re-checks a trace file written by `execute`. The cell identity comes from
/// the sibling meta.json, or the config's first algorithm and seed.
pub fn check_file(cfg: &RunConfig, trace_path: &Path) -> Result<ChecksFile, HarnessError> {
    let meta_path = trace_path.with_file_name("meta.json");
    let (algorithm, seed) = if meta_path.exists() {
        let meta: TraceMeta = io::read_json(&meta_path)?;
        (meta.algorithm, meta.seed)
    } else {
        (cfg.algorithm.names[0], cfg.seeds[0])
    };
    let shown = trace_path.display().to_string();
    let text = std::fs::read_to_string(trace_path).map_err(|source| FormatError::Io {
        path: shown.clone(),
        source,
    })?;
    let trace = io::read_trace_csv(&text, &shown)?;
    let stream = cfg.scenario_for(seed).generate::<f64>()?;
    check_cell(cfg, algorithm, seed, &trace, &stream)
}
