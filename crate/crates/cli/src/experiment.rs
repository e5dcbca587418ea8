//! Grid expansion, parallel execution and output files.
//!
//! Each grid point writes `<label>.csv` with the columns
//! `iteration,avg_lmo_calls,metric,rvu_slack,stability_margin`. Floats use 17 significant
//! digits; audit columns are empty where the audit does not apply. `manifest.toml` echoes
//! the resolved configuration under `[config]` and lists every run with its status.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use polyfw::games::{to_sequence_form, GameError, SequenceFormGame};
use polyfw::learners::{ApoMode, LearnerConfig};
use polyfw::selfplay::{
    metric_kind, run_selfplay, Averaging, MetricKind, RecordSchedule, RunRecord, SelfPlayConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ApoKind, EpsSpec, ExperimentConfig, PlayerSpec};

pub const OUT_DIR_ENV: &str = "POLYFW_OUT_DIR";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const CSV_HEADER: &str = "iteration,avg_lmo_calls,metric,rvu_slack,stability_margin";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("building game: {0}")]
    Game(#[from] GameError),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// One run of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub label: String,
    pub learners: Vec<LearnerConfig>,
    pub averaging: Averaging,
    pub restart: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerEntry {
    pub algorithm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lmo_per_iteration: Option<u64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub file: String,
    /// `ok` or `failed`; a failed run keeps the records written before the failure.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub averaging: String,
    pub restart: bool,
    pub metric: String,
    pub iterations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_metric: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_avg_lmo_calls: Option<f64>,
    pub players: Vec<PlayerEntry>,
}

impl RunEntry {
    pub fn failed(&self) -> bool {
        self.status != "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub game: String,
    pub output_dir: String,
    pub wall_clock_seconds: f64,
    pub config: ExperimentConfig,
    pub runs: Vec<RunEntry>,
}

impl Manifest {
    pub fn any_failed(&self) -> bool {
        self.runs.iter().any(RunEntry::failed)
    }
}

fn fmt_eta(eta: f64) -> String {
    format!("{eta}")
}

fn learner(
    algorithm: polyfw::learners::Algorithm,
    eta: Option<f64>,
    m: Option<u64>,
    apo: ApoKind,
    eps: Option<EpsSpec>,
    warmstart: bool,
    seed: u64,
) -> LearnerConfig {
    let mut c = LearnerConfig::new(algorithm, eta.unwrap_or(1.0));
    c.apo = match (apo, m) {
        (ApoKind::Budget, Some(m)) => ApoMode::LmoBudget(m),
        _ => ApoMode::Accuracy(eps.map_or(polyfw::learners::EpsSchedule::InverseSquare, |e| e.0)),
    };
    c.warmstart = warmstart;
    c.seed = seed;
    c
}

/// Expands a resolved configuration into its grid points.
///
/// Axes that an algorithm does not read are not expanded: `eta` for FP/OFP/BR/OBR,
/// `lmo_per_iteration` for everything but budgeted Frank-Wolfe steps, and the averaging
/// schemes for games scored by average regret, which always use uniform averaging.
pub fn expand(config: &ExperimentConfig, game: &SequenceFormGame) -> Vec<GridPoint> {
    let cfg = config.resolved();
    let s = &cfg.sweep;
    let n = game.num_players();
    let seed = |i: usize| cfg.seed.wrapping_add(i as u64);
    let restart = *s.restart.as_ref().expect("resolved").get_ref();
    let apo = s.apo.expect("resolved");
    let warmstart = s.warmstart.expect("resolved");
    let mut averaging: Vec<Averaging> = s
        .averaging
        .as_ref()
        .expect("resolved")
        .0
        .iter()
        .map(|a| a.0)
        .collect();
    if metric_kind(game) == MetricKind::MaxAvgRegret {
        averaging = vec![Averaging::Uniform];
    }
    let suffix = |avg: Averaging| {
        let mut out = format!("_{}", avg.name());
        if restart {
            out.push_str("_restart");
        }
        out
    };

    let mut points = Vec::new();
    if let Some(players) = &s.players {
        let players: &Vec<PlayerSpec> = players.get_ref();
        for &avg in &averaging {
            let learners = players
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    learner(
                        p.algorithm.0,
                        p.eta.map(|e| e.0),
                        p.lmo_per_iteration.map(|c| c.0),
                        p.apo.unwrap_or(apo),
                        p.eps,
                        p.warmstart.unwrap_or(warmstart),
                        seed(i),
                    )
                })
                .collect();
            points.push(GridPoint {
                label: format!("players{}", suffix(avg)),
                learners,
                averaging: avg,
                restart,
            });
        }
        return points;
    }

    let etas: Vec<f64> = s
        .eta
        .as_ref()
        .expect("resolved")
        .get_ref()
        .0
        .iter()
        .map(|e| e.0)
        .collect();
    let ms: Vec<u64> = s
        .lmo_per_iteration
        .as_ref()
        .map(|g| g.get_ref().0.iter().map(|c| c.0).collect())
        .unwrap_or_default();
    for alg in s
        .algorithms
        .as_ref()
        .expect("validated")
        .get_ref()
        .0
        .iter()
        .map(|a| a.0)
    {
        let eta_axis: Vec<Option<f64>> = if alg.uses_eta() {
            etas.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let m_axis: Vec<Option<u64>> = if alg.is_fw_family() && apo == ApoKind::Budget {
            ms.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        for &eta in &eta_axis {
            for &m in &m_axis {
                for &avg in &averaging {
                    let mut label = alg.name().to_string();
                    if let Some(eta) = eta {
                        write!(label, "_eta{}", fmt_eta(eta)).expect("string write");
                    }
                    if let Some(m) = m {
                        write!(label, "_m{m}").expect("string write");
                    }
                    label.push_str(&suffix(avg));
                    let learners = (0..n)
                        .map(|i| learner(alg, eta, m, apo, s.eps, warmstart, seed(i)))
                        .collect();
                    points.push(GridPoint {
                        label,
                        learners,
                        averaging: avg,
                        restart,
                    });
                }
            }
        }
    }
    points
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// CSV text for a list of records, header included.
pub fn render_csv(records: &[RunRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.iteration,
            fmt_float(r.avg_lmo_calls),
            fmt_float(r.metric),
            fmt_opt(r.rvu_slack),
            fmt_opt(r.stability_margin)
        )
        .expect("string write");
    }
    out
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    let io = |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    std::io::Write::write_all(&mut tmp, contents.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn run_point(
    game: &SequenceFormGame,
    point: &GridPoint,
    config: &ExperimentConfig,
) -> (RunEntry, String) {
    let mut sp = SelfPlayConfig::new(point.learners.clone());
    sp.averaging = point.averaging;
    sp.restart = point.restart;
    sp.lmo_budget = Some(config.lmo_budget.0);
    sp.max_iterations = config.max_iterations.map(|c| c.0);
    sp.record = config
        .record_every
        .map_or(RecordSchedule::Auto, |c| RecordSchedule::Every(c.0));
    let players = point
        .learners
        .iter()
        .map(|l| PlayerEntry {
            algorithm: l.algorithm.name().to_string(),
            eta: l.algorithm.uses_eta().then_some(l.eta),
            lmo_per_iteration: match l.apo {
                ApoMode::LmoBudget(m) if l.algorithm.is_fw_family() => Some(m),
                _ => None,
            },
            seed: l.seed,
        })
        .collect();
    let mut entry = RunEntry {
        file: format!("{}.csv", point.label),
        status: "ok".into(),
        error: None,
        averaging: point.averaging.name().to_string(),
        restart: point.restart,
        metric: metric_kind(game).name().to_string(),
        iterations: 0,
        final_metric: None,
        final_avg_lmo_calls: None,
        players,
    };
    let records = match run_selfplay(game, &sp) {
        Ok(outcome) => {
            entry.iterations = outcome.iterations;
            if let Some(e) = &outcome.error {
                entry.status = "failed".into();
                entry.error = Some(e.to_string());
            }
            outcome.records
        }
        Err(e) => {
            entry.status = "failed".into();
            entry.error = Some(e.to_string());
            Vec::new()
        }
    };
    if let Some(last) = records.last() {
        entry.final_metric = Some(last.metric);
        entry.final_avg_lmo_calls = Some(last.avg_lmo_calls);
    }
    (entry, render_csv(&records))
}

/// The output directory: the environment override, else the configured path.
pub fn output_dir(config: &ExperimentConfig) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(&config.output),
    }
}

/// Runs every grid point on a pool of `jobs` workers (0 = one per core) and writes the
/// CSVs and the manifest into `out_dir`.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    jobs: usize,
) -> Result<Manifest, ExperimentError> {
    let start = Instant::now();
    let game = to_sequence_form(&config.game.build()?)?;
    let points = expand(config, &game);
    std::fs::create_dir_all(out_dir).map_err(|source| ExperimentError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let results: Vec<Result<RunEntry, ExperimentError>> = pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let (entry, csv) = run_point(&game, p, config);
                write_atomic(&out_dir.join(&entry.file), &csv)?;
                Ok(entry)
            })
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let manifest = Manifest {
        seed: config.seed,
        game: config.game.to_string(),
        output_dir: out_dir.display().to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        config: config.resolved(),
        runs,
    };
    let text = toml::to_string(&manifest).expect("manifest serializes");
    write_atomic(&out_dir.join(MANIFEST_FILE), &text)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_use_seventeen_digits_and_blank_audits() {
        let records = vec![RunRecord {
            iteration: 3,
            lmo_calls: vec![3, 3],
            avg_lmo_calls: 3.0,
            metric: 0.1,
            rvu_slack: None,
            stability_margin: Some(-2.5),
        }];
        let csv = render_csv(&records);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(
            lines.next(),
            Some("3,3.0000000000000000e0,1.0000000000000001e-1,,-2.5000000000000000e0")
        );
        let parsed: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(parsed, 0.1);
    }
}
