//! Self-play of one learner per player: iterate averaging, adaptive restarts, equilibrium
//! metrics and run-time audits of the regret and stability bounds.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::games::{GameError, RegretTracker, SequenceFormGame};
use crate::learners::{Algorithm, EpsSchedule, Learner, LearnerConfig, LearnerError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelfPlayError {
    #[error("invalid self-play configuration: {0}")]
    InvalidConfig(String),
    #[error("player {player} failed at iteration {iteration}: {source}")]
    Learner {
        player: usize,
        iteration: u64,
        source: LearnerError,
    },
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Weight `f(k)` placed on the newest iterate: `avg <- avg + f(k) (x - avg)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Averaging {
    Uniform,
    Linear,
    Quadratic,
    Last,
}

impl Averaging {
    pub const ALL: [Averaging; 4] = [
        Averaging::Uniform,
        Averaging::Linear,
        Averaging::Quadratic,
        Averaging::Last,
    ];

    pub fn weight(self, k: u64) -> f64 {
        let t = k as f64;
        match self {
            Averaging::Uniform => 1.0 / (t + 1.0),
            Averaging::Linear => 2.0 / (t + 2.0),
            Averaging::Quadratic => (6.0 * t + 6.0) / ((t + 2.0) * (2.0 * t + 3.0)),
            Averaging::Last => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Averaging::Uniform => "uniform",
            Averaging::Linear => "linear",
            Averaging::Quadratic => "quadratic",
            Averaging::Last => "last",
        }
    }
}

impl fmt::Display for Averaging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Averaging {
    type Err = SelfPlayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "constant" => Ok(Averaging::Uniform),
            "linear" => Ok(Averaging::Linear),
            "quadratic" => Ok(Averaging::Quadratic),
            "last" => Ok(Averaging::Last),
            _ => Err(SelfPlayError::InvalidConfig(format!(
                "unknown averaging scheme `{s}`"
            ))),
        }
    }
}

/// Averaging counter `r` and the gap `xi` at the last restart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartState {
    pub r: u64,
    pub xi: f64,
}

impl RestartState {
    pub fn new(initial_gap: f64) -> Self {
        RestartState {
            r: 0,
            xi: initial_gap,
        }
    }
}

/// Restarts the averaging (`r = 0`) once the gap of the averaged profile has halved since the
/// last restart; otherwise advances `r`.
pub fn adaptive_restart_hook(state: RestartState, current_gap: f64) -> RestartState {
    if current_gap <= state.xi / 2.0 {
        RestartState {
            r: 0,
            xi: current_gap,
        }
    } else {
        RestartState {
            r: state.r + 1,
            xi: state.xi,
        }
    }
}

/// Right-hand side minus left-hand side of the regret bound
/// `Reg^T <= (omega + 2) / eta + eta * sum ||l^t - l^{t-1}||^2 - sum ||x^{t+1} - x^t||^2 / (4 eta)`.
pub fn rvu_slack(omega: f64, eta: f64, loss_variation: f64, movement: f64, regret: f64) -> f64 {
    (omega + 2.0) / eta + eta * loss_variation - movement / (4.0 * eta) - regret
}

/// `||x^{t+1} - x^t|| - (3 eta + sqrt(2 eta eps^t))`; nonpositive when the step is stable.
pub fn stability_margin(step: f64, eta: f64, eps: f64) -> f64 {
    step - (3.0 * eta + (2.0 * eta * eps).sqrt())
}

/// Which iterations produce a [`RunRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordSchedule {
    Every(u64),
    /// Every iteration up to 1000, then roughly 116 records per decade.
    Auto,
}

impl RecordSchedule {
    fn next_after(self, t: u64) -> u64 {
        match self {
            RecordSchedule::Every(k) => (t / k + 1) * k,
            RecordSchedule::Auto if t < 1000 => t + 1,
            RecordSchedule::Auto => (t + 1).max(t + t / 50),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfPlayConfig {
    /// One learner configuration per player.
    pub learners: Vec<LearnerConfig>,
    pub averaging: Averaging,
    pub restart: bool,
    /// Stop once the average learning LMO calls per player reach this value.
    pub lmo_budget: Option<u64>,
    pub max_iterations: Option<u64>,
    pub record: RecordSchedule,
}

impl SelfPlayConfig {
    pub fn new(learners: Vec<LearnerConfig>) -> Self {
        SelfPlayConfig {
            learners,
            averaging: Averaging::Uniform,
            restart: false,
            lmo_budget: None,
            max_iterations: None,
            record: RecordSchedule::Auto,
        }
    }

    pub fn validate(&self, game: &SequenceFormGame) -> Result<(), SelfPlayError> {
        if self.learners.len() != game.num_players() {
            return Err(SelfPlayError::InvalidConfig(format!(
                "{} learners for a {}-player game",
                self.learners.len(),
                game.num_players()
            )));
        }
        if self.lmo_budget.is_none() && self.max_iterations.is_none() {
            return Err(SelfPlayError::InvalidConfig(
                "either an LMO budget or an iteration limit is required".into(),
            ));
        }
        if self.lmo_budget == Some(0) || self.max_iterations == Some(0) {
            return Err(SelfPlayError::InvalidConfig(
                "limits must be positive".into(),
            ));
        }
        if self.record == RecordSchedule::Every(0) {
            return Err(SelfPlayError::InvalidConfig(
                "record interval must be positive".into(),
            ));
        }
        if self.restart && metric_kind(game) != MetricKind::DualityGap {
            return Err(SelfPlayError::InvalidConfig(
                "restarting requires a two-player zero-sum game".into(),
            ));
        }
        for cfg in &self.learners {
            cfg.validate()
                .map_err(|e| SelfPlayError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    /// Duality gap of the averaged profile (two-player zero-sum games).
    DualityGap,
    /// Maximum over players of the average regret of the played iterates.
    MaxAvgRegret,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::DualityGap => "duality_gap",
            MetricKind::MaxAvgRegret => "max_avg_regret",
        }
    }
}

pub fn metric_kind(game: &SequenceFormGame) -> MetricKind {
    if game.num_players() == 2 && game.is_zero_sum() {
        MetricKind::DualityGap
    } else {
        MetricKind::MaxAvgRegret
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub iteration: u64,
    /// Cumulative learning LMO calls per player.
    pub lmo_calls: Vec<u64>,
    pub avg_lmo_calls: f64,
    pub metric: f64,
    /// Smallest regret-bound slack over audited players.
    pub rvu_slack: Option<f64>,
    /// Largest stability margin over audited players at this iteration.
    pub stability_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub metric_kind: MetricKind,
    pub averaging: Averaging,
    pub records: Vec<RunRecord>,
    pub iterations: u64,
    /// LMO calls spent on metrics and audits, excluded from the learning budget.
    pub metric_lmo_calls: u64,
    pub averages: Vec<Vec<f64>>,
    pub last_iterates: Vec<Vec<f64>>,
    /// Half the squared diameter of each player's treeplex.
    pub omega: Vec<f64>,
    /// Set when a learner failed; the records before the failure are kept.
    pub error: Option<SelfPlayError>,
}

struct Audits {
    rvu: Vec<bool>,
    stability: Vec<Option<EpsSchedule>>,
}

impl Audits {
    fn new(configs: &[LearnerConfig]) -> Self {
        Audits {
            rvu: configs
                .iter()
                .map(|c| {
                    c.algorithm == Algorithm::FwRomd
                        && c.eps_schedule() == Some(EpsSchedule::InverseSquare)
                })
                .collect(),
            stability: configs.iter().map(LearnerConfig::eps_schedule).collect(),
        }
    }

    fn any(&self) -> bool {
        self.rvu.iter().any(|&a| a) || self.stability.iter().any(Option::is_some)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn produce(
    learners: &mut [Learner<'_>],
    losses: &[Vec<f64>],
    iteration: u64,
) -> Result<Vec<Vec<f64>>, SelfPlayError> {
    learners
        .iter_mut()
        .zip(losses)
        .enumerate()
        .map(|(player, (l, m))| {
            l.next_strategy(Some(m))
                .map(<[f64]>::to_vec)
                .map_err(|source| SelfPlayError::Learner {
                    player,
                    iteration,
                    source,
                })
        })
        .collect()
}

/// Runs simultaneous self-play until the LMO budget or iteration limit is reached.
///
/// Optimistic learners receive the previous loss as their prediction. Configuration errors are
/// returned as `Err`; a learner failing mid-run yields `Ok` with `error` set.
pub fn run_selfplay(
    game: &SequenceFormGame,
    config: &SelfPlayConfig,
) -> Result<RunOutcome, SelfPlayError> {
    config.validate(game)?;
    let n = game.num_players();
    let kind = metric_kind(game);
    let averaging = match kind {
        MetricKind::DualityGap => config.averaging,
        MetricKind::MaxAvgRegret => Averaging::Uniform,
    };
    let mut learners: Vec<Learner<'_>> = config
        .learners
        .iter()
        .zip(game.treeplexes())
        .map(|(cfg, t)| Learner::new(cfg.clone(), t))
        .collect::<Result<_, _>>()
        .map_err(|e| SelfPlayError::InvalidConfig(e.to_string()))?;
    let audits = Audits::new(&config.learners);
    let omega: Vec<f64> = game
        .treeplexes()
        .iter()
        .map(|t| 0.5 * t.squared_diameter())
        .collect();

    let mut outcome = RunOutcome {
        metric_kind: kind,
        averaging,
        records: Vec::new(),
        iterations: 0,
        metric_lmo_calls: 0,
        averages: learners
            .iter()
            .map(|l| l.last_strategy().to_vec())
            .collect(),
        last_iterates: Vec::new(),
        omega,
        error: None,
    };
    let mut tracker = RegretTracker::new(game);
    let mut prev_losses: Vec<Vec<f64>> = game
        .treeplexes()
        .iter()
        .map(|t| vec![0.0; t.num_sequences()])
        .collect();
    let mut loss_variation = vec![0.0; n];
    let mut movement = vec![0.0; n];
    let mut restart = if config.restart {
        outcome.metric_lmo_calls += n as u64;
        Some(RestartState::new(
            game.duality_gap(&outcome.averages[0], &outcome.averages[1])?,
        ))
    } else {
        None
    };
    let mut next_record = 1;

    let mut xs = match produce(&mut learners, &prev_losses, 1) {
        Ok(xs) => xs,
        Err(e) => {
            outcome.error = Some(e);
            return Ok(outcome);
        }
    };
    let mut t = 1u64;
    loop {
        let losses = game.loss_gradients(&xs);
        for i in 0..n {
            if let Err(source) = learners[i].observe(&losses[i]) {
                outcome.error = Some(SelfPlayError::Learner {
                    player: i,
                    iteration: t,
                    source,
                });
                return Ok(outcome);
            }
            tracker.record(i, &xs[i], &losses[i]);
            loss_variation[i] += sq_dist(&losses[i], &prev_losses[i]);
        }

        let k = restart.map_or(t - 1, |s| s.r);
        let w = averaging.weight(k);
        for (avg, x) in outcome.averages.iter_mut().zip(&xs) {
            for (a, v) in avg.iter_mut().zip(x) {
                *a += w * (v - *a);
            }
        }
        let mut gap_now = None;
        if let Some(state) = restart {
            outcome.metric_lmo_calls += n as u64;
            let gap = game.duality_gap(&outcome.averages[0], &outcome.averages[1])?;
            restart = Some(adaptive_restart_hook(state, gap));
            gap_now = Some(gap);
        }

        let lmo_calls: Vec<u64> = learners.iter().map(Learner::lmo_calls_total).collect();
        let avg_lmo_calls = lmo_calls.iter().sum::<u64>() as f64 / n as f64;
        let stop = config.max_iterations.is_some_and(|m| t >= m)
            || config.lmo_budget.is_some_and(|b| avg_lmo_calls >= b as f64);
        let recording = t >= next_record || stop;

        // x^{t+1}: the next round, or a side-effect-free lookahead when stopping
        prev_losses = losses;
        let next = if !stop {
            match produce(&mut learners, &prev_losses, t + 1) {
                Ok(next) => Some(next),
                Err(e) => {
                    outcome.error = Some(e);
                    break;
                }
            }
        } else if recording && audits.any() {
            let mut lookahead = learners.clone();
            produce(&mut lookahead, &prev_losses, t + 1).ok()
        } else {
            None
        };
        let mut margins = Vec::new();
        if let Some(next) = &next {
            for i in 0..n {
                let d2 = sq_dist(&next[i], &xs[i]);
                movement[i] += d2;
                if let Some(schedule) = audits.stability[i] {
                    let eta = config.learners[i].eta;
                    margins.push(stability_margin(d2.sqrt(), eta, schedule.eps(t)));
                }
            }
        }

        if recording {
            next_record = config.record.next_after(t);
            let metric = match gap_now {
                Some(g) => g,
                None => {
                    outcome.metric_lmo_calls += n as u64;
                    match kind {
                        MetricKind::DualityGap => {
                            game.duality_gap(&outcome.averages[0], &outcome.averages[1])?
                        }
                        MetricKind::MaxAvgRegret => tracker.max_avg_regret(game)?,
                    }
                }
            };
            let mut rvu: Option<f64> = None;
            if next.is_some() {
                for i in (0..n).filter(|&i| audits.rvu[i]) {
                    outcome.metric_lmo_calls += 1;
                    let slack = rvu_slack(
                        outcome.omega[i],
                        config.learners[i].eta,
                        loss_variation[i],
                        movement[i],
                        tracker.regret(game, i)?,
                    );
                    rvu = Some(rvu.map_or(slack, |s: f64| s.min(slack)));
                }
            }
            outcome.records.push(RunRecord {
                iteration: t,
                lmo_calls,
                avg_lmo_calls,
                metric,
                rvu_slack: rvu,
                stability_margin: margins.into_iter().reduce(f64::max),
            });
        }
        outcome.iterations = t;
        match next {
            Some(next) if !stop => xs = next,
            _ => break,
        }
        t += 1;
    }
    outcome.last_iterates = xs;
    Ok(outcome)
}
