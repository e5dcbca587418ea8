//! Experiment configuration files.
//!
//! A configuration is a TOML document:
//!
//! ```toml
//! schema = 1
//! seed = 7
//! output = "runs/kuhn"
//! lmo_budget = 10000
//!
//! [game]
//! id = "kuhn2"
//!
//! [sweep]
//! algorithms = ["fw-romd", "fp"]
//! eta = [1.28]
//! lmo_per_iteration = [5]
//! averaging = ["quadratic"]
//! ```
//!
//! Values are checked while parsing, so most errors carry the line of the offending value.

use std::fmt;
use std::ops::Range;

use polyfw::games::{GameError, GameId, GameTree};
use polyfw::learners::{Algorithm, EpsSchedule};
use polyfw::selfplay::Averaging;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Spanned;

pub const SCHEMA_VERSION: u32 = 1;

/// `0.01 * 2^k` for `k = 1..=14`.
pub fn default_eta_grid() -> Vec<f64> {
    (1..=14).map(|k| 0.01 * f64::from(1u32 << k)).collect()
}

pub const DEFAULT_LMO_GRID: [u64; 9] = [1, 2, 3, 4, 5, 10, 20, 100, 200];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}:{column}: {message}")]
    At {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, column)
}

fn located(path: &str, text: &str, span: Option<Range<usize>>, message: String) -> ConfigError {
    match span {
        Some(span) => {
            let (line, column) = line_col(text, span.start);
            ConfigError::At {
                path: path.to_string(),
                line,
                column,
                message,
            }
        }
        None => ConfigError::Invalid {
            path: path.to_string(),
            message,
        },
    }
}

/// A strictly positive, finite step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Eta(pub f64);

impl TryFrom<f64> for Eta {
    type Error = String;

    fn try_from(v: f64) -> Result<Self, String> {
        if v > 0.0 && v.is_finite() {
            Ok(Eta(v))
        } else {
            Err(format!("eta must be positive and finite, got {v}"))
        }
    }
}

impl From<Eta> for f64 {
    fn from(e: Eta) -> f64 {
        e.0
    }
}

/// A strictly positive count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u64")]
pub struct Count(pub u64);

impl TryFrom<i64> for Count {
    type Error = String;

    fn try_from(v: i64) -> Result<Self, String> {
        if v > 0 {
            Ok(Count(v as u64))
        } else {
            Err(format!("expected a positive integer, got {v}"))
        }
    }
}

impl From<Count> for u64 {
    fn from(c: Count) -> u64 {
        c.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AlgorithmName(pub Algorithm);

impl TryFrom<String> for AlgorithmName {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse().map(AlgorithmName).map_err(|_| {
            let known: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
            format!("unknown algorithm `{s}` (known: {})", known.join(", "))
        })
    }
}

impl From<AlgorithmName> for String {
    fn from(a: AlgorithmName) -> String {
        a.0.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AveragingName(pub Averaging);

impl TryFrom<String> for AveragingName {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse().map(AveragingName).map_err(|_| {
            format!("unknown averaging `{s}` (known: uniform, linear, quadratic, last)")
        })
    }
}

impl From<AveragingName> for String {
    fn from(a: AveragingName) -> String {
        a.0.name().to_string()
    }
}

/// A nonempty list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound(
    serialize = "T: Serialize + Clone",
    deserialize = "T: Deserialize<'de>"
))]
pub struct Grid<T>(pub Vec<T>);

impl<T> TryFrom<Vec<T>> for Grid<T> {
    type Error = &'static str;

    fn try_from(v: Vec<T>) -> Result<Self, &'static str> {
        if v.is_empty() {
            Err("grid must not be empty")
        } else {
            Ok(Grid(v))
        }
    }
}

impl<T> From<Grid<T>> for Vec<T> {
    fn from(g: Grid<T>) -> Vec<T> {
        g.0
    }
}

/// How the Frank-Wolfe proximal steps terminate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApoKind {
    /// A fixed number of LMO calls per round, swept over `lmo_per_iteration`.
    Budget,
    /// Run to the accuracy schedule given by `eps`.
    Accuracy,
}

/// `"inverse-square"` or a fixed positive accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEps", into = "RawEps")]
pub struct EpsSpec(pub EpsSchedule);

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawEps {
    Name(String),
    Value(f64),
}

impl TryFrom<RawEps> for EpsSpec {
    type Error = String;

    fn try_from(raw: RawEps) -> Result<Self, String> {
        match raw {
            RawEps::Name(s) if s == "inverse-square" => Ok(EpsSpec(EpsSchedule::InverseSquare)),
            RawEps::Name(s) => Err(format!("unknown accuracy schedule `{s}`")),
            RawEps::Value(v) if v > 0.0 && v.is_finite() => Ok(EpsSpec(EpsSchedule::Fixed(v))),
            RawEps::Value(v) => Err(format!("accuracy must be positive, got {v}")),
        }
    }
}

impl From<EpsSpec> for RawEps {
    fn from(e: EpsSpec) -> RawEps {
        match e.0 {
            EpsSchedule::InverseSquare => RawEps::Name("inverse-square".into()),
            EpsSchedule::Fixed(v) => RawEps::Value(v),
        }
    }
}

/// A registry game with explicit parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGame", into = "RawGame")]
pub struct GameSpec {
    pub name: String,
    pub id: GameId,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGame {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ranks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    suits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raise_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    faces: Option<usize>,
}

impl TryFrom<RawGame> for GameSpec {
    type Error = String;

    fn try_from(raw: RawGame) -> Result<Self, String> {
        let Some(mut id) = GameId::from_name(&raw.id) else {
            return Err(format!(
                "unknown game `{}` (known: {})",
                raw.id,
                GameId::NAMES.join(", ")
            ));
        };
        let reject = |param: &str| format!("game `{}` has no parameter `{param}`", raw.id);
        match &mut id {
            GameId::Kuhn { ranks, .. } => {
                if raw.suits.is_some() {
                    return Err(reject("suits"));
                }
                if raw.raise_cap.is_some() {
                    return Err(reject("raise_cap"));
                }
                if raw.faces.is_some() {
                    return Err(reject("faces"));
                }
                *ranks = raw.ranks.unwrap_or(*ranks);
            }
            GameId::Leduc {
                raise_cap,
                ranks,
                suits,
            } => {
                if raw.faces.is_some() {
                    return Err(reject("faces"));
                }
                *raise_cap = raw.raise_cap.unwrap_or(*raise_cap);
                *ranks = raw.ranks.unwrap_or(*ranks);
                *suits = raw.suits.unwrap_or(*suits);
            }
            GameId::LiarsDice { faces, .. } => {
                for (set, name) in [
                    (raw.ranks.is_some(), "ranks"),
                    (raw.suits.is_some(), "suits"),
                    (raw.raise_cap.is_some(), "raise_cap"),
                ] {
                    if set {
                        return Err(reject(name));
                    }
                }
                *faces = raw.faces.unwrap_or(*faces);
            }
            GameId::Goofspiel3 | GameId::MatchingPennies => {
                for (set, name) in [
                    (raw.ranks.is_some(), "ranks"),
                    (raw.suits.is_some(), "suits"),
                    (raw.raise_cap.is_some(), "raise_cap"),
                    (raw.faces.is_some(), "faces"),
                ] {
                    if set {
                        return Err(reject(name));
                    }
                }
            }
        }
        check_game_params(&id).map_err(|e| e.to_string())?;
        Ok(GameSpec { name: raw.id, id })
    }
}

/// Parameter ranges accepted by the generators, checked without building the tree.
fn check_game_params(id: &GameId) -> Result<(), GameError> {
    let bad = |msg: String| Err(GameError::Unsupported(msg));
    match *id {
        GameId::Kuhn { players, ranks } if ranks < players + 1 || ranks > 13 => bad(format!(
            "kuhn with {players} players needs {}..=13 ranks",
            players + 1
        )),
        GameId::Leduc { raise_cap, .. } if !(1..=2).contains(&raise_cap) => {
            bad(format!("raise_cap must be 1 or 2, got {raise_cap}"))
        }
        GameId::Leduc { ranks, suits, .. }
            if ranks < 2 || suits < 1 || ranks * suits < 3 || ranks > 13 =>
        {
            bad(format!(
                "leduc deck {ranks}x{suits} needs 2..=13 ranks and at least 3 cards"
            ))
        }
        GameId::LiarsDice { players, faces } if faces < 2 || players * faces > 14 => bad(format!(
            "liar's dice with {players} players needs 2..={} faces",
            14 / players
        )),
        _ => Ok(()),
    }
}

impl From<GameSpec> for RawGame {
    fn from(g: GameSpec) -> RawGame {
        let mut raw = RawGame {
            id: g.name,
            ranks: None,
            suits: None,
            raise_cap: None,
            faces: None,
        };
        match g.id {
            GameId::Kuhn { ranks, .. } => raw.ranks = Some(ranks),
            GameId::Leduc {
                raise_cap,
                ranks,
                suits,
            } => {
                raw.raise_cap = Some(raise_cap);
                raw.ranks = Some(ranks);
                raw.suits = Some(suits);
            }
            GameId::LiarsDice { faces, .. } => raw.faces = Some(faces),
            GameId::Goofspiel3 | GameId::MatchingPennies => {}
        }
        raw
    }
}

impl GameSpec {
    pub fn build(&self) -> Result<GameTree, GameError> {
        self.id.build()
    }

    /// Number of players without building the tree.
    pub fn num_players(&self) -> usize {
        match self.id {
            GameId::Kuhn { players, .. } | GameId::LiarsDice { players, .. } => players,
            GameId::Leduc { .. } | GameId::MatchingPennies => 2,
            GameId::Goofspiel3 => 3,
        }
    }
}

impl fmt::Display for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id)
    }
}

/// One player's learner in a fixed-profile run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerSpec {
    pub algorithm: AlgorithmName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Eta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lmo_per_iteration: Option<Count>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apo: Option<ApoKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<EpsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmstart: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithms: Option<Spanned<Grid<AlgorithmName>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Spanned<Grid<Eta>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lmo_per_iteration: Option<Spanned<Grid<Count>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub averaging: Option<Grid<AveragingName>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restart: Option<Spanned<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apo: Option<ApoKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<EpsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmstart: Option<bool>,
    /// Fixed per-player learners instead of the algorithm, eta and LMO grids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub players: Option<Spanned<Vec<PlayerSpec>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: Spanned<u32>,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the `POLYFW_OUT_DIR` environment variable takes precedence.
    #[serde(default = "default_output")]
    pub output: String,
    /// Stop once the average number of learning LMO calls per player reaches this value.
    pub lmo_budget: Count,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<Count>,
    /// Record every k-th iteration; by default every iteration up to 1000, then sparser.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<Count>,
    pub game: GameSpec,
    pub sweep: Sweep,
}

fn default_output() -> String {
    "polyfw-out".into()
}

fn unspanned<T>(v: T) -> Spanned<T> {
    Spanned::new(0..0, v)
}

impl ExperimentConfig {
    /// Parses and validates a configuration; `path` only labels diagnostics.
    pub fn from_toml(text: &str, path: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text)
            .map_err(|e| located(path, text, e.span(), e.message().to_string()))?;
        config
            .validate()
            .map_err(|(span, message)| located(path, text, span, message))?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let label = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: label.clone(),
            source,
        })?;
        Self::from_toml(&text, &label)
    }

    /// Checks that need more than one value; errors carry the span of the value to blame.
    fn validate(&self) -> Result<(), (Option<Range<usize>>, String)> {
        let span = |s: Range<usize>| if s.is_empty() { None } else { Some(s) };
        if *self.schema.get_ref() != SCHEMA_VERSION {
            return Err((
                span(self.schema.span()),
                format!(
                    "unsupported schema {}, expected {SCHEMA_VERSION}",
                    self.schema.get_ref()
                ),
            ));
        }
        let sweep = &self.sweep;
        let players = self.game.num_players();
        let two_player_zero_sum = players == 2;
        if let Some(restart) = &sweep.restart {
            if *restart.get_ref() && !two_player_zero_sum {
                return Err((
                    span(restart.span()),
                    format!("restarting requires a two-player zero-sum game, `{}` has {players} players", self.game.name),
                ));
            }
        }
        match &sweep.players {
            Some(list) => {
                let conflict = [
                    sweep.algorithms.as_ref().map(|_| "algorithms"),
                    sweep.eta.as_ref().map(|_| "eta"),
                    sweep
                        .lmo_per_iteration
                        .as_ref()
                        .map(|_| "lmo_per_iteration"),
                ];
                if let Some(key) = conflict.into_iter().flatten().next() {
                    return Err((
                        span(list.span()),
                        format!("`players` cannot be combined with `{key}`"),
                    ));
                }
                if list.get_ref().len() != players {
                    return Err((
                        span(list.span()),
                        format!(
                            "{} player entries for a {players}-player game",
                            list.get_ref().len()
                        ),
                    ));
                }
                for p in list.get_ref() {
                    if p.algorithm.0.uses_eta() && p.eta.is_none() {
                        return Err((
                            span(list.span()),
                            format!("algorithm `{}` needs `eta`", p.algorithm.0),
                        ));
                    }
                    let apo = p.apo.or(sweep.apo).unwrap_or(ApoKind::Budget);
                    if p.algorithm.0.is_fw_family()
                        && apo == ApoKind::Budget
                        && p.lmo_per_iteration.is_none()
                    {
                        return Err((
                            span(list.span()),
                            format!("algorithm `{}` needs `lmo_per_iteration`", p.algorithm.0),
                        ));
                    }
                }
            }
            None => {
                if sweep.algorithms.is_none() {
                    return Err((None, "[sweep] needs `algorithms` or `players`".into()));
                }
            }
        }
        Ok(())
    }

    /// The same experiment with every default written out.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut out = self.clone();
        let s = &mut out.sweep;
        let apo = *s.apo.get_or_insert(ApoKind::Budget);
        s.averaging
            .get_or_insert_with(|| Grid(vec![AveragingName(Averaging::Uniform)]));
        s.restart.get_or_insert_with(|| unspanned(false));
        s.warmstart.get_or_insert(true);
        if apo == ApoKind::Accuracy || s.eps.is_some() {
            s.eps.get_or_insert(EpsSpec(EpsSchedule::InverseSquare));
        }
        match &mut s.players {
            Some(list) => {
                for p in list.get_mut() {
                    p.apo.get_or_insert(apo);
                    p.warmstart.get_or_insert(s.warmstart.unwrap_or(true));
                    if p.apo == Some(ApoKind::Accuracy) {
                        p.eps
                            .get_or_insert(s.eps.unwrap_or(EpsSpec(EpsSchedule::InverseSquare)));
                    }
                }
            }
            None => {
                s.eta.get_or_insert_with(|| {
                    unspanned(Grid(default_eta_grid().into_iter().map(Eta).collect()))
                });
                if apo == ApoKind::Budget {
                    s.lmo_per_iteration.get_or_insert_with(|| {
                        unspanned(Grid(DEFAULT_LMO_GRID.iter().map(|&m| Count(m)).collect()))
                    });
                }
            }
        }
        out
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}
