//! Extensive-form benchmark games and their sequence-form representation.

mod format;
mod goofspiel;
mod kuhn;
mod leduc;
mod liars_dice;
mod sequence_form;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub use format::{parse_game, write_game};
pub use goofspiel::build_goofspiel3;
pub use kuhn::build_kuhn;
pub use leduc::{build_leduc, build_leduc_with_deck};
pub use liars_dice::build_liars_dice;
pub use sequence_form::{InfosetInfo, Leaf, RegretTracker, SequenceFormGame};

use crate::polytope::PolytopeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("unsupported game parameters: {0}")]
    Unsupported(String),
    #[error("malformed game tree: {0}")]
    Malformed(String),
    #[error("imperfect recall at information set {0}")]
    ImperfectRecall(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    NotApplicable(String),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Chance {
        outcomes: Vec<(f64, usize)>,
    },
    Decision {
        player: usize,
        infoset: String,
        actions: Vec<(String, usize)>,
    },
    Terminal {
        payoffs: Vec<f64>,
    },
}

/// An extensive-form game tree stored as a node arena.
#[derive(Debug, Clone, PartialEq)]
pub struct GameTree {
    pub name: String,
    pub num_players: usize,
    pub nodes: Vec<Node>,
    pub root: usize,
}

/// Tolerance for chance probabilities summing to one.
pub const CHANCE_TOL: f64 = 1e-12;

impl GameTree {
    /// Checks node references, chance distributions and information-set consistency.
    pub fn validate(&self) -> Result<(), GameError> {
        let n = self.nodes.len();
        if self.root >= n {
            return Err(GameError::Malformed(format!(
                "root {} out of range",
                self.root
            )));
        }
        let mut infosets: HashMap<&str, (usize, Vec<&str>)> = HashMap::new();
        for (id, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Chance { outcomes } => {
                    if outcomes.is_empty() {
                        return Err(GameError::Malformed(format!(
                            "chance node {id} has no outcomes"
                        )));
                    }
                    if outcomes.iter().any(|&(p, c)| !(p >= 0.0) || c >= n) {
                        return Err(GameError::Malformed(format!(
                            "chance node {id} has a bad outcome"
                        )));
                    }
                    let total: f64 = outcomes.iter().map(|(p, _)| p).sum();
                    if (total - 1.0).abs() > CHANCE_TOL {
                        return Err(GameError::Malformed(format!(
                            "chance node {id} probabilities sum to {total}"
                        )));
                    }
                }
                Node::Decision {
                    player,
                    infoset,
                    actions,
                } => {
                    if *player >= self.num_players {
                        return Err(GameError::Malformed(format!(
                            "node {id} has player {player}"
                        )));
                    }
                    if actions.is_empty() || actions.iter().any(|(_, c)| *c >= n) {
                        return Err(GameError::Malformed(format!(
                            "decision node {id} has bad actions"
                        )));
                    }
                    let labels: Vec<&str> = actions.iter().map(|(l, _)| l.as_str()).collect();
                    match infosets.get(infoset.as_str()) {
                        Some((p, l)) if *p != *player || *l != labels => {
                            return Err(GameError::Malformed(format!(
                                "information set {infoset} is inconsistent at node {id}"
                            )));
                        }
                        Some(_) => {}
                        None => {
                            infosets.insert(infoset, (*player, labels));
                        }
                    }
                }
                Node::Terminal { payoffs } => {
                    if payoffs.len() != self.num_players {
                        return Err(GameError::Malformed(format!(
                            "terminal {id} has {} payoffs",
                            payoffs.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn num_terminals(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Terminal { .. }))
            .count()
    }

    /// Number of distinct information sets of `player`.
    pub fn num_infosets(&self, player: usize) -> usize {
        let mut seen = std::collections::HashSet::new();
        for node in &self.nodes {
            if let Node::Decision {
                player: p, infoset, ..
            } = node
            {
                if *p == player {
                    seen.insert(infoset.as_str());
                }
            }
        }
        seen.len()
    }
}

/// Appends nodes bottom-up; the last node pushed is usually the root.
#[derive(Debug, Default)]
pub(crate) struct TreeBuilder {
    nodes: Vec<Node>,
}

impl TreeBuilder {
    pub(crate) fn push(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub(crate) fn terminal(&mut self, payoffs: Vec<f64>) -> usize {
        self.push(Node::Terminal { payoffs })
    }

    pub(crate) fn chance(&mut self, outcomes: Vec<(f64, usize)>) -> usize {
        self.push(Node::Chance { outcomes })
    }

    pub(crate) fn decision(
        &mut self,
        player: usize,
        infoset: String,
        actions: Vec<(String, usize)>,
    ) -> usize {
        self.push(Node::Decision {
            player,
            infoset,
            actions,
        })
    }

    pub(crate) fn finish(self, name: &str, num_players: usize, root: usize) -> GameTree {
        GameTree {
            name: name.to_string(),
            num_players,
            nodes: self.nodes,
            root,
        }
    }
}

/// Converts a perfect-recall tree to its normalized sequence form.
pub fn to_sequence_form(tree: &GameTree) -> Result<SequenceFormGame, GameError> {
    SequenceFormGame::from_tree(tree)
}

/// A two-player normal-form game as a depth-two tree; the column player does not observe the
/// row player's action. `payoffs[r][c] = (u_row, u_col)`.
pub fn build_normal_form(name: &str, payoffs: &[Vec<(f64, f64)>]) -> Result<GameTree, GameError> {
    let cols = payoffs.first().map_or(0, Vec::len);
    if cols == 0 || payoffs.iter().any(|r| r.len() != cols) {
        return Err(GameError::Unsupported(
            "payoff matrix must be nonempty and rectangular".into(),
        ));
    }
    let mut b = TreeBuilder::default();
    let mut row_actions = Vec::new();
    for (r, row) in payoffs.iter().enumerate() {
        let col_actions = row
            .iter()
            .enumerate()
            .map(|(c, &(u1, u2))| (format!("a{c}"), b.terminal(vec![u1, u2])))
            .collect();
        let node = b.decision(1, "col".into(), col_actions);
        row_actions.push((format!("a{r}"), node));
    }
    let root = b.decision(0, "row".into(), row_actions);
    let tree = b.finish(name, 2, root);
    tree.validate()?;
    Ok(tree)
}

/// Matching pennies with payoffs +-1.
pub fn matching_pennies() -> GameTree {
    build_normal_form(
        "matching-pennies",
        &[
            vec![(1.0, -1.0), (-1.0, 1.0)],
            vec![(-1.0, 1.0), (1.0, -1.0)],
        ],
    )
    .expect("static game is valid")
}

/// The benchmark registry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GameId {
    Kuhn {
        players: usize,
        ranks: usize,
    },
    Leduc {
        raise_cap: usize,
        ranks: usize,
        suits: usize,
    },
    LiarsDice {
        players: usize,
        faces: usize,
    },
    Goofspiel3,
    MatchingPennies,
}

impl GameId {
    /// Registry names accepted by [`GameId::from_name`].
    pub const NAMES: [&'static str; 7] = [
        "kuhn2",
        "kuhn3",
        "leduc",
        "liars-dice2",
        "liars-dice3",
        "goofspiel3",
        "matching-pennies",
    ];

    /// Looks up a game by registry name with its default parameters.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "kuhn2" => GameId::Kuhn {
                players: 2,
                ranks: 3,
            },
            "kuhn3" => GameId::Kuhn {
                players: 3,
                ranks: 4,
            },
            "leduc" => GameId::Leduc {
                raise_cap: 2,
                ranks: 3,
                suits: 2,
            },
            "liars-dice2" => GameId::LiarsDice {
                players: 2,
                faces: 6,
            },
            "liars-dice3" => GameId::LiarsDice {
                players: 3,
                faces: 3,
            },
            "goofspiel3" => GameId::Goofspiel3,
            "matching-pennies" => GameId::MatchingPennies,
            _ => return None,
        })
    }

    pub fn build(&self) -> Result<GameTree, GameError> {
        match *self {
            GameId::Kuhn { players, ranks } => build_kuhn(players, ranks),
            GameId::Leduc {
                raise_cap,
                ranks,
                suits,
            } => build_leduc_with_deck(raise_cap, ranks, suits),
            GameId::LiarsDice { players, faces } => build_liars_dice(players, faces),
            GameId::Goofspiel3 => build_goofspiel3(3),
            GameId::MatchingPennies => Ok(matching_pennies()),
        }
    }
}

impl fmt::Display for GameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GameId::Kuhn { players, ranks } => write!(f, "kuhn{players}-r{ranks}"),
            GameId::Leduc {
                raise_cap,
                ranks,
                suits,
            } => write!(f, "leduc-cap{raise_cap}-r{ranks}-s{suits}"),
            GameId::LiarsDice { players, faces } => write!(f, "liars-dice{players}-k{faces}"),
            GameId::Goofspiel3 => write!(f, "goofspiel3"),
            GameId::MatchingPennies => write!(f, "matching-pennies"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_builds_small_games() {
        for name in ["kuhn2", "kuhn3", "matching-pennies", "goofspiel3"] {
            let id = GameId::from_name(name).unwrap();
            id.build().unwrap().validate().unwrap();
        }
        assert!(GameId::from_name("chess").is_none());
    }

    #[test]
    fn validation_catches_bad_chance() {
        let mut b = TreeBuilder::default();
        let t = b.terminal(vec![0.0, 0.0]);
        let root = b.chance(vec![(0.5, t), (0.4, t)]);
        assert!(matches!(
            b.finish("bad", 2, root).validate(),
            Err(GameError::Malformed(_))
        ));
    }

    #[test]
    fn validation_catches_inconsistent_infoset() {
        let mut b = TreeBuilder::default();
        let t = b.terminal(vec![0.0, 0.0]);
        let x = b.decision(1, "I".into(), vec![("a".into(), t)]);
        let y = b.decision(1, "I".into(), vec![("a".into(), t), ("b".into(), t)]);
        let root = b.decision(0, "R".into(), vec![("l".into(), x), ("r".into(), y)]);
        assert!(b.finish("bad", 2, root).validate().is_err());
    }
}
