//! Line-oriented text serialization of [`GameTree`].
//!
//! ```text
//! polyfw-game 1
//! name <name>
//! players <N>
//! root <id>
//! nodes <count>
//! c <id> <prob>:<child> ...
//! d <id> <player> <infoset> <label>:<child> ...
//! t <id> <payoff_0> ... <payoff_{N-1}>
//! ```
//!
//! One node record per line, in id order. Blank lines and lines starting with `#` are ignored.
//! Information-set ids and action labels may not contain whitespace or `:`.

use std::fmt::Write as _;

use super::{GameError, GameTree, Node};

const MAGIC: &str = "polyfw-game 1";

pub fn write_game(tree: &GameTree) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "name {}", tree.name);
    let _ = writeln!(out, "players {}", tree.num_players);
    let _ = writeln!(out, "root {}", tree.root);
    let _ = writeln!(out, "nodes {}", tree.nodes.len());
    for (id, node) in tree.nodes.iter().enumerate() {
        match node {
            Node::Chance { outcomes } => {
                let _ = write!(out, "c {id}");
                for (p, c) in outcomes {
                    let _ = write!(out, " {p:?}:{c}");
                }
            }
            Node::Decision {
                player,
                infoset,
                actions,
            } => {
                let _ = write!(out, "d {id} {player} {infoset}");
                for (label, c) in actions {
                    let _ = write!(out, " {label}:{c}");
                }
            }
            Node::Terminal { payoffs } => {
                let _ = write!(out, "t {id}");
                for p in payoffs {
                    let _ = write!(out, " {p:?}");
                }
            }
        }
        out.push('\n');
    }
    out
}

fn err(line: usize, msg: impl Into<String>) -> GameError {
    GameError::Parse {
        line,
        msg: msg.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T, GameError> {
    let tok = tok.ok_or_else(|| err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| err(line, format!("invalid {what} `{tok}`")))
}

fn pair(line: usize, tok: &str) -> Result<(&str, usize), GameError> {
    let (a, b) = tok
        .rsplit_once(':')
        .ok_or_else(|| err(line, format!("expected `x:child`, got `{tok}`")))?;
    Ok((a, num(line, Some(b), "child id")?))
}

fn header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    key: &str,
) -> Result<(usize, &'a str), GameError> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| err(0, format!("missing `{key}` header")))?;
    let rest = line
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| err(no, format!("expected `{key}` header")))?;
    Ok((no, rest.trim()))
}

/// Parses the format produced by [`write_game`] and validates the result.
pub fn parse_game(text: &str) -> Result<GameTree, GameError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        Some((no, _)) => return Err(err(no, format!("expected `{MAGIC}`"))),
        None => return Err(err(0, "empty input")),
    }
    let name = header(&mut lines, "name")?.1.to_string();
    let (no, players) = header(&mut lines, "players")?;
    let num_players: usize = num(no, Some(players), "player count")?;
    let (no, root) = header(&mut lines, "root")?;
    let root: usize = num(no, Some(root), "root id")?;
    let (no, count) = header(&mut lines, "nodes")?;
    let count: usize = num(no, Some(count), "node count")?;

    let mut nodes = Vec::with_capacity(count);
    for (no, line) in lines {
        let mut toks = line.split_whitespace();
        let kind = toks.next().unwrap_or_default();
        let id: usize = num(no, toks.next(), "node id")?;
        if id != nodes.len() {
            return Err(err(no, format!("node id {id} out of order")));
        }
        let node = match kind {
            "c" => {
                let outcomes = toks
                    .map(|t| {
                        let (p, c) = pair(no, t)?;
                        Ok((num(no, Some(p), "probability")?, c))
                    })
                    .collect::<Result<_, GameError>>()?;
                Node::Chance { outcomes }
            }
            "d" => {
                let player = num(no, toks.next(), "player")?;
                let infoset = toks
                    .next()
                    .ok_or_else(|| err(no, "missing information set"))?
                    .to_string();
                let actions = toks
                    .map(|t| pair(no, t).map(|(l, c)| (l.to_string(), c)))
                    .collect::<Result<_, _>>()?;
                Node::Decision {
                    player,
                    infoset,
                    actions,
                }
            }
            "t" => {
                let payoffs = toks
                    .map(|t| num(no, Some(t), "payoff"))
                    .collect::<Result<_, _>>()?;
                Node::Terminal { payoffs }
            }
            other => return Err(err(no, format!("unknown record kind `{other}`"))),
        };
        nodes.push(node);
    }
    if nodes.len() != count {
        return Err(err(
            0,
            format!("expected {count} nodes, found {}", nodes.len()),
        ));
    }
    let tree = GameTree {
        name,
        num_players,
        nodes,
        root,
    };
    tree.validate()?;
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{build_kuhn, matching_pennies};

    #[test]
    fn round_trip() {
        for tree in [matching_pennies(), build_kuhn(2, 3).unwrap()] {
            let text = write_game(&tree);
            assert_eq!(parse_game(&text).unwrap(), tree);
        }
    }

    #[test]
    fn reports_line_numbers() {
        let text = "polyfw-game 1\nname x\nplayers 2\nroot 0\nnodes 1\nt 0 1.0 oops\n";
        match parse_game(text) {
            Err(GameError::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_game("").is_err());
        assert!(parse_game("polyfw-game 1\nname x\nplayers 2\nroot 0\nnodes 1\nq 0\n").is_err());
    }
}
