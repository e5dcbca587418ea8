//! Kuhn poker for two or more players.
//!
//! Each player antes one chip and is dealt one card from a deck of `ranks` distinct cards.
//! Players act in seat order. While nobody has bet a player may check or bet one chip; once a
//! bet is made every other player, in seat order after the bettor, folds or calls. The highest
//! card among non-folded players wins the pot.

use super::{GameError, GameTree, TreeBuilder};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Act {
    Check,
    Bet,
    Fold,
    Call,
}

impl Act {
    fn code(self) -> char {
        match self {
            Act::Check => 'c',
            Act::Bet => 'b',
            Act::Fold => 'f',
            Act::Call => 'k',
        }
    }

    fn label(self) -> &'static str {
        match self {
            Act::Check => "check",
            Act::Bet => "bet",
            Act::Fold => "fold",
            Act::Call => "call",
        }
    }
}

struct Kuhn<'a> {
    players: usize,
    cards: &'a [usize],
}

impl Kuhn<'_> {
    fn showdown(&self, contrib: &[f64], folded: &[bool]) -> Vec<f64> {
        let winner = (0..self.players)
            .filter(|&p| !folded[p])
            .max_by_key(|&p| self.cards[p])
            .expect("someone remains");
        let pot: f64 = contrib.iter().sum();
        (0..self.players)
            .map(|p| {
                if p == winner {
                    pot - contrib[p]
                } else {
                    -contrib[p]
                }
            })
            .collect()
    }

    fn node(
        &self,
        b: &mut TreeBuilder,
        history: &mut String,
        contrib: &mut Vec<f64>,
        folded: &mut Vec<bool>,
        bettor: Option<usize>,
        to_act: usize,
    ) -> usize {
        let acts: &[Act] = if bettor.is_some() {
            &[Act::Fold, Act::Call]
        } else {
            &[Act::Check, Act::Bet]
        };
        let mut children = Vec::with_capacity(2);
        for &act in acts {
            history.push(act.code());
            let (saved_contrib, saved_fold) = (contrib[to_act], folded[to_act]);
            let child = match act {
                Act::Check if to_act + 1 == self.players => {
                    b.terminal(self.showdown(contrib, folded))
                }
                Act::Check => self.node(b, history, contrib, folded, None, to_act + 1),
                Act::Bet | Act::Fold | Act::Call => {
                    match act {
                        Act::Bet | Act::Call => contrib[to_act] += 1.0,
                        _ => folded[to_act] = true,
                    }
                    let bettor = bettor.unwrap_or(to_act);
                    let next = (to_act + 1) % self.players;
                    if next == bettor {
                        b.terminal(self.showdown(contrib, folded))
                    } else {
                        self.node(b, history, contrib, folded, Some(bettor), next)
                    }
                }
            };
            contrib[to_act] = saved_contrib;
            folded[to_act] = saved_fold;
            history.pop();
            children.push((act.label().to_string(), child));
        }
        let infoset = format!("P{to_act}|{}|{}", self.cards[to_act], history);
        b.decision(to_act, infoset, children)
    }
}

fn deals(players: usize, ranks: usize) -> Vec<Vec<usize>> {
    fn rec(players: usize, ranks: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == players {
            out.push(cur.clone());
            return;
        }
        for r in 0..ranks {
            if !cur.contains(&r) {
                cur.push(r);
                rec(players, ranks, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(players, ranks, &mut Vec::new(), &mut out);
    out
}

/// Builds `players`-player Kuhn poker with `ranks` cards (card `r` beats every card below it).
pub fn build_kuhn(players: usize, ranks: usize) -> Result<GameTree, GameError> {
    if !(2..=3).contains(&players) || ranks < players + 1 || ranks > 13 {
        return Err(GameError::Unsupported(format!(
            "kuhn with {players} players and {ranks} ranks"
        )));
    }
    let all = deals(players, ranks);
    let prob = 1.0 / all.len() as f64;
    let mut b = TreeBuilder::default();
    let mut outcomes = Vec::with_capacity(all.len());
    for cards in &all {
        let game = Kuhn { players, cards };
        let child = game.node(
            &mut b,
            &mut String::new(),
            &mut vec![1.0; players],
            &mut vec![false; players],
            None,
            0,
        );
        outcomes.push((prob, child));
    }
    let root = b.chance(outcomes);
    let tree = b.finish(&format!("kuhn{players}"), players, root);
    tree.validate()?;
    Ok(tree)
}
