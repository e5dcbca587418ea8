//! Liar's dice with one die per player.
//!
//! Every player privately rolls a `faces`-sided die. Players take turns in seat order making
//! bids `(count, face)` claiming that at least `count` dice show `face`; each bid must be higher
//! on the ladder `(count - 1) * faces + (face - 1)`. Instead of bidding, a player may call the
//! previous bid a lie. If the bid holds the challenger gets -1 and the bidder +1, otherwise the
//! reverse; everybody else gets 0. The first player must bid and the maximal bid must be called.

use super::{GameError, GameTree, TreeBuilder};

struct LiarsDice<'a> {
    players: usize,
    faces: usize,
    dice: &'a [usize],
}

impl LiarsDice<'_> {
    fn bid_label(&self, bid: usize) -> String {
        format!("{}x{}", bid / self.faces + 1, bid % self.faces + 1)
    }

    fn node(&self, b: &mut TreeBuilder, history: &mut Vec<usize>, to_act: usize) -> usize {
        let ladder = self.players * self.faces;
        let last = history.last().copied();
        let mut children = Vec::new();
        if let Some(bid) = last {
            let count = bid / self.faces + 1;
            let face = bid % self.faces;
            let holds = self.dice.iter().filter(|&&d| d == face).count() >= count;
            let bidder = (to_act + self.players - 1) % self.players;
            let mut payoffs = vec![0.0; self.players];
            let (winner, loser) = if holds {
                (bidder, to_act)
            } else {
                (to_act, bidder)
            };
            payoffs[winner] = 1.0;
            payoffs[loser] = -1.0;
            children.push(("liar".to_string(), b.terminal(payoffs)));
        }
        let start = last.map_or(0, |l| l + 1);
        for bid in start..ladder {
            history.push(bid);
            let child = self.node(b, history, (to_act + 1) % self.players);
            history.pop();
            children.push((self.bid_label(bid), child));
        }
        let public: Vec<String> = history.iter().map(|&h| self.bid_label(h)).collect();
        let infoset = format!("P{to_act}|{}|{}", self.dice[to_act] + 1, public.join(","));
        b.decision(to_act, infoset, children)
    }
}

pub fn build_liars_dice(players: usize, faces: usize) -> Result<GameTree, GameError> {
    if !(2..=3).contains(&players) || faces < 2 || players * faces > 14 {
        return Err(GameError::Unsupported(format!(
            "liar's dice with {players} players and {faces} faces"
        )));
    }
    let rolls = faces.pow(players as u32);
    let prob = 1.0 / rolls as f64;
    let mut b = TreeBuilder::default();
    let mut outcomes = Vec::with_capacity(rolls);
    for roll in 0..rolls {
        let dice: Vec<usize> = (0..players)
            .map(|p| roll / faces.pow(p as u32) % faces)
            .collect();
        let game = LiarsDice {
            players,
            faces,
            dice: &dice,
        };
        outcomes.push((prob, game.node(&mut b, &mut Vec::new(), 0)));
    }
    let root = b.chance(outcomes);
    let tree = b.finish(&format!("liars-dice{players}"), players, root);
    tree.validate()?;
    Ok(tree)
}
