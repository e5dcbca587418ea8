//! Three-card Goofspiel with limited information.
//!
//! Each player holds cards {-1, 0, 1}, and a shuffled stack of prizes {-1, 0, 1} is revealed one
//! card per turn. Every turn all players bid one of their remaining cards; bids are collected
//! in seat order but stay hidden, and only the set of players holding the highest bid is
//! announced. Those players split the prize evenly. A player's payoff is the sum of prizes won.

use super::{GameError, GameTree, TreeBuilder};

const CARDS: [i32; 3] = [-1, 0, 1];

struct Goofspiel {
    players: usize,
    order: [i32; 3],
}

#[derive(Clone)]
struct State {
    turn: usize,
    /// `bids[p]` lists the cards player `p` has played, turn by turn.
    bids: Vec<Vec<i32>>,
    /// Announced winner sets of completed turns, as seat strings.
    winners: Vec<String>,
    scores: Vec<f64>,
}

impl Goofspiel {
    fn infoset(&self, s: &State, p: usize) -> String {
        let prizes: Vec<String> = self.order[..=s.turn].iter().map(i32::to_string).collect();
        let own: Vec<String> = s.bids[p].iter().map(i32::to_string).collect();
        format!(
            "P{p}|{}|{}|{}",
            prizes.join(","),
            own.join(","),
            s.winners.join(",")
        )
    }

    fn resolve(&self, s: &State) -> State {
        let bids: Vec<i32> = (0..self.players).map(|p| s.bids[p][s.turn]).collect();
        let top = *bids.iter().max().expect("players bid");
        let winners: Vec<usize> = (0..self.players).filter(|&p| bids[p] == top).collect();
        let share = f64::from(self.order[s.turn]) / winners.len() as f64;
        let mut next = s.clone();
        for &w in &winners {
            next.scores[w] += share;
        }
        next.winners
            .push(winners.iter().map(usize::to_string).collect::<String>());
        next.turn += 1;
        next
    }

    fn node(&self, b: &mut TreeBuilder, s: &State, p: usize) -> usize {
        if p == self.players {
            let next = self.resolve(s);
            if next.turn == CARDS.len() {
                return b.terminal(next.scores);
            }
            return self.node(b, &next, 0);
        }
        let mut children = Vec::new();
        for card in CARDS {
            if s.bids[p].contains(&card) {
                continue;
            }
            let mut next = s.clone();
            next.bids[p].push(card);
            children.push((card.to_string(), self.node(b, &next, p + 1)));
        }
        b.decision(p, self.infoset(s, p), children)
    }
}

/// Builds the three-player game; other player counts are rejected.
pub fn build_goofspiel3(players: usize) -> Result<GameTree, GameError> {
    if players != 3 {
        return Err(GameError::Unsupported(format!(
            "goofspiel with {players} players"
        )));
    }
    let orders = [
        [-1, 0, 1],
        [-1, 1, 0],
        [0, -1, 1],
        [0, 1, -1],
        [1, -1, 0],
        [1, 0, -1],
    ];
    let mut b = TreeBuilder::default();
    let mut outcomes = Vec::new();
    for order in orders {
        let game = Goofspiel { players, order };
        let start = State {
            turn: 0,
            bids: vec![Vec::new(); players],
            winners: Vec::new(),
            scores: vec![0.0; players],
        };
        outcomes.push((1.0 / 6.0, game.node(&mut b, &start, 0)));
    }
    let root = b.chance(outcomes);
    let tree = b.finish("goofspiel3", players, root);
    tree.validate()?;
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::Node;

    #[test]
    fn zero_sum_with_six_orderings() {
        let tree = build_goofspiel3(3).unwrap();
        match &tree.nodes[tree.root] {
            Node::Chance { outcomes } => {
                assert_eq!(outcomes.len(), 6);
                assert!(outcomes.iter().all(|(p, _)| *p == 1.0 / 6.0));
            }
            _ => panic!("root must be chance"),
        }
        // 6 orderings, (3!)^3 bid profiles
        assert_eq!(tree.num_terminals(), 6 * 216);
        for node in &tree.nodes {
            if let Node::Terminal { payoffs } = node {
                assert!(payoffs.iter().sum::<f64>().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ties_split() {
        let g = Goofspiel {
            players: 3,
            order: [1, 0, -1],
        };
        let s = State {
            turn: 0,
            bids: vec![vec![1], vec![1], vec![0]],
            winners: Vec::new(),
            scores: vec![0.0; 3],
        };
        let next = g.resolve(&s);
        assert_eq!(next.scores, vec![0.5, 0.5, 0.0]);
        assert_eq!(next.winners, vec!["01".to_string()]);
    }
}
