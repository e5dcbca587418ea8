//! Leduc hold'em.
//!
//! Two players ante one chip and each receive a private card from a deck of `ranks` ranks with
//! `suits` copies each. The first betting round uses raises of 2 and the second, after a public
//! board card is revealed, raises of 4; each round allows at most `raise_cap` raises. Player 1
//! acts first in both rounds. A private card pairing the board wins, otherwise the higher rank
//! wins, and equal ranks split the pot.

use super::{GameError, GameTree, TreeBuilder};

const RAISE: [f64; 2] = [2.0, 4.0];

struct Leduc {
    raise_cap: usize,
    ranks: usize,
    suits: usize,
}

#[derive(Clone)]
struct State {
    cards: [usize; 2],
    board: Option<usize>,
    round: usize,
    contrib: [f64; 2],
    raises: usize,
    history: [String; 2],
    to_act: usize,
    /// Whether the current round has already seen an action.
    opened: bool,
}

impl Leduc {
    fn remaining(&self, used: &[usize], rank: usize) -> usize {
        self.suits - used.iter().filter(|&&r| r == rank).count()
    }

    /// Chance outcomes over ranks, weighted by the remaining copies of each rank.
    fn deal(&self, used: &[usize]) -> Vec<(f64, usize)> {
        let total = (self.ranks * self.suits - used.len()) as f64;
        (0..self.ranks)
            .filter_map(|r| {
                let left = self.remaining(used, r);
                (left > 0).then(|| (left as f64 / total, r))
            })
            .collect()
    }

    fn showdown(&self, s: &State) -> Vec<f64> {
        let board = s.board.expect("showdown after board");
        let strength = |c: usize| if c == board { self.ranks + c } else { c };
        let (a, b) = (strength(s.cards[0]), strength(s.cards[1]));
        debug_assert_eq!(s.contrib[0], s.contrib[1]);
        let won = s.contrib[0];
        match a.cmp(&b) {
            std::cmp::Ordering::Greater => vec![won, -won],
            std::cmp::Ordering::Less => vec![-won, won],
            std::cmp::Ordering::Equal => vec![0.0, 0.0],
        }
    }

    fn end_round(&self, b: &mut TreeBuilder, s: &State) -> usize {
        if s.round == 1 {
            return b.terminal(self.showdown(s));
        }
        let mut outcomes = Vec::new();
        for (p, rank) in self.deal(&s.cards) {
            let mut next = s.clone();
            next.board = Some(rank);
            next.round = 1;
            next.raises = 0;
            next.to_act = 0;
            next.opened = false;
            outcomes.push((p, self.betting(b, &next)));
        }
        b.chance(outcomes)
    }

    fn betting(&self, b: &mut TreeBuilder, s: &State) -> usize {
        let p = s.to_act;
        let facing = s.contrib[1 - p] > s.contrib[p];
        let mut children = Vec::new();
        let child_state = |code: char| {
            let mut n = s.clone();
            n.history[s.round].push(code);
            n.to_act = 1 - p;
            n.opened = true;
            n
        };
        if facing {
            let n = child_state('f');
            let loss = n.contrib[p];
            let payoffs = if p == 0 {
                vec![-loss, loss]
            } else {
                vec![loss, -loss]
            };
            children.push(("fold".to_string(), b.terminal(payoffs)));
            let mut n = child_state('k');
            n.contrib[p] = n.contrib[1 - p];
            children.push(("call".to_string(), self.end_round(b, &n)));
        } else {
            let n = child_state('c');
            let node = if s.opened {
                self.end_round(b, &n)
            } else {
                self.betting(b, &n)
            };
            children.push(("check".to_string(), node));
        }
        if s.raises < self.raise_cap {
            let mut n = child_state('r');
            n.contrib[p] = n.contrib[1 - p] + RAISE[s.round];
            n.raises += 1;
            children.push(("raise".to_string(), self.betting(b, &n)));
        }
        let board = s.board.map_or("-".to_string(), |r| r.to_string());
        let infoset = format!(
            "P{p}|{}|{board}|{}/{}",
            s.cards[p], s.history[0], s.history[1]
        );
        b.decision(p, infoset, children)
    }
}

/// Standard Leduc hold'em: three ranks with two suits each.
pub fn build_leduc(raise_cap: usize) -> Result<GameTree, GameError> {
    build_leduc_with_deck(raise_cap, 3, 2)
}

/// Leduc hold'em over a deck of `ranks` x `suits` cards.
pub fn build_leduc_with_deck(
    raise_cap: usize,
    ranks: usize,
    suits: usize,
) -> Result<GameTree, GameError> {
    if !(1..=2).contains(&raise_cap) || ranks < 2 || suits < 1 || ranks * suits < 3 || ranks > 13 {
        return Err(GameError::Unsupported(format!(
            "leduc with raise cap {raise_cap} and deck {ranks}x{suits}"
        )));
    }
    let game = Leduc {
        raise_cap,
        ranks,
        suits,
    };
    let mut b = TreeBuilder::default();
    let mut outer = Vec::new();
    for (p1, c1) in game.deal(&[]) {
        let mut inner = Vec::new();
        for (p2, c2) in game.deal(&[c1]) {
            let s = State {
                cards: [c1, c2],
                board: None,
                round: 0,
                contrib: [1.0, 1.0],
                raises: 0,
                history: [String::new(), String::new()],
                to_act: 0,
                opened: false,
            };
            inner.push((p2, game.betting(&mut b, &s)));
        }
        outer.push((p1, b.chance(inner)));
    }
    let root = b.chance(outer);
    let tree = b.finish("leduc", 2, root);
    tree.validate()?;
    Ok(tree)
}
