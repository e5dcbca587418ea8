use std::collections::HashMap;

use super::{GameError, GameTree, Node};
use crate::polytope::{DecisionPoint, Treeplex, TOL_FEAS};

/// Payoff sums below this are treated as zero when detecting zero-sum games.
const ZERO_SUM_TOL: f64 = 1e-12;

/// A terminal history: reach probability of chance, each player's last sequence, raw payoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub chance_prob: f64,
    pub seqs: Vec<usize>,
    pub payoffs: Vec<f64>,
}

/// Multilinear sequence-form representation of an extensive-form game.
///
/// Payoffs of player `i` are multiplied by `scale(i)` in all utilities, gradients and metrics
/// except [`SequenceFormGame::raw_utility`]. The scale makes every loss gradient have norm at
/// most one and makes each loss 1-Lipschitz in the other players' strategies.
#[derive(Debug, Clone)]
pub struct SequenceFormGame {
    name: String,
    treeplexes: Vec<Treeplex>,
    infosets: Vec<Vec<InfosetInfo>>,
    leaves: Vec<Leaf>,
    scale: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    zero_sum: bool,
    // leaves merged by sequence profile: seqs[t * n + i], coef[t * n + i] = sum of chance * payoff
    term_seqs: Vec<usize>,
    term_coefs: Vec<f64>,
}

struct InfosetEntry {
    parent: usize,
    first: usize,
}

/// An information set as it appears in a player's treeplex.
#[derive(Debug, Clone, PartialEq)]
pub struct InfosetInfo {
    pub name: String,
    pub parent: usize,
    pub first: usize,
    pub actions: Vec<String>,
}

struct Builder {
    players: usize,
    infosets: Vec<HashMap<String, InfosetEntry>>,
    decision_points: Vec<Vec<DecisionPoint>>,
    info: Vec<Vec<InfosetInfo>>,
    next_seq: Vec<usize>,
    leaves: Vec<Leaf>,
}

impl Builder {
    fn walk(
        &mut self,
        tree: &GameTree,
        id: usize,
        prob: f64,
        cur: &mut Vec<usize>,
        depth: usize,
    ) -> Result<(), GameError> {
        if depth > tree.nodes.len() {
            return Err(GameError::Malformed("game graph contains a cycle".into()));
        }
        match &tree.nodes[id] {
            Node::Terminal { payoffs } => {
                self.leaves.push(Leaf {
                    chance_prob: prob,
                    seqs: cur.clone(),
                    payoffs: payoffs.clone(),
                });
            }
            Node::Chance { outcomes } => {
                for &(p, child) in outcomes {
                    self.walk(tree, child, prob * p, cur, depth + 1)?;
                }
            }
            Node::Decision {
                player,
                infoset,
                actions,
            } => {
                let p = *player;
                let parent = cur[p];
                let first = match self.infosets[p].get(infoset) {
                    Some(entry) if entry.parent != parent => {
                        return Err(GameError::ImperfectRecall(infoset.clone()));
                    }
                    Some(entry) => entry.first,
                    None => {
                        let first = self.next_seq[p];
                        self.next_seq[p] += actions.len();
                        self.decision_points[p].push(DecisionPoint {
                            parent,
                            children: (first..first + actions.len()).collect(),
                        });
                        self.infosets[p].insert(infoset.clone(), InfosetEntry { parent, first });
                        self.info[p].push(InfosetInfo {
                            name: infoset.clone(),
                            parent,
                            first,
                            actions: actions.iter().map(|(l, _)| l.clone()).collect(),
                        });
                        first
                    }
                };
                for (a, (_, child)) in actions.iter().enumerate() {
                    cur[p] = first + a;
                    self.walk(tree, *child, prob, cur, depth + 1)?;
                }
                cur[p] = parent;
            }
        }
        Ok(())
    }
}

impl SequenceFormGame {
    /// Converts a perfect-recall game tree to sequence form and normalizes payoffs.
    pub fn from_tree(tree: &GameTree) -> Result<Self, GameError> {
        tree.validate()?;
        let n = tree.num_players;
        if n == 0 {
            return Err(GameError::Malformed("game has no players".into()));
        }
        let mut b = Builder {
            players: n,
            infosets: (0..n).map(|_| HashMap::new()).collect(),
            decision_points: vec![Vec::new(); n],
            info: vec![Vec::new(); n],
            next_seq: vec![1; n],
            leaves: Vec::new(),
        };
        b.walk(tree, tree.root, 1.0, &mut vec![0; n], 0)?;
        let treeplexes = (0..b.players)
            .map(|p| Treeplex::new(b.next_seq[p], std::mem::take(&mut b.decision_points[p])))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_parts(
            tree.name.clone(),
            treeplexes,
            b.info,
            b.leaves,
        ))
    }

    fn from_parts(
        name: String,
        treeplexes: Vec<Treeplex>,
        infosets: Vec<Vec<InfosetInfo>>,
        leaves: Vec<Leaf>,
    ) -> Self {
        let n = treeplexes.len();
        let zero_sum = leaves
            .iter()
            .all(|l| l.payoffs.iter().sum::<f64>().abs() <= ZERO_SUM_TOL);
        let bounds: Vec<(f64, f64)> = (0..n)
            .map(|i| normalization_bounds(&treeplexes, &leaves, i))
            .collect();
        let per_player: Vec<f64> = bounds.iter().map(|&(g, s)| g.max(s)).collect();
        let scale = if zero_sum {
            let b = per_player.iter().cloned().fold(0.0, f64::max);
            vec![inverse_or_one(b); n]
        } else {
            per_player.iter().map(|&b| inverse_or_one(b)).collect()
        };

        let mut index: HashMap<&[usize], usize> = HashMap::new();
        let mut term_seqs = Vec::new();
        let mut term_coefs: Vec<f64> = Vec::new();
        for leaf in &leaves {
            let t = *index.entry(&leaf.seqs).or_insert_with(|| {
                term_seqs.extend_from_slice(&leaf.seqs);
                term_coefs.extend(std::iter::repeat_n(0.0, n));
                term_seqs.len() / n - 1
            });
            for i in 0..n {
                term_coefs[t * n + i] += leaf.chance_prob * leaf.payoffs[i];
            }
        }
        SequenceFormGame {
            name,
            treeplexes,
            infosets,
            leaves,
            scale,
            bounds,
            zero_sum,
            term_seqs,
            term_coefs,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_players(&self) -> usize {
        self.treeplexes.len()
    }

    pub fn treeplex(&self, i: usize) -> &Treeplex {
        &self.treeplexes[i]
    }

    pub fn treeplexes(&self) -> &[Treeplex] {
        &self.treeplexes
    }

    /// Information sets of player `i` in treeplex order.
    pub fn infosets(&self, i: usize) -> &[InfosetInfo] {
        &self.infosets[i]
    }

    /// Realization plan of a behavioral strategy. `behavior(infoset, actions)` returns the
    /// action probabilities at each information set.
    pub fn realization_plan(
        &self,
        i: usize,
        mut behavior: impl FnMut(&str, &[String]) -> Vec<f64>,
    ) -> Result<Vec<f64>, GameError> {
        let mut x = vec![0.0; self.treeplexes[i].num_sequences()];
        x[0] = 1.0;
        for info in &self.infosets[i] {
            let probs = behavior(&info.name, &info.actions);
            if probs.len() != info.actions.len() {
                return Err(GameError::NotApplicable(format!(
                    "behavior at {} has {} probabilities",
                    info.name,
                    probs.len()
                )));
            }
            for (a, p) in probs.into_iter().enumerate() {
                x[info.first + a] = x[info.parent] * p;
            }
        }
        self.treeplexes[i].validate_point(&x)?;
        Ok(x)
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    /// Multiplier applied to player `i`'s raw payoffs.
    pub fn scale(&self, i: usize) -> f64 {
        self.scale[i]
    }

    /// The raw gradient-norm and smoothness bounds `(G_i, S_i)` behind the scale.
    pub fn normalization_bounds(&self, i: usize) -> (f64, f64) {
        self.bounds[i]
    }

    pub fn is_zero_sum(&self) -> bool {
        self.zero_sum
    }

    /// Checks that `x` holds one feasible point per player.
    pub fn validate_joint(&self, x: &[Vec<f64>]) -> Result<(), GameError> {
        if x.len() != self.num_players() {
            return Err(GameError::NotApplicable(format!(
                "expected {} strategies, got {}",
                self.num_players(),
                x.len()
            )));
        }
        for (t, xi) in self.treeplexes.iter().zip(x) {
            t.validate_point(xi)?;
        }
        Ok(())
    }

    fn check_dims(&self, x: &[Vec<f64>]) {
        assert_eq!(x.len(), self.num_players(), "one strategy per player");
        for (t, xi) in self.treeplexes.iter().zip(x) {
            assert_eq!(t.num_sequences(), xi.len(), "strategy dimension");
        }
    }

    fn raw_utility_unscaled(&self, i: usize, x: &[Vec<f64>]) -> f64 {
        self.check_dims(x);
        let n = self.num_players();
        let mut total = 0.0;
        for (seqs, coefs) in self.term_seqs.chunks(n).zip(self.term_coefs.chunks(n)) {
            let c = coefs[i];
            if c == 0.0 {
                continue;
            }
            let reach: f64 = seqs.iter().zip(x).map(|(&s, xj)| xj[s]).product();
            total += c * reach;
        }
        total
    }

    /// Expected payoff of player `i` before normalization.
    pub fn raw_utility(&self, i: usize, x: &[Vec<f64>]) -> f64 {
        self.raw_utility_unscaled(i, x)
    }

    /// Expected normalized payoff of player `i`.
    pub fn utility(&self, i: usize, x: &[Vec<f64>]) -> f64 {
        self.scale[i] * self.raw_utility_unscaled(i, x)
    }

    /// Loss of player `i`: the negated gradient of `utility(i, .)` with respect to `x[i]`.
    pub fn loss_gradient(&self, i: usize, x: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.treeplexes[i].num_sequences()];
        self.loss_gradient_into(i, x, &mut out);
        out
    }

    pub fn loss_gradient_into(&self, i: usize, x: &[Vec<f64>], out: &mut [f64]) {
        self.check_dims(x);
        assert_eq!(out.len(), self.treeplexes[i].num_sequences());
        out.fill(0.0);
        let n = self.num_players();
        let scale = self.scale[i];
        for (seqs, coefs) in self.term_seqs.chunks(n).zip(self.term_coefs.chunks(n)) {
            let c = coefs[i];
            if c == 0.0 {
                continue;
            }
            let mut reach = 1.0;
            for (j, (&s, xj)) in seqs.iter().zip(x).enumerate() {
                if j != i {
                    reach *= xj[s];
                }
            }
            out[seqs[i]] -= scale * c * reach;
        }
    }

    /// Loss gradients of all players.
    pub fn loss_gradients(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        (0..self.num_players())
            .map(|i| self.loss_gradient(i, x))
            .collect()
    }

    /// Best normalized payoff player `i` can obtain by deviating, others fixed.
    pub fn best_response_value(&self, i: usize, x: &[Vec<f64>]) -> Result<f64, GameError> {
        let loss = self.loss_gradient(i, x);
        let v = self.treeplexes[i].lmo(&loss)?;
        Ok(-v.dot(&loss))
    }

    /// Sum over players of the gain from a unilateral best response, clamped at zero.
    pub fn nash_gap(&self, x: &[Vec<f64>]) -> Result<f64, GameError> {
        self.validate_joint(x)?;
        let mut gap = 0.0;
        for i in 0..self.num_players() {
            let loss = self.loss_gradient(i, x);
            let v = self.treeplexes[i].lmo(&loss)?;
            let current: f64 = loss.iter().zip(&x[i]).map(|(l, xi)| l * xi).sum();
            gap += current - v.dot(&loss);
        }
        Ok(clamp_rounding(gap))
    }

    /// Duality gap of a two-player zero-sum game: how much both players could gain in total
    /// by best responding to the other's strategy. Zero exactly at a Nash equilibrium.
    pub fn duality_gap(&self, xbar: &[f64], ybar: &[f64]) -> Result<f64, GameError> {
        if self.num_players() != 2 || !self.zero_sum {
            return Err(GameError::NotApplicable(
                "duality gap requires a two-player zero-sum game".into(),
            ));
        }
        self.nash_gap(&[xbar.to_vec(), ybar.to_vec()])
    }

    /// Maximum over players of the average external regret of the given play.
    /// `histories[i]` lists `(strategy, loss)` pairs of player `i`.
    pub fn max_avg_regret(
        &self,
        histories: &[Vec<(Vec<f64>, Vec<f64>)>],
    ) -> Result<f64, GameError> {
        let mut tracker = RegretTracker::new(self);
        for (i, history) in histories.iter().enumerate() {
            if i >= self.num_players() {
                return Err(GameError::NotApplicable("too many histories".into()));
            }
            for (x, l) in history {
                tracker.record(i, x, l);
            }
        }
        tracker.max_avg_regret(self)
    }
}

fn inverse_or_one(b: f64) -> f64 {
    if b > 0.0 {
        1.0 / b
    } else {
        1.0
    }
}

fn clamp_rounding(gap: f64) -> f64 {
    if gap < 0.0 {
        debug_assert!(gap > -TOL_FEAS, "negative gap {gap}");
        0.0
    } else {
        gap
    }
}

/// `(G_i, S_i)`: a bound on `||grad_i||_2` and on the Lipschitz constant of player `i`'s loss
/// with respect to any single other player's strategy.
fn normalization_bounds(treeplexes: &[Treeplex], leaves: &[Leaf], i: usize) -> (f64, f64) {
    let mut g = vec![0.0; treeplexes[i].num_sequences()];
    let mut pairs: Vec<HashMap<(usize, usize), f64>> = vec![HashMap::new(); treeplexes.len()];
    for leaf in leaves {
        let w = leaf.chance_prob * leaf.payoffs[i].abs();
        if w == 0.0 {
            continue;
        }
        let si = leaf.seqs[i];
        g[si] += w;
        for (j, &sj) in leaf.seqs.iter().enumerate() {
            if j != i {
                *pairs[j].entry((si, sj)).or_insert(0.0) += w;
            }
        }
    }
    let g_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let s = pairs
        .iter()
        .map(|m| m.values().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    (g_norm, s)
}

/// Incremental bookkeeping for [`SequenceFormGame::max_avg_regret`].
#[derive(Debug, Clone)]
pub struct RegretTracker {
    cumulative_loss: Vec<Vec<f64>>,
    incurred: Vec<f64>,
    rounds: Vec<u64>,
}

impl RegretTracker {
    pub fn new(game: &SequenceFormGame) -> Self {
        RegretTracker {
            cumulative_loss: game
                .treeplexes()
                .iter()
                .map(|t| vec![0.0; t.num_sequences()])
                .collect(),
            incurred: vec![0.0; game.num_players()],
            rounds: vec![0; game.num_players()],
        }
    }

    /// Adds one round of player `i`: the strategy played and the loss observed.
    pub fn record(&mut self, i: usize, x: &[f64], loss: &[f64]) {
        assert_eq!(x.len(), loss.len());
        self.incurred[i] += x.iter().zip(loss).map(|(a, b)| a * b).sum::<f64>();
        for (c, l) in self.cumulative_loss[i].iter_mut().zip(loss) {
            *c += l;
        }
        self.rounds[i] += 1;
    }

    /// Cumulative regret of player `i` against the best fixed vertex in hindsight.
    pub fn regret(&self, game: &SequenceFormGame, i: usize) -> Result<f64, GameError> {
        let v = game.treeplex(i).lmo(&self.cumulative_loss[i])?;
        Ok(self.incurred[i] - v.dot(&self.cumulative_loss[i]))
    }

    pub fn max_avg_regret(&self, game: &SequenceFormGame) -> Result<f64, GameError> {
        let mut best = f64::NEG_INFINITY;
        for i in 0..game.num_players() {
            let t = self.rounds[i].max(1) as f64;
            best = best.max(self.regret(game, i)? / t);
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{build_kuhn, matching_pennies, TreeBuilder};

    #[test]
    fn kuhn_treeplex_shape() {
        let g = SequenceFormGame::from_tree(&build_kuhn(2, 3).unwrap()).unwrap();
        for i in 0..2 {
            assert_eq!(g.treeplex(i).num_sequences(), 13);
            assert_eq!(g.treeplex(i).decision_points().len(), 6);
        }
        assert_eq!(g.leaves().len(), 30);
        assert!(g.is_zero_sum());
        assert_eq!(g.scale(0), g.scale(1));
    }

    #[test]
    fn matching_pennies_value() {
        let g = SequenceFormGame::from_tree(&matching_pennies()).unwrap();
        let x = vec![vec![1.0, 0.5, 0.5], vec![1.0, 0.5, 0.5]];
        assert_eq!(g.raw_utility(0, &x), 0.0);
        assert!(g.duality_gap(&x[0], &x[1]).unwrap() < 1e-15);
        let pure = vec![vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 0.0]];
        assert_eq!(g.raw_utility(0, &pure), 1.0);
        assert!(g.duality_gap(&pure[0], &pure[1]).unwrap() > 0.0);
    }

    #[test]
    fn imperfect_recall_is_rejected() {
        // player 0 forgets its first action
        let mut b = TreeBuilder::default();
        let t = b.terminal(vec![0.0, 0.0]);
        let forget_l = b.decision(0, "F".into(), vec![("a".into(), t), ("b".into(), t)]);
        let forget_r = b.decision(0, "F".into(), vec![("a".into(), t), ("b".into(), t)]);
        let root = b.decision(
            0,
            "R".into(),
            vec![("l".into(), forget_l), ("r".into(), forget_r)],
        );
        let tree = b.finish("forgetful", 2, root);
        assert!(matches!(
            SequenceFormGame::from_tree(&tree),
            Err(GameError::ImperfectRecall(_))
        ));
    }

    #[test]
    fn duality_gap_requires_two_player_zero_sum() {
        let g = SequenceFormGame::from_tree(&build_kuhn(3, 4).unwrap()).unwrap();
        let x: Vec<Vec<f64>> = g.treeplexes().iter().map(|t| t.uniform_point()).collect();
        assert!(g.duality_gap(&x[0], &x[1]).is_err());
        assert!(g.nash_gap(&x).unwrap() > 0.0);
    }
}
