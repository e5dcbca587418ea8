//! Sequence-form strategy polytopes (treeplexes) and the probability simplex.
//!
//! A treeplex with `n` sequences is the set `{x >= 0 : x[0] = 1, sum_{c in children(d)} x[c] =
//! x[parent(d)] for every decision point d}`. Its vertices are exactly the deterministic
//! strategies, stored here as the sorted set of sequences they select.

mod facial;

pub use facial::{
    closed_form_simplex_facial_distance, fd_bruteforce, fd_lower_bound_equality_form,
    fd_lower_bound_integral_form, hull_distance, polytope_facial_distance, FacialDistanceOptions,
};

use thiserror::Error;

/// Feasibility tolerance for every point and active-set invariant.
pub const TOL_FEAS: f64 = 1e-9;

/// Weights at or below this value are dropped from an active set.
pub const WEIGHT_DROP: f64 = 1e-12;

/// Default cap on the number of vertices [`Treeplex::enumerate_vertices`] will produce.
pub const DEFAULT_VERTEX_CAP: u128 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolytopeError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid treeplex: {0}")]
    InvalidStructure(String),
    #[error("vertex count {count} exceeds cap {cap}")]
    CapExceeded { count: u128, cap: u128 },
    #[error("infeasible point: {0}")]
    Infeasible(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("hull-distance solver did not converge: {0}")]
    SolverFailure(String),
}

/// One information set: the parent sequence and the sequences it branches into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionPoint {
    pub parent: usize,
    pub children: Vec<usize>,
}

/// The constraint structure of a sequence-form polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct Treeplex {
    num_sequences: usize,
    decision_points: Vec<DecisionPoint>,
    // decision points whose parent is the given sequence
    below: Vec<Vec<usize>>,
}

impl Treeplex {
    /// Builds and validates a treeplex. Sequence indices must be topologically ordered
    /// (every child index is larger than its parent index) and index 0 is the empty sequence.
    pub fn new(
        num_sequences: usize,
        mut decision_points: Vec<DecisionPoint>,
    ) -> Result<Self, PolytopeError> {
        if num_sequences == 0 {
            return Err(PolytopeError::InvalidStructure("no sequences".into()));
        }
        let mut owner = vec![None; num_sequences];
        for (d, dp) in decision_points.iter_mut().enumerate() {
            if dp.children.is_empty() {
                return Err(PolytopeError::InvalidStructure(format!(
                    "decision point {d} has no children"
                )));
            }
            if dp.parent >= num_sequences {
                return Err(PolytopeError::InvalidStructure(format!(
                    "decision point {d} parent {} out of range",
                    dp.parent
                )));
            }
            dp.children.sort_unstable();
            for &c in &dp.children {
                if c == 0 || c >= num_sequences {
                    return Err(PolytopeError::InvalidStructure(format!(
                        "decision point {d} has invalid child {c}"
                    )));
                }
                if c <= dp.parent {
                    return Err(PolytopeError::InvalidStructure(format!(
                        "child {c} does not follow its parent {} in topological order",
                        dp.parent
                    )));
                }
                if owner[c].replace(d).is_some() {
                    return Err(PolytopeError::InvalidStructure(format!(
                        "sequence {c} is a child of two decision points"
                    )));
                }
            }
        }
        if let Some(s) = (1..num_sequences).find(|&s| owner[s].is_none()) {
            return Err(PolytopeError::InvalidStructure(format!(
                "sequence {s} is not a child of any decision point"
            )));
        }
        let mut below = vec![Vec::new(); num_sequences];
        for (d, dp) in decision_points.iter().enumerate() {
            below[dp.parent].push(d);
        }
        Ok(Self {
            num_sequences,
            decision_points,
            below,
        })
    }

    /// The probability simplex over `actions` actions, as a one-decision-point treeplex.
    /// Coordinate 0 is the (constant 1) empty sequence; action `a` is coordinate `a + 1`.
    pub fn simplex(actions: usize) -> Result<Self, PolytopeError> {
        if actions == 0 {
            return Err(PolytopeError::InvalidArgument(
                "simplex needs an action".into(),
            ));
        }
        Self::new(
            actions + 1,
            vec![DecisionPoint {
                parent: 0,
                children: (1..=actions).collect(),
            }],
        )
    }

    pub fn num_sequences(&self) -> usize {
        self.num_sequences
    }

    pub fn decision_points(&self) -> &[DecisionPoint] {
        &self.decision_points
    }

    fn check_dim(&self, len: usize) -> Result<(), PolytopeError> {
        if len != self.num_sequences {
            return Err(PolytopeError::DimensionMismatch {
                expected: self.num_sequences,
                got: len,
            });
        }
        Ok(())
    }

    /// Linear minimization oracle (best response): the vertex minimizing `<loss, v>`.
    ///
    /// Bottom-up pass accumulates the best subtree value per sequence, top-down pass selects
    /// the argmin child at every reachable decision point. Ties go to the lowest index.
    pub fn lmo(&self, loss: &[f64]) -> Result<Vertex, PolytopeError> {
        self.check_dim(loss.len())?;
        let mut value = loss.to_vec();
        let mut best_child = vec![0usize; self.decision_points.len()];
        for s in (0..self.num_sequences).rev() {
            for &d in &self.below[s] {
                let (c, v) = self.argmin_child(d, &value);
                best_child[d] = c;
                value[s] += v;
            }
        }
        let mut selected = Vec::with_capacity(self.num_sequences);
        let mut stack = vec![0usize];
        while let Some(s) = stack.pop() {
            selected.push(s);
            for &d in &self.below[s] {
                stack.push(best_child[d]);
            }
        }
        selected.sort_unstable();
        Ok(Vertex(selected))
    }

    fn argmin_child(&self, d: usize, value: &[f64]) -> (usize, f64) {
        let children = &self.decision_points[d].children;
        let mut best = children[0];
        let mut best_val = value[best];
        for &c in &children[1..] {
            if value[c] < best_val {
                best = c;
                best_val = value[c];
            }
        }
        (best, best_val)
    }

    /// Number of vertices, computed exactly by a product/sum recursion over the tree.
    pub fn vertex_count(&self) -> u128 {
        let mut count = vec![1u128; self.num_sequences];
        for s in (0..self.num_sequences).rev() {
            for &d in &self.below[s] {
                let sum: u128 = self.decision_points[d]
                    .children
                    .iter()
                    .map(|&c| count[c])
                    .fold(0u128, |a, b| a.saturating_add(b));
                count[s] = count[s].saturating_mul(sum);
            }
        }
        count[0]
    }

    /// Product of the branching factors of all decision points (reachable or not). This
    /// upper-bounds [`Treeplex::vertex_count`] and equals it only when no decision point is
    /// nested under another player choice.
    pub fn branching_product(&self) -> u128 {
        self.decision_points
            .iter()
            .map(|d| d.children.len() as u128)
            .fold(1u128, |a, b| a.saturating_mul(b))
    }

    /// Enumerates every vertex with the default cap.
    pub fn enumerate_vertices(&self) -> Result<Vec<Vertex>, PolytopeError> {
        self.enumerate_vertices_capped(DEFAULT_VERTEX_CAP)
    }

    pub fn enumerate_vertices_capped(&self, cap: u128) -> Result<Vec<Vertex>, PolytopeError> {
        let count = self.vertex_count();
        if count > cap {
            return Err(PolytopeError::CapExceeded { count, cap });
        }
        let mut out: Vec<Vertex> = self
            .subtree_selections(0)
            .into_iter()
            .map(|mut v| {
                v.sort_unstable();
                Vertex(v)
            })
            .collect();
        out.sort();
        Ok(out)
    }

    // All partial selections rooted at sequence `s` (including `s` itself).
    fn subtree_selections(&self, s: usize) -> Vec<Vec<usize>> {
        let mut acc = vec![vec![s]];
        for &d in &self.below[s] {
            let options: Vec<Vec<usize>> = self.decision_points[d]
                .children
                .iter()
                .flat_map(|&c| self.subtree_selections(c))
                .collect();
            acc = acc
                .iter()
                .flat_map(|prefix| {
                    options.iter().map(move |opt| {
                        let mut v = prefix.clone();
                        v.extend_from_slice(opt);
                        v
                    })
                })
                .collect();
        }
        acc
    }

    /// The point that splits mass uniformly at every decision point.
    pub fn uniform_point(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.num_sequences];
        x[0] = 1.0;
        for s in 0..self.num_sequences {
            for &d in &self.below[s] {
                let children = &self.decision_points[d].children;
                let share = x[s] / children.len() as f64;
                for &c in children {
                    x[c] = share;
                }
            }
        }
        x
    }

    /// Largest squared Euclidean distance between two vertices, i.e. the largest symmetric
    /// difference of two deterministic strategies. Exact, via a pairwise tree recursion.
    pub fn squared_diameter(&self) -> f64 {
        // single[s]: largest selection size in the subtree of s (counting s)
        // pair[s]: largest symmetric difference of two selections that both contain s
        let mut single = vec![0usize; self.num_sequences];
        let mut pair = vec![0usize; self.num_sequences];
        for s in (0..self.num_sequences).rev() {
            single[s] = 1;
            for &d in &self.below[s] {
                let children = &self.decision_points[d].children;
                let best_single = children.iter().map(|&c| single[c]).max().unwrap_or(0);
                single[s] += best_single;
                let mut best_pair = 0;
                for &a in children {
                    for &b in children {
                        let v = if a == b {
                            pair[a]
                        } else {
                            single[a] + single[b]
                        };
                        best_pair = best_pair.max(v);
                    }
                }
                pair[s] += best_pair;
            }
        }
        pair[0] as f64
    }

    /// Checks the point invariants within [`TOL_FEAS`].
    pub fn validate_point(&self, x: &[f64]) -> Result<(), PolytopeError> {
        self.check_dim(x.len())?;
        if (x[0] - 1.0).abs() > TOL_FEAS {
            return Err(PolytopeError::Infeasible(format!("x[0] = {}", x[0])));
        }
        if let Some((i, v)) = x
            .iter()
            .enumerate()
            .find(|(_, &v)| v < -TOL_FEAS || !v.is_finite())
        {
            return Err(PolytopeError::Infeasible(format!("x[{i}] = {v}")));
        }
        for (d, dp) in self.decision_points.iter().enumerate() {
            let sum: f64 = dp.children.iter().map(|&c| x[c]).sum();
            if (sum - x[dp.parent]).abs() > TOL_FEAS {
                return Err(PolytopeError::Infeasible(format!(
                    "flow at decision point {d}: children sum {sum} vs parent {}",
                    x[dp.parent]
                )));
            }
        }
        Ok(())
    }

    /// Checks the vertex invariants.
    pub fn validate_vertex(&self, v: &Vertex) -> Result<(), PolytopeError> {
        let mut on = vec![false; self.num_sequences];
        for &s in v.support() {
            if s >= self.num_sequences {
                return Err(PolytopeError::Infeasible(format!(
                    "sequence {s} out of range"
                )));
            }
            on[s] = true;
        }
        if !on[0] {
            return Err(PolytopeError::Infeasible(
                "empty sequence not selected".into(),
            ));
        }
        for (d, dp) in self.decision_points.iter().enumerate() {
            let picked = dp.children.iter().filter(|&&c| on[c]).count();
            let want = usize::from(on[dp.parent]);
            if picked != want {
                return Err(PolytopeError::Infeasible(format!(
                    "decision point {d} selects {picked} children, expected {want}"
                )));
            }
        }
        Ok(())
    }

    /// Writes `x` as a convex combination of at most `num_sequences` vertices.
    ///
    /// Each round follows positive residual mass from the root, peels off the largest
    /// multiple of the resulting vertex, and zeroes at least one coordinate.
    pub fn decompose(&self, x: &[f64]) -> Result<ActiveSet, PolytopeError> {
        self.validate_point(x)?;
        let mut residual: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
        let mut atoms = Vec::new();
        let mut remaining = residual[0];
        while remaining > WEIGHT_DROP && atoms.len() <= self.num_sequences {
            let mut selected = Vec::new();
            let mut stack = vec![0usize];
            while let Some(s) = stack.pop() {
                selected.push(s);
                for &d in &self.below[s] {
                    let children = &self.decision_points[d].children;
                    let c = children.iter().copied().fold(children[0], |b, c| {
                        if residual[c] > residual[b] {
                            c
                        } else {
                            b
                        }
                    });
                    stack.push(c);
                }
            }
            selected.sort_unstable();
            let w = selected
                .iter()
                .map(|&s| residual[s])
                .fold(f64::INFINITY, f64::min)
                .min(remaining);
            if w <= WEIGHT_DROP {
                break;
            }
            for &s in &selected {
                residual[s] -= w;
            }
            remaining -= w;
            atoms.push((Vertex(selected), w));
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        for (_, w) in atoms.iter_mut() {
            *w /= total;
        }
        Ok(ActiveSet::from_atoms(self.num_sequences, atoms))
    }
}

/// A deterministic strategy: the sorted support of a 0/1 vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex(Vec<usize>);

impl Vertex {
    /// Wraps a support set; sorts and deduplicates.
    pub fn from_support(mut support: Vec<usize>) -> Self {
        support.sort_unstable();
        support.dedup();
        Vertex(support)
    }

    pub fn support(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, s: usize) -> bool {
        self.0.binary_search(&s).is_ok()
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.0.iter().map(|&s| v[s]).sum()
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for &s in &self.0 {
            x[s] = 1.0;
        }
        x
    }
}

/// An atom type that the away-step solver can keep in its active set.
pub trait Atom: Clone + PartialEq {
    /// `<atom, v>`
    fn dot(&self, v: &[f64]) -> f64;
    /// `out += scale * atom`
    fn add_scaled(&self, scale: f64, out: &mut [f64]);
}

impl Atom for Vertex {
    fn dot(&self, v: &[f64]) -> f64 {
        Vertex::dot(self, v)
    }

    fn add_scaled(&self, scale: f64, out: &mut [f64]) {
        for &s in &self.0 {
            out[s] += scale;
        }
    }
}

/// A convex-combination representation of a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet<A = Vertex> {
    atoms: Vec<(A, f64)>,
    point: Vec<f64>,
}

impl<A: Atom> ActiveSet<A> {
    pub fn singleton(atom: A, dim: usize) -> Self {
        Self::from_atoms(dim, vec![(atom, 1.0)])
    }

    /// Builds an active set from weighted atoms; the point is recomputed from the atoms.
    pub fn from_atoms(dim: usize, atoms: Vec<(A, f64)>) -> Self {
        let mut set = Self {
            atoms,
            point: vec![0.0; dim],
        };
        set.recompute_point();
        set
    }

    pub fn atoms(&self) -> &[(A, f64)] {
        &self.atoms
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub(crate) fn point_mut(&mut self) -> &mut Vec<f64> {
        &mut self.point
    }

    pub(crate) fn atoms_mut(&mut self) -> &mut Vec<(A, f64)> {
        &mut self.atoms
    }

    pub fn recompute_point(&mut self) {
        self.point.iter_mut().for_each(|v| *v = 0.0);
        for (a, w) in &self.atoms {
            a.add_scaled(*w, &mut self.point);
        }
    }

    /// Largest deviation between the stored point and the weighted sum of atoms.
    pub fn reconstruction_error(&self) -> f64 {
        let mut recon = vec![0.0; self.point.len()];
        for (a, w) in &self.atoms {
            a.add_scaled(*w, &mut recon);
        }
        recon
            .iter()
            .zip(&self.point)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Checks weight positivity, normalization and reconstruction within [`TOL_FEAS`].
    pub fn validate(&self) -> Result<(), PolytopeError> {
        if self.atoms.is_empty() {
            return Err(PolytopeError::Infeasible("empty active set".into()));
        }
        if let Some((_, w)) = self.atoms.iter().find(|(_, w)| *w <= 0.0) {
            return Err(PolytopeError::Infeasible(format!("nonpositive weight {w}")));
        }
        let total: f64 = self.atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > TOL_FEAS {
            return Err(PolytopeError::Infeasible(format!("weights sum to {total}")));
        }
        let err = self.reconstruction_error();
        if err > TOL_FEAS {
            return Err(PolytopeError::Infeasible(format!(
                "point differs from atom combination by {err}"
            )));
        }
        Ok(())
    }
}

impl ActiveSet<Vertex> {
    /// Validates the active set and every atom against a treeplex.
    pub fn validate_for(&self, treeplex: &Treeplex) -> Result<(), PolytopeError> {
        treeplex.check_dim(self.point.len())?;
        self.validate()?;
        for (v, _) in &self.atoms {
            treeplex.validate_vertex(v)?;
        }
        treeplex.validate_point(&self.point)
    }
}

/// Euclidean projection onto the probability simplex `{p >= 0, sum p = 1}` by sorting and
/// thresholding. Used as the exact reference for prox steps over simplices.
pub fn project_onto_simplex(y: &[f64]) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        }
    }
    y.iter().map(|&v| (v - tau).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nested() -> Treeplex {
        // root decision with 3 children, each owning a 2-action decision point
        Treeplex::new(
            10,
            vec![
                DecisionPoint {
                    parent: 0,
                    children: vec![1, 2, 3],
                },
                DecisionPoint {
                    parent: 1,
                    children: vec![4, 5],
                },
                DecisionPoint {
                    parent: 2,
                    children: vec![6, 7],
                },
                DecisionPoint {
                    parent: 3,
                    children: vec![8, 9],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn simplex_lmo_picks_min_coordinate() {
        let t = Treeplex::simplex(3).unwrap();
        let v = t.lmo(&[0.0, 0.5, -1.0, 2.0]).unwrap();
        assert_eq!(v.support(), &[0, 2]);
    }

    #[test]
    fn zero_loss_selects_first_children() {
        let t = nested();
        let v = t.lmo(&[0.0; 10]).unwrap();
        assert_eq!(v.support(), &[0, 1, 4]);
    }

    #[test]
    fn lmo_rejects_wrong_dimension() {
        let t = nested();
        assert!(matches!(
            t.lmo(&[0.0; 3]),
            Err(PolytopeError::DimensionMismatch {
                expected: 10,
                got: 3
            })
        ));
    }

    #[test]
    fn vertex_counts() {
        assert_eq!(
            Treeplex::simplex(5)
                .unwrap()
                .enumerate_vertices()
                .unwrap()
                .len(),
            5
        );
        let t = nested();
        assert_eq!(t.vertex_count(), 6);
        assert_eq!(t.enumerate_vertices().unwrap().len(), 6);
        assert_eq!(t.branching_product(), 24);
    }

    #[test]
    fn enumeration_cap() {
        let t = nested();
        assert!(matches!(
            t.enumerate_vertices_capped(5),
            Err(PolytopeError::CapExceeded { count: 6, cap: 5 })
        ));
    }

    #[test]
    fn invalid_structures_rejected() {
        // sequence 2 orphaned
        assert!(Treeplex::new(
            3,
            vec![DecisionPoint {
                parent: 0,
                children: vec![1]
            }]
        )
        .is_err());
        // child shared by two decision points
        assert!(Treeplex::new(
            3,
            vec![
                DecisionPoint {
                    parent: 0,
                    children: vec![1, 2]
                },
                DecisionPoint {
                    parent: 1,
                    children: vec![2]
                },
            ]
        )
        .is_err());
        // child before parent
        assert!(Treeplex::new(
            3,
            vec![
                DecisionPoint {
                    parent: 0,
                    children: vec![2]
                },
                DecisionPoint {
                    parent: 2,
                    children: vec![1]
                },
            ]
        )
        .is_err());
    }

    #[test]
    fn uniform_point_is_feasible() {
        let t = nested();
        let x = t.uniform_point();
        t.validate_point(&x).unwrap();
        assert!((x[4] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn decomposition_reconstructs() {
        let t = nested();
        let x = t.uniform_point();
        let set = t.decompose(&x).unwrap();
        set.validate_for(&t).unwrap();
        assert!(set.reconstruction_error() < 1e-12);
        for (a, b) in set.point().iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(set.len() <= t.num_sequences());
    }

    #[test]
    fn diameter_matches_enumeration() {
        let t = nested();
        let verts = t.enumerate_vertices().unwrap();
        let mut best = 0usize;
        for a in &verts {
            for b in &verts {
                let sym = a.support().iter().filter(|s| !b.contains(**s)).count()
                    + b.support().iter().filter(|s| !a.contains(**s)).count();
                best = best.max(sym);
            }
        }
        assert_eq!(t.squared_diameter(), best as f64);
        assert_eq!(best, 4);
    }

    #[test]
    fn simplex_projection_reference() {
        let p = project_onto_simplex(&[0.8, 0.4, -0.2]);
        assert!((p[0] - 0.7).abs() < 1e-12 && (p[1] - 0.3).abs() < 1e-12 && p[2] == 0.0);
        let p = project_onto_simplex(&[0.0, 0.0, 0.0]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
    }
}
