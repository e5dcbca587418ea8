//! Facial-distance lower bounds and a brute-force evaluator for small polytopes.

use std::collections::HashSet;

use super::{ActiveSet, Atom, PolytopeError, Treeplex, DEFAULT_VERTEX_CAP};
use crate::afw::{self, AtomDomain, QuadraticObjective};

/// `gamma / sqrt(n)`, or `gamma / sqrt(k)` when the optimal face has `k` zero coordinates.
pub fn fd_lower_bound_equality_form(
    gamma: f64,
    n: usize,
    k: Option<usize>,
) -> Result<f64, PolytopeError> {
    if !(gamma > 0.0) {
        return Err(PolytopeError::InvalidArgument(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if n == 0 {
        return Err(PolytopeError::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    let dim = match k {
        Some(k) if k == 0 || k > n => {
            return Err(PolytopeError::InvalidArgument(format!(
                "k = {k} must lie in 1..={n}"
            )))
        }
        Some(k) => k,
        None => n,
    };
    Ok(gamma / (dim as f64).sqrt())
}

/// `1 / (||C||_inf * sqrt(n))` for a nonzero nonnegative integral matrix `C`.
pub fn fd_lower_bound_integral_form(c: &[Vec<u64>], n: usize) -> Result<f64, PolytopeError> {
    if n == 0 {
        return Err(PolytopeError::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    let norm = c
        .iter()
        .map(|row| row.iter().sum::<u64>())
        .max()
        .unwrap_or(0);
    if norm == 0 {
        return Err(PolytopeError::InvalidArgument("C must be nonzero".into()));
    }
    Ok(1.0 / (norm as f64 * (n as f64).sqrt()))
}

/// Facial distance of the `n`-vertex simplex: the closest split of its vertices into a face
/// with `a` vertices and the remaining `n - a`, i.e. `min_a sqrt(1/a + 1/(n - a))`.
pub fn closed_form_simplex_facial_distance(n: usize) -> f64 {
    (1..n)
        .map(|a| (1.0 / a as f64 + 1.0 / (n - a) as f64).sqrt())
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacialDistanceOptions {
    /// Wolfe-gap target for each hull-distance subproblem.
    pub tolerance: f64,
    /// AFW iteration cap for each subproblem.
    pub max_iterations: u64,
    /// Tightness tolerance when classifying vertices against inequalities.
    pub tight_tol: f64,
}

impl Default for FacialDistanceOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100_000,
            tight_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
struct DiffAtom {
    pair: (usize, usize),
    diff: Vec<f64>,
}

impl PartialEq for DiffAtom {
    fn eq(&self, other: &Self) -> bool {
        self.pair == other.pair
    }
}

impl Atom for DiffAtom {
    fn dot(&self, v: &[f64]) -> f64 {
        self.diff.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    fn add_scaled(&self, scale: f64, out: &mut [f64]) {
        for (o, d) in out.iter_mut().zip(&self.diff) {
            *o += scale * d;
        }
    }
}

// conv(A) - conv(B), whose atoms are the pairwise differences a_i - b_j.
struct MinkowskiDifference<'a> {
    a: &'a [Vec<f64>],
    b: &'a [Vec<f64>],
}

impl MinkowskiDifference<'_> {
    fn atom(&self, i: usize, j: usize) -> DiffAtom {
        DiffAtom {
            pair: (i, j),
            diff: self.a[i]
                .iter()
                .zip(&self.b[j])
                .map(|(x, y)| x - y)
                .collect(),
        }
    }
}

fn argmin_dot(points: &[Vec<f64>], dir: &[f64], sign: f64) -> usize {
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let v = sign * p.iter().zip(dir).map(|(x, y)| x * y).sum::<f64>();
        if v < best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

impl AtomDomain for MinkowskiDifference<'_> {
    type Atom = DiffAtom;

    fn dim(&self) -> usize {
        self.a[0].len()
    }

    fn lmo(&self, direction: &[f64]) -> Result<DiffAtom, PolytopeError> {
        let i = argmin_dot(self.a, direction, 1.0);
        let j = argmin_dot(self.b, direction, -1.0);
        Ok(self.atom(i, j))
    }
}

struct HalfSquaredNorm;

impl QuadraticObjective for HalfSquaredNorm {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }

    fn curvature(&self, d: &[f64]) -> f64 {
        d.iter().map(|v| v * v).sum()
    }
}

/// Euclidean distance between `conv(a)` and `conv(b)`, by minimizing `||z||^2 / 2` over the
/// Minkowski difference with away-step Frank-Wolfe.
pub fn hull_distance(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    opts: &FacialDistanceOptions,
) -> Result<f64, PolytopeError> {
    if a.is_empty() || b.is_empty() {
        return Err(PolytopeError::InvalidArgument("empty point set".into()));
    }
    let dim = a[0].len();
    if a.iter().chain(b).any(|p| p.len() != dim) {
        return Err(PolytopeError::InvalidArgument(
            "points of mixed dimension".into(),
        ));
    }
    let domain = MinkowskiDifference { a, b };
    let init = ActiveSet::singleton(domain.atom(0, 0), dim);
    let result = afw::afw_minimize_capped(
        &HalfSquaredNorm,
        &domain,
        init,
        opts.tolerance,
        opts.max_iterations,
    )
    .map_err(|e| PolytopeError::SolverFailure(e.to_string()))?;
    Ok((2.0 * result.value).max(0.0).sqrt())
}

/// Brute-force facial distance of `conv(vertices)`, where faces are obtained by making
/// subsets of `inequalities` (rows `a . x <= b`) tight.
pub fn polytope_facial_distance(
    vertices: &[Vec<f64>],
    inequalities: &[(Vec<f64>, f64)],
    opts: &FacialDistanceOptions,
) -> Result<f64, PolytopeError> {
    if vertices.len() < 2 {
        return Err(PolytopeError::InvalidArgument(
            "need at least two vertices".into(),
        ));
    }
    if vertices.len() > 128 {
        return Err(PolytopeError::CapExceeded {
            count: vertices.len() as u128,
            cap: 128,
        });
    }
    if inequalities.len() > 24 {
        return Err(PolytopeError::CapExceeded {
            count: 1u128 << inequalities.len(),
            cap: 1 << 24,
        });
    }
    let tight: Vec<u32> = vertices
        .iter()
        .map(|v| {
            inequalities
                .iter()
                .enumerate()
                .filter(|(_, (row, rhs))| {
                    let lhs: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
                    (lhs - rhs).abs() <= opts.tight_tol
                })
                .fold(0u32, |m, (i, _)| m | (1 << i))
        })
        .collect();
    let full: u128 = if vertices.len() == 128 {
        u128::MAX
    } else {
        (1u128 << vertices.len()) - 1
    };
    let mut faces = HashSet::new();
    for z in 0u32..(1u32 << inequalities.len()) {
        let mask = tight
            .iter()
            .enumerate()
            .filter(|(_, &t)| t & z == z)
            .fold(0u128, |m, (i, _)| m | (1 << i));
        if mask != 0 && mask != full {
            faces.insert(mask);
        }
    }
    let mut faces: Vec<u128> = faces.into_iter().collect();
    faces.sort_unstable();
    let mut best = f64::INFINITY;
    for mask in faces {
        let (inside, outside): (Vec<_>, Vec<_>) = vertices
            .iter()
            .enumerate()
            .partition(|(i, _)| mask & (1 << i) != 0);
        let inside: Vec<Vec<f64>> = inside.into_iter().map(|(_, v)| v.clone()).collect();
        let outside: Vec<Vec<f64>> = outside.into_iter().map(|(_, v)| v.clone()).collect();
        best = best.min(hull_distance(&inside, &outside, opts)?);
    }
    Ok(best)
}

/// Brute-force facial distance of a treeplex, with faces from zero-coordinate subsets.
pub fn fd_bruteforce(treeplex: &Treeplex) -> Result<f64, PolytopeError> {
    let n = treeplex.num_sequences();
    let vertices: Vec<Vec<f64>> = treeplex
        .enumerate_vertices_capped(DEFAULT_VERTEX_CAP)?
        .iter()
        .map(|v| v.to_dense(n))
        .collect();
    // x[0] = 1 is never tight, so its nonnegativity row can be left out
    let inequalities: Vec<(Vec<f64>, f64)> = (1..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            row[i] = -1.0;
            (row, 0.0)
        })
        .collect();
    polytope_facial_distance(&vertices, &inequalities, &FacialDistanceOptions::default())
}
