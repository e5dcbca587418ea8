//! Away-step Frank-Wolfe for quadratic objectives over polytopes given by an LMO, and the
//! approximate proximal oracle built on top of it.

use thiserror::Error;

use crate::polytope::{ActiveSet, Atom, PolytopeError, Treeplex, Vertex, WEIGHT_DROP};

/// Hard cap on AFW iterations when running to a Wolfe-gap target.
pub const MAX_ITERATIONS: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AfwError {
    #[error("no Wolfe gap <= {target} after {iterations} iterations (last gap {gap})")]
    NotConverged {
        iterations: u64,
        gap: f64,
        target: f64,
    },
    #[error("invalid termination: {0}")]
    InvalidTermination(String),
    #[error("invalid objective: {0}")]
    InvalidObjective(String),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

/// A feasible region described by its atoms and a linear minimization oracle over them.
pub trait AtomDomain {
    type Atom: Atom;
    fn dim(&self) -> usize;
    fn lmo(&self, direction: &[f64]) -> Result<Self::Atom, PolytopeError>;
}

impl AtomDomain for Treeplex {
    type Atom = Vertex;

    fn dim(&self) -> usize {
        self.num_sequences()
    }

    fn lmo(&self, direction: &[f64]) -> Result<Vertex, PolytopeError> {
        Treeplex::lmo(self, direction)
    }
}

/// A convex quadratic: gradient is affine, so exact line search is closed form.
pub trait QuadraticObjective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// `d^T H d` for the (constant) Hessian `H`.
    fn curvature(&self, d: &[f64]) -> f64;
}

/// `f(x) = <g, x> + ||x - c||^2 / (2 eta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxObjective {
    pub linear: Vec<f64>,
    pub center: Vec<f64>,
    pub eta: f64,
}

impl ProxObjective {
    pub fn new(linear: Vec<f64>, center: Vec<f64>, eta: f64) -> Result<Self, AfwError> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(AfwError::InvalidObjective(format!(
                "eta must be positive, got {eta}"
            )));
        }
        if linear.len() != center.len() {
            return Err(PolytopeError::DimensionMismatch {
                expected: center.len(),
                got: linear.len(),
            }
            .into());
        }
        Ok(Self {
            linear,
            center,
            eta,
        })
    }

    /// Smoothness and strong-convexity modulus, `1 / eta`.
    pub fn smoothness(&self) -> f64 {
        1.0 / self.eta
    }
}

impl QuadraticObjective for ProxObjective {
    fn value(&self, x: &[f64]) -> f64 {
        let mut lin = 0.0;
        let mut sq = 0.0;
        for ((&xi, &gi), &ci) in x.iter().zip(&self.linear).zip(&self.center) {
            lin += gi * xi;
            sq += (xi - ci) * (xi - ci);
        }
        lin + sq / (2.0 * self.eta)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (((o, &xi), &gi), &ci) in out.iter_mut().zip(x).zip(&self.linear).zip(&self.center) {
            *o = gi + (xi - ci) / self.eta;
        }
    }

    fn curvature(&self, d: &[f64]) -> f64 {
        d.iter().map(|v| v * v).sum::<f64>() / self.eta
    }
}

/// When an AFW run stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Stop once `<-grad f(x), s - x> <= eps`.
    WolfeGap(f64),
    /// Stop after this many LMO calls.
    MaxLmoCalls(u64),
}

impl Termination {
    fn validate(&self) -> Result<(), AfwError> {
        match *self {
            Termination::WolfeGap(eps) if !(eps > 0.0) => Err(AfwError::InvalidTermination(
                format!("Wolfe-gap target must be positive, got {eps}"),
            )),
            Termination::MaxLmoCalls(0) => Err(AfwError::InvalidTermination(
                "LMO budget must be positive".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AfwResult<A = Vertex> {
    pub point: Vec<f64>,
    pub active_set: ActiveSet<A>,
    pub lmo_calls: u64,
    /// Wolfe gap at the last LMO call. Steps never increase the objective, so this bounds the
    /// suboptimality of `point` even when the budget stopped the run after a step.
    pub final_wolfe_gap: f64,
    pub value: f64,
    pub iterations: u64,
}

/// What an observer sees at every LMO call.
#[derive(Debug)]
pub struct IterateInfo<'a> {
    pub lmo_calls: u64,
    pub value: f64,
    pub wolfe_gap: f64,
    pub point: &'a [f64],
    pub active_set_len: usize,
}

/// Runs AFW from `init` until `term` fires.
pub fn afw_minimize<D, F>(
    obj: &F,
    domain: &D,
    init: ActiveSet<D::Atom>,
    term: Termination,
) -> Result<AfwResult<D::Atom>, AfwError>
where
    D: AtomDomain,
    F: QuadraticObjective,
{
    term.validate()?;
    afw_core(obj, domain, init, term, MAX_ITERATIONS, &mut |_| {})
}

/// [`afw_minimize`] with a callback invoked at every LMO call.
pub fn afw_minimize_observed<D, F>(
    obj: &F,
    domain: &D,
    init: ActiveSet<D::Atom>,
    term: Termination,
    observer: &mut dyn FnMut(&IterateInfo),
) -> Result<AfwResult<D::Atom>, AfwError>
where
    D: AtomDomain,
    F: QuadraticObjective,
{
    term.validate()?;
    afw_core(obj, domain, init, term, MAX_ITERATIONS, observer)
}

/// Runs AFW to a Wolfe-gap target with a custom iteration cap.
pub fn afw_minimize_capped<D, F>(
    obj: &F,
    domain: &D,
    init: ActiveSet<D::Atom>,
    target_gap: f64,
    max_iterations: u64,
) -> Result<AfwResult<D::Atom>, AfwError>
where
    D: AtomDomain,
    F: QuadraticObjective,
{
    let term = Termination::WolfeGap(target_gap);
    term.validate()?;
    afw_core(obj, domain, init, term, max_iterations, &mut |_| {})
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// Accepts a zero LMO budget, which `apo` uses after spending its one call on initialization.
fn afw_core<D, F>(
    obj: &F,
    domain: &D,
    mut set: ActiveSet<D::Atom>,
    term: Termination,
    max_iterations: u64,
    observer: &mut dyn FnMut(&IterateInfo),
) -> Result<AfwResult<D::Atom>, AfwError>
where
    D: AtomDomain,
    F: QuadraticObjective,
{
    let n = domain.dim();
    if set.point().len() != n {
        return Err(PolytopeError::DimensionMismatch {
            expected: n,
            got: set.point().len(),
        }
        .into());
    }
    if set.is_empty() {
        return Err(PolytopeError::Infeasible("empty initial active set".into()).into());
    }
    let mut grad = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut cand = vec![0.0; n];
    let mut value = obj.value(set.point());
    let mut gap = f64::INFINITY;
    let mut lmo_calls = 0u64;
    let mut iterations = 0u64;

    loop {
        if let Termination::MaxLmoCalls(m) = term {
            if lmo_calls >= m {
                break;
            }
        }
        if iterations >= max_iterations {
            if let Termination::WolfeGap(target) = term {
                return Err(AfwError::NotConverged {
                    iterations,
                    gap,
                    target,
                });
            }
            break;
        }
        obj.gradient(set.point(), &mut grad);
        let s = domain.lmo(&grad)?;
        lmo_calls += 1;
        let gx = dot(&grad, set.point());
        let g_fw = gx - s.dot(&grad);
        gap = g_fw;
        observer(&IterateInfo {
            lmo_calls,
            value,
            wolfe_gap: g_fw,
            point: set.point(),
            active_set_len: set.len(),
        });
        if let Termination::WolfeGap(eps) = term {
            if g_fw <= eps {
                break;
            }
        }
        if g_fw <= 0.0 {
            break;
        }

        // away vertex: the active atom with the largest gradient inner product
        let mut away = None;
        if set.len() > 1 {
            let (idx, val) = set
                .atoms()
                .iter()
                .enumerate()
                .map(|(i, (a, _))| (i, a.dot(&grad)))
                .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
            away = Some((idx, val - gx));
        }
        let fw_step = match away {
            Some((_, g_a)) => g_fw >= g_a,
            None => true,
        };

        let (slope, gamma_max) = if fw_step {
            dir.copy_from_slice(set.point());
            dir.iter_mut().for_each(|v| *v = -*v);
            s.add_scaled(1.0, &mut dir);
            (g_fw, 1.0)
        } else {
            let (idx, g_a) = away.expect("away step needs an away atom");
            let alpha = set.atoms()[idx].1;
            dir.copy_from_slice(set.point());
            set.atoms()[idx].0.add_scaled(-1.0, &mut dir);
            (g_a, alpha / (1.0 - alpha))
        };
        let curv = obj.curvature(&dir);
        let gamma = if curv > 0.0 {
            (slope / curv).min(gamma_max)
        } else {
            gamma_max
        };
        if !(gamma > 0.0) || !gamma.is_finite() {
            break;
        }
        for ((c, &x), &d) in cand.iter_mut().zip(set.point()).zip(&dir) {
            *c = x + gamma * d;
        }
        let cand_value = obj.value(&cand);
        if cand_value > value {
            // only rounding can do this under exact line search; keep the best iterate
            break;
        }

        let atoms = set.atoms_mut();
        if fw_step {
            if gamma >= 1.0 {
                atoms.clear();
                atoms.push((s, 1.0));
            } else {
                atoms.iter_mut().for_each(|(_, w)| *w *= 1.0 - gamma);
                match atoms.iter_mut().find(|(a, _)| *a == s) {
                    Some((_, w)) => *w += gamma,
                    None => atoms.push((s, gamma)),
                }
            }
        } else {
            let (idx, _) = away.expect("away step needs an away atom");
            atoms.iter_mut().for_each(|(_, w)| *w *= 1.0 + gamma);
            atoms[idx].1 -= gamma;
            if gamma >= gamma_max {
                atoms[idx].1 = 0.0;
            }
        }
        let before = atoms.len();
        atoms.retain(|(_, w)| *w > WEIGHT_DROP);
        let pruned = atoms.len() != before;
        if pruned {
            let total: f64 = atoms.iter().map(|(_, w)| w).sum();
            atoms.iter_mut().for_each(|(_, w)| *w /= total);
            set.recompute_point();
            value = obj.value(set.point());
        } else {
            set.point_mut().copy_from_slice(&cand);
            value = cand_value;
        }
        iterations += 1;
    }

    set.recompute_point();
    let final_value = obj.value(set.point());
    Ok(AfwResult {
        point: set.point().to_vec(),
        active_set: set,
        lmo_calls,
        final_wolfe_gap: gap,
        value: final_value,
        iterations,
    })
}

/// Approximate proximal oracle: approximately minimizes
/// `<loss_combo, x> + ||x - center||^2 / (2 eta)` over the treeplex.
///
/// Without a warm start the active set is seeded with `lmo(loss_combo)`; that call counts
/// toward the LMO budget and toward `lmo_calls`.
pub fn apo(
    loss_combo: &[f64],
    eta: f64,
    center: &[f64],
    term: Termination,
    warmstart: Option<ActiveSet>,
    polytope: &Treeplex,
) -> Result<AfwResult, AfwError> {
    term.validate()?;
    let obj = ProxObjective::new(loss_combo.to_vec(), center.to_vec(), eta)?;
    if center.len() != polytope.num_sequences() {
        return Err(PolytopeError::DimensionMismatch {
            expected: polytope.num_sequences(),
            got: center.len(),
        }
        .into());
    }
    let (init, spent) = match warmstart {
        Some(set) => (set, 0),
        None => {
            let v = polytope.lmo(loss_combo)?;
            (ActiveSet::singleton(v, polytope.num_sequences()), 1)
        }
    };
    let inner_term = match term {
        Termination::MaxLmoCalls(m) => Termination::MaxLmoCalls(m - spent),
        t => t,
    };
    let mut result = afw_core(
        &obj,
        polytope,
        init,
        inner_term,
        MAX_ITERATIONS,
        &mut |_| {},
    )?;
    result.lmo_calls += spent;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::project_onto_simplex;

    fn simplex3() -> Treeplex {
        Treeplex::simplex(3).unwrap()
    }

    fn vertex(t: &Treeplex, action: usize) -> ActiveSet {
        ActiveSet::singleton(Vertex::from_support(vec![0, action + 1]), t.num_sequences())
    }

    #[test]
    fn converges_to_feasible_center() {
        let t = simplex3();
        let c = vec![1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        let obj = ProxObjective::new(vec![0.0; 4], c.clone(), 1.0).unwrap();
        let r = afw_minimize(&obj, &t, vertex(&t, 0), Termination::WolfeGap(1e-8)).unwrap();
        assert!(r.final_wolfe_gap <= 1e-8);
        for (a, b) in r.point.iter().zip(&c) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn projects_outside_point_to_vertex() {
        let t = simplex3();
        let obj = ProxObjective::new(vec![0.0; 4], vec![1.0, 2.0, 0.0, 0.0], 1.0).unwrap();
        let r = afw_minimize(&obj, &t, vertex(&t, 2), Termination::WolfeGap(1e-12)).unwrap();
        assert!((r.point[1] - 1.0).abs() < 1e-9, "{:?}", r.point);
    }

    #[test]
    fn projection_matches_sort_and_threshold() {
        let t = simplex3();
        let obj = ProxObjective::new(vec![0.0; 4], vec![1.0, 0.8, 0.4, -0.2], 1.0).unwrap();
        let r = afw_minimize(&obj, &t, vertex(&t, 2), Termination::WolfeGap(1e-12)).unwrap();
        let exact = project_onto_simplex(&[0.8, 0.4, -0.2]);
        assert!((exact[0] - 0.7).abs() < 1e-12);
        for (k, e) in exact.iter().enumerate() {
            assert!((r.point[k + 1] - e).abs() < 1e-6, "{:?}", r.point);
        }
    }

    #[test]
    fn apo_zero_loss_is_identity() {
        let t = simplex3();
        let c = t.uniform_point();
        let r = apo(&[0.0; 4], 0.5, &c, Termination::WolfeGap(1e-10), None, &t).unwrap();
        for (a, b) in r.point.iter().zip(&c) {
            assert!((a - b).abs() < 1e-4);
        }
        // warm start at the center itself needs one LMO call to certify
        let warm = t.decompose(&c).unwrap();
        let r = apo(
            &[0.0; 4],
            0.5,
            &c,
            Termination::WolfeGap(1e-10),
            Some(warm),
            &t,
        )
        .unwrap();
        assert_eq!(r.lmo_calls, 1);
        for (a, b) in r.point.iter().zip(&c) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn apo_reflected_vertex_projects_to_barycenter() {
        let t = simplex3();
        let center = vec![1.0, 1.0, 0.0, 0.0];
        let r = apo(
            &[0.0, 1.0, 0.0, 0.0],
            1.0,
            &center,
            Termination::WolfeGap(1e-8),
            None,
            &t,
        )
        .unwrap();
        for k in 1..4 {
            assert!((r.point[k] - 1.0 / 3.0).abs() < 1e-4, "{:?}", r.point);
        }
    }

    #[test]
    fn apo_respects_budget() {
        let t = simplex3();
        let center = t.uniform_point();
        let warm = vertex(&t, 1);
        let r = apo(
            &[0.0, 0.3, -0.1, 0.2],
            0.7,
            &center,
            Termination::MaxLmoCalls(1),
            Some(warm),
            &t,
        )
        .unwrap();
        assert_eq!(r.lmo_calls, 1);
        t.validate_point(&r.point).unwrap();
        let r = apo(
            &[0.0, 0.3, -0.1, 0.2],
            0.7,
            &center,
            Termination::MaxLmoCalls(1),
            None,
            &t,
        )
        .unwrap();
        assert_eq!(r.lmo_calls, 1);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn invalid_arguments() {
        let t = simplex3();
        let c = t.uniform_point();
        assert!(apo(&[0.0; 4], 0.0, &c, Termination::WolfeGap(1e-6), None, &t).is_err());
        assert!(apo(&[0.0; 4], 1.0, &c, Termination::MaxLmoCalls(0), None, &t).is_err());
        assert!(apo(&[0.0; 4], 1.0, &c, Termination::WolfeGap(0.0), None, &t).is_err());
        assert!(apo(&[0.0; 3], 1.0, &c, Termination::WolfeGap(1e-6), None, &t).is_err());
    }

    #[test]
    fn objective_is_monotone_and_active_set_valid() {
        let t = Treeplex::simplex(6).unwrap();
        let obj = ProxObjective::new(
            vec![0.0, 0.3, -0.2, 0.1, 0.0, 0.5, -0.4],
            t.uniform_point(),
            0.3,
        )
        .unwrap();
        let mut values = Vec::new();
        let r = afw_minimize_observed(
            &obj,
            &t,
            vertex(&t, 3),
            Termination::WolfeGap(1e-12),
            &mut |info| values.push(info.value),
        )
        .unwrap();
        for w in values.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        r.active_set.validate_for(&t).unwrap();
    }
}
