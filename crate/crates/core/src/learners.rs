//! Online learners over a treeplex that only access the polytope through its LMO, directly or
//! through the approximate proximal oracle.
//!
//! Every round the driver calls [`Learner::next_strategy`] with the prediction `m^t` and then
//! [`Learner::observe`] with the realized loss `l^t`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gumbel};
use thiserror::Error;

use crate::afw::{apo, AfwError, Termination};
use crate::polytope::{ActiveSet, PolytopeError, Treeplex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("invalid learner configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("observe called before next_strategy")]
    OutOfOrder,
    #[error(transparent)]
    Afw(#[from] AfwError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    FwRomd,
    FwOmd,
    Ftpl,
    Oftpl,
    Fp,
    Ofp,
    Br,
    Obr,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::FwRomd,
        Algorithm::FwOmd,
        Algorithm::Ftpl,
        Algorithm::Oftpl,
        Algorithm::Fp,
        Algorithm::Ofp,
        Algorithm::Br,
        Algorithm::Obr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::FwRomd => "fw-romd",
            Algorithm::FwOmd => "fw-omd",
            Algorithm::Ftpl => "ftpl",
            Algorithm::Oftpl => "oftpl",
            Algorithm::Fp => "fp",
            Algorithm::Ofp => "ofp",
            Algorithm::Br => "br",
            Algorithm::Obr => "obr",
        }
    }

    /// Learners that solve a proximal problem with away-step Frank-Wolfe.
    pub fn is_fw_family(self) -> bool {
        matches!(self, Algorithm::FwRomd | Algorithm::FwOmd)
    }

    /// Learners that use the prediction `m^t`.
    pub fn is_optimistic(self) -> bool {
        matches!(
            self,
            Algorithm::FwRomd | Algorithm::Oftpl | Algorithm::Ofp | Algorithm::Obr
        )
    }

    /// Learners whose `eta` parameter matters.
    pub fn uses_eta(self) -> bool {
        matches!(
            self,
            Algorithm::FwRomd | Algorithm::FwOmd | Algorithm::Ftpl | Algorithm::Oftpl
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().replace('-', "") == key)
            .ok_or_else(|| LearnerError::InvalidConfig(format!("unknown algorithm `{s}`")))
    }
}

/// Target accuracy `eps^t` of the proximal step at round `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsSchedule {
    /// `eps^t = 1 / t^2`.
    InverseSquare,
    Fixed(f64),
}

impl EpsSchedule {
    pub fn eps(&self, t: u64) -> f64 {
        match *self {
            EpsSchedule::InverseSquare => 1.0 / (t.max(1) as f64).powi(2),
            EpsSchedule::Fixed(e) => e,
        }
    }
}

/// How each proximal step of the Frank-Wolfe learners is terminated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApoMode {
    /// Run to the accuracy given by the schedule.
    Accuracy(EpsSchedule),
    /// Spend at most this many LMO calls per round; a step stops early at a zero Wolfe gap.
    LmoBudget(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    /// Step size of the Frank-Wolfe learners, Gumbel scale of the perturbed learners.
    pub eta: f64,
    pub apo: ApoMode,
    pub warmstart: bool,
    pub seed: u64,
}

impl LearnerConfig {
    pub fn new(algorithm: Algorithm, eta: f64) -> Self {
        LearnerConfig {
            algorithm,
            eta,
            apo: ApoMode::Accuracy(EpsSchedule::InverseSquare),
            warmstart: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(LearnerError::InvalidConfig(format!(
                "eta must be positive and finite, got {}",
                self.eta
            )));
        }
        match self.apo {
            ApoMode::LmoBudget(0) => Err(LearnerError::InvalidConfig(
                "LMO budget per round must be positive".into(),
            )),
            ApoMode::Accuracy(EpsSchedule::Fixed(e)) if !(e > 0.0) => Err(
                LearnerError::InvalidConfig(format!("fixed accuracy must be positive, got {e}")),
            ),
            _ => Ok(()),
        }
    }

    /// The accuracy schedule if the proximal steps run to accuracy.
    pub fn eps_schedule(&self) -> Option<EpsSchedule> {
        match self.apo {
            ApoMode::Accuracy(s) if self.algorithm.is_fw_family() => Some(s),
            _ => None,
        }
    }
}

/// Mutable per-player state; `t` counts completed `next_strategy` calls.
#[derive(Debug, Clone)]
pub struct LearnerState {
    pub last_strategy: Vec<f64>,
    pub last_loss: Vec<f64>,
    pub second_last_loss: Vec<f64>,
    pub cumulative_loss: Vec<f64>,
    pub last_prediction: Vec<f64>,
    pub warm_active_set: Option<ActiveSet>,
    pub step: u64,
    pub lmo_calls_total: u64,
    pub last_lmo_calls: u64,
    pub last_wolfe_gap: Option<f64>,
    awaiting_loss: bool,
}

#[derive(Debug, Clone)]
pub struct Learner<'a> {
    config: LearnerConfig,
    treeplex: &'a Treeplex,
    state: LearnerState,
    rng: ChaCha8Rng,
    gumbel: Gumbel<f64>,
}

impl<'a> Learner<'a> {
    pub fn new(config: LearnerConfig, treeplex: &'a Treeplex) -> Result<Self, LearnerError> {
        config.validate()?;
        let n = treeplex.num_sequences();
        let x0 = treeplex.uniform_point();
        let warm = if config.algorithm.is_fw_family() && config.warmstart {
            Some(treeplex.decompose(&x0)?)
        } else {
            None
        };
        let gumbel = Gumbel::new(0.0, config.eta)
            .map_err(|e| LearnerError::InvalidConfig(format!("gumbel scale: {e}")))?;
        Ok(Learner {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            gumbel,
            config,
            treeplex,
            state: LearnerState {
                last_strategy: x0,
                last_loss: vec![0.0; n],
                second_last_loss: vec![0.0; n],
                cumulative_loss: vec![0.0; n],
                last_prediction: vec![0.0; n],
                warm_active_set: warm,
                step: 0,
                lmo_calls_total: 0,
                last_lmo_calls: 0,
                last_wolfe_gap: None,
                awaiting_loss: false,
            },
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }

    pub fn treeplex(&self) -> &Treeplex {
        self.treeplex
    }

    pub fn dim(&self) -> usize {
        self.treeplex.num_sequences()
    }

    /// The strategy of the last round, or `x^0` before the first round.
    pub fn last_strategy(&self) -> &[f64] {
        &self.state.last_strategy
    }

    pub fn lmo_calls_total(&self) -> u64 {
        self.state.lmo_calls_total
    }

    /// The requested Wolfe-gap target of the proximal step at round `t`, in units of the
    /// objective `<g, x> + ||x - c||^2 / (2 eta)`. Scaling by `min(1, 1/eta)` keeps the step
    /// both `eps^t`-accurate for that objective and for `eta` times it.
    pub fn wolfe_target(&self, t: u64) -> Option<f64> {
        self.config
            .eps_schedule()
            .map(|s| s.eps(t) * (1.0f64).min(1.0 / self.config.eta))
    }

    fn check_dim(&self, v: &[f64]) -> Result<(), LearnerError> {
        if v.len() != self.dim() {
            return Err(LearnerError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    fn lmo_dense(&mut self, loss: &[f64]) -> Result<Vec<f64>, LearnerError> {
        let v = self.treeplex.lmo(loss)?;
        self.state.last_lmo_calls = 1;
        Ok(v.to_dense(self.dim()))
    }

    /// Plays round `t`. `prediction` is `m^t`; it is ignored by non-optimistic learners and
    /// treated as zero when absent.
    pub fn next_strategy(&mut self, prediction: Option<&[f64]>) -> Result<&[f64], LearnerError> {
        let n = self.dim();
        let m = match prediction {
            Some(m) => {
                self.check_dim(m)?;
                m.to_vec()
            }
            None => vec![0.0; n],
        };
        let t = self.state.step + 1;
        self.state.last_wolfe_gap = None;
        let s = &self.state;
        let reflected = |base: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|k| base[k] + m[k] - s.last_prediction[k])
                .collect()
        };
        let x = match self.config.algorithm {
            Algorithm::FwRomd | Algorithm::FwOmd => {
                let combo = if self.config.algorithm == Algorithm::FwRomd {
                    reflected(&s.last_loss)
                } else {
                    s.last_loss.clone()
                };
                let term = match self.config.apo {
                    ApoMode::LmoBudget(b) => Termination::MaxLmoCalls(b),
                    ApoMode::Accuracy(_) => {
                        Termination::WolfeGap(self.wolfe_target(t).expect("fw family"))
                    }
                };
                let warm = if self.config.warmstart {
                    self.state.warm_active_set.take()
                } else {
                    None
                };
                let result = apo(
                    &combo,
                    self.config.eta,
                    &self.state.last_strategy,
                    term,
                    warm,
                    self.treeplex,
                )?;
                self.state.last_lmo_calls = result.lmo_calls;
                self.state.last_wolfe_gap = Some(result.final_wolfe_gap);
                if self.config.warmstart {
                    self.state.warm_active_set = Some(result.active_set);
                }
                result.point
            }
            Algorithm::Ftpl | Algorithm::Oftpl => {
                let mut combo = s.cumulative_loss.clone();
                if self.config.algorithm == Algorithm::Oftpl {
                    for (c, mk) in combo.iter_mut().zip(&m) {
                        *c += mk;
                    }
                }
                for c in combo.iter_mut() {
                    *c -= self.gumbel.sample(&mut self.rng);
                }
                self.lmo_dense(&combo)?
            }
            Algorithm::Fp => {
                let combo = s.cumulative_loss.clone();
                self.lmo_dense(&combo)?
            }
            Algorithm::Ofp => {
                let combo: Vec<f64> = s
                    .cumulative_loss
                    .iter()
                    .zip(&m)
                    .map(|(a, b)| a + b)
                    .collect();
                self.lmo_dense(&combo)?
            }
            Algorithm::Br => {
                let combo = s.last_loss.clone();
                self.lmo_dense(&combo)?
            }
            Algorithm::Obr => {
                let combo = reflected(&s.last_loss);
                self.lmo_dense(&combo)?
            }
        };
        self.state.lmo_calls_total += self.state.last_lmo_calls;
        self.state.last_prediction = m;
        self.state.last_strategy = x;
        self.state.step = t;
        self.state.awaiting_loss = true;
        Ok(&self.state.last_strategy)
    }

    /// Receives the loss `l^t` of the round just played.
    pub fn observe(&mut self, loss: &[f64]) -> Result<(), LearnerError> {
        self.check_dim(loss)?;
        if !self.state.awaiting_loss {
            return Err(LearnerError::OutOfOrder);
        }
        let s = &mut self.state;
        std::mem::swap(&mut s.second_last_loss, &mut s.last_loss);
        s.last_loss.copy_from_slice(loss);
        for (c, l) in s.cumulative_loss.iter_mut().zip(loss) {
            *c += l;
        }
        s.awaiting_loss = false;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex(n: usize) -> Treeplex {
        Treeplex::simplex(n).unwrap()
    }

    #[test]
    fn first_round_of_fw_learners_is_uniform() {
        let t = simplex(3);
        for alg in [Algorithm::FwRomd, Algorithm::FwOmd] {
            for warmstart in [true, false] {
                let mut cfg = LearnerConfig::new(alg, 0.5);
                cfg.warmstart = warmstart;
                let mut l = Learner::new(cfg, &t).unwrap();
                let x = l.next_strategy(None).unwrap().to_vec();
                let dist = x
                    .iter()
                    .zip(t.uniform_point())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                // the warm start is x^0 itself; a cold start is only eps^1-accurate
                let bound = if warmstart {
                    1e-12
                } else {
                    (2.0 * 0.5 * 1.0f64).sqrt()
                };
                assert!(dist <= bound, "{alg} {warmstart}: {x:?}");
            }
        }
    }

    #[test]
    fn lmo_learners_spend_one_call() {
        let t = simplex(4);
        for alg in [
            Algorithm::Ftpl,
            Algorithm::Oftpl,
            Algorithm::Fp,
            Algorithm::Ofp,
            Algorithm::Br,
            Algorithm::Obr,
        ] {
            let mut l = Learner::new(LearnerConfig::new(alg, 1.0), &t).unwrap();
            for k in 0..5 {
                let loss = vec![0.0, 0.1 * k as f64, 0.3, -0.2, 0.0];
                l.next_strategy(Some(&loss)).unwrap();
                l.observe(&loss).unwrap();
            }
            assert_eq!(l.lmo_calls_total(), 5);
        }
    }

    #[test]
    fn budget_is_respected() {
        let t = simplex(5);
        let mut cfg = LearnerConfig::new(Algorithm::FwRomd, 0.3);
        cfg.apo = ApoMode::LmoBudget(3);
        let mut l = Learner::new(cfg, &t).unwrap();
        for k in 0..10 {
            let loss: Vec<f64> = (0..6).map(|i| ((i * 7 + k) % 5) as f64 * 0.2).collect();
            let before = l.lmo_calls_total();
            let x = l.next_strategy(Some(&loss)).unwrap().to_vec();
            assert!(l.lmo_calls_total() - before <= 3);
            t.validate_point(&x).unwrap();
            l.observe(&loss).unwrap();
        }
    }

    #[test]
    fn fp_and_br_follow_their_losses() {
        let t = simplex(2);
        let mut fp = Learner::new(LearnerConfig::new(Algorithm::Fp, 1.0), &t).unwrap();
        let mut br = Learner::new(LearnerConfig::new(Algorithm::Br, 1.0), &t).unwrap();
        // ties at t = 1 go to the first action
        assert_eq!(fp.next_strategy(None).unwrap(), &[1.0, 1.0, 0.0]);
        assert_eq!(br.next_strategy(None).unwrap(), &[1.0, 1.0, 0.0]);
        fp.observe(&[0.0, 3.0, 0.0]).unwrap();
        br.observe(&[0.0, 3.0, 0.0]).unwrap();
        fp.next_strategy(None).unwrap();
        br.next_strategy(None).unwrap();
        fp.observe(&[0.0, 0.0, 1.0]).unwrap();
        br.observe(&[0.0, 0.0, 1.0]).unwrap();
        // cumulative (3, 1) vs last (0, 1)
        assert_eq!(fp.next_strategy(None).unwrap(), &[1.0, 0.0, 1.0]);
        assert_eq!(br.next_strategy(None).unwrap(), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn observe_requires_a_round() {
        let t = simplex(2);
        let mut l = Learner::new(LearnerConfig::new(Algorithm::Fp, 1.0), &t).unwrap();
        assert_eq!(l.observe(&[0.0; 3]), Err(LearnerError::OutOfOrder));
        l.next_strategy(None).unwrap();
        assert!(l.observe(&[0.0; 2]).is_err());
    }

    #[test]
    fn parses_algorithm_names() {
        for alg in Algorithm::ALL {
            assert_eq!(alg.name().parse::<Algorithm>().unwrap(), alg);
        }
        assert_eq!("FWROMD".parse::<Algorithm>().unwrap(), Algorithm::FwRomd);
        assert!("cfr".parse::<Algorithm>().is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        let t = simplex(2);
        assert!(Learner::new(LearnerConfig::new(Algorithm::Fp, 0.0), &t).is_err());
        let mut cfg = LearnerConfig::new(Algorithm::FwOmd, 1.0);
        cfg.apo = ApoMode::LmoBudget(0);
        assert!(Learner::new(cfg, &t).is_err());
    }
}
