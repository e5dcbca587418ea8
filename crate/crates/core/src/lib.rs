//! Projection-free equilibrium computation in polyhedral games.
//!
//! Players' strategy sets are sequence-form polytopes ([`polytope::Treeplex`]) accessed only
//! through a linear minimization oracle, i.e. a best response. On top of that oracle the crate
//! provides away-step Frank-Wolfe as an approximate proximal oracle ([`afw`]), eight online
//! learners ([`learners`]), benchmark extensive-form games ([`games`]) and a self-play driver
//! with equilibrium metrics and run-time inequality audits ([`selfplay`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod afw;
pub mod games;
pub mod learners;
pub mod polytope;
pub mod selfplay;
