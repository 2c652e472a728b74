//! Causal analysis of gridworld agents.
//!
//! Roll out agents in small gridworlds, branch and replay their episodes,
//! estimate discrete structural causal models from counts of rollout
//! features, and answer associational, interventional and counterfactual
//! queries against them.
//!
//! - [`gridworld`]: environments, tiles, layouts and world edits.
//! - [`agents`]: scripted agent policies.
//! - [`sim`]: rollouts, interventions, replay and trace storage.
//! - [`estimation`]: feature extraction, regimes, rollout trees and
//!   Dirichlet estimates.
//! - [`engine`]: causal models and the query engine.
//! - [`experiments`]: experiment specs, built-in experiments and
//!   reference tables.

pub mod error;
pub mod gridworld;
pub mod json;
pub mod seed;
pub mod agents;
pub mod sim;
pub mod engine;
pub mod estimation;
pub mod experiments;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/worlds.md")]
    mod worlds {}
    #[doc = include_str!("../../../book/src/branching.md")]
    mod branching {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/counterfactuals.md")]
    mod counterfactuals {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
