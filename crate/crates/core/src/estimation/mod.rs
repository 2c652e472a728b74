//! Causal-model estimation from Monte-Carlo rollouts: feature extraction,
//! per-regime count trees and flat-Dirichlet conditional tables.

mod features;
mod regimes;
mod tree;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{ScmModel, Variable};
use crate::error::{Error, Result};
use crate::gridworld::env_init;
use crate::seed::Seed;
use crate::sim::{extend, intervene, rollout, System};

pub use features::{FeatureExtractor, FeatureRule, UNDEFINED};
pub use regimes::{EditTemplate, RegimeTemplate, OBSERVATIONAL};
pub use tree::{CountNode, RegimeCounts, RolloutTree};

/// Default Dirichlet pseudo-count per outcome.
pub const FLAT_PRIOR: f64 = 1.0;

/// A system under study plus tags that describe it (for example the agent
/// type when several agents are pooled).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub system: System,
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
}

impl Subject {
    pub fn new(system: System) -> Self {
        Subject { system, tags: BTreeMap::new() }
    }

    pub fn tagged(mut self, key: &str, value: &str) -> Self {
        self.tags.insert(key.into(), value.into());
        self
    }
}

/// Parameters of a collection run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectConfig {
    pub n: u64,
    pub seed: Seed,
    /// Episode length cap; defaults to the environment's step budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u32>,
    #[serde(default = "flat_prior")]
    pub prior: f64,
}

fn flat_prior() -> f64 {
    FLAT_PRIOR
}

impl CollectConfig {
    pub fn new(n: u64, seed: impl Into<Seed>) -> Self {
        CollectConfig { n, seed: seed.into(), horizon: None, prior: FLAT_PRIOR }
    }
}

fn values_for(
    subject: &Subject,
    regime: &RegimeTemplate,
    extractors: &[FeatureExtractor],
    seed: &Seed,
    horizon: u32,
) -> Result<Vec<String>> {
    let trace = if regime.edits.is_empty() {
        rollout(&subject.system, seed, horizon)?
    } else {
        let mut trace = rollout(&subject.system, seed, regime.time)?;
        if trace.len() < regime.time || trace.terminated() {
            // The episode ended before the intervention point.
            return Ok(extractors
                .iter()
                .map(|x| regime.enforce.get(&x.variable.name).cloned().unwrap_or_else(|| UNDEFINED.to_string()))
                .collect());
        }
        for iv in regime.resolve(&trace.step(regime.time)?.world, seed)? {
            trace = intervene(&trace, iv)?;
        }
        extend(&trace, horizon)?
    };
    extractors
        .iter()
        .map(|x| match regime.enforce.get(&x.variable.name) {
            Some(v) => Ok(v.clone()),
            None => x.extract(&trace, &subject.tags),
        })
        .collect()
}

/// Runs `config.n` rollouts under every regime and counts the extracted
/// feature values. Rollout `i` uses the same seed in every regime, so
/// regimes differ only by their interventions.
pub fn collect(
    subject: &Subject,
    regimes: &[RegimeTemplate],
    extractors: &[FeatureExtractor],
    config: &CollectConfig,
) -> Result<RolloutTree> {
    subject.system.validate()?;
    let names: BTreeSet<_> = extractors.iter().map(|x| &x.variable.name).collect();
    if names.len() != extractors.len() {
        return Err(Error::Config("two extractors define the same variable".into()));
    }
    let keys: BTreeSet<_> = regimes.iter().map(|r| &r.key).collect();
    if keys.len() != regimes.len() {
        return Err(Error::Config("regime keys must be unique".into()));
    }
    for r in regimes {
        if let Some(v) = r.enforce.keys().find(|v| !names.contains(v)) {
            return Err(Error::UnknownVariable(v.clone()));
        }
    }
    let horizon = match config.horizon {
        Some(h) => h,
        None => env_init(&subject.system.env, &config.seed)?.step_budget,
    };
    let variables: Vec<Variable> = extractors.iter().map(|x| x.variable.clone()).collect();
    let mut empty = RolloutTree::new(variables, config.prior);
    for r in regimes {
        empty.add_regime(&r.key, r.enforce.clone());
    }
    (0..config.n)
        .into_par_iter()
        .try_fold(
            || empty.clone(),
            |mut tree, i| {
                let seed = config.seed.derive(i);
                for r in regimes {
                    let values = values_for(subject, r, extractors, &seed, horizon)?;
                    tree.record(&r.key, &values, 1)?;
                }
                Ok(tree)
            },
        )
        .try_reduce(
            || empty.clone(),
            |mut a, b| {
                a.merge(&b)?;
                Ok(a)
            },
        )
}

/// Conditional probability table of `child` given `parents`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub child: Variable,
    pub parents: Vec<Variable>,
    /// One probability vector per parent assignment, first parent most
    /// significant.
    pub rows: Vec<Vec<f64>>,
    /// Counts behind each row; empty for analyst-supplied tables.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub counts: Vec<Vec<u64>>,
}

impl Cpt {
    /// Posterior means `(count + alpha) / (total + alpha * K)` of a flat
    /// Dirichlet prior; rows without data get the uniform prior mean.
    pub fn from_counts(child: Variable, parents: Vec<Variable>, counts: Vec<Vec<u64>>, alpha: f64) -> Self {
        let k = child.domain.len() as f64;
        let rows = counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                row.iter().map(|&c| (c as f64 + alpha) / (total as f64 + alpha * k)).collect()
            })
            .collect();
        Cpt { child, parents, rows, counts }
    }

    /// A table supplied by the analyst.
    pub fn fixed(child: Variable, parents: Vec<Variable>, rows: Vec<Vec<f64>>) -> Self {
        Cpt { child, parents, rows, counts: Vec::new() }
    }
}

/// Pooled flat-Dirichlet estimate of `child`'s table from the listed
/// regimes (all regimes when `regimes` is `None`). Regimes that enforce
/// `child` contribute nothing; rollouts with an undefined child or parent
/// are skipped.
pub fn estimate_cpt(tree: &RolloutTree, child: &str, parents: &[&str], regimes: Option<&[String]>) -> Result<Cpt> {
    let ci = tree.variable_index(child)?;
    let pis: Vec<usize> = parents.iter().map(|p| tree.variable_index(p)).collect::<Result<_>>()?;
    let child_var = tree.variables[ci].clone();
    let parent_vars: Vec<Variable> = pis.iter().map(|&i| tree.variables[i].clone()).collect();
    let n_rows: usize = parent_vars.iter().map(|v| v.domain.len()).product();
    let mut counts = vec![vec![0u64; child_var.domain.len()]; n_rows];
    let keys: Vec<String> = match regimes {
        Some(r) => r.to_vec(),
        None => tree.regimes.keys().cloned().collect(),
    };
    for key in &keys {
        let regime = tree.regimes.get(key).ok_or_else(|| Error::UnknownRegime(key.clone()))?;
        if regime.enforce.contains_key(child) {
            continue;
        }
        'leaf: for (values, count) in tree.leaves(key)? {
            let Ok(cv) = child_var.index_of(&values[ci]) else { continue };
            let mut row = 0;
            for (pv, &pi) in parent_vars.iter().zip(&pis) {
                let Ok(v) = pv.index_of(&values[pi]) else { continue 'leaf };
                row = row * pv.domain.len() + v;
            }
            counts[row][cv] += count;
        }
    }
    Ok(Cpt::from_counts(child_var, parent_vars, counts, tree.prior))
}

/// A latent root variable with an analyst-supplied prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Latent {
    pub variable: Variable,
    pub prior: Vec<f64>,
}

/// Builds a queryable model from tables and latent priors. When a
/// structure is given, every table's parents must match it.
pub fn assemble_model(cpts: &[Cpt], structure: Option<&BTreeMap<String, Vec<String>>>, latents: &[Latent]) -> Result<ScmModel> {
    let mut variables = Vec::new();
    let mut parents = BTreeMap::new();
    let mut tables = BTreeMap::new();
    for l in latents {
        variables.push(l.variable.clone().latent());
        parents.insert(l.variable.name.clone(), Vec::new());
        tables.insert(l.variable.name.clone(), vec![l.prior.clone()]);
    }
    for cpt in cpts {
        let name = &cpt.child.name;
        if tables.contains_key(name) {
            return Err(Error::ModelMismatch(format!("`{name}` has two tables")));
        }
        let mut var = cpt.child.clone();
        var.latent = latents.iter().any(|l| &l.variable.name == name);
        variables.push(var);
        parents.insert(name.clone(), cpt.parents.iter().map(|p| p.name.clone()).collect::<Vec<_>>());
        tables.insert(name.clone(), cpt.rows.clone());
    }
    if let Some(structure) = structure {
        for (child, ps) in &parents {
            let want: BTreeSet<&String> = structure.get(child).map(|v| v.iter().collect()).unwrap_or_default();
            let have: BTreeSet<&String> = ps.iter().collect();
            if want != have {
                return Err(Error::ModelMismatch(format!("parents of `{child}` differ from the structure")));
            }
        }
        if let Some(extra) = structure.keys().find(|k| !parents.contains_key(*k)) {
            return Err(Error::ModelMismatch(format!("no table for `{extra}`")));
        }
    }
    for (child, ps) in &parents {
        for p in ps {
            let declared = variables.iter().find(|v| &v.name == p).ok_or_else(|| Error::UnknownVariable(p.clone()))?;
            let in_cpt = cpts.iter().find(|c| &c.child.name == child).and_then(|c| c.parents.iter().find(|v| &v.name == p));
            if in_cpt.is_some_and(|v| v.domain != declared.domain) {
                return Err(Error::ModelMismatch(format!("`{p}` has different domains in `{child}` and its own table")));
            }
        }
    }
    ScmModel::new(variables, parents, tables)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn posterior_mean_closed_form() {
        let v = Variable::new("T", &["l", "r"]);
        let c = Cpt::from_counts(v.clone(), vec![], vec![vec![996, 4]], 1.0);
        assert!((c.rows[0][0] - 997.0 / 1002.0).abs() < 1e-15);
        let c = Cpt::from_counts(v.clone(), vec![], vec![vec![90, 10]], 1.0);
        assert!((c.rows[0][0] - 91.0 / 102.0).abs() < 1e-15);
        let c = Cpt::from_counts(v, vec![], vec![vec![0, 0]], 1.0);
        assert_eq!(c.rows[0], vec![0.5, 0.5]);
    }

    #[test]
    fn enforced_regimes_leave_the_child_at_its_prior() {
        let mut tree = RolloutTree::new(vec![Variable::new("X", &["a", "b"]), Variable::new("Y", &["0", "1"])], 1.0);
        tree.add_regime("obs", Default::default());
        tree.add_regime("do-x", [("X".to_string(), "a".to_string())].into());
        tree.record("do-x", &["a".into(), "1".into()], 50).unwrap();
        let only_do = ["do-x".to_string()];
        let x = estimate_cpt(&tree, "X", &[], Some(&only_do)).unwrap();
        assert_eq!(x.rows, vec![vec![0.5, 0.5]]);
        let y = estimate_cpt(&tree, "Y", &["X"], Some(&only_do)).unwrap();
        assert_eq!(y.counts, vec![vec![0, 50], vec![0, 0]]);
        assert_eq!(y.rows[1], vec![0.5, 0.5]);
        assert!(matches!(estimate_cpt(&tree, "Y", &[], Some(&["zz".to_string()])), Err(Error::UnknownRegime(_))));
    }

    #[test]
    fn assemble_checks_structure() {
        let x = Variable::new("X", &["a", "b"]);
        let y = Variable::new("Y", &["0", "1"]);
        let cx = Cpt::fixed(x.clone(), vec![], vec![vec![0.5, 0.5]]);
        let cy = Cpt::fixed(y.clone(), vec![x.clone()], vec![vec![0.9, 0.1], vec![0.1, 0.9]]);
        let good = BTreeMap::from([("Y".to_string(), vec!["X".to_string()]), ("X".to_string(), vec![])]);
        assemble_model(&[cx.clone(), cy.clone()], Some(&good), &[]).unwrap();
        let bad = BTreeMap::from([("Y".to_string(), vec![]), ("X".to_string(), vec![])]);
        assert!(matches!(assemble_model(&[cx, cy], Some(&bad), &[]), Err(Error::ModelMismatch(_))));
    }

    #[test]
    fn single_variable_model_is_its_marginal() {
        let x = Variable::new("X", &["a", "b"]);
        let m = assemble_model(&[Cpt::fixed(x, vec![], vec![vec![0.25, 0.75]])], None, &[]).unwrap();
        assert!((m.probability(&[(0, 1)]) - 0.75).abs() < 1e-15);
    }
}
