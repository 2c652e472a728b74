use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{Assignment, Variable};
use crate::error::{Error, Result};

/// One node of a count tree: how many rollouts passed through it, keyed by
/// the value of the next variable below.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountNode {
    pub count: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub children: BTreeMap<String, CountNode>,
}

impl CountNode {
    fn insert(&mut self, path: &[String], times: u64) {
        self.count += times;
        if let Some((head, rest)) = path.split_first() {
            self.children.entry(head.clone()).or_default().insert(rest, times);
        }
    }

    fn merge(&mut self, other: &CountNode) {
        self.count += other.count;
        for (k, child) in &other.children {
            self.children.entry(k.clone()).or_default().merge(child);
        }
    }

    fn leaves(&self, prefix: &mut Vec<String>, depth: usize, out: &mut Vec<(Vec<String>, u64)>) {
        if prefix.len() == depth {
            out.push((prefix.clone(), self.count));
            return;
        }
        for (k, child) in &self.children {
            prefix.push(k.clone());
            child.leaves(prefix, depth, out);
            prefix.pop();
        }
    }
}

/// Counts gathered under one regime.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeCounts {
    /// Variables whose values the regime sets rather than observes.
    pub enforce: Assignment,
    pub n: u64,
    /// Per-variable number of rollouts where the feature was undefined.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub undefined: BTreeMap<String, u64>,
    pub root: CountNode,
}

impl RegimeCounts {
    pub fn merge(&mut self, other: &RegimeCounts) {
        self.n += other.n;
        for (k, v) in &other.undefined {
            *self.undefined.entry(k.clone()).or_default() += v;
        }
        self.root.merge(&other.root);
    }
}

/// Monte-Carlo counts of variable assignments, one subtree per regime.
/// Paths run through the variables in declaration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutTree {
    pub variables: Vec<Variable>,
    /// Dirichlet pseudo-count per outcome.
    pub prior: f64,
    pub regimes: BTreeMap<String, RegimeCounts>,
}

impl RolloutTree {
    pub fn new(variables: Vec<Variable>, prior: f64) -> Self {
        RolloutTree { variables, prior, regimes: BTreeMap::new() }
    }

    /// Declares a regime with no data yet.
    pub fn add_regime(&mut self, key: &str, enforce: Assignment) {
        self.regimes.entry(key.to_string()).or_insert_with(|| RegimeCounts { enforce, ..Default::default() });
    }

    /// Records `times` rollouts with the given values, one per variable.
    pub fn record(&mut self, regime: &str, values: &[String], times: u64) -> Result<()> {
        if values.len() != self.variables.len() {
            return Err(Error::Config(format!("expected {} values, got {}", self.variables.len(), values.len())));
        }
        let counts = self.regimes.get_mut(regime).ok_or_else(|| Error::UnknownRegime(regime.to_string()))?;
        counts.n += times;
        for (v, value) in self.variables.iter().zip(values) {
            if value == super::UNDEFINED {
                *counts.undefined.entry(v.name.clone()).or_default() += times;
            }
        }
        counts.root.insert(values, times);
        Ok(())
    }

    /// Adds another tree's counts. Both trees must share variables.
    pub fn merge(&mut self, other: &RolloutTree) -> Result<()> {
        if self.variables != other.variables {
            return Err(Error::ModelMismatch("trees have different variables".into()));
        }
        for (key, counts) in &other.regimes {
            match self.regimes.get_mut(key) {
                Some(mine) => {
                    if mine.enforce != counts.enforce {
                        return Err(Error::ModelMismatch(format!("regime `{key}` enforces different values")));
                    }
                    mine.merge(counts);
                }
                None => {
                    self.regimes.insert(key.clone(), counts.clone());
                }
            }
        }
        Ok(())
    }

    /// Every distinct full assignment in a regime with its count.
    pub fn leaves(&self, regime: &str) -> Result<Vec<(Vec<String>, u64)>> {
        let counts = self.regimes.get(regime).ok_or_else(|| Error::UnknownRegime(regime.to_string()))?;
        let mut out = Vec::new();
        counts.root.leaves(&mut Vec::new(), self.variables.len(), &mut out);
        Ok(out)
    }

    pub fn variable_index(&self, name: &str) -> Result<usize> {
        self.variables.iter().position(|v| v.name == name).ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }
}
