//! Packaged experiments: environment, subjects, regimes, extractors, model
//! structure and query list, run end to end into a [`QueryTable`].

mod builtin;
mod table;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{answer, HypothesisSet, Method, Model, Query, Variable};
use crate::error::{Error, Result};
use crate::estimation::{assemble_model, collect, estimate_cpt, CollectConfig, Cpt, FeatureExtractor, Latent, RegimeTemplate, RolloutTree, Subject, FLAT_PRIOR};
use crate::gridworld::{env_init, EnvSpec};
use crate::json::content_hash;
use crate::seed::Seed;
use crate::sim::rollout;

pub use builtin::{builtin, builtin_names};
pub use table::{diff_tables, render_text, CellDiff, DiffReport, DiffStatus, QueryTable, ReferenceSet, ReferenceTable, RowTolerance, TableMetadata, TableRow, TableTolerances, ToleranceSet};

/// Default number of rollouts per regime.
pub const DEFAULT_ROLLOUTS: u64 = 1000;

/// One column of a table: the subjects whose pooled rollouts back it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub label: String,
    pub subjects: Vec<Subject>,
}

/// Where a variable's table comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum CptSource {
    /// Flat-Dirichlet estimate pooled over the listed regimes (all when
    /// absent).
    Estimate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        regimes: Option<Vec<String>>,
    },
    /// Analyst-supplied distribution of a root variable.
    Prior { probs: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub variable: String,
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(flatten)]
    pub source: CptSource,
    #[serde(default)]
    pub latent: bool,
}

impl NodeSpec {
    pub fn estimate(variable: &str, parents: &[&str]) -> Self {
        NodeSpec {
            variable: variable.into(),
            parents: parents.iter().map(|p| p.to_string()).collect(),
            source: CptSource::Estimate { regimes: None },
            latent: false,
        }
    }

    pub fn prior(variable: &str, probs: &[f64], latent: bool) -> Self {
        NodeSpec { variable: variable.into(), parents: Vec::new(), source: CptSource::Prior { probs: probs.to_vec() }, latent }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureSpec {
    pub nodes: Vec<NodeSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    Single { structure: StructureSpec },
    /// Competing structures indexed by a hypothesis variable.
    Hypotheses { variable: Variable, prior: Vec<f64>, structures: Vec<StructureSpec> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RowQuery {
    Query(Query),
    /// Difference of two earlier rows, by label.
    Difference { minuend: String, subtrahend: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowSpec {
    pub label: String,
    pub query: RowQuery,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub env: EnvSpec,
    pub columns: Vec<ColumnSpec>,
    #[serde(default = "default_rollouts")]
    pub rollouts_per_regime: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u32>,
    #[serde(default = "flat_prior")]
    pub prior: f64,
    pub regimes: Vec<RegimeTemplate>,
    pub extractors: Vec<FeatureExtractor>,
    pub model: ModelSpec,
    pub rows: Vec<RowSpec>,
    /// A single episode to simulate and report alongside the table, for
    /// experiments whose queries condition on one observed outcome.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<Subject>,
}

fn default_rollouts() -> u64 {
    DEFAULT_ROLLOUTS
}

fn flat_prior() -> f64 {
    FLAT_PRIOR
}

impl ExperimentSpec {
    pub fn with_rollouts(mut self, n: u64) -> Self {
        self.rollouts_per_regime = n;
        self
    }

    /// Checks labels, variable references and subject environments.
    pub fn validate(&self) -> Result<()> {
        let mut labels = std::collections::BTreeSet::new();
        for row in &self.rows {
            if !labels.insert(&row.label) {
                return Err(Error::Config(format!("duplicate row label `{}`", row.label)));
            }
            if let RowQuery::Difference { minuend, subtrahend } = &row.query {
                for l in [minuend, subtrahend] {
                    if !labels.contains(l) || l == &row.label {
                        return Err(Error::Config(format!("row `{}` refers to `{l}`, which is not an earlier row", row.label)));
                    }
                }
            }
        }
        let mut columns = std::collections::BTreeSet::new();
        for c in &self.columns {
            if !columns.insert(&c.label) {
                return Err(Error::Config(format!("duplicate column `{}`", c.label)));
            }
            if c.subjects.is_empty() {
                return Err(Error::Config(format!("column `{}` has no subjects", c.label)));
            }
            for s in &c.subjects {
                if s.system.env.id != self.env.id {
                    return Err(Error::Config(format!("column `{}` runs in a different environment", c.label)));
                }
            }
        }
        let vars: std::collections::BTreeSet<_> = self.extractors.iter().map(|x| &x.variable.name).collect();
        let structures: Vec<&StructureSpec> = match &self.model {
            ModelSpec::Single { structure } => vec![structure],
            ModelSpec::Hypotheses { structures, .. } => structures.iter().collect(),
        };
        for s in structures {
            for n in &s.nodes {
                for v in std::iter::once(&n.variable).chain(&n.parents) {
                    if !vars.contains(v) {
                        return Err(Error::UnknownVariable(v.clone()));
                    }
                }
            }
        }
        Ok(())
    }
}

fn variable_of<'a>(tree: &'a RolloutTree, name: &str) -> Result<&'a Variable> {
    Ok(&tree.variables[tree.variable_index(name)?])
}

/// Builds a model of one structure from a column's rollout tree.
pub fn build_structure(tree: &RolloutTree, structure: &StructureSpec) -> Result<crate::engine::ScmModel> {
    let mut cpts = Vec::new();
    let mut latents = Vec::new();
    let mut graph = BTreeMap::new();
    for node in &structure.nodes {
        graph.insert(node.variable.clone(), node.parents.clone());
        match &node.source {
            CptSource::Prior { probs } => {
                if !node.parents.is_empty() {
                    return Err(Error::Config(format!("prior for `{}` cannot have parents", node.variable)));
                }
                let variable = variable_of(tree, &node.variable)?.clone();
                if node.latent {
                    latents.push(Latent { variable, prior: probs.clone() });
                } else {
                    cpts.push(Cpt::fixed(variable, Vec::new(), vec![probs.clone()]));
                }
            }
            CptSource::Estimate { .. } if node.latent => {
                return Err(Error::Config(format!("latent `{}` needs an analyst-supplied prior", node.variable)));
            }
            CptSource::Estimate { regimes } => {
                let parents: Vec<&str> = node.parents.iter().map(String::as_str).collect();
                cpts.push(estimate_cpt(tree, &node.variable, &parents, regimes.as_deref())?);
            }
        }
    }
    assemble_model(&cpts, Some(&graph), &latents)
}

/// Builds the queryable model of a column.
pub fn build_model(spec: &ExperimentSpec, tree: &RolloutTree) -> Result<Model> {
    model_from_tree(&spec.model, tree)
}

/// Builds a queryable model of the given shape from a rollout tree.
pub fn model_from_tree(model: &ModelSpec, tree: &RolloutTree) -> Result<Model> {
    match model {
        ModelSpec::Single { structure } => Ok(Model::Scm(build_structure(tree, structure)?)),
        ModelSpec::Hypotheses { variable, prior, structures } => {
            let models = structures.iter().map(|s| build_structure(tree, s)).collect::<Result<Vec<_>>>()?;
            Ok(Model::Hypotheses(HypothesisSet::new(variable.clone(), prior.clone(), models)?))
        }
    }
}

/// Collects the pooled rollout tree of one column.
pub fn collect_column(spec: &ExperimentSpec, column: &ColumnSpec, seed: &Seed) -> Result<RolloutTree> {
    let config = CollectConfig { n: spec.rollouts_per_regime, seed: seed.clone(), horizon: spec.horizon, prior: spec.prior };
    let mut tree: Option<RolloutTree> = None;
    for subject in &column.subjects {
        let t = collect(subject, &spec.regimes, &spec.extractors, &config)?;
        match tree.as_mut() {
            Some(acc) => acc.merge(&t)?,
            None => tree = Some(t),
        }
    }
    tree.ok_or_else(|| Error::Config(format!("column `{}` has no subjects", column.label)))
}

/// Evaluates the row list against one model per column.
pub fn evaluate_rows(spec: &ExperimentSpec, models: &[(String, Model)]) -> Result<(Vec<TableRow>, BTreeMap<String, String>)> {
    let mut rows: Vec<TableRow> = Vec::new();
    let mut notes = BTreeMap::new();
    for row in &spec.rows {
        let mut values = BTreeMap::new();
        for (column, model) in models {
            let p = match &row.query {
                RowQuery::Query(q) => {
                    let r = answer(model, q)?;
                    if let Some(s) = r.support.filter(|_| r.method == Method::TwinWorld) {
                        notes.insert(format!("{column}: {}", row.label), s);
                    }
                    r.probability
                }
                RowQuery::Difference { minuend, subtrahend } => {
                    let get = |label: &str| {
                        rows.iter()
                            .find(|r| r.label == label)
                            .and_then(|r| r.values.get(column).copied())
                            .ok_or_else(|| Error::Config(format!("row `{label}` is not available")))
                    };
                    get(minuend)? - get(subtrahend)?
                }
            };
            values.insert(column.clone(), p);
        }
        rows.push(TableRow { label: row.label.clone(), values });
    }
    Ok((rows, notes))
}

/// Runs collection, estimation, model assembly and queries for every
/// column. Deterministic in `seed`.
pub fn run_experiment(spec: &ExperimentSpec, seed: &Seed) -> Result<QueryTable> {
    spec.validate()?;
    let mut models = Vec::new();
    let mut undefined = BTreeMap::new();
    for column in &spec.columns {
        let tree = collect_column(spec, column, seed)?;
        for (key, counts) in &tree.regimes {
            if !counts.undefined.is_empty() {
                undefined.insert(format!("{}/{key}", column.label), counts.undefined.clone());
            }
        }
        models.push((column.label.clone(), build_model(spec, &tree)?));
    }
    let (rows, notes) = evaluate_rows(spec, &models)?;
    let observed = match &spec.observed {
        None => None,
        Some(subject) => {
            let config_seed = seed.derive_named("observed");
            let horizon = match spec.horizon {
                Some(h) => h,
                None => env_init(&subject.system.env, &config_seed)?.step_budget,
            };
            let trace = rollout(&subject.system, &config_seed, horizon)?;
            let mut values = BTreeMap::new();
            for x in &spec.extractors {
                values.insert(x.variable.name.clone(), x.extract(&trace, &subject.tags)?);
            }
            Some(values)
        }
    };
    Ok(QueryTable {
        experiment: spec.name.clone(),
        columns: spec.columns.iter().map(|c| c.label.clone()).collect(),
        rows,
        metadata: TableMetadata {
            n: spec.rollouts_per_regime,
            seed: seed.clone(),
            config_hash: content_hash(spec, 16)?,
            undefined,
            notes,
            observed,
        },
    })
}

/// Which packaged reference tables to compare against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    /// Exact values of the noise-free scripted agents, checked tightly.
    Scripted,
    /// Values reported for trained agents, checked loosely.
    Published,
}

impl std::str::FromStr for ReferenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scripted" => Ok(ReferenceKind::Scripted),
            "published" => Ok(ReferenceKind::Published),
            _ => Err(Error::Config(format!("unknown reference set `{s}` (expected `scripted` or `published`)"))),
        }
    }
}

/// The packaged reference tables and tolerances of a kind.
pub fn reference(kind: ReferenceKind) -> Result<(ReferenceSet, ToleranceSet)> {
    let (tables, tolerances) = match kind {
        ReferenceKind::Scripted => (include_str!("../../data/reference/scripted.json"), include_str!("../../data/reference/scripted-tolerances.json")),
        ReferenceKind::Published => (include_str!("../../data/reference/published.json"), include_str!("../../data/reference/published-tolerances.json")),
    };
    Ok((serde_json::from_str(tables)?, serde_json::from_str(tolerances)?))
}

/// Compares a table with the packaged reference of the same experiment.
pub fn verify(table: &QueryTable, kind: ReferenceKind) -> Result<DiffReport> {
    let (set, tolerances) = reference(kind)?;
    let expected = set.tables.get(&table.experiment).ok_or_else(|| Error::UnknownExperiment(table.experiment.clone()))?;
    diff_tables(table, expected, &tolerances.for_experiment(&table.experiment))
}
