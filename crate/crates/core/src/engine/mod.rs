//! Discrete structural causal models and the query levels they answer:
//! association, intervention, counterfactual, nested path responses and
//! Bayesian comparison of competing causal structures.

mod model;
mod query;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use model::{ScmModel, Variable};
pub use query::{
    counterfactual_with, hypothesis_posterior, path_response, query_assoc, query_counterfactual, query_do,
    Assignment, Level, Method, NoiseSemantics, Query, QueryResult,
};

/// Competing causal models indexed by the values of a hypothesis variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSet {
    pub variable: Variable,
    pub prior: Vec<f64>,
    pub models: Vec<ScmModel>,
}

impl HypothesisSet {
    pub fn new(variable: Variable, prior: Vec<f64>, models: Vec<ScmModel>) -> Result<Self> {
        if prior.len() != variable.domain.len() || models.len() != variable.domain.len() {
            return Err(Error::ModelMismatch(format!(
                "`{}` needs one model and one prior entry per value",
                variable.name
            )));
        }
        Ok(HypothesisSet { variable, prior, models })
    }

    /// Posterior over the hypothesis variable's values.
    pub fn posterior(&self, intervention: &Assignment, evidence: &Assignment) -> Result<Vec<f64>> {
        let pairs: Vec<_> = self.models.iter().zip(self.prior.iter().copied()).collect();
        hypothesis_posterior(&pairs, intervention, evidence)
    }
}

/// Anything the engine can query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Model {
    Scm(ScmModel),
    Hypotheses(HypothesisSet),
}

impl From<ScmModel> for Model {
    fn from(m: ScmModel) -> Self {
        Model::Scm(m)
    }
}

fn single<'a>(a: &'a Assignment, what: &str) -> Result<(&'a String, &'a String)> {
    match a.iter().collect::<Vec<_>>().as_slice() {
        [(k, v)] => Ok((k, v)),
        _ => Err(Error::InvalidQuery(format!("{what} must assign exactly one variable"))),
    }
}

/// Answers a query against a model.
pub fn answer(model: &Model, q: &Query) -> Result<QueryResult> {
    match (model, q.level) {
        (Model::Scm(m), Level::Associational) => {
            if !q.intervention.is_empty() {
                return Err(Error::InvalidQuery("associational queries take no `do`".into()));
            }
            query_assoc(m, &q.target, &q.evidence)
        }
        (Model::Scm(m), Level::Interventional) => query_do(m, &q.target, &q.intervention, &q.evidence),
        (Model::Scm(m), Level::Counterfactual) => query_counterfactual(m, &q.target, &q.intervention, &q.evidence),
        (Model::Scm(m), Level::PathResponse) => {
            let path = q.path.as_ref().ok_or_else(|| Error::InvalidQuery("path responses need a `path`".into()))?;
            if !q.evidence.is_empty() {
                return Err(Error::InvalidQuery("path responses take no evidence".into()));
            }
            let (first, setting) = single(&q.intervention, "`do`")?;
            let (last, target) = single(&q.target, "target")?;
            if path.first() != Some(first) || path.last() != Some(last) {
                return Err(Error::InvalidQuery("`do` and target must sit at the ends of the path".into()));
            }
            path_response(m, path, setting, target)
        }
        (Model::Hypotheses(h), Level::HypothesisPosterior) => {
            let (name, value) = single(&q.target, "target")?;
            if name != &h.variable.name {
                return Err(Error::UnknownVariable(name.clone()));
            }
            let k = h.variable.index_of(value)?;
            let post = h.posterior(&q.intervention, &q.evidence)?;
            Ok(QueryResult { probability: post[k], method: Method::Bayes, support: None })
        }
        (Model::Scm(_), Level::HypothesisPosterior) => {
            Err(Error::InvalidQuery("hypothesis posteriors need a hypothesis set".into()))
        }
        (Model::Hypotheses(_), level) => {
            Err(Error::InvalidQuery(format!("hypothesis sets only answer hypothesis-posterior queries, not {level:?}")))
        }
    }
}
