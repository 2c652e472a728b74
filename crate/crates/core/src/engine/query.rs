use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::ScmModel;
use crate::error::{Error, Result};

pub type Assignment = BTreeMap<String, String>;

/// Query levels understood by the engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    Associational,
    Interventional,
    Counterfactual,
    PathResponse,
    HypothesisPosterior,
}

/// A causal query. The meaning of `do` depends on the level: the
/// intervention for interventional and hypothesis queries, the antecedent
/// for counterfactuals, and the setting of the path's first variable for
/// path responses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub level: Level,
    pub target: Assignment,
    #[serde(default, rename = "do")]
    pub intervention: Assignment,
    #[serde(default)]
    pub evidence: Assignment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<String>>,
}

fn assignment(pairs: &[(&str, &str)]) -> Assignment {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

impl Query {
    pub fn assoc(target: &[(&str, &str)], evidence: &[(&str, &str)]) -> Self {
        Query { level: Level::Associational, target: assignment(target), intervention: Assignment::new(), evidence: assignment(evidence), path: None }
    }

    pub fn interventional(target: &[(&str, &str)], intervention: &[(&str, &str)], evidence: &[(&str, &str)]) -> Self {
        Query { level: Level::Interventional, target: assignment(target), intervention: assignment(intervention), evidence: assignment(evidence), path: None }
    }

    pub fn counterfactual(target: &[(&str, &str)], antecedent: &[(&str, &str)], evidence: &[(&str, &str)]) -> Self {
        Query { level: Level::Counterfactual, target: assignment(target), intervention: assignment(antecedent), evidence: assignment(evidence), path: None }
    }

    pub fn path_response(path: &[&str], setting: &str, target: &str) -> Self {
        let first = path[0];
        let last = path[path.len() - 1];
        Query {
            level: Level::PathResponse,
            target: assignment(&[(last, target)]),
            intervention: assignment(&[(first, setting)]),
            evidence: Assignment::new(),
            path: Some(path.iter().map(|s| s.to_string()).collect()),
        }
    }

    pub fn hypothesis(target: &[(&str, &str)], intervention: &[(&str, &str)], evidence: &[(&str, &str)]) -> Self {
        Query { level: Level::HypothesisPosterior, target: assignment(target), intervention: assignment(intervention), evidence: assignment(evidence), path: None }
    }
}

/// How a result was computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Enumeration,
    TwinWorld,
    PathChain,
    Bayes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub probability: f64,
    pub method: Method,
    /// Free-form note on what backs the number, such as sample sizes or
    /// sensitivity to the noise parameterization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<String>,
}

impl QueryResult {
    fn exact(probability: f64, method: Method) -> Self {
        QueryResult { probability: probability.clamp(0.0, 1.0), method, support: None }
    }
}

/// How the exogenous noise of different rows of one table relates in the
/// twin world.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseSemantics {
    /// One independent uniform per row (the engine's default).
    Independent,
    /// A single uniform shared by all rows.
    Comonotone,
}

fn conditional(model: &ScmModel, target: &Assignment, evidence: &Assignment) -> Result<f64> {
    let t = model.resolve(target)?;
    let e = model.resolve(evidence)?;
    let (mut joint, mut marginal) = (0.0, 0.0);
    model.for_each_assignment(|a, p| {
        if e.iter().all(|&(i, v)| a[i] == v) {
            marginal += p;
            if t.iter().all(|&(i, v)| a[i] == v) {
                joint += p;
            }
        }
    });
    if marginal <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    Ok(joint / marginal)
}

fn require_target(target: &Assignment) -> Result<()> {
    if target.is_empty() {
        return Err(Error::InvalidQuery("target must name at least one variable".into()));
    }
    Ok(())
}

/// P(target | evidence) by exact enumeration.
pub fn query_assoc(model: &ScmModel, target: &Assignment, evidence: &Assignment) -> Result<QueryResult> {
    require_target(target)?;
    Ok(QueryResult::exact(conditional(model, target, evidence)?, Method::Enumeration))
}

/// P(target | do(intervention), evidence) on the mutilated model.
pub fn query_do(model: &ScmModel, target: &Assignment, intervention: &Assignment, evidence: &Assignment) -> Result<QueryResult> {
    require_target(target)?;
    if let Some(shared) = intervention.keys().find(|k| evidence.contains_key(*k)) {
        return Err(Error::InvalidQuery(format!("`{shared}` is both intervened on and observed")));
    }
    let cut = model.mutilate(intervention)?;
    Ok(QueryResult::exact(conditional(&cut, target, evidence)?, Method::Enumeration))
}

/// Joint probability that one table's noise yields `x` under row `rx` in
/// the factual world and `y` under row `ry` in the counterfactual world.
fn pair_prob(model: &ScmModel, i: usize, rx: usize, x: usize, ry: usize, y: usize, semantics: NoiseSemantics) -> f64 {
    if rx == ry {
        return if x == y { model.prob(i, rx, x) } else { 0.0 };
    }
    match semantics {
        NoiseSemantics::Independent => model.prob(i, rx, x) * model.prob(i, ry, y),
        NoiseSemantics::Comonotone => {
            let lo_hi = |row: usize, v: usize| {
                let lo: f64 = (0..v).map(|k| model.prob(i, row, k)).sum();
                (lo, lo + model.prob(i, row, v))
            };
            let (a0, a1) = lo_hi(rx, x);
            let (b0, b1) = lo_hi(ry, y);
            (a1.min(b1) - a0.max(b0)).max(0.0)
        }
    }
}

/// Counterfactual probability P(target_{antecedent} | evidence): evidence
/// holds in the factual world, the target in the world where the
/// antecedent was enforced, and both worlds share exogenous noise.
pub fn counterfactual_with(
    model: &ScmModel,
    target: &Assignment,
    antecedent: &Assignment,
    evidence: &Assignment,
    semantics: NoiseSemantics,
) -> Result<f64> {
    require_target(target)?;
    let t = model.resolve(target)?;
    let e = model.resolve(evidence)?;
    let forced: BTreeMap<usize, usize> = model.resolve(antecedent)?.into_iter().collect();
    let n = model.len();
    let mut x = vec![0; n];
    let mut y = vec![0; n];
    let (mut joint, mut marginal) = (0.0, 0.0);
    let order = model.order().to_vec();
    let evidence_at: BTreeMap<usize, usize> = e.iter().copied().collect();

    struct Walk<'a> {
        model: &'a ScmModel,
        order: &'a [usize],
        forced: &'a BTreeMap<usize, usize>,
        evidence: &'a BTreeMap<usize, usize>,
        target: &'a [(usize, usize)],
        semantics: NoiseSemantics,
    }

    fn go(w: &Walk, depth: usize, p: f64, x: &mut [usize], y: &mut [usize], joint: &mut f64, marginal: &mut f64) {
        if depth == w.order.len() {
            *marginal += p;
            if w.target.iter().all(|&(i, v)| y[i] == v) {
                *joint += p;
            }
            return;
        }
        let i = w.order[depth];
        let rx = w.model.row_of(i, x);
        let k = w.model.domain_size(i);
        for xv in 0..k {
            if w.evidence.get(&i).is_some_and(|&ev| ev != xv) {
                continue;
            }
            let px = w.model.prob(i, rx, xv);
            if px <= 0.0 {
                continue;
            }
            x[i] = xv;
            if let Some(&fv) = w.forced.get(&i) {
                y[i] = fv;
                go(w, depth + 1, p * px, x, y, joint, marginal);
                continue;
            }
            let ry = w.model.row_of(i, y);
            for yv in 0..k {
                let q = pair_prob(w.model, i, rx, xv, ry, yv, w.semantics);
                if q > 0.0 {
                    y[i] = yv;
                    go(w, depth + 1, p * q, x, y, joint, marginal);
                }
            }
        }
        x[i] = 0;
        y[i] = 0;
    }

    let walk = Walk { model, order: &order, forced: &forced, evidence: &evidence_at, target: &t, semantics };
    go(&walk, 0, 1.0, &mut x, &mut y, &mut joint, &mut marginal);
    if marginal <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    Ok(joint / marginal)
}

/// Counterfactual query under the default noise semantics. Results that
/// change when rows share their noise are flagged in `support`.
pub fn query_counterfactual(model: &ScmModel, target: &Assignment, antecedent: &Assignment, evidence: &Assignment) -> Result<QueryResult> {
    let p = counterfactual_with(model, target, antecedent, evidence, NoiseSemantics::Independent)?;
    let alt = counterfactual_with(model, target, antecedent, evidence, NoiseSemantics::Comonotone)?;
    let mut result = QueryResult::exact(p, Method::TwinWorld);
    if (p - alt).abs() > 1e-9 {
        result.support = Some(format!("parameterization-dependent: shared-noise value {alt:.6}"));
    }
    Ok(result)
}

/// Nested potential response along a directed path
/// `path[0] -> path[1] -> ... -> path[k]`: chains the interventional
/// distributions of each link, summing over the intermediate values.
pub fn path_response(model: &ScmModel, path: &[String], setting: &str, target: &str) -> Result<QueryResult> {
    if path.len() < 2 {
        return Err(Error::NotAPath(path.join(" -> ")));
    }
    for pair in path.windows(2) {
        if !model.has_edge(&pair[0], &pair[1]) {
            return Err(Error::NotAPath(path.join(" -> ")));
        }
    }
    let first = model.variable(&path[0])?;
    first.index_of(setting)?;
    let last = model.variable(&path[path.len() - 1])?;
    last.index_of(target)?;
    // dist[v] = probability that the current link's variable takes value v
    let mut dist: Vec<(String, f64)> = vec![(setting.to_string(), 1.0)];
    for pair in path.windows(2) {
        let child = model.variable(&pair[1])?;
        let mut next: Vec<(String, f64)> = child.domain.iter().map(|v| (v.clone(), 0.0)).collect();
        for (value, weight) in &dist {
            if *weight == 0.0 {
                continue;
            }
            let intervention = Assignment::from([(pair[0].clone(), value.clone())]);
            for (cv, acc) in next.iter_mut() {
                let target = Assignment::from([(pair[1].clone(), cv.clone())]);
                *acc += weight * query_do(model, &target, &intervention, &Assignment::new())?.probability;
            }
        }
        dist = next;
    }
    let p = dist.iter().find(|(v, _)| v == target).map(|(_, p)| *p).unwrap_or(0.0);
    Ok(QueryResult::exact(p, Method::PathChain))
}

/// Posterior over competing models after observing `evidence` in a world
/// where `intervention` was enforced. Intervened mechanisms drop out of the
/// likelihood.
pub fn hypothesis_posterior(models: &[(&ScmModel, f64)], intervention: &Assignment, evidence: &Assignment) -> Result<Vec<f64>> {
    let total_prior: f64 = models.iter().map(|(_, p)| p).sum();
    if models.is_empty() || (total_prior - 1.0).abs() > 1e-9 || models.iter().any(|(_, p)| *p < 0.0) {
        return Err(Error::InvalidQuery("hypothesis priors must be non-negative and sum to 1".into()));
    }
    let mut weights = Vec::with_capacity(models.len());
    for (model, prior) in models {
        let cut = model.mutilate(intervention)?;
        let e = cut.resolve(evidence)?;
        weights.push(prior * cut.probability(&e));
    }
    let z: f64 = weights.iter().sum();
    if z <= 0.0 {
        return Err(Error::ZeroLikelihood);
    }
    Ok(weights.into_iter().map(|w| w / z).collect())
}
