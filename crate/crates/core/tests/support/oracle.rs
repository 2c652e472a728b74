//! Independent brute-force enumerator for discrete causal models.
//!
//! Exogenous noise is a choice of response function per variable: one
//! output value per parent row, drawn independently per row from that row's
//! distribution. Every query is a weighted count over all response-function
//! tuples.

use std::collections::BTreeMap;

use agent_causal::engine::{path_response, query_assoc, query_counterfactual, query_do, Assignment, ScmModel, Variable};
use agent_causal::error::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const QUERIES_PER_LEVEL: usize = 6;
pub const EXACT: f64 = 1e-9;

pub struct Net {
    pub parents: Vec<Vec<usize>>,
    /// `cpt[i][row]` is P(V_i = 1 | row).
    pub cpt: Vec<Vec<f64>>,
}

pub fn name(i: usize) -> String {
    format!("V{i}")
}

impl Net {
    pub fn random(rng: &mut ChaCha8Rng) -> Net {
        let n = rng.gen_range(2..=4);
        let mut parents = Vec::new();
        let mut cpt = Vec::new();
        for i in 0..n {
            let ps: Vec<usize> = (0..i).filter(|_| rng.gen_bool(0.5)).collect();
            let rows = 1 << ps.len();
            let table = (0..rows)
                .map(|_| match rng.gen_range(0..10) {
                    0 => 0.0,
                    1 => 1.0,
                    _ => rng.gen_range(0.05..0.95),
                })
                .collect();
            parents.push(ps);
            cpt.push(table);
        }
        Net { parents, cpt }
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn model(&self) -> ScmModel {
        let variables = (0..self.len()).map(|i| Variable::new(name(i), &["0", "1"])).collect();
        let parents = (0..self.len()).map(|i| (name(i), self.parents[i].iter().map(|&p| name(p)).collect())).collect();
        let cpts = (0..self.len()).map(|i| (name(i), self.cpt[i].iter().map(|&p| vec![1.0 - p, p]).collect())).collect();
        ScmModel::new(variables, parents, cpts).unwrap()
    }

    fn row(&self, i: usize, values: &[usize]) -> usize {
        self.parents[i].iter().fold(0, |acc, &p| acc * 2 + values[p])
    }

    /// Every response-function tuple with its probability. Function `f` of
    /// variable `i` outputs bit `r` of `f` at row `r`.
    pub fn responses(&self) -> Vec<(Vec<u32>, f64)> {
        let mut out = vec![(Vec::new(), 1.0)];
        for i in 0..self.len() {
            let rows = self.cpt[i].len();
            let mut next = Vec::new();
            for (tuple, w) in &out {
                for f in 0u32..(1 << rows) {
                    let p: f64 = (0..rows)
                        .map(|r| if f >> r & 1 == 1 { self.cpt[i][r] } else { 1.0 - self.cpt[i][r] })
                        .product();
                    if p > 0.0 {
                        let mut t = tuple.clone();
                        t.push(f);
                        next.push((t, w * p));
                    }
                }
            }
            out = next;
        }
        out
    }

    /// Variables are indexed in topological order, so one pass suffices.
    pub fn world(&self, response: &[u32], forced: &BTreeMap<usize, usize>) -> Vec<usize> {
        let mut values = vec![0; self.len()];
        for i in 0..self.len() {
            values[i] = match forced.get(&i) {
                Some(&v) => v,
                None => (response[i] >> self.row(i, &values) & 1) as usize,
            };
        }
        values
    }
}

pub type Event = BTreeMap<usize, usize>;

pub fn holds(values: &[usize], event: &Event) -> bool {
    event.iter().all(|(&i, &v)| values[i] == v)
}

/// P(target in the `forced_target` world | evidence in the `forced_evidence` world).
pub fn oracle(net: &Net, target: &Event, forced_target: &Event, evidence: &Event, forced_evidence: &Event) -> Option<f64> {
    let (mut joint, mut marginal) = (0.0, 0.0);
    for (response, w) in net.responses() {
        if holds(&net.world(&response, forced_evidence), evidence) {
            marginal += w;
            if holds(&net.world(&response, forced_target), target) {
                joint += w;
            }
        }
    }
    (marginal > 0.0).then(|| joint / marginal)
}

pub fn assignment(event: &Event) -> Assignment {
    event.iter().map(|(&i, &v)| (name(i), v.to_string())).collect()
}

pub fn random_event(rng: &mut ChaCha8Rng, n: usize, size: std::ops::RangeInclusive<usize>, exclude: &[usize]) -> Event {
    let size = rng.gen_range(size);
    let mut pool: Vec<usize> = (0..n).filter(|i| !exclude.contains(i)).collect();
    let mut e = Event::new();
    for _ in 0..size.min(pool.len()) {
        let i = pool.remove(rng.gen_range(0..pool.len()));
        e.insert(i, rng.gen_range(0..2));
    }
    e
}

pub fn check(engine: Result<f64, Error>, oracle: Option<f64>, what: &str) -> Result<(), String> {
    match (engine, oracle) {
        (Ok(p), Some(q)) if (p - q).abs() < EXACT => Ok(()),
        (Err(Error::ZeroEvidence), None) => Ok(()),
        (e, o) => Err(format!("{what}: engine {e:?}, oracle {o:?}")),
    }
}

/// Directed paths of two or more nodes.
pub fn paths(net: &Net) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut stack: Vec<Vec<usize>> = (0..net.len()).map(|i| vec![i]).collect();
    while let Some(p) = stack.pop() {
        let last = *p.last().unwrap();
        for child in 0..net.len() {
            if net.parents[child].contains(&last) {
                let mut q = p.clone();
                q.push(child);
                out.push(q.clone());
                stack.push(q);
            }
        }
    }
    out
}

/// Tallies of a brute-force comparison run.
#[derive(Debug, Default)]
pub struct Summary {
    pub models: usize,
    pub queries: usize,
    pub consistency: usize,
}

/// Compares every query level on `models` random models. Returns the first
/// disagreement as an error.
pub fn run_suite(models: usize, seed: u64) -> Result<Summary, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checked, mut consistency) = (0, 0);
    for m in 0..models {
        let net = Net::random(&mut rng);
        let model = net.model();
        let n = net.len();
        let none = Event::new();
        for _ in 0..QUERIES_PER_LEVEL {
            let target = random_event(&mut rng, n, 1..=1, &[]);
            let t = *target.keys().next().unwrap();
            let evidence = random_event(&mut rng, n, 0..=2, &[t]);
            check(
                query_assoc(&model, &assignment(&target), &assignment(&evidence)).map(|r| r.probability),
                oracle(&net, &target, &none, &evidence, &none),
                &format!("model {m} associational"),
            )?;

            let forced = random_event(&mut rng, n, 1..=1, &[t]);
            let x = *forced.keys().next().unwrap();
            let evidence = random_event(&mut rng, n, 0..=1, &[t, x]);
            check(
                query_do(&model, &assignment(&target), &assignment(&forced), &assignment(&evidence)).map(|r| r.probability),
                oracle(&net, &target, &forced, &evidence, &forced),
                &format!("model {m} interventional"),
            )?;

            let evidence = random_event(&mut rng, n, 1..=2, &[]);
            check(
                query_counterfactual(&model, &assignment(&target), &assignment(&forced), &assignment(&evidence)).map(|r| r.probability),
                oracle(&net, &target, &forced, &evidence, &none),
                &format!("model {m} counterfactual"),
            )?;

            // Consistency: an antecedent that agrees with the evidence
            // changes nothing.
            let mut agreeing = evidence.clone();
            agreeing.insert(x, forced[&x]);
            let cf = query_counterfactual(&model, &assignment(&target), &assignment(&forced), &assignment(&agreeing));
            let factual = query_assoc(&model, &assignment(&target), &assignment(&agreeing));
            match (cf, factual) {
                (Ok(a), Ok(b)) if (a.probability - b.probability).abs() < EXACT => consistency += 1,
                (Err(Error::ZeroEvidence), Err(Error::ZeroEvidence)) => {}
                (a, b) => return Err(format!("model {m} consistency: {a:?} vs {b:?}")),
            }
            checked += 3;
        }

        for path in paths(&net) {
            let names: Vec<String> = path.iter().map(|&i| name(i)).collect();
            for setting in 0..2 {
                // Chain interventional distributions link by link.
                let mut dist = vec![0.0; 2];
                dist[setting] = 1.0;
                for pair in path.windows(2) {
                    let mut next = vec![0.0; 2];
                    for (v, w) in dist.iter().enumerate().filter(|(_, w)| **w > 0.0) {
                        let forced = Event::from([(pair[0], v)]);
                        for (c, acc) in next.iter_mut().enumerate() {
                            *acc += w * oracle(&net, &Event::from([(pair[1], c)]), &forced, &none, &forced).ok_or("path link without support")?;
                        }
                    }
                    dist = next;
                }
                let engine = path_response(&model, &names, &setting.to_string(), "1").map_err(|e| e.to_string())?;
                if (engine.probability - dist[1]).abs() >= EXACT {
                    return Err(format!("model {m} path {names:?}: engine {}, oracle {}", engine.probability, dist[1]));
                }
                checked += 1;
            }
        }
    }
    Ok(Summary { models, queries: checked, consistency })
}
