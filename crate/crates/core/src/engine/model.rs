use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on CPT row sums.
const ROW_SUM_TOL: f64 = 1e-9;

/// A discrete variable with an ordered, finite domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub domain: Vec<String>,
    #[serde(default)]
    pub latent: bool,
}

impl Variable {
    pub fn new(name: impl Into<String>, domain: &[&str]) -> Self {
        Variable { name: name.into(), domain: domain.iter().map(|s| s.to_string()).collect(), latent: false }
    }

    pub fn latent(mut self) -> Self {
        self.latent = true;
        self
    }

    pub fn index_of(&self, value: &str) -> Result<usize> {
        self.domain
            .iter()
            .position(|v| v == value)
            .ok_or_else(|| Error::UnknownValue { variable: self.name.clone(), value: value.to_string() })
    }
}

#[derive(Deserialize)]
struct RawModel {
    variables: Vec<Variable>,
    parents: BTreeMap<String, Vec<String>>,
    cpts: BTreeMap<String, Vec<Vec<f64>>>,
}

/// Discrete structural causal model.
///
/// Each variable's mechanism is a table with one row per assignment of its
/// parents (first parent most significant) and one column per domain value.
/// The exogenous noise behind a row is one uniform draw per (variable, row),
/// mapped to an outcome by cumulative thresholds in domain order; draws of
/// different rows are independent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct ScmModel {
    variables: Vec<Variable>,
    parents: BTreeMap<String, Vec<String>>,
    cpts: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(skip)]
    parent_idx: Vec<Vec<usize>>,
    #[serde(skip)]
    order: Vec<usize>,
}

impl TryFrom<RawModel> for ScmModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        ScmModel::new(raw.variables, raw.parents, raw.cpts)
    }
}

impl ScmModel {
    pub fn new(
        variables: Vec<Variable>,
        mut parents: BTreeMap<String, Vec<String>>,
        cpts: BTreeMap<String, Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let mut names = BTreeSet::new();
        for v in &variables {
            if !names.insert(v.name.as_str()) {
                return Err(Error::ModelMismatch(format!("variable `{}` declared twice", v.name)));
            }
            let distinct: BTreeSet<_> = v.domain.iter().collect();
            if v.domain.len() < 2 || distinct.len() != v.domain.len() {
                return Err(Error::ModelMismatch(format!("`{}` needs at least two distinct values", v.name)));
            }
        }
        let index = |n: &str| {
            variables.iter().position(|v| v.name == n).ok_or_else(|| Error::UnknownVariable(n.to_string()))
        };
        for v in &variables {
            parents.entry(v.name.clone()).or_default();
        }
        let mut parent_idx = Vec::with_capacity(variables.len());
        for (child, ps) in &parents {
            index(child)?;
            let unique: BTreeSet<_> = ps.iter().collect();
            if unique.len() != ps.len() {
                return Err(Error::ModelMismatch(format!("`{child}` lists a parent twice")));
            }
        }
        for v in &variables {
            parent_idx.push(parents[&v.name].iter().map(|p| index(p)).collect::<Result<Vec<_>>>()?);
        }
        let order = topological(&variables, &parent_idx)?;
        let mut model = ScmModel { variables, parents, cpts, parent_idx, order };
        model.check_tables()?;
        Ok(model)
    }

    fn check_tables(&mut self) -> Result<()> {
        for name in self.cpts.keys() {
            if !self.variables.iter().any(|v| &v.name == name) {
                return Err(Error::UnknownVariable(name.clone()));
            }
        }
        for (i, v) in self.variables.iter().enumerate() {
            let rows = self
                .cpts
                .get(&v.name)
                .ok_or_else(|| Error::ModelMismatch(format!("no table for `{}`", v.name)))?;
            let want = self.row_count(i);
            if rows.len() != want {
                return Err(Error::ModelMismatch(format!("`{}` needs {want} rows, has {}", v.name, rows.len())));
            }
            for row in rows {
                if row.len() != v.domain.len() {
                    return Err(Error::ModelMismatch(format!("`{}` rows need {} entries", v.name, v.domain.len())));
                }
                let sum: f64 = row.iter().sum();
                if row.iter().any(|p| !(0.0..=1.0).contains(p) || p.is_nan()) || (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::ModelMismatch(format!("`{}` has a row that is not a distribution", v.name)));
                }
            }
        }
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn parents(&self) -> &BTreeMap<String, Vec<String>> {
        &self.parents
    }

    pub fn cpts(&self) -> &BTreeMap<String, Vec<Vec<f64>>> {
        &self.cpts
    }

    pub fn cpt(&self, name: &str) -> Result<&[Vec<f64>]> {
        self.cpts.get(name).map(Vec::as_slice).ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn variable(&self, name: &str) -> Result<&Variable> {
        Ok(&self.variables[self.index(name)?])
    }

    pub(crate) fn order(&self) -> &[usize] {
        &self.order
    }

    pub(crate) fn domain_size(&self, i: usize) -> usize {
        self.variables[i].domain.len()
    }

    fn row_count(&self, i: usize) -> usize {
        self.parent_idx[i].iter().map(|&p| self.domain_size(p)).product()
    }

    /// Row of variable `i`'s table selected by a full assignment.
    pub(crate) fn row_of(&self, i: usize, assignment: &[usize]) -> usize {
        self.parent_idx[i].iter().fold(0, |acc, &p| acc * self.domain_size(p) + assignment[p])
    }

    pub(crate) fn prob(&self, i: usize, row: usize, value: usize) -> f64 {
        self.cpts[&self.variables[i].name][row][value]
    }

    /// Resolves `name = value` pairs into index pairs.
    pub fn resolve(&self, assignment: &BTreeMap<String, String>) -> Result<Vec<(usize, usize)>> {
        assignment
            .iter()
            .map(|(n, v)| {
                let i = self.index(n)?;
                Ok((i, self.variables[i].index_of(v)?))
            })
            .collect()
    }

    /// The model with each intervened variable's mechanism replaced by a
    /// point mass and its incoming edges removed.
    pub fn mutilate(&self, interventions: &BTreeMap<String, String>) -> Result<ScmModel> {
        let mut parents = self.parents.clone();
        let mut cpts = self.cpts.clone();
        for (i, value) in self.resolve(interventions)? {
            let v = &self.variables[i];
            parents.insert(v.name.clone(), Vec::new());
            let mut row = vec![0.0; v.domain.len()];
            row[value] = 1.0;
            cpts.insert(v.name.clone(), vec![row]);
        }
        ScmModel::new(self.variables.clone(), parents, cpts)
    }

    /// True when `from` is a parent of `to`.
    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.parents.get(to).is_some_and(|ps| ps.iter().any(|p| p == from))
    }

    /// Calls `visit` with every full assignment of positive probability.
    pub(crate) fn for_each_assignment(&self, mut visit: impl FnMut(&[usize], f64)) {
        let mut assignment = vec![0; self.len()];
        self.walk(0, 1.0, &mut assignment, &mut visit);
    }

    fn walk(&self, depth: usize, p: f64, assignment: &mut Vec<usize>, visit: &mut impl FnMut(&[usize], f64)) {
        if depth == self.order.len() {
            visit(assignment, p);
            return;
        }
        let i = self.order[depth];
        let row = self.row_of(i, assignment);
        for value in 0..self.domain_size(i) {
            let q = self.prob(i, row, value);
            if q > 0.0 {
                assignment[i] = value;
                self.walk(depth + 1, p * q, assignment, visit);
            }
        }
        assignment[i] = 0;
    }

    /// Probability of a partial assignment.
    pub fn probability(&self, event: &[(usize, usize)]) -> f64 {
        let mut total = 0.0;
        self.for_each_assignment(|a, p| {
            if event.iter().all(|&(i, v)| a[i] == v) {
                total += p;
            }
        });
        total
    }
}

fn topological(variables: &[Variable], parents: &[Vec<usize>]) -> Result<Vec<usize>> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; variables.len()];
    let mut order = Vec::with_capacity(variables.len());
    fn visit(i: usize, vars: &[Variable], parents: &[Vec<usize>], state: &mut [u8], order: &mut Vec<usize>) -> Result<()> {
        match state[i] {
            2 => return Ok(()),
            1 => return Err(Error::Cyclic(vars[i].name.clone())),
            _ => {}
        }
        state[i] = 1;
        for &p in &parents[i] {
            visit(p, vars, parents, state, order)?;
        }
        state[i] = 2;
        order.push(i);
        Ok(())
    }
    for i in 0..variables.len() {
        visit(i, variables, parents, &mut state, &mut order)?;
    }
    Ok(order)
}
