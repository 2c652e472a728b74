use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{InterventionSpec, Lineage, Runner, StepRecord, System, Trace, SNAPSHOT_EVERY};
use crate::error::{Error, Result};
use crate::gridworld::Action;
use crate::json::to_canonical_json;
use crate::seed::Seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    id: String,
    system: System,
    seed: Seed,
    interventions: Vec<InterventionSpec>,
    parent: Option<Lineage>,
    len: u32,
}

impl Header {
    fn of(trace: &Trace) -> Header {
        Header {
            id: trace.id.clone(),
            system: trace.system.clone(),
            seed: trace.seed.clone(),
            interventions: trace.interventions.clone(),
            parent: trace.parent.clone(),
            len: trace.len(),
        }
    }
}

/// Writes a trace as JSON lines: a header with the recipe and lineage,
/// then one canonical step record per line.
pub fn write_trace(trace: &Trace, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{}", to_canonical_json(&Header::of(trace))?)?;
    for step in &trace.steps {
        writeln!(out, "{}", to_canonical_json(step)?)?;
    }
    Ok(())
}

/// Reads a trace written by [`write_trace`].
pub fn read_trace(input: impl BufRead) -> Result<Trace> {
    let mut lines = input.lines();
    let header: Header = match lines.next() {
        Some(line) => serde_json::from_str(&line?)?,
        None => return Err(Error::Config("empty trace file".into())),
    };
    let mut steps = Vec::with_capacity(header.len as usize);
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            steps.push(serde_json::from_str(&line)?);
        }
    }
    if steps.len() as u32 != header.len {
        return Err(Error::Config(format!("trace header announces {} steps, file holds {}", header.len, steps.len())));
    }
    Ok(Trace {
        id: header.id,
        system: header.system,
        seed: header.seed,
        interventions: header.interventions,
        parent: header.parent,
        steps,
    })
}

/// Space-saving trace representation: full step records every
/// [`SNAPSHOT_EVERY`] steps, executed actions in between. Missing steps
/// are regenerated by replay from the nearest earlier snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactTrace {
    header: Header,
    snapshots: BTreeMap<u32, StepRecord>,
    actions: Vec<BTreeMap<String, Action>>,
}

impl CompactTrace {
    pub fn compress(trace: &Trace) -> Self {
        let snapshots = trace
            .steps
            .iter()
            .filter(|s| (s.t - 1) % SNAPSHOT_EVERY == 0)
            .map(|s| (s.t, s.clone()))
            .collect();
        let actions = trace.steps.iter().map(|s| s.actions()).collect();
        CompactTrace {
            header: Header::of(trace),
            snapshots,
            actions,
        }
    }

    pub fn len(&self) -> u32 {
        self.header.len
    }

    pub fn is_empty(&self) -> bool {
        self.header.len == 0
    }

    pub fn snapshot_count(&self) -> usize {
        self.snapshots.len()
    }

    /// Rebuilds the full trace, checking every regenerated action against
    /// the stored one.
    pub fn expand(&self) -> Result<Trace> {
        let h = &self.header;
        let runner = Runner { system: &h.system, seed: &h.seed, interventions: &h.interventions };
        let mut steps: Vec<StepRecord> = Vec::with_capacity(h.len as usize);
        for t in 1..=h.len {
            let record = match self.snapshots.get(&t) {
                Some(s) => s.clone(),
                None => {
                    let prev = steps.last().ok_or_else(|| Error::Config("compact trace lacks its first snapshot".into()))?;
                    let (world, memories) = runner.successor(prev)?;
                    runner.step(t, world, memories)?
                }
            };
            if record.actions() != self.actions[t as usize - 1] {
                return Err(Error::Config(format!("replay diverged from the stored actions at step {t}")));
            }
            steps.push(record);
        }
        Ok(Trace {
            id: h.id.clone(),
            system: h.system.clone(),
            seed: h.seed.clone(),
            interventions: h.interventions.clone(),
            parent: h.parent.clone(),
            steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{AgentId, AgentSpec};
    use crate::gridworld::EnvSpec;
    use crate::sim::{intervene, rollout};

    fn long_trace() -> Trace {
        let system = System::solo(EnvSpec::new(crate::gridworld::EnvId::PickUp), AgentSpec::new(AgentId::PickUpB));
        let t = (0..)
            .map(|s| rollout(&system, &Seed::new(s), 60).unwrap())
            .find(|t| t.len() > 20)
            .unwrap();
        intervene(&t, super::super::InterventionSpec::reseed(5, 42)).unwrap()
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let t = long_trace();
        let mut buf = Vec::new();
        write_trace(&t, &mut buf).unwrap();
        let back = read_trace(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        let mut again = Vec::new();
        write_trace(&back, &mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn compact_store_expands_to_the_original() {
        let t = long_trace();
        let c = CompactTrace::compress(&t);
        assert!(c.snapshot_count() < t.steps.len());
        assert_eq!(c.expand().unwrap(), t);
    }
}
