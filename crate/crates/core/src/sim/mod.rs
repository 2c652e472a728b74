//! Trace generation, time travel and interventions over coupled
//! agent-environment systems.
//!
//! A trace is fully determined by its recipe: the system, the root seed and
//! the list of interventions. Randomness for step `t` is derived from the
//! seed in force at `t` and the step index, so an intervention at `t`
//! leaves everything before `t` untouched and reuses the same downstream
//! noise.

mod store;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::{agent_act, agent_init, AgentSpec, MemoryState};
use crate::error::{Error, Result};
use crate::gridworld::{apply_edit, env_init, observe, step_joint, Action, EnvSpec, Observation, WorldState, AGENT};
use crate::json::content_hash;
use crate::seed::Seed;

pub use store::{read_trace, write_trace, CompactTrace};

const ROLE_INIT: u64 = 0;
const ROLE_AGENT_INIT: u64 = 1;
const ROLE_AGENT_ACT: u64 = 2;
const ROLE_ENV_STEP: u64 = 3;

/// Snapshot interval of [`CompactTrace`].
pub const SNAPSHOT_EVERY: u32 = 8;

/// An agent placed in control of one entity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub entity: String,
    pub agent: AgentSpec,
}

/// An environment together with the agents acting in it. Agents act in
/// cast order; later agents see the actions committed earlier in the
/// same step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct System {
    pub env: EnvSpec,
    pub cast: Vec<Binding>,
}

impl System {
    /// A single agent controlling the environment's only entity.
    pub fn solo(env: EnvSpec, agent: AgentSpec) -> Self {
        System { env, cast: vec![Binding { entity: AGENT.to_string(), agent }] }
    }

    pub fn new(env: EnvSpec, cast: Vec<Binding>) -> Self {
        System { env, cast }
    }

    /// Checks that every agent belongs to the environment and controls an
    /// existing entity.
    pub fn validate(&self) -> Result<()> {
        let world = env_init(&self.env, &Seed::new(0))?;
        if self.cast.is_empty() {
            return Err(Error::Config("system needs at least one agent".into()));
        }
        for b in &self.cast {
            if b.agent.id.env() != self.env.id {
                return Err(Error::Config(format!("agent `{}` does not run in `{}`", b.agent.id, self.env.id)));
            }
            if !world.entities.contains_key(&b.entity) {
                return Err(Error::UnknownEntity(b.entity.clone()));
            }
        }
        Ok(())
    }

    fn binding(&self, entity: Option<&str>) -> Result<usize> {
        match entity {
            None => Ok(0),
            Some(e) => self
                .cast
                .iter()
                .position(|b| b.entity == e)
                .ok_or_else(|| Error::IllegalIntervention(format!("no agent controls entity `{e}`"))),
        }
    }
}

/// One agent's part of a step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    /// Memory after processing this step's observation.
    pub memory: MemoryState,
    pub observation: Observation,
    /// Executed action; absent on the terminal step.
    pub action: Option<Action>,
}

/// The state of the whole system at one time index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u32,
    pub world: WorldState,
    pub agents: BTreeMap<String, AgentStep>,
}

impl StepRecord {
    fn actions(&self) -> BTreeMap<String, Action> {
        self.agents.iter().filter_map(|(e, s)| s.action.map(|a| (e.clone(), a))).collect()
    }
}

/// What an intervention changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InterventionKind {
    /// Replaces the seed for this step and every later one.
    Reseed { seed: Seed },
    /// Edits the world before the agents observe it.
    WorldEdit { path: String, value: Value },
    /// Overwrites a memory slot carried into this step.
    AgentEdit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        entity: Option<String>,
        slot: String,
        value: String,
    },
    /// Replaces the action executed at this step.
    ForceAction {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        entity: Option<String>,
        action: Action,
    },
}

/// An intervention applied at a time index (1-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionSpec {
    pub time: u32,
    #[serde(flatten)]
    pub kind: InterventionKind,
}

impl InterventionSpec {
    pub fn new(time: u32, kind: InterventionKind) -> Self {
        InterventionSpec { time, kind }
    }

    pub fn world_edit(time: u32, path: impl Into<String>, value: Value) -> Self {
        Self::new(time, InterventionKind::WorldEdit { path: path.into(), value })
    }

    pub fn reseed(time: u32, seed: impl Into<Seed>) -> Self {
        Self::new(time, InterventionKind::Reseed { seed: seed.into() })
    }
}

/// Where a branched trace came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lineage {
    pub trace: String,
    pub branch_time: u32,
    pub intervention: InterventionSpec,
}

/// A recorded episode, or a prefix of one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub id: String,
    pub system: System,
    pub seed: Seed,
    pub interventions: Vec<InterventionSpec>,
    pub parent: Option<Lineage>,
    pub steps: Vec<StepRecord>,
}

impl Trace {
    pub fn len(&self) -> u32 {
        self.steps.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> &StepRecord {
        self.steps.last().expect("traces have at least one step")
    }

    /// True when the episode ended within the recorded steps.
    pub fn terminated(&self) -> bool {
        self.last().world.terminated
    }

    pub fn step(&self, t: u32) -> Result<&StepRecord> {
        if t == 0 || t > self.len() {
            return Err(Error::TimeOutOfRange { time: t, len: self.len() });
        }
        Ok(&self.steps[t as usize - 1])
    }
}

fn recipe_id(system: &System, seed: &Seed, interventions: &[InterventionSpec]) -> Result<String> {
    content_hash(&(system, seed, interventions), 16)
}

fn seed_at(root: &Seed, interventions: &[InterventionSpec], t: u32) -> Seed {
    interventions
        .iter()
        .filter(|i| i.time <= t)
        .filter_map(|i| match &i.kind {
            InterventionKind::Reseed { seed } => Some(seed.clone()),
            _ => None,
        })
        .next_back()
        .unwrap_or_else(|| root.clone())
}

struct Runner<'a> {
    system: &'a System,
    seed: &'a Seed,
    interventions: &'a [InterventionSpec],
}

impl Runner<'_> {
    fn at(&self, t: u32) -> impl Iterator<Item = &InterventionSpec> {
        self.interventions.iter().filter(move |i| i.time == t)
    }

    fn initial(&self) -> Result<(WorldState, Vec<MemoryState>)> {
        let base = seed_at(self.seed, self.interventions, 1);
        let world = env_init(&self.system.env, &base.derive(ROLE_INIT))?;
        let memories = self
            .system
            .cast
            .iter()
            .enumerate()
            .map(|(i, b)| agent_init(&b.agent, &base.derive_path(&[ROLE_AGENT_INIT, i as u64])))
            .collect::<Result<_>>()?;
        Ok((world, memories))
    }

    /// Produces the record of step `t` from the world and memories carried
    /// into it.
    fn step(&self, t: u32, mut world: WorldState, mut memories: Vec<MemoryState>) -> Result<StepRecord> {
        let base = seed_at(self.seed, self.interventions, t);
        let mut forced: BTreeMap<usize, Action> = BTreeMap::new();
        for iv in self.at(t) {
            match &iv.kind {
                InterventionKind::Reseed { .. } => {}
                InterventionKind::WorldEdit { path, value } => world = apply_edit(&world, path, value)?,
                InterventionKind::AgentEdit { entity, slot, value } => {
                    let i = self.system.binding(entity.as_deref())?;
                    let slot_ref = memories[i]
                        .slots
                        .get_mut(slot)
                        .ok_or_else(|| Error::IllegalIntervention(format!("agent has no memory slot `{slot}`")))?;
                    *slot_ref = value.clone();
                }
                InterventionKind::ForceAction { entity, action } => {
                    forced.insert(self.system.binding(entity.as_deref())?, *action);
                }
            }
        }
        let mut agents = BTreeMap::new();
        let mut committed = BTreeMap::new();
        for (i, b) in self.system.cast.iter().enumerate() {
            let mut obs = observe(&world, &b.entity)?;
            if world.terminated {
                agents.insert(b.entity.clone(), AgentStep { memory: memories[i].clone(), observation: obs, action: None });
                continue;
            }
            obs.peer_actions = committed.clone();
            let seed = base.derive_path(&[ROLE_AGENT_ACT, t as u64, i as u64]);
            let (memory, intended) = agent_act(&b.agent, &memories[i], &obs, &seed)?;
            let action = forced.get(&i).copied().unwrap_or(intended);
            committed.insert(b.entity.clone(), action);
            agents.insert(b.entity.clone(), AgentStep { memory, observation: obs, action: Some(action) });
        }
        Ok(StepRecord { t, world, agents })
    }

    fn successor(&self, record: &StepRecord) -> Result<(WorldState, Vec<MemoryState>)> {
        let base = seed_at(self.seed, self.interventions, record.t);
        let world = step_joint(&record.world, &record.actions(), &base.derive_path(&[ROLE_ENV_STEP, record.t as u64]))?;
        let memories = self.system.cast.iter().map(|b| record.agents[&b.entity].memory.clone()).collect();
        Ok((world, memories))
    }

    /// Extends `steps` in place until `horizon` steps exist or the episode
    /// ends.
    fn run(&self, steps: &mut Vec<StepRecord>, horizon: u32) -> Result<()> {
        while (steps.len() as u32) < horizon {
            let (world, memories) = match steps.last() {
                None => self.initial()?,
                Some(last) if last.world.terminated => break,
                Some(last) => self.successor(last)?,
            };
            let t = steps.len() as u32 + 1;
            steps.push(self.step(t, world, memories)?);
        }
        Ok(())
    }
}

fn build(system: &System, seed: &Seed, interventions: Vec<InterventionSpec>, parent: Option<Lineage>, mut steps: Vec<StepRecord>, horizon: u32) -> Result<Trace> {
    let runner = Runner { system, seed, interventions: &interventions };
    runner.run(&mut steps, horizon.max(1))?;
    Ok(Trace { id: recipe_id(system, seed, &interventions)?, system: system.clone(), seed: seed.clone(), interventions, parent, steps })
}

/// Simulates `horizon` steps, or fewer if the episode terminates.
pub fn rollout(system: &System, seed: &Seed, horizon: u32) -> Result<Trace> {
    build(system, seed, Vec::new(), None, Vec::new(), horizon)
}

/// Simulates with a fixed set of interventions from the start.
pub fn rollout_with(system: &System, seed: &Seed, interventions: Vec<InterventionSpec>, horizon: u32) -> Result<Trace> {
    build(system, seed, interventions, None, Vec::new(), horizon)
}

/// Rewinds or continues a trace to `horizon` steps. Terminated traces are
/// never continued past their terminal step.
pub fn extend(trace: &Trace, horizon: u32) -> Result<Trace> {
    let horizon = horizon.max(1);
    let mut out = trace.clone();
    if horizon <= trace.len() {
        out.steps.truncate(horizon as usize);
        return Ok(out);
    }
    let runner = Runner { system: &trace.system, seed: &trace.seed, interventions: &trace.interventions };
    runner.run(&mut out.steps, horizon)?;
    Ok(out)
}

/// Branches `trace` at `spec.time`: keeps the steps before it, applies the
/// intervention, and regenerates the suffix up to the parent's length.
pub fn intervene(trace: &Trace, spec: InterventionSpec) -> Result<Trace> {
    if spec.time == 0 || spec.time > trace.len() {
        return Err(Error::TimeOutOfRange { time: spec.time, len: trace.len() });
    }
    if let InterventionKind::WorldEdit { path, value } = &spec.kind {
        let world = &trace.step(spec.time)?.world;
        apply_edit(world, path, value)?;
    }
    let mut interventions: Vec<_> = trace.interventions.iter().filter(|i| i.time <= spec.time).cloned().collect();
    interventions.push(spec.clone());
    let prefix = trace.steps[..spec.time as usize - 1].to_vec();
    let parent = Some(Lineage { trace: trace.id.clone(), branch_time: spec.time, intervention: spec });
    build(&trace.system, &trace.seed, interventions, parent, prefix, trace.len())
}

/// Re-simulates a trace from its recipe, ignoring its cached steps.
pub fn replay(trace: &Trace) -> Result<Trace> {
    let mut out = build(&trace.system, &trace.seed, trace.interventions.clone(), trace.parent.clone(), Vec::new(), trace.len())?;
    out.steps.truncate(trace.steps.len());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentId;
    use crate::gridworld::{EnvId, Outcome, Pos};
    use serde_json::json;

    fn system(agent: AgentId) -> System {
        System::solo(EnvSpec::new(agent.env()), AgentSpec::new(agent))
    }

    #[test]
    fn rollout_is_deterministic() {
        let s = system(AgentId::PickUpB);
        assert_eq!(rollout(&s, &Seed::new(4), 100).unwrap(), rollout(&s, &Seed::new(4), 100).unwrap());
    }

    #[test]
    fn single_step_trace() {
        let t = rollout(&system(AgentId::GrassSandA), &Seed::new(1), 1).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.steps[0].t, 1);
        assert!(t.steps[0].agents[AGENT].action.is_some());
    }

    #[test]
    fn grass_sand_a_ends_on_the_floor_side() {
        for s in 0..20 {
            let t = rollout(&system(AgentId::GrassSandA), &Seed::new(s), 200).unwrap();
            let world = &t.last().world;
            let grass = t.steps[0].world.ground == crate::gridworld::TileKind::Grass;
            let end = world.entities[AGENT];
            assert!(t.terminated());
            assert_eq!(end.col < 4, grass, "seed {s}");
        }
    }

    #[test]
    fn extend_round_trips() {
        let t = rollout(&system(AgentId::PickUpB), &Seed::new(2), 300).unwrap();
        assert_eq!(extend(&t, t.len()).unwrap(), t);
        assert_eq!(extend(&extend(&t, 2).unwrap(), t.len()).unwrap(), t);
        let longer = extend(&t, t.len() + 10).unwrap();
        assert!(t.terminated());
        assert_eq!(longer, t);
    }

    #[test]
    fn push_at_step_three_misleads_the_wall_follower() {
        for s in 0..10 {
            let t = rollout(&system(AgentId::FloorMemoryB), &Seed::new(s), 100).unwrap();
            let p = t.step(3).unwrap().world.entities[AGENT];
            let pushed = Pos::new(p.row, 8 - p.col);
            let b = intervene(&t, InterventionSpec::world_edit(3, "entities.agent", json!([pushed.row, pushed.col]))).unwrap();
            assert_eq!(b.steps[..2], t.steps[..2]);
            let reward = |tr: &Trace| matches!(tr.last().world.outcome, Some(Outcome::Reward { .. }));
            if reward(&t) {
                assert!(!reward(&b), "seed {s}");
            }
            assert_eq!(b.parent.as_ref().unwrap().trace, t.id);
        }
    }

    #[test]
    fn identity_edit_keeps_suffix() {
        let t = rollout(&system(AgentId::KeyDoorA), &Seed::new(8), 60).unwrap();
        let p = t.step(2).unwrap().world.entities[AGENT];
        let b = intervene(&t, InterventionSpec::world_edit(2, "entities.agent", json!([p.row, p.col]))).unwrap();
        assert_eq!(b.steps, t.steps);
        assert_ne!(b.id, t.id);
    }

    #[test]
    fn reseed_at_one_samples_a_fresh_trajectory() {
        let s = system(AgentId::PickUpA);
        let t = rollout(&s, &Seed::new(1), 50).unwrap();
        let b = intervene(&t, InterventionSpec::reseed(1, 99)).unwrap();
        let fresh = rollout(&s, &Seed::new(99), 50).unwrap();
        assert_eq!(b.steps, fresh.steps);
    }

    #[test]
    fn illegal_interventions() {
        let t = rollout(&system(AgentId::PickUpA), &Seed::new(1), 3).unwrap();
        assert!(matches!(
            intervene(&t, InterventionSpec::world_edit(9, "entities.agent", json!([1, 1]))),
            Err(Error::TimeOutOfRange { .. })
        ));
        assert!(matches!(
            intervene(&t, InterventionSpec::world_edit(1, "entities.agent", json!([0, 0]))),
            Err(Error::IllegalIntervention(_))
        ));
        let edit = InterventionKind::AgentEdit { entity: None, slot: "cue".into(), value: "sand".into() };
        assert!(matches!(intervene(&t, InterventionSpec::new(1, edit)), Err(Error::IllegalIntervention(_))));
    }

    #[test]
    fn agent_edit_rewrites_memory() {
        let s = system(AgentId::FloorMemoryA);
        let seed = (0..).map(Seed::new).find(|sd| rollout(&s, sd, 1).unwrap().steps[0].world.draws["cue"] == "g").unwrap();
        let t = rollout(&s, &seed, 50).unwrap();
        let edit = InterventionKind::AgentEdit { entity: None, slot: "cue".into(), value: "sand".into() };
        let b = intervene(&t, InterventionSpec::new(4, edit)).unwrap();
        assert_eq!(b.step(4).unwrap().agents[AGENT].memory.slots["cue"], "sand");
        assert!(b.last().world.entities[AGENT].col > 4);
    }

    #[test]
    fn force_action_is_recorded() {
        let t = rollout(&system(AgentId::PickUpA), &Seed::new(5), 20).unwrap();
        let f = InterventionKind::ForceAction { entity: None, action: Action::NoOp };
        let b = intervene(&t, InterventionSpec::new(1, f)).unwrap();
        assert_eq!(b.steps[0].agents[AGENT].action, Some(Action::NoOp));
        assert_eq!(b.steps[1].world.entities, t.steps[0].world.entities);
    }

    #[test]
    fn mimic_imitator_sees_leader_action() {
        let s = System::new(
            EnvSpec::new(EnvId::Mimic),
            vec![
                Binding { entity: "blue".into(), agent: AgentSpec::new(AgentId::MimicLeader) },
                Binding { entity: "red".into(), agent: AgentSpec::new(AgentId::MimicImitator) },
            ],
        );
        s.validate().unwrap();
        let t = rollout(&s, &Seed::new(3), 1).unwrap();
        let step = &t.steps[0];
        assert_eq!(step.agents["red"].observation.peer_actions["blue"], step.agents["blue"].action.unwrap());
    }

    #[test]
    fn replay_reconstructs_branches() {
        let t = rollout(&system(AgentId::KeyDoorB), &Seed::new(11), 80).unwrap();
        let b = intervene(&t, InterventionSpec::world_edit(2, "tiles.3.6", json!("gate:open"))).unwrap();
        assert_eq!(replay(&b).unwrap(), b);
    }
}
