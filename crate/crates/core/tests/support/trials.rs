//! Randomized branching trials for the simulator.

use agent_causal::agents::{AgentId, AgentSpec};
use agent_causal::gridworld::{Action, EnvId, EnvSpec, BLUE, RED};
use agent_causal::seed::Seed;
use agent_causal::sim::{extend, intervene, read_trace, replay, rollout, rollout_with, write_trace, Binding, CompactTrace, InterventionKind, InterventionSpec, System, Trace};
use serde_json::json;

pub fn systems() -> Vec<System> {
    let mut out: Vec<System> = AgentId::ALL
        .iter()
        .filter(|id| id.env() != EnvId::Mimic)
        .map(|&id| System::solo(EnvSpec::new(id.env()), AgentSpec::new(id)))
        .collect();
    out.push(System::new(
        EnvSpec::new(EnvId::Mimic),
        vec![
            Binding { entity: BLUE.into(), agent: AgentSpec::new(AgentId::MimicLeader) },
            Binding { entity: RED.into(), agent: AgentSpec::new(AgentId::MimicImitator) },
        ],
    ));
    out
}

pub fn bytes(trace: &Trace) -> Vec<u8> {
    let mut out = Vec::new();
    write_trace(trace, &mut out).unwrap();
    out
}

/// Builds a valid intervention at `time` from raw random numbers.
pub fn make_intervention(trace: &Trace, time: u32, kind: u8, pick: u64) -> InterventionSpec {
    let step = trace.step(time).unwrap();
    let entity = trace.system.cast[pick as usize % trace.system.cast.len()].entity.clone();
    match kind % 4 {
        0 => InterventionSpec::reseed(time, pick),
        1 => {
            let world = &step.world;
            let free: Vec<_> = world
                .grid
                .positions()
                .filter(|&p| world.grid.get(p).is_standable() && !world.entities.values().any(|&q| q == p))
                .collect();
            match free.get(pick as usize % free.len().max(1)) {
                Some(p) => InterventionSpec::world_edit(time, format!("entities.{entity}"), json!([p.row, p.col])),
                None => InterventionSpec::reseed(time, pick),
            }
        }
        2 => {
            // Memory carried into `time` is the memory recorded at `time - 1`.
            let slots = match time {
                1 => None,
                _ => trace.step(time - 1).unwrap().agents.get(&entity).map(|a| a.memory.slots.clone()),
            };
            match slots.and_then(|s| s.keys().nth(pick as usize % s.len().max(1)).cloned()) {
                Some(slot) => InterventionSpec::new(time, InterventionKind::AgentEdit { entity: Some(entity), slot, value: "l".into() }),
                None => InterventionSpec::reseed(time, pick),
            }
        }
        _ => {
            let action = Action::MOVES[pick as usize % Action::MOVES.len()];
            InterventionSpec::new(time, InterventionKind::ForceAction { entity: Some(entity), action })
        }
    }
}

/// Raw random inputs of one branching trial.
#[derive(Clone, Copy, Debug)]
pub struct TrialInput {
    pub system: usize,
    pub seed: u64,
    pub horizon: u32,
    /// Branch point as a fraction of the trace length, in `[0, 1)`.
    pub frac: f64,
    pub kind: u8,
    pub pick: u64,
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Replay, branch-prefix, recipe, rewind-replay and storage invariants of
/// one randomized branch.
pub fn check_trial(input: TrialInput) -> Result<(), String> {
    let err = |e: agent_causal::error::Error| e.to_string();
    let systems = systems();
    let system = &systems[input.system % systems.len()];
    let seed = Seed::new(input.seed);
    let trace = rollout(system, &seed, input.horizon).map_err(err)?;

    ensure!(bytes(&replay(&trace).map_err(err)?) == bytes(&trace), "replay differs: {input:?}");

    let time = 1 + ((trace.len() - 1) as f64 * input.frac) as u32;
    let spec = make_intervention(&trace, time, input.kind, input.pick);
    let branch = intervene(&trace, spec).map_err(err)?;
    ensure!(branch.steps[..time as usize - 1] == trace.steps[..time as usize - 1], "prefix changed: {input:?}");
    ensure!(branch.parent.as_ref().map(|p| &p.trace) == Some(&trace.id), "lineage lost: {input:?}");

    let direct = rollout_with(system, &seed, branch.interventions.clone(), trace.len()).map_err(err)?;
    ensure!(direct.steps == branch.steps, "branch is not a function of its recipe: {input:?}");
    ensure!(bytes(&replay(&branch).map_err(err)?) == bytes(&branch), "branch replay differs: {input:?}");

    let rewound = extend(&branch, time).map_err(err)?;
    ensure!(rewound.steps[..] == branch.steps[..rewound.steps.len()], "rewind is not a prefix: {input:?}");
    let rerun = extend(&rewound, branch.len()).map_err(err)?;
    ensure!(rerun.steps == branch.steps, "rewind-replay differs: {input:?}");

    ensure!(read_trace(&bytes(&branch)[..]).map_err(err)? == branch, "storage round trip differs: {input:?}");
    ensure!(CompactTrace::compress(&branch).expand().map_err(err)? == branch, "compact round trip differs: {input:?}");
    Ok(())
}
