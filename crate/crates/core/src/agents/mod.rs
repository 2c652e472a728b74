//! Scripted stock agents: the agent half of the perception-action loop.
//!
//! Each policy is a pure function of (memory, observation, seed). Two
//! independent streams are derived from the step seed: key 0 drives the
//! policy's own coin flips, key 1 drives the slip that occasionally
//! replaces the intended move by a uniformly random one.

mod policies;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::{Action, EnvId, Observation};
use crate::seed::Seed;

/// Identifier of a registered stock agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentId {
    GrassSandA,
    GrassSandB,
    FloorMemoryA,
    FloorMemoryB,
    PickUpA,
    PickUpB,
    RedLover,
    GreenLover,
    MimicLeader,
    MimicImitator,
    KeyDoorA,
    KeyDoorB,
}

impl AgentId {
    pub const ALL: [AgentId; 12] = [
        AgentId::GrassSandA,
        AgentId::GrassSandB,
        AgentId::FloorMemoryA,
        AgentId::FloorMemoryB,
        AgentId::PickUpA,
        AgentId::PickUpB,
        AgentId::RedLover,
        AgentId::GreenLover,
        AgentId::MimicLeader,
        AgentId::MimicImitator,
        AgentId::KeyDoorA,
        AgentId::KeyDoorB,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentId::GrassSandA => "grass-sand/A",
            AgentId::GrassSandB => "grass-sand/B",
            AgentId::FloorMemoryA => "floor-memory/a",
            AgentId::FloorMemoryB => "floor-memory/b",
            AgentId::PickUpA => "pick-up/A",
            AgentId::PickUpB => "pick-up/B",
            AgentId::RedLover => "gated-room/red-lover",
            AgentId::GreenLover => "gated-room/green-lover",
            AgentId::MimicLeader => "mimic/leader",
            AgentId::MimicImitator => "mimic/imitator",
            AgentId::KeyDoorA => "key-door/A",
            AgentId::KeyDoorB => "key-door/B",
        }
    }

    /// Environment the agent was built for.
    pub fn env(self) -> EnvId {
        match self {
            AgentId::GrassSandA | AgentId::GrassSandB => EnvId::GrassSand,
            AgentId::FloorMemoryA | AgentId::FloorMemoryB => EnvId::FloorMemory,
            AgentId::PickUpA | AgentId::PickUpB => EnvId::PickUp,
            AgentId::RedLover | AgentId::GreenLover => EnvId::GatedRoom,
            AgentId::MimicLeader | AgentId::MimicImitator => EnvId::Mimic,
            AgentId::KeyDoorA | AgentId::KeyDoorB => EnvId::KeyDoor,
        }
    }

    pub fn default_noise(self) -> NoiseParams {
        match self {
            AgentId::MimicLeader | AgentId::MimicImitator => NoiseParams { slip: 0.0, match_rate: 0.9 },
            _ => NoiseParams { slip: 0.005, match_rate: 0.9 },
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentId::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::UnknownAgent(s.to_string()))
    }
}

impl Serialize for AgentId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for AgentId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Stochasticity knobs of a stock agent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Per-step probability of replacing the intended move by a random one.
    pub slip: f64,
    /// Imitator only: probability of copying the peer's action. Otherwise
    /// the opposite action is taken.
    pub match_rate: f64,
}

/// Agent selection plus optional noise overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: AgentId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseParams>,
}

impl AgentSpec {
    pub fn new(id: AgentId) -> Self {
        AgentSpec { id, noise: None }
    }

    pub fn parse(id: &str) -> Result<Self> {
        Ok(AgentSpec::new(id.parse()?))
    }

    pub fn noise(&self) -> NoiseParams {
        self.noise.unwrap_or_else(|| self.id.default_noise())
    }
}

impl From<AgentId> for AgentSpec {
    fn from(id: AgentId) -> Self {
        AgentSpec::new(id)
    }
}

/// Internal state carried between steps.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemoryState {
    pub slots: BTreeMap<String, String>,
    pub phase: u32,
}

/// Initial memory of an agent.
pub fn agent_init(spec: &AgentSpec, _seed: &Seed) -> Result<MemoryState> {
    let mut memory = MemoryState::default();
    if spec.id == AgentId::FloorMemoryA {
        memory.slots.insert(policies::CUE_SLOT.to_string(), "none".to_string());
    }
    Ok(memory)
}

/// One decision: updates memory from the observation and picks an action.
pub fn agent_act(spec: &AgentSpec, memory: &MemoryState, obs: &Observation, seed: &Seed) -> Result<(MemoryState, Action)> {
    let noise = spec.noise();
    let mut policy_rng = seed.derive(0).rng();
    let (memory, intended) = policies::decide(spec.id, &noise, memory, obs, &mut policy_rng)?;
    let mut slip_rng = seed.derive(1).rng();
    let action = if noise.slip > 0.0 && slip_rng.gen_bool(noise.slip.min(1.0)) {
        Action::MOVES[slip_rng.gen_range(0..Action::MOVES.len())]
    } else {
        intended
    };
    Ok((memory, action))
}
