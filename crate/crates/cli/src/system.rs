use agent_causal::agents::AgentSpec;
use agent_causal::error::{Error, Result};
use agent_causal::gridworld::{env_init, EnvSpec};
use agent_causal::seed::Seed;
use agent_causal::sim::{Binding, System};

/// Builds a system from an environment id and agent bindings. A binding is
/// either `entity=agent-id` or a bare agent id; bare ids take the
/// environment's entities in order.
pub fn build_system(env: &str, agents: &[String]) -> Result<System> {
    let env = EnvSpec::parse(env)?;
    if agents.is_empty() {
        return Err(Error::Config("at least one agent is required".into()));
    }
    let entities: Vec<String> = env_init(&env, &Seed::new(0))?.entities.keys().cloned().collect();
    let mut cast = Vec::new();
    for (i, binding) in agents.iter().enumerate() {
        let (entity, agent) = match binding.split_once('=') {
            Some((e, a)) => (e.to_string(), a),
            None => {
                let e = entities.get(i).ok_or_else(|| Error::Config(format!("no entity left for agent `{binding}`")))?;
                (e.clone(), binding.as_str())
            }
        };
        cast.push(Binding { entity, agent: AgentSpec::parse(agent)? });
    }
    let system = System::new(env, cast);
    system.validate()?;
    Ok(system)
}
