//! The packaged experiments, one per environment.

use crate::agents::{AgentId, AgentSpec};
use crate::engine::{Query, Variable};
use crate::error::{Error, Result};
use crate::estimation::{EditTemplate, FeatureExtractor, FeatureRule, RegimeTemplate, Subject};
use crate::gridworld::{EnvId, EnvSpec, Item, Quadrant, TileKind, BLUE, RED};
use crate::sim::{Binding, System};

use super::{ColumnSpec, ExperimentSpec, ModelSpec, NodeSpec, RowQuery, RowSpec, StructureSpec, DEFAULT_ROLLOUTS};

const NAMES: [&str; 6] = ["grass-sand", "floor-memory", "pick-up", "gated-room", "mimic", "key-door"];

/// Names of the packaged experiments.
pub fn builtin_names() -> &'static [&'static str] {
    &NAMES
}

/// The packaged experiment with the given name.
pub fn builtin(name: &str) -> Result<ExperimentSpec> {
    match name {
        "grass-sand" => Ok(grass_sand()),
        "floor-memory" => Ok(floor_memory()),
        "pick-up" => Ok(pick_up()),
        "gated-room" => Ok(gated_room()),
        "mimic" => Ok(mimic()),
        "key-door" => Ok(key_door()),
        _ => Err(Error::UnknownExperiment(name.to_string())),
    }
}

fn solo(env: EnvId, label: &str, agent: AgentId) -> ColumnSpec {
    ColumnSpec { label: label.into(), subjects: vec![Subject::new(System::solo(EnvSpec::new(env), AgentSpec::new(agent)))] }
}

fn row(label: &str, query: Query) -> RowSpec {
    RowSpec { label: label.into(), query: RowQuery::Query(query) }
}

fn single(nodes: Vec<NodeSpec>) -> ModelSpec {
    ModelSpec::Single { structure: StructureSpec { nodes } }
}

fn spec(name: &str, env: EnvId, columns: Vec<ColumnSpec>) -> ExperimentSpec {
    ExperimentSpec {
        name: name.into(),
        env: EnvSpec::new(env),
        columns,
        rollouts_per_regime: DEFAULT_ROLLOUTS,
        horizon: None,
        prior: crate::estimation::FLAT_PRIOR,
        regimes: vec![RegimeTemplate::observational()],
        extractors: Vec::new(),
        model: single(Vec::new()),
        rows: Vec::new(),
        observed: None,
    }
}

fn grass_sand() -> ExperimentSpec {
    let env = EnvId::GrassSand;
    let mut s = spec("grass-sand", env, vec![solo(env, "A", AgentId::GrassSandA), solo(env, "B", AgentId::GrassSandB)]);
    s.extractors = vec![
        FeatureExtractor::new("C", &["gl", "sr"], FeatureRule::InitDraw { name: "config".into() }),
        FeatureExtractor::new("F", &["g", "s"], FeatureRule::FloorKind),
        FeatureExtractor::new("R", &["l", "r"], FeatureRule::PillSide),
        FeatureExtractor::new("T", &["l", "r"], FeatureRule::TerminalSide),
    ];
    for side in ["l", "r"] {
        s.regimes.push(RegimeTemplate::new(&format!("do-R-{side}"), &[("R", side)], 1, vec![EditTemplate::PlacePill { side: side.into() }]));
    }
    for (v, tile) in [("g", TileKind::Grass), ("s", TileKind::Sand)] {
        s.regimes.push(RegimeTemplate::new(&format!("do-F-{v}"), &[("F", v)], 1, vec![EditTemplate::SetFloor { tile }]));
    }
    s.model = single(vec![
        NodeSpec::prior("C", &[0.5, 0.5], true),
        NodeSpec::estimate("F", &["C"]),
        NodeSpec::estimate("R", &["C"]),
        NodeSpec::estimate("T", &["F", "R"]),
    ]);
    s.rows = vec![
        row("P(T=l|R=l)", Query::assoc(&[("T", "l")], &[("R", "l")])),
        row("P(T=r|R=r)", Query::assoc(&[("T", "r")], &[("R", "r")])),
        row("P(T=l|do(R=l))", Query::interventional(&[("T", "l")], &[("R", "l")], &[])),
        row("P(T=r|do(R=r))", Query::interventional(&[("T", "r")], &[("R", "r")], &[])),
        row("P(T=l|do(F=g))", Query::interventional(&[("T", "l")], &[("F", "g")], &[])),
        row("P(T=r|do(F=s))", Query::interventional(&[("T", "r")], &[("F", "s")], &[])),
    ];
    s
}

/// Step at which the floor-memory agent has left the cue tile and is
/// walking up the corridor.
const PUSH_STEP: u32 = 3;

fn floor_memory() -> ExperimentSpec {
    let env = EnvId::FloorMemory;
    let mut s = spec("floor-memory", env, vec![solo(env, "a", AgentId::FloorMemoryA), solo(env, "b", AgentId::FloorMemoryB)]);
    s.extractors = vec![
        FeatureExtractor::new("F", &["g", "s"], FeatureRule::CueKind),
        FeatureExtractor::new("P", &["l", "r"], FeatureRule::SideAt { entity: None, step: PUSH_STEP }),
        FeatureExtractor::new("T", &["l", "r"], FeatureRule::TerminalSide),
    ];
    for side in ["l", "r"] {
        s.regimes.push(RegimeTemplate::new(
            &format!("push-{side}"),
            &[("P", side)],
            PUSH_STEP,
            vec![EditTemplate::EntityToSide { entity: None, side: side.into() }],
        ));
    }
    s.model = single(vec![NodeSpec::estimate("F", &[]), NodeSpec::estimate("P", &["F"]), NodeSpec::estimate("T", &["F", "P"])]);
    s.rows = vec![
        row("P(T=l|F=g)", Query::assoc(&[("T", "l")], &[("F", "g")])),
        row("P(T=r|F=s)", Query::assoc(&[("T", "r")], &[("F", "s")])),
        row("P(P=l|F=g)", Query::assoc(&[("P", "l")], &[("F", "g")])),
        row("P(P=r|F=s)", Query::assoc(&[("P", "r")], &[("F", "s")])),
        row("P(T=l|do(P=r),F=g)", Query::interventional(&[("T", "l")], &[("P", "r")], &[("F", "g")])),
        row("P(T=r|do(P=l),F=s)", Query::interventional(&[("T", "r")], &[("P", "l")], &[("F", "s")])),
    ];
    s
}

fn pick_up() -> ExperimentSpec {
    let env = EnvId::PickUp;
    let mut s = spec("pick-up", env, vec![solo(env, "A", AgentId::PickUpA), solo(env, "B", AgentId::PickUpB)]);
    s.extractors = vec![
        FeatureExtractor::new("G", &["n", "e", "w", "s"], FeatureRule::PillQuadrant),
        FeatureExtractor::new("R", &["0", "1"], FeatureRule::RewardCollected),
    ];
    for q in Quadrant::ALL {
        let v = q.symbol();
        s.regimes.push(RegimeTemplate::new(&format!("do-G-{v}"), &[("G", v)], 1, vec![EditTemplate::PillToQuadrant { quadrant: q }]));
    }
    s.model = single(vec![NodeSpec::estimate("G", &[]), NodeSpec::estimate("R", &["G"])]);
    s.rows = vec![row("P(R=1)", Query::assoc(&[("R", "1")], &[]))];
    for q in Quadrant::ALL {
        let v = q.symbol();
        s.rows.push(row(&format!("P(R=1|do(G={v}))"), Query::interventional(&[("R", "1")], &[("G", v)], &[])));
    }
    s
}

fn gated_room() -> ExperimentSpec {
    let env = EnvId::GatedRoom;
    let lover = |agent| Subject::new(System::solo(EnvSpec::new(env), AgentSpec::new(agent)));
    let column = ColumnSpec {
        label: "P".into(),
        subjects: vec![lover(AgentId::RedLover).tagged("A", "re"), lover(AgentId::GreenLover).tagged("A", "gr")],
    };
    let mut s = spec("gated-room", env, vec![column]);
    s.extractors = vec![
        FeatureExtractor::new("A", &["re", "gr"], FeatureRule::Tag { key: "A".into() }),
        FeatureExtractor::new("D", &["l", "r"], FeatureRule::OpenGate),
        FeatureExtractor::new("R", &["re", "gr"], FeatureRule::CollectedColor),
    ];
    s.model = single(vec![NodeSpec::prior("A", &[0.5, 0.5], true), NodeSpec::prior("D", &[0.5, 0.5], false), NodeSpec::estimate("R", &["A", "D"])]);
    s.rows = vec![
        row("P(R=re)", Query::assoc(&[("R", "re")], &[])),
        row("P(A=re|R=re)", Query::assoc(&[("A", "re")], &[("R", "re")])),
        row("P(A=re|D=l,R=re)", Query::assoc(&[("A", "re")], &[("D", "l"), ("R", "re")])),
        row("P(R_{D=r}=re|D=l,R=re)", Query::counterfactual(&[("R", "re")], &[("D", "r")], &[("D", "l"), ("R", "re")])),
        row("P(R_{D=r}=gr|D=l,R=gr)", Query::counterfactual(&[("R", "gr")], &[("D", "r")], &[("D", "l"), ("R", "gr")])),
    ];
    s.observed = Some(lover(AgentId::RedLover).tagged("A", "re"));
    s
}

fn mimic() -> ExperimentSpec {
    let env = EnvId::Mimic;
    let system = System::new(
        EnvSpec::new(env),
        vec![
            Binding { entity: BLUE.into(), agent: AgentSpec::new(AgentId::MimicLeader) },
            Binding { entity: RED.into(), agent: AgentSpec::new(AgentId::MimicImitator) },
        ],
    );
    let mut s = spec("mimic", env, vec![ColumnSpec { label: "P".into(), subjects: vec![Subject::new(system)] }]);
    s.horizon = Some(1);
    s.extractors = vec![
        FeatureExtractor::new("B", &["l", "r"], FeatureRule::MoveDirection { entity: BLUE.into(), step: 1 }),
        FeatureExtractor::new("R", &["l", "r"], FeatureRule::MoveDirection { entity: RED.into(), step: 1 }),
    ];
    s.model = ModelSpec::Hypotheses {
        variable: Variable::new("L", &["b", "r"]),
        prior: vec![0.5, 0.5],
        structures: vec![
            StructureSpec { nodes: vec![NodeSpec::estimate("B", &[]), NodeSpec::estimate("R", &["B"])] },
            StructureSpec { nodes: vec![NodeSpec::estimate("R", &[]), NodeSpec::estimate("B", &["R"])] },
        ],
    };
    s.rows = vec![
        row("P(L=b)", Query::hypothesis(&[("L", "b")], &[], &[])),
        row("P(L=b|R=l,B=l)", Query::hypothesis(&[("L", "b")], &[], &[("R", "l"), ("B", "l")])),
        row("P(L=b|R=l,B=r)", Query::hypothesis(&[("L", "b")], &[], &[("R", "l"), ("B", "r")])),
        row("P(L=b|do(R=l),B=l)", Query::hypothesis(&[("L", "b")], &[("R", "l")], &[("B", "l")])),
        row("P(L=b|do(R=l),B=r)", Query::hypothesis(&[("L", "b")], &[("R", "l")], &[("B", "r")])),
    ];
    s
}

fn key_door() -> ExperimentSpec {
    let env = EnvId::KeyDoor;
    let mut s = spec("key-door", env, vec![solo(env, "A", AgentId::KeyDoorA), solo(env, "B", AgentId::KeyDoorB)]);
    s.extractors = vec![
        FeatureExtractor::new("D", &["o", "c"], FeatureRule::DoorState),
        FeatureExtractor::new("K", &["y", "n"], FeatureRule::PickedUp { entity: None, item: Item::Key }),
        FeatureExtractor::new("R", &["0", "1"], FeatureRule::RewardCollected),
    ];
    for (v, tile) in [("o", TileKind::GateOpen), ("c", TileKind::GateClosed)] {
        s.regimes.push(RegimeTemplate::new(&format!("do-D-{v}"), &[("D", v)], 1, vec![EditTemplate::SetLandmark { landmark: "door".into(), tile }]));
    }
    s.regimes.push(RegimeTemplate::new("do-K-y", &[("K", "y")], 1, vec![EditTemplate::GiveItem { entity: None, item: Item::Key }]));
    s.regimes.push(RegimeTemplate::new("do-K-n", &[("K", "n")], 1, vec![EditTemplate::RemoveItem { item: Item::Key }]));
    s.model = single(vec![NodeSpec::estimate("D", &[]), NodeSpec::estimate("K", &["D"]), NodeSpec::estimate("R", &["D", "K"])]);
    s.rows = vec![
        row("P(R=1)", Query::assoc(&[("R", "1")], &[])),
        row("P(R=1|K=y)", Query::assoc(&[("R", "1")], &[("K", "y")])),
        row("P(R=1|K=n)", Query::assoc(&[("R", "1")], &[("K", "n")])),
        row("P(R=1|do(K=y))", Query::interventional(&[("R", "1")], &[("K", "y")], &[])),
        row("P(R=1|do(K=n))", Query::interventional(&[("R", "1")], &[("K", "n")], &[])),
        row("P(K=y|do(D=c))", Query::interventional(&[("K", "y")], &[("D", "c")], &[])),
        row("P(K=y|do(D=o))", Query::interventional(&[("K", "y")], &[("D", "o")], &[])),
        row("P(R=1|D=c)", Query::assoc(&[("R", "1")], &[("D", "c")])),
        row("P(R=1|D=o)", Query::assoc(&[("R", "1")], &[("D", "o")])),
        row("f(D=c)", Query::path_response(&["D", "K", "R"], "c", "1")),
        row("f(D=o)", Query::path_response(&["D", "K", "R"], "o", "1")),
        RowSpec { label: "f(D=c)-f(D=o)".into(), query: RowQuery::Difference { minuend: "f(D=c)".into(), subtrahend: "f(D=o)".into() } },
    ];
    s
}
