//! Session service: a transport-independent request dispatcher over
//! sessions, trace forests, rollout trees and models, with an append-only
//! request log for replay.
//!
//! Every state-changing request runs under one writer lock, so ids are
//! assigned in log order and replaying the log on a fresh service rebuilds
//! the same state. Reads and queries work on cloned snapshots.

mod http;

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use agent_causal::engine::{answer, Model, Query};
use agent_causal::estimation::{collect, CollectConfig, FeatureExtractor, RegimeTemplate, RolloutTree, Subject, FLAT_PRIOR};
use agent_causal::experiments::{builtin, builtin_names, model_from_tree, run_experiment, ModelSpec, DEFAULT_ROLLOUTS};
use agent_causal::gridworld::env_init;
use agent_causal::json::to_canonical_json;
use agent_causal::seed::Seed;
use agent_causal::sim::{extend, intervene, rollout, InterventionSpec, Lineage, System, Trace};

use crate::error::ApiError;
use crate::system::build_system;

pub use http::router;

/// Environment variable naming the directory that holds the request log.
pub const DATA_DIR_ENV: &str = "AGENT_CAUSAL_DATA";
/// File name of the request log inside the data directory.
pub const LOG_FILE: &str = "requests.jsonl";

/// A transport-independent request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub method: String,
    pub path: String,
    /// Client-supplied idempotency key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default)]
    pub body: Value,
}

impl Request {
    pub fn get(path: &str) -> Self {
        Request { method: "GET".into(), path: path.into(), key: None, body: Value::Null }
    }

    pub fn post(path: &str, body: Value) -> Self {
        Request { method: "POST".into(), path: path.into(), key: None, body }
    }

    pub fn with_key(mut self, key: &str) -> Self {
        self.key = Some(key.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Response {
    pub status: u16,
    pub body: Value,
}

impl Response {
    fn json(status: u16, body: impl Serialize) -> Result<Response, ApiError> {
        Ok(Response { status, body: serde_json::to_value(body).map_err(|e| ApiError::new(500, "internal", e.to_string()))? })
    }

    fn ok(body: impl Serialize) -> Result<Response, ApiError> {
        Self::json(200, body)
    }

    fn error(e: &ApiError) -> Response {
        Response { status: e.status, body: json!({ "code": e.code, "message": e.message }) }
    }
}

/// Summary of one trace in a session's forest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<Lineage>,
    pub len: u32,
    pub terminated: bool,
    pub interventions: Vec<InterventionSpec>,
}

impl TraceSummary {
    fn of(t: &Trace) -> Self {
        TraceSummary { id: t.id.clone(), parent: t.parent.clone(), len: t.len(), terminated: t.terminated(), interventions: t.interventions.clone() }
    }
}

struct Session {
    id: String,
    system: System,
    seed: u64,
    /// Position in the sequence of created sessions.
    created: u64,
    root: String,
    /// Traces in creation order.
    traces: Vec<Trace>,
    trees: Vec<String>,
    models: Vec<String>,
}

impl Session {
    fn trace(&self, id: &str) -> Result<&Trace, ApiError> {
        self.traces.iter().find(|t| t.id == id).ok_or_else(|| ApiError::not_found("trace", id))
    }

    fn summary(&self) -> Value {
        json!({
            "id": self.id,
            "system": self.system,
            "seed": self.seed,
            "created": self.created,
            "root": self.root,
            "traces": self.traces.iter().map(TraceSummary::of).collect::<Vec<_>>(),
            "trees": self.trees,
            "models": self.models,
        })
    }
}

#[derive(Clone, Debug)]
enum JobStatus {
    Running,
    Done(Arc<RolloutTree>),
    Failed(ApiError),
}

struct TreeJob {
    session: String,
    status: Mutex<JobStatus>,
}

struct ModelEntry {
    session: String,
    model: Model,
}

#[derive(Default)]
struct Registry {
    sessions: BTreeMap<String, Arc<Mutex<Session>>>,
    trees: BTreeMap<String, Arc<TreeJob>>,
    models: BTreeMap<String, Arc<ModelEntry>>,
    next_session: u64,
    next_tree: u64,
    next_model: u64,
    /// Idempotency key to (request fingerprint, response).
    keys: BTreeMap<String, (String, Response)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    #[serde(default)]
    system: Option<System>,
    #[serde(default)]
    env: Option<String>,
    #[serde(default)]
    agent: Option<String>,
    #[serde(default)]
    agents: Vec<String>,
    #[serde(default)]
    seed: u64,
    /// Length of the root trace; the full step budget when absent.
    #[serde(default)]
    steps: Option<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtendBody {
    #[serde(alias = "T")]
    steps: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CollectBody {
    #[serde(default = "observational_only")]
    regimes: Vec<RegimeTemplate>,
    extractors: Vec<FeatureExtractor>,
    n: u64,
    /// Defaults to the session seed.
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    horizon: Option<u32>,
    #[serde(default = "flat_prior")]
    prior: f64,
    #[serde(default)]
    tags: BTreeMap<String, String>,
}

fn observational_only() -> Vec<RegimeTemplate> {
    vec![RegimeTemplate::observational()]
}

fn flat_prior() -> f64 {
    FLAT_PRIOR
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateModel {
    #[serde(default)]
    tree: Option<String>,
    #[serde(default)]
    spec: Option<ModelSpec>,
    #[serde(default)]
    model: Option<Model>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RunBody {
    #[serde(default)]
    rollouts: Option<u64>,
    #[serde(default)]
    seed: Option<u64>,
}

fn parse<T: serde::de::DeserializeOwned>(body: &Value) -> Result<T, ApiError> {
    let body = if body.is_null() { json!({}) } else { body.clone() };
    serde_json::from_value(body).map_err(|e| ApiError::schema(e.to_string()))
}

/// Seed used by experiment runs when the caller gives none, shared with
/// the command-line runner.
pub const DEFAULT_SEED: u64 = 0;

pub struct Service {
    registry: Mutex<Registry>,
    writer: Mutex<Option<File>>,
    /// Run collection jobs to completion before answering, as during log
    /// replay.
    synchronous_jobs: bool,
}

impl Default for Service {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl Service {
    /// A service without persistence.
    pub fn in_memory() -> Self {
        Service { registry: Mutex::default(), writer: Mutex::new(None), synchronous_jobs: false }
    }

    /// Opens the data directory, replays its request log, and appends new
    /// state-changing requests to it.
    pub fn open(dir: &Path) -> Result<Self, ApiError> {
        std::fs::create_dir_all(dir).map_err(|e| ApiError::new(500, "io", e.to_string()))?;
        let path = log_path(dir);
        let mut service = Service { synchronous_jobs: true, ..Self::in_memory() };
        if path.exists() {
            let file = File::open(&path).map_err(|e| ApiError::new(500, "io", e.to_string()))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| ApiError::new(500, "io", e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let request: Request = serde_json::from_str(&line)
                    .map_err(|e| ApiError::new(500, "corrupt-log", format!("line {}: {e}", i + 1)))?;
                let response = service.handle(request);
                if response.status >= 400 {
                    return Err(ApiError::new(500, "corrupt-log", format!("line {} no longer applies: {}", i + 1, response.body)));
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| ApiError::new(500, "io", e.to_string()))?;
        service.writer = Mutex::new(Some(file));
        service.synchronous_jobs = false;
        Ok(service)
    }

    /// Opens the directory named by [`DATA_DIR_ENV`], or an in-memory
    /// service when it is unset.
    pub fn from_env() -> Result<Self, ApiError> {
        match std::env::var_os(DATA_DIR_ENV) {
            Some(dir) => Self::open(&PathBuf::from(dir)),
            None => Ok(Self::in_memory()),
        }
    }

    fn registry(&self) -> MutexGuard<'_, Registry> {
        self.registry.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Handles one request. Never panics on bad input; failures come back
    /// as `{code, message}` bodies.
    pub fn handle(&self, request: Request) -> Response {
        match request.method.as_str() {
            "GET" => self.read(&request.path).unwrap_or_else(|e| Response::error(&e)),
            "POST" if is_pure(&request.path) => self.run_experiment(&request.path, &request.body).unwrap_or_else(|e| Response::error(&e)),
            "POST" => self.write(request),
            other => Response::error(&ApiError::new(405, "method-not-allowed", format!("method {other} is not supported"))),
        }
    }

    fn write(&self, request: Request) -> Response {
        let mut writer = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let fingerprint = format!("{} {} {}", request.method, request.path, to_canonical_json(&request.body).unwrap_or_default());
        if let Some(key) = &request.key {
            if let Some((seen, response)) = self.registry().keys.get(key) {
                if *seen == fingerprint {
                    return response.clone();
                }
                return Response::error(&ApiError::schema(format!("idempotency key `{key}` was used for a different request")));
            }
        }
        let response = match self.mutate(&request.path, &request.body) {
            Ok(r) => r,
            Err(e) => return Response::error(&e),
        };
        if let Some(key) = &request.key {
            self.registry().keys.insert(key.clone(), (fingerprint, response.clone()));
        }
        if let Some(file) = writer.as_mut() {
            let line = serde_json::to_string(&request).expect("requests serialize");
            if let Err(e) = writeln!(file, "{line}").and_then(|_| file.flush()) {
                return Response::error(&ApiError::new(500, "io", format!("request applied but not logged: {e}")));
            }
        }
        response
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.registry().sessions.get(id).cloned().ok_or_else(|| ApiError::not_found("session", id))
    }

    fn read(&self, path: &str) -> Result<Response, ApiError> {
        let parts = segments(path);
        match parts.as_slice() {
            ["health"] => Response::ok(json!({ "status": "ok" })),
            ["sessions"] => {
                let sessions: Vec<_> = self.registry().sessions.values().cloned().collect();
                Response::ok(sessions.iter().map(|s| lock(s).summary()).collect::<Vec<_>>())
            }
            ["sessions", sid] => Response::ok(lock(&*self.session(sid)?).summary()),
            ["sessions", sid, "traces"] => {
                let session = self.session(sid)?;
                let s = lock(&session);
                Response::ok(s.traces.iter().map(TraceSummary::of).collect::<Vec<_>>())
            }
            ["sessions", sid, "traces", tid] => {
                let session = self.session(sid)?;
                let trace = lock(&session).trace(tid)?.clone();
                Response::ok(trace)
            }
            ["trees", id] => {
                let job = self.registry().trees.get(*id).cloned().ok_or_else(|| ApiError::not_found("tree", id))?;
                let status = lock(&job.status).clone();
                let body = match status {
                    JobStatus::Running => json!({ "id": id, "session": job.session, "status": "running" }),
                    JobStatus::Done(tree) => json!({ "id": id, "session": job.session, "status": "done", "tree": *tree }),
                    JobStatus::Failed(e) => json!({ "id": id, "session": job.session, "status": "failed", "error": { "code": e.code, "message": e.message } }),
                };
                Response::ok(body)
            }
            ["models", id] => {
                let entry = self.registry().models.get(*id).cloned().ok_or_else(|| ApiError::not_found("model", id))?;
                Response::ok(json!({ "id": id, "session": entry.session, "model": entry.model }))
            }
            ["experiments"] => {
                let specs = builtin_names().iter().map(|n| builtin(n)).collect::<Result<Vec<_>, _>>()?;
                Response::ok(specs.iter().map(|s| json!({ "name": s.name, "spec": s })).collect::<Vec<_>>())
            }
            ["experiments", name] => Response::ok(builtin(name)?),
            _ => Err(ApiError::not_found("resource", path)),
        }
    }

    fn mutate(&self, path: &str, body: &Value) -> Result<Response, ApiError> {
        let parts = segments(path);
        match parts.as_slice() {
            ["sessions"] => self.create_session(parse(body)?),
            ["sessions", sid, "traces", tid, "extend"] => {
                let b: ExtendBody = parse(body)?;
                let session = self.session(sid)?;
                let mut s = lock(&session);
                let trace = extend(s.trace(tid)?, b.steps)?;
                let slot = s.traces.iter_mut().find(|t| t.id == trace.id).expect("extend keeps the id");
                *slot = trace.clone();
                Response::ok(trace)
            }
            ["sessions", sid, "traces", tid, "intervene"] => {
                let spec: InterventionSpec = parse(body)?;
                let session = self.session(sid)?;
                let mut s = lock(&session);
                let branch = intervene(s.trace(tid)?, spec)?;
                if let Ok(existing) = s.trace(&branch.id) {
                    return Response::ok(existing.clone());
                }
                s.traces.push(branch.clone());
                Response::ok(branch)
            }
            ["sessions", sid, "collect"] => self.start_collect(sid, parse(body)?),
            ["sessions", sid, "models"] => self.create_model(sid, parse(body)?),
            ["models", id, "query"] => {
                let query: Query = parse(body)?;
                let entry = self.registry().models.get(*id).cloned().ok_or_else(|| ApiError::not_found("model", id))?;
                Response::ok(answer(&entry.model, &query)?)
            }
            _ => Err(ApiError::not_found("resource", path)),
        }
    }

    fn create_session(&self, b: CreateSession) -> Result<Response, ApiError> {
        let system = match (b.system, b.env) {
            (Some(system), None) if b.agent.is_none() && b.agents.is_empty() => {
                system.validate()?;
                system
            }
            (None, Some(env)) => {
                let agents: Vec<String> = b.agent.into_iter().chain(b.agents).collect();
                build_system(&env, &agents)?
            }
            _ => return Err(ApiError::schema("give either `system`, or `env` with `agent`/`agents`")),
        };
        let seed = Seed::new(b.seed);
        let steps = match b.steps {
            Some(s) => s,
            None => env_init(&system.env, &seed)?.step_budget,
        };
        let trace = rollout(&system, &seed, steps)?;
        let mut reg = self.registry();
        reg.next_session += 1;
        let id = format!("s{}", reg.next_session);
        let session = Session {
            id: id.clone(),
            system,
            seed: b.seed,
            created: reg.next_session,
            root: trace.id.clone(),
            traces: vec![trace],
            trees: Vec::new(),
            models: Vec::new(),
        };
        let summary = session.summary();
        reg.sessions.insert(id, Arc::new(Mutex::new(session)));
        Response::json(201, summary)
    }

    fn start_collect(&self, sid: &str, b: CollectBody) -> Result<Response, ApiError> {
        let session = self.session(sid)?;
        let (system, session_seed) = {
            let s = lock(&session);
            (s.system.clone(), s.seed)
        };
        if b.extractors.is_empty() {
            return Err(ApiError::schema("at least one extractor is required"));
        }
        let subject = Subject { system, tags: b.tags };
        let config = CollectConfig { n: b.n, seed: Seed::new(b.seed.unwrap_or(session_seed)), horizon: b.horizon, prior: b.prior };
        let job = Arc::new(TreeJob { session: sid.to_string(), status: Mutex::new(JobStatus::Running) });
        let id = {
            let mut reg = self.registry();
            reg.next_tree += 1;
            let id = format!("tree{}", reg.next_tree);
            reg.trees.insert(id.clone(), job.clone());
            id
        };
        lock(&session).trees.push(id.clone());
        let (regimes, extractors) = (b.regimes, b.extractors);
        let work = move || {
            let status = match collect(&subject, &regimes, &extractors, &config) {
                Ok(tree) => JobStatus::Done(Arc::new(tree)),
                Err(e) => JobStatus::Failed(e.into()),
            };
            *lock(&job.status) = status;
        };
        if self.synchronous_jobs {
            work();
        } else {
            std::thread::spawn(work);
        }
        Response::json(202, json!({ "id": id, "session": sid, "status": "running" }))
    }

    fn create_model(&self, sid: &str, b: CreateModel) -> Result<Response, ApiError> {
        let session = self.session(sid)?;
        let model = match (b.tree, b.spec, b.model) {
            (Some(tree_id), Some(spec), None) => {
                let job = self.registry().trees.get(&tree_id).cloned().ok_or_else(|| ApiError::not_found("tree", &tree_id))?;
                let status = lock(&job.status).clone();
                match status {
                    JobStatus::Done(tree) => model_from_tree(&spec, &tree)?,
                    JobStatus::Running => return Err(ApiError::conflict("not-ready", format!("tree `{tree_id}` is still being collected"))),
                    JobStatus::Failed(e) => return Err(ApiError::conflict("tree-failed", e.message)),
                }
            }
            (None, None, Some(model)) => model,
            _ => return Err(ApiError::schema("give either `tree` with `spec`, or a literal `model`")),
        };
        let entry = Arc::new(ModelEntry { session: sid.to_string(), model });
        let id = {
            let mut reg = self.registry();
            reg.next_model += 1;
            let id = format!("m{}", reg.next_model);
            reg.models.insert(id.clone(), entry.clone());
            id
        };
        lock(&session).models.push(id.clone());
        Response::json(201, json!({ "id": id, "session": sid, "model": entry.model }))
    }

    fn run_experiment(&self, path: &str, body: &Value) -> Result<Response, ApiError> {
        let parts = segments(path);
        let ["experiments", name, "run"] = parts.as_slice() else {
            return Err(ApiError::not_found("resource", path));
        };
        let b: RunBody = parse(body)?;
        let spec = builtin(name)?.with_rollouts(b.rollouts.unwrap_or(DEFAULT_ROLLOUTS));
        Response::ok(run_experiment(&spec, &Seed::new(b.seed.unwrap_or(DEFAULT_SEED)))?)
    }
}

/// Experiment runs are pure functions of their request and are neither
/// logged nor serialized with other writes.
fn is_pure(path: &str) -> bool {
    matches!(segments(path).as_slice(), ["experiments", _, "run"])
}

fn segments(path: &str) -> Vec<&str> {
    path.split('?').next().unwrap_or("").split('/').filter(|s| !s.is_empty()).collect()
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn log_path(dir: &Path) -> PathBuf {
    dir.join(LOG_FILE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_split_cleanly() {
        assert_eq!(segments("/sessions/s1/traces/"), vec!["sessions", "s1", "traces"]);
        assert_eq!(segments("/experiments?x=1"), vec!["experiments"]);
    }

    #[test]
    fn unknown_method() {
        let s = Service::in_memory();
        let r = s.handle(Request { method: "DELETE".into(), path: "/sessions".into(), key: None, body: Value::Null });
        assert_eq!(r.status, 405);
    }
}
