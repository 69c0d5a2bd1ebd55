//! JSON-over-HTTP chat adapters for reasoning, reflection and perception.

use std::fmt::Write as _;
use std::time::Duration;

use dualdrive_core::dual::{
    parse_decision, BackendError, CreatedAt, DecisionRequest, Experience, HistoryQueue, PromptSet,
    Provenance, ReasonerBackend, ReflectError, Reflection, Reflector,
};
use dualdrive_core::encoder::{FeatureSource, Rasterizer};
use dualdrive_core::perceiver::{describe_scene, CriticalObject, PerceiveError, PerceiverConfig, SceneDescriber, SceneDescription};
use dualdrive_core::sim::lane::LaneGraph;
use dualdrive_core::sim::world::{AccidentInfo, WorldSnapshot};
use serde::{Deserialize, Serialize};

pub const ENDPOINT_VAR: &str = "DUALDRIVE_CHAT_ENDPOINT";
pub const KEY_VAR: &str = "DUALDRIVE_CHAT_KEY";
pub const MODEL_VAR: &str = "DUALDRIVE_CHAT_MODEL";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub model: String,
    pub system: String,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
}

/// Blocking client for one chat endpoint.
#[derive(Debug, Clone)]
pub struct ChatClient {
    pub endpoint: String,
    pub model: String,
    api_key: Option<String>,
    timeout_ms: u64,
    agent: ureq::Agent,
}

impl ChatClient {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>, timeout_ms: u64) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_millis(timeout_ms)).build();
        Self { endpoint: endpoint.into(), model: model.into(), api_key, timeout_ms, agent }
    }

    /// Endpoint, key and model from the environment, with explicit values
    /// taking precedence. Fails when no endpoint is known.
    pub fn from_env(endpoint: Option<&str>, model: &str, timeout_ms: u64) -> Result<Self, BackendError> {
        let endpoint = match endpoint {
            Some(e) => e.to_string(),
            None => std::env::var(ENDPOINT_VAR)
                .map_err(|_| BackendError::Other(format!("no chat endpoint configured; set {ENDPOINT_VAR}")))?,
        };
        let model = if model.is_empty() { std::env::var(MODEL_VAR).unwrap_or_default() } else { model.to_string() };
        Ok(Self::new(endpoint, model, std::env::var(KEY_VAR).ok(), timeout_ms))
    }

    pub fn chat(&self, system: &str, messages: Vec<ChatMessage>) -> Result<String, BackendError> {
        let body = ChatRequest { model: self.model.clone(), system: system.to_string(), messages };
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(&body) {
            Ok(resp) => resp
                .into_json::<ChatResponse>()
                .map(|r| r.content)
                .map_err(|e| BackendError::Transport(format!("bad response body: {e}"))),
            Err(ureq::Error::Status(code, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                Err(BackendError::Other(format!("HTTP {code}: {}", text.trim())))
            }
            Err(ureq::Error::Transport(t)) => {
                let msg = t.to_string();
                if msg.contains("timed out") {
                    Err(BackendError::Timeout(self.timeout_ms))
                } else {
                    Err(BackendError::Transport(msg))
                }
            }
        }
    }
}

fn user(content: String) -> Vec<ChatMessage> {
    vec![ChatMessage { role: "user".into(), content }]
}

/// Reasoning backend served by a chat model.
#[derive(Debug, Clone)]
pub struct ExternalChat {
    pub client: ChatClient,
}

impl ReasonerBackend for ExternalChat {
    fn name(&self) -> &str {
        "external-chat"
    }

    fn complete(&self, request: &DecisionRequest) -> Result<String, BackendError> {
        self.client.chat(&request.system, user(request.prompt.clone()))
    }
}

/// Reflection served by a chat model. The reply names the faulty step and
/// its corrected action; a reply of `Step: none` falls back to correcting
/// the latest step.
#[derive(Debug, Clone)]
pub struct ChatReflector {
    pub client: ChatClient,
}

pub fn render_reflection(prompts: &PromptSet, accident: &AccidentInfo, queue: &HistoryQueue) -> String {
    let mut s = String::new();
    s.push_str(prompts.traffic_rules.trim_end());
    s.push_str("\n\n");
    let _ = writeln!(
        s,
        "## Accident\n{} at t={:.1} s near ({:.1}, {:.1}).\n\n## Recent decisions",
        accident.kind.as_str(),
        accident.time,
        accident.location.x,
        accident.location.y
    );
    for (i, r) in queue.iter().enumerate() {
        let _ = writeln!(s, "### Step {i} (t={:.1} s)", r.time);
        let _ = writeln!(s, "Scene: {}", r.description.summary);
        let _ = writeln!(s, "Reasoning: {}", r.reasoning);
        let _ = writeln!(s, "Action: {}", r.decision);
    }
    s
}

/// Extracts the `Step:` index; `Ok(None)` for an explicit "none".
pub fn parse_step(raw: &str) -> Result<Option<usize>, String> {
    let line = raw
        .lines()
        .map(|l| l.trim().trim_start_matches(['*', '#', '-', ' ']))
        .find(|l| l.to_ascii_lowercase().starts_with("step:"))
        .ok_or("no Step line")?;
    let v = line["step:".len()..].trim().trim_matches(|c: char| !c.is_alphanumeric());
    if v.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    v.parse().map(Some).map_err(|_| format!("bad step index {v:?}"))
}

impl Reflector for ChatReflector {
    fn reflect(
        &self,
        prompts: &PromptSet,
        accident: &AccidentInfo,
        queue: &HistoryQueue,
        created_at: CreatedAt,
    ) -> Result<Reflection, ReflectError> {
        if queue.is_empty() {
            return Err(ReflectError::EmptyQueue);
        }
        let raw = self.client.chat(&prompts.reflection, user(render_reflection(prompts, accident, queue)))?;
        let step = parse_step(&raw).map_err(|e| ReflectError::InvalidOutput(format!("{e}: {raw}")))?;
        let (step, fallback) = match step {
            Some(i) if i < queue.len() => (i, false),
            Some(i) => return Err(ReflectError::InvalidOutput(format!("step {i} outside the queue: {raw}"))),
            None => (queue.len() - 1, true),
        };
        let rec = queue.get(step).ok_or(ReflectError::EmptyQueue)?;
        let (action, reasoning) = if fallback {
            let a = dualdrive_core::dual::reflect::fallback_action(accident.kind);
            (a, format!("No earlier step was at fault; the last decision {} is replaced by {a}.", rec.decision))
        } else {
            let d = parse_decision(&raw).map_err(|e| ReflectError::InvalidOutput(e.to_string()))?;
            if d.action == rec.decision {
                return Err(ReflectError::InvalidOutput(format!("correction repeats {}: {raw}", d.action)));
            }
            (d.action, d.reasoning)
        };
        Ok(Reflection {
            experience: Experience {
                token: rec.token.clone(),
                description: rec.description.clone(),
                reasoning,
                decision: action,
                provenance: Provenance::Reflection,
                fallback,
                created_at,
            },
            step,
            tick: rec.tick,
            original: rec.decision,
            fallback,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PerceptionRequest {
    frames: Vec<Vec<f64>>,
    prompt: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PerceptionReply {
    objects: Vec<CriticalObject>,
    summary: String,
}

/// Perception served by a chat model that receives rasterised frames and
/// answers with critical objects as JSON. Ego context comes from the
/// vehicle's own state.
#[derive(Debug, Clone)]
pub struct ExternalPerceiver {
    pub client: ChatClient,
    pub system: String,
    pub raster: Rasterizer,
    pub config: PerceiverConfig,
}

impl SceneDescriber for ExternalPerceiver {
    fn describe(&self, window: &[WorldSnapshot], graph: &LaneGraph, ego_id: u32) -> Result<SceneDescription, PerceiveError> {
        let mut own = describe_scene(window, graph, ego_id, &self.config)?;
        let req = PerceptionRequest {
            frames: window.iter().map(|s| self.raster.features(s)).collect(),
            prompt: "List the critical objects and summarise the scene.".into(),
        };
        let content = serde_json::to_string(&req).map_err(|e| PerceiveError::Backend(e.to_string()))?;
        let raw = self.client.chat(&self.system, user(content)).map_err(|e| PerceiveError::Backend(e.to_string()))?;
        let reply: PerceptionReply =
            serde_json::from_str(&raw).map_err(|e| PerceiveError::Backend(format!("unparsable reply: {e}")))?;
        own.objects = reply.objects;
        own.summary = reply.summary;
        Ok(own)
    }
}
