//! File formats, chat adapters and the command-line harness around
//! `dualdrive-core`.

pub mod chat;
pub mod io;
pub mod report;
pub mod runtime;
pub mod synth;

use std::path::Path;
use std::time::Duration;

use dualdrive_core::dual::{BackendError, ReasonerBackend, Reflector};
use dualdrive_core::encoder::{EncoderConfig, EncoderError, EncoderParams};
use dualdrive_core::harness::{BackendSpec, Backends, BuiltinBackends, EpisodeConfig};

use crate::chat::{ChatClient, ChatReflector, ExternalChat};
use crate::runtime::TimeoutBackend;

/// Backends for a config: the built-in rule models, with external chat
/// models substituted where the config names them.
pub struct AgentBackends {
    builtin: BuiltinBackends,
    analytic: Option<Box<dyn ReasonerBackend>>,
    heuristic: Option<Box<dyn ReasonerBackend>>,
    reflector: Option<Box<dyn Reflector>>,
}

fn client(spec: &BackendSpec) -> Result<Option<(ChatClient, u64)>, BackendError> {
    match spec {
        BackendSpec::External { model, endpoint, timeout_ms } => {
            Ok(Some((ChatClient::from_env(endpoint.as_deref(), model, *timeout_ms)?, *timeout_ms)))
        }
        _ => Ok(None),
    }
}

fn external(spec: &BackendSpec) -> Result<Option<Box<dyn ReasonerBackend>>, BackendError> {
    Ok(client(spec)?.map(|(client, ms)| {
        Box::new(TimeoutBackend::new(ExternalChat { client }, Duration::from_millis(ms))) as Box<dyn ReasonerBackend>
    }))
}

impl AgentBackends {
    pub fn from_config(cfg: &EpisodeConfig) -> Result<Self, BackendError> {
        Ok(Self {
            builtin: BuiltinBackends::from_config(cfg),
            analytic: external(&cfg.analytic_backend)?,
            heuristic: external(&cfg.heuristic_backend)?,
            reflector: client(&cfg.reflection_backend)?
                .map(|(client, _)| Box::new(ChatReflector { client }) as Box<dyn Reflector>),
        })
    }

    pub fn backends(&self, cfg: &EpisodeConfig) -> Backends<'_> {
        let mut b = self.builtin.backends(cfg);
        if let Some(a) = &self.analytic {
            b.analytic = a.as_ref();
        }
        if let Some(h) = &self.heuristic {
            b.heuristic = h.as_ref();
        }
        if let Some(r) = &self.reflector {
            b.reflector = r.as_ref();
        }
        b
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EncoderLoadError {
    #[error(transparent)]
    Io(#[from] io::IoError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

/// The encoder named by the config, or a seeded initialisation.
pub fn encoder_for(cfg: &EpisodeConfig) -> Result<EncoderParams, EncoderLoadError> {
    match &cfg.encoder_params {
        Some(p) => Ok(io::load_params(Path::new(p))?),
        None => Ok(EncoderParams::init(&EncoderConfig::default(), cfg.encoder_seed)?),
    }
}
