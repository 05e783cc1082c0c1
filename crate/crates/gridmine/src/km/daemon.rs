//! Knowledge-map daemon runtime over the simulated transport. One site
//! hosts the core (1-n model); every request and reply travels as a
//! length-prefixed JSON frame and is recorded in the message trace,
//! including the local fetch/materialize steps of the four-step flows.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::km::concept::ConceptId;
use crate::km::store::{
    add_concept, check_coherence, delete_knowledge, find, register_knowledge, retrieve, CoreKm,
    FindQuery, KnowledgeDraft, KnowledgeEntry, LocalKm, MetaKnowledge,
};
use crate::sim::trace::{frame_bytes, MessageTrace};

/// Requests understood by the daemon runtime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum KmRequest {
    Init { sites: usize },
    Stop,
    Find { query: FindQuery },
    Retrieve { site: usize, knowledge_id: u64 },
    Register { site: usize, draft: KnowledgeDraft },
    Delete { site: usize, knowledge_id: u64 },
    AddConcept { parent: Option<ConceptId>, name: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum KmResponse {
    Inited { sites: usize },
    Stopped,
    Found { entries: Vec<MetaKnowledge> },
    Retrieved { entry: Box<KnowledgeEntry> },
    Registered { site: usize, knowledge_id: u64 },
    Deleted,
    ConceptAdded { concept_id: ConceptId },
    Error { code: String, message: String },
}

impl KmResponse {
    pub fn is_error(&self) -> bool {
        matches!(self, KmResponse::Error { .. })
    }

    fn from_error(err: &Error) -> Self {
        KmResponse::Error {
            code: err.code().to_string(),
            message: err.to_string(),
        }
    }
}

/// In-process daemon network: the core at a host site plus one local map
/// per site, with a running flag governed by INIT/STOP.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KmRuntime {
    pub core: CoreKm,
    pub locals: BTreeMap<usize, LocalKm>,
    pub running: bool,
}

const HOST: &str = "km:host";
const CLIENT: &str = "km:client";

impl KmRuntime {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn site_count(&self) -> usize {
        self.locals.len()
    }

    pub fn coherent(&self) -> bool {
        check_coherence(&self.core, &self.locals)
    }

    /// Routes one request, recording its communication steps.
    pub fn handle(&mut self, request: &KmRequest, trace: &mut MessageTrace) -> KmResponse {
        let round = trace.last_round() + 1;
        match request {
            KmRequest::Init { sites } => {
                self.locals = (0..*sites).map(|s| (s, LocalKm::new(s))).collect();
                self.running = true;
                trace.record(round, CLIENT, HOST, "INIT", frame_bytes(request), *sites);
                KmResponse::Inited { sites: *sites }
            }
            KmRequest::Stop => {
                self.running = false;
                trace.record(round, CLIENT, HOST, "STOP", frame_bytes(request), 0);
                KmResponse::Stopped
            }
            _ if !self.running => KmResponse::from_error(&Error::NotRunning),
            KmRequest::Find { query } => {
                trace.record(round, CLIENT, HOST, "REQUEST", frame_bytes(request), 1);
                let response = match find(&self.core, query) {
                    Ok(entries) => KmResponse::Found { entries },
                    Err(e) => KmResponse::from_error(&e),
                };
                let hits = match &response {
                    KmResponse::Found { entries } => entries.len(),
                    _ => 0,
                };
                trace.record(round, HOST, HOST, "FETCH", 0, hits);
                trace.record(round, HOST, CLIENT, "REPLY", frame_bytes(&response), hits);
                trace.record(round, CLIENT, CLIENT, "MATERIALIZE", 0, hits);
                response
            }
            KmRequest::Retrieve { site, knowledge_id } => {
                let peer = format!("km:site:{site}");
                trace.record(round, CLIENT, &*peer, "REQUEST", frame_bytes(request), 1);
                let response = match self.locals.get(site) {
                    Some(local) => match retrieve(local, *knowledge_id) {
                        Ok(entry) => KmResponse::Retrieved {
                            entry: Box::new(entry.clone()),
                        },
                        Err(e) => KmResponse::from_error(&e),
                    },
                    None => KmResponse::from_error(&Error::UnknownKnowledge {
                        site: *site,
                        id: *knowledge_id,
                    }),
                };
                let hits = usize::from(!response.is_error());
                trace.record(round, &*peer, &*peer, "FETCH", 0, hits);
                trace.record(round, &*peer, CLIENT, "REPLY", frame_bytes(&response), hits);
                trace.record(round, CLIENT, CLIENT, "MATERIALIZE", 0, hits);
                response
            }
            KmRequest::Register { site, draft } => {
                let peer = format!("km:site:{site}");
                trace.record(round, CLIENT, &*peer, "REGISTER", frame_bytes(request), 1);
                let response = match self.locals.get_mut(site) {
                    Some(local) => match register_knowledge(local, &mut self.core, draft.clone())
                    {
                        Ok(knowledge_id) => {
                            // The meta mirror travels to the core host.
                            let meta = local.get(knowledge_id).map(|e| e.meta.clone());
                            trace.record(
                                round,
                                &*peer,
                                HOST,
                                "SUBMIT_META",
                                frame_bytes(&meta),
                                1,
                            );
                            KmResponse::Registered {
                                site: *site,
                                knowledge_id,
                            }
                        }
                        Err(e) => KmResponse::from_error(&e),
                    },
                    None => KmResponse::from_error(&Error::InvalidParameter(format!(
                        "unknown site {site}"
                    ))),
                };
                trace.record(
                    round,
                    &*peer,
                    CLIENT,
                    "REPLY",
                    frame_bytes(&response),
                    usize::from(!response.is_error()),
                );
                response
            }
            KmRequest::Delete { site, knowledge_id } => {
                let peer = format!("km:site:{site}");
                trace.record(round, CLIENT, &*peer, "DELETE", frame_bytes(request), 1);
                let response = match self.locals.get_mut(site) {
                    Some(local) => {
                        match delete_knowledge(local, &mut self.core, *knowledge_id) {
                            Ok(()) => {
                                trace.record(round, &*peer, HOST, "SUBMIT_META", 0, 1);
                                KmResponse::Deleted
                            }
                            Err(e) => KmResponse::from_error(&e),
                        }
                    }
                    None => KmResponse::from_error(&Error::UnknownKnowledge {
                        site: *site,
                        id: *knowledge_id,
                    }),
                };
                trace.record(
                    round,
                    &*peer,
                    CLIENT,
                    "REPLY",
                    frame_bytes(&response),
                    usize::from(!response.is_error()),
                );
                response
            }
            KmRequest::AddConcept { parent, name } => {
                trace.record(round, CLIENT, HOST, "ADD_CONCEPT", frame_bytes(request), 1);
                let response = match add_concept(&mut self.core, *parent, name) {
                    Ok(concept_id) => KmResponse::ConceptAdded { concept_id },
                    Err(e) => KmResponse::from_error(&e),
                };
                trace.record(
                    round,
                    HOST,
                    CLIENT,
                    "REPLY",
                    frame_bytes(&response),
                    usize::from(!response.is_error()),
                );
                response
            }
        }
    }

    /// Persists the runtime as one JSON document per repository: the core,
    /// one file per site, and a state file with the running flag.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let state = serde_json::json!({
            "sites": self.locals.keys().collect::<Vec<_>>(),
            "running": self.running,
        });
        write_json(&dir.join("state.json"), &state)?;
        write_json(&dir.join("core.json"), &self.core)?;
        for (site, local) in &self.locals {
            write_json(&dir.join(format!("site_{site:03}.json")), local)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let state: serde_json::Value = read_json(&dir.join("state.json"))?;
        let running = state["running"].as_bool().unwrap_or(false);
        let sites: Vec<usize> = serde_json::from_value(state["sites"].clone())?;
        let core: CoreKm = read_json(&dir.join("core.json"))?;
        let mut locals = BTreeMap::new();
        for site in sites {
            let local: LocalKm = read_json(&dir.join(format!("site_{site:03}.json")))?;
            locals.insert(site, local);
        }
        Ok(KmRuntime {
            core,
            locals,
            running,
        })
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}
