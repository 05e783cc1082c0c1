//! The two-level registry: per-site local knowledge maps holding full
//! knowledge entries, and the core holding concept trees plus the mirror
//! of every entry's meta-knowledge.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::km::cluster::{ClusterRecord, ClusterRepresentative, ClusterResolver};
use crate::km::concept::{ConceptId, ConceptTreeRepository};
use crate::km::rule::RuleRepresentative;

/// Metadata of a mined knowledge entry; what `find` returns instead of the
/// knowledge body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaKnowledge {
    pub knowledge_id: u64,
    pub site: usize,
    pub concept_id: ConceptId,
    /// Mining task kind, e.g. "clustering" or "association-rules".
    pub task: String,
    pub data_type: String,
    pub instances: u64,
    pub dimensions: u64,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Representative {
    Rule(RuleRepresentative),
    Cluster(ClusterRepresentative),
}

impl Representative {
    pub fn validate(&self) -> Result<()> {
        match self {
            Representative::Rule(rep) => rep.validate(),
            Representative::Cluster(rep) => rep.validate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeEntry {
    pub meta: MetaKnowledge,
    pub representative: Representative,
}

/// A knowledge entry before registration assigns its identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeDraft {
    pub concept_id: ConceptId,
    pub task: String,
    pub data_type: String,
    pub instances: u64,
    pub dimensions: u64,
    #[serde(default)]
    pub description: String,
    pub representative: Representative,
}

/// Per-site repository of full knowledge entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalKm {
    pub site: usize,
    entries: BTreeMap<u64, KnowledgeEntry>,
    next_id: u64,
}

impl LocalKm {
    pub fn new(site: usize) -> Self {
        LocalKm {
            site,
            entries: BTreeMap::new(),
            next_id: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &KnowledgeEntry> {
        self.entries.values()
    }

    pub fn get(&self, knowledge_id: u64) -> Option<&KnowledgeEntry> {
        self.entries.get(&knowledge_id)
    }
}

/// The registry core: concept tree repository plus the meta-knowledge
/// repository mirroring every site's entries.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoreKm {
    pub concepts: ConceptTreeRepository,
    #[serde(with = "meta_as_seq")]
    meta: BTreeMap<(usize, u64), MetaKnowledge>,
}

/// Persists the tuple-keyed meta map as a flat array; keys are recovered
/// from the entries themselves.
mod meta_as_seq {
    use super::MetaKnowledge;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<(usize, u64), MetaKnowledge>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let entries: Vec<&MetaKnowledge> = map.values().collect();
        entries.serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<(usize, u64), MetaKnowledge>, D::Error> {
        let entries = Vec::<MetaKnowledge>::deserialize(deserializer)?;
        Ok(entries
            .into_iter()
            .map(|m| ((m.site, m.knowledge_id), m))
            .collect())
    }
}

impl CoreKm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn meta_entries(&self) -> impl Iterator<Item = &MetaKnowledge> {
        self.meta.values()
    }

    pub fn meta_len(&self) -> usize {
        self.meta.len()
    }

    /// Registered meta keyed by (site, knowledge id), for coherence checks.
    pub fn meta_keys(&self) -> Vec<(usize, u64)> {
        self.meta.keys().copied().collect()
    }
}

/// Adds a concept node to the core's repository.
pub fn add_concept(core: &mut CoreKm, parent: Option<ConceptId>, name: &str) -> Result<ConceptId> {
    core.concepts.add_concept(parent, name)
}

/// Stores the entry locally, assigns its per-site knowledge id, and
/// mirrors the meta-knowledge into the core so local map and core stay
/// coherent.
pub fn register_knowledge(
    local: &mut LocalKm,
    core: &mut CoreKm,
    draft: KnowledgeDraft,
) -> Result<u64> {
    if !core.concepts.exists(draft.concept_id) {
        return Err(Error::UnknownConcept(draft.concept_id));
    }
    draft.representative.validate()?;
    let knowledge_id = local.next_id;
    local.next_id += 1;
    let meta = MetaKnowledge {
        knowledge_id,
        site: local.site,
        concept_id: draft.concept_id,
        task: draft.task,
        data_type: draft.data_type,
        instances: draft.instances,
        dimensions: draft.dimensions,
        description: draft.description,
    };
    core.meta.insert((local.site, knowledge_id), meta.clone());
    local.entries.insert(
        knowledge_id,
        KnowledgeEntry {
            meta,
            representative: draft.representative,
        },
    );
    Ok(knowledge_id)
}

/// Removes the entry locally and unmirrors its meta from the core.
pub fn delete_knowledge(local: &mut LocalKm, core: &mut CoreKm, knowledge_id: u64) -> Result<()> {
    local
        .entries
        .remove(&knowledge_id)
        .ok_or(Error::UnknownKnowledge {
            site: local.site,
            id: knowledge_id,
        })?;
    core.meta.remove(&(local.site, knowledge_id));
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FindQuery {
    /// Root of the concept subtree to search.
    pub concept: ConceptId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_type: Option<String>,
}

/// Meta-knowledge of every entry whose concept lies in the queried subtree
/// and matches the optional filters. Returns metadata only, never bodies.
pub fn find(core: &CoreKm, query: &FindQuery) -> Result<Vec<MetaKnowledge>> {
    let subtree = core.concepts.subtree(query.concept)?;
    Ok(core
        .meta
        .values()
        .filter(|m| subtree.binary_search(&m.concept_id).is_ok())
        .filter(|m| query.task.as_ref().map_or(true, |t| &m.task == t))
        .filter(|m| {
            query
                .data_type
                .as_ref()
                .map_or(true, |d| &m.data_type == d)
        })
        .cloned()
        .collect())
}

/// Full entry lookup at one site.
pub fn retrieve(local: &LocalKm, knowledge_id: u64) -> Result<&KnowledgeEntry> {
    local.get(knowledge_id).ok_or(Error::UnknownKnowledge {
        site: local.site,
        id: knowledge_id,
    })
}

/// Coherence invariant of the registry: the core's meta set equals the
/// union of all local maps' meta sets.
pub fn check_coherence(core: &CoreKm, locals: &BTreeMap<usize, LocalKm>) -> bool {
    let mut union: Vec<(usize, u64)> = locals
        .values()
        .flat_map(|l| l.entries().map(|e| (e.meta.site, e.meta.knowledge_id)))
        .collect();
    union.sort_unstable();
    union == core.meta_keys()
        && locals
            .values()
            .flat_map(LocalKm::entries)
            .all(|e| core.meta.get(&(e.meta.site, e.meta.knowledge_id)) == Some(&e.meta))
}

impl ClusterResolver for BTreeMap<usize, LocalKm> {
    fn lookup(&self, site: usize, knowledge_id: u64, cluster_id: u64) -> Option<&ClusterRecord> {
        let entry = self.get(&site)?.get(knowledge_id)?;
        match &entry.representative {
            Representative::Cluster(rep) => rep.cluster(cluster_id),
            Representative::Rule(_) => None,
        }
    }
}
