//! The knowledge-map layer: concept trees, the core meta-knowledge
//! repository, per-site local maps holding rule-based and clustering
//! representatives, and the find/retrieve primitives served by a simulated
//! daemon runtime.

pub mod cluster;
pub mod concept;
pub mod daemon;
pub mod rule;
pub mod store;

pub use cluster::{
    resolve_integration_link, ClusterRecord, ClusterRepresentative, ClusterResolver,
    CreationInfo, ProvenanceNode, SourceRef,
};
pub use concept::{ConceptId, ConceptNode, ConceptTreeRepository};
pub use daemon::{KmRequest, KmResponse, KmRuntime};
pub use rule::{lookup_counting, rule_lookup, Rule, RuleId, RuleRepresentative};
pub use store::{
    add_concept, check_coherence, delete_knowledge, find, register_knowledge, retrieve, CoreKm,
    FindQuery, KnowledgeDraft, KnowledgeEntry, LocalKm, MetaKnowledge, Representative,
};
