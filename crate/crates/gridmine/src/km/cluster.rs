//! Clustering-result representatives: typed field metadata, one record per
//! cluster, and recursive integration links recording which sub-clusters
//! from which sites were merged into each cluster.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference to a cluster stored in another knowledge entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceRef {
    pub site: usize,
    pub knowledge_id: u64,
    pub cluster_id: u64,
}

/// How a cluster record came to be: produced by a clustering run (a leaf,
/// pointing at the cluster file) or integrated from other clusters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CreationInfo {
    Clustering {
        host: String,
        cluster_file: String,
        cluster_id: u64,
    },
    Integrating {
        sources: Vec<SourceRef>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub id: u64,
    /// One value per declared field; matrices and vectors are nested
    /// JSON arrays.
    pub values: Vec<serde_json::Value>,
    pub creation: CreationInfo,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterRepresentative {
    pub field_names: Vec<String>,
    pub field_types: Vec<String>,
    pub clusters: Vec<ClusterRecord>,
}

impl ClusterRepresentative {
    pub fn cluster(&self, id: u64) -> Option<&ClusterRecord> {
        self.clusters.iter().find(|c| c.id == id)
    }

    /// Structural invariants: matching field metadata, record arity, and
    /// cluster ids unique within the entry.
    pub fn validate(&self) -> Result<()> {
        if self.field_names.len() != self.field_types.len() {
            return Err(Error::InvalidParameter(
                "field names and types differ in length".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for record in &self.clusters {
            if !seen.insert(record.id) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate cluster id {}",
                    record.id
                )));
            }
            if record.values.len() != self.field_names.len() {
                return Err(Error::InvalidParameter(format!(
                    "cluster {} has {} values for {} fields",
                    record.id,
                    record.values.len(),
                    self.field_names.len()
                )));
            }
        }
        Ok(())
    }
}

/// Looks up cluster records across sites while resolving integration links.
pub trait ClusterResolver {
    fn lookup(&self, site: usize, knowledge_id: u64, cluster_id: u64) -> Option<&ClusterRecord>;
}

/// Node of a resolved provenance tree. Leaves are clustering-type records
/// and carry no children.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceNode {
    pub site: usize,
    pub knowledge_id: u64,
    pub cluster_id: u64,
    pub children: Vec<ProvenanceNode>,
}

impl ProvenanceNode {
    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(ProvenanceNode::node_count).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(ProvenanceNode::depth)
            .max()
            .unwrap_or(0)
    }
}

/// Resolves the full provenance tree of a cluster owned by
/// (owner_site, owner_knowledge_id). Dangling references and cycles are
/// reported with the offending link.
pub fn resolve_integration_link<R: ClusterResolver>(
    rep: &ClusterRepresentative,
    owner_site: usize,
    owner_knowledge_id: u64,
    cluster_id: u64,
    resolver: &R,
) -> Result<ProvenanceNode> {
    let record = rep.cluster(cluster_id).ok_or(Error::DanglingLink {
        site: owner_site,
        knowledge_id: owner_knowledge_id,
        cluster_id,
    })?;
    let mut path = Vec::new();
    resolve_record(
        owner_site,
        owner_knowledge_id,
        record,
        resolver,
        &mut path,
    )
}

fn resolve_record<R: ClusterResolver>(
    site: usize,
    knowledge_id: u64,
    record: &ClusterRecord,
    resolver: &R,
    path: &mut Vec<SourceRef>,
) -> Result<ProvenanceNode> {
    let here = SourceRef {
        site,
        knowledge_id,
        cluster_id: record.id,
    };
    if path.contains(&here) {
        return Err(Error::LinkCycle {
            site,
            knowledge_id,
            cluster_id: record.id,
        });
    }
    path.push(here);
    let children = match &record.creation {
        CreationInfo::Clustering { .. } => Vec::new(),
        CreationInfo::Integrating { sources } => {
            let mut children = Vec::with_capacity(sources.len());
            for source in sources {
                let child = resolver
                    .lookup(source.site, source.knowledge_id, source.cluster_id)
                    .ok_or(Error::DanglingLink {
                        site: source.site,
                        knowledge_id: source.knowledge_id,
                        cluster_id: source.cluster_id,
                    })?;
                children.push(resolve_record(
                    source.site,
                    source.knowledge_id,
                    child,
                    resolver,
                    path,
                )?);
            }
            children
        }
    };
    path.pop();
    Ok(ProvenanceNode {
        site,
        knowledge_id,
        cluster_id: record.id,
        children,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    struct MapResolver(BTreeMap<(usize, u64), ClusterRepresentative>);

    impl ClusterResolver for MapResolver {
        fn lookup(
            &self,
            site: usize,
            knowledge_id: u64,
            cluster_id: u64,
        ) -> Option<&ClusterRecord> {
            self.0
                .get(&(site, knowledge_id))
                .and_then(|rep| rep.cluster(cluster_id))
        }
    }

    fn leaf_record(id: u64) -> ClusterRecord {
        ClusterRecord {
            id,
            values: vec![],
            creation: CreationInfo::Clustering {
                host: format!("compute-0-{id}"),
                cluster_file: format!("cluster_{id}.dat"),
                cluster_id: id,
            },
        }
    }

    fn rep_with(records: Vec<ClusterRecord>) -> ClusterRepresentative {
        ClusterRepresentative {
            field_names: vec![],
            field_types: vec![],
            clusters: records,
        }
    }

    #[test]
    fn clustering_type_resolves_to_single_leaf() {
        let rep = rep_with(vec![leaf_record(0)]);
        let resolver = MapResolver(BTreeMap::new());
        let tree = resolve_integration_link(&rep, 0, 1, 0, &resolver).unwrap();
        assert_eq!(tree.node_count(), 1);
        assert_eq!(tree.depth(), 1);
        assert!(tree.children.is_empty());
    }

    #[test]
    fn three_sources_third_with_two_subsources() {
        // Root integrates three sub-clusters; the third is itself an
        // integration of two leaves: depth 3, six nodes in total.
        let mut network = BTreeMap::new();
        network.insert((1, 10u64), rep_with(vec![leaf_record(0)]));
        network.insert((2, 20u64), rep_with(vec![leaf_record(0)]));
        network.insert(
            (3, 1u64),
            rep_with(vec![ClusterRecord {
                id: 2,
                values: vec![],
                creation: CreationInfo::Integrating {
                    sources: vec![
                        SourceRef {
                            site: 1,
                            knowledge_id: 10,
                            cluster_id: 0,
                        },
                        SourceRef {
                            site: 2,
                            knowledge_id: 20,
                            cluster_id: 0,
                        },
                    ],
                },
            }]),
        );
        let root_rep = rep_with(vec![ClusterRecord {
            id: 1,
            values: vec![],
            creation: CreationInfo::Integrating {
                sources: vec![
                    SourceRef {
                        site: 1,
                        knowledge_id: 10,
                        cluster_id: 0,
                    },
                    SourceRef {
                        site: 2,
                        knowledge_id: 20,
                        cluster_id: 0,
                    },
                    SourceRef {
                        site: 3,
                        knowledge_id: 1,
                        cluster_id: 2,
                    },
                ],
            },
        }]);
        let resolver = MapResolver(network);
        let tree = resolve_integration_link(&root_rep, 0, 5, 1, &resolver).unwrap();
        assert_eq!(tree.node_count(), 6);
        assert_eq!(tree.depth(), 3);
        assert_eq!(tree.children.len(), 3);
        assert_eq!(tree.children[2].children.len(), 2);
        // Leaves have zero sub-elements.
        assert!(tree.children[0].children.is_empty());
        assert!(tree.children[2].children[0].children.is_empty());
    }

    #[test]
    fn cycle_is_detected() {
        let mut network = BTreeMap::new();
        network.insert(
            (1, 1u64),
            rep_with(vec![ClusterRecord {
                id: 0,
                values: vec![],
                creation: CreationInfo::Integrating {
                    sources: vec![SourceRef {
                        site: 2,
                        knowledge_id: 2,
                        cluster_id: 0,
                    }],
                },
            }]),
        );
        network.insert(
            (2, 2u64),
            rep_with(vec![ClusterRecord {
                id: 0,
                values: vec![],
                creation: CreationInfo::Integrating {
                    sources: vec![SourceRef {
                        site: 1,
                        knowledge_id: 1,
                        cluster_id: 0,
                    }],
                },
            }]),
        );
        let rep = network[&(1, 1u64)].clone();
        let resolver = MapResolver(network);
        let err = resolve_integration_link(&rep, 1, 1, 0, &resolver).unwrap_err();
        assert!(matches!(err, Error::LinkCycle { .. }));
    }

    #[test]
    fn dangling_link_names_the_missing_entry() {
        let rep = rep_with(vec![ClusterRecord {
            id: 0,
            values: vec![],
            creation: CreationInfo::Integrating {
                sources: vec![SourceRef {
                    site: 7,
                    knowledge_id: 42,
                    cluster_id: 3,
                }],
            },
        }]);
        let resolver = MapResolver(BTreeMap::new());
        match resolve_integration_link(&rep, 0, 0, 0, &resolver) {
            Err(Error::DanglingLink {
                site,
                knowledge_id,
                cluster_id,
            }) => {
                assert_eq!((site, knowledge_id, cluster_id), (7, 42, 3));
            }
            other => panic!("expected dangling link, got {other:?}"),
        }
    }

    #[test]
    fn validation_checks_field_arity_and_id_uniqueness() {
        let mut rep = ClusterRepresentative {
            field_names: vec!["Id".into(), "Counts".into()],
            field_types: vec!["int".into(), "long".into()],
            clusters: vec![ClusterRecord {
                id: 0,
                values: vec![serde_json::json!(0), serde_json::json!(1500)],
                creation: CreationInfo::Clustering {
                    host: "h".into(),
                    cluster_file: "f".into(),
                    cluster_id: 0,
                },
            }],
        };
        rep.validate().unwrap();
        rep.clusters.push(rep.clusters[0].clone());
        assert!(rep.validate().is_err());
    }
}
