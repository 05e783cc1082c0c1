//! Concept trees: hierarchical application-domain taxonomies with ids
//! unique across the whole repository.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ConceptId = u64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptNode {
    pub id: ConceptId,
    pub name: String,
    /// `None` marks the root of a concept tree (an application domain).
    pub parent: Option<ConceptId>,
}

/// All concept trees of the registry. Ids are allocated by a monotone
/// counter owned by the repository, so they are unique across trees.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConceptTreeRepository {
    nodes: BTreeMap<ConceptId, ConceptNode>,
    next_id: ConceptId,
}

impl ConceptTreeRepository {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, id: ConceptId) -> Option<&ConceptNode> {
        self.nodes.get(&id)
    }

    pub fn exists(&self, id: ConceptId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ConceptNode> {
        self.nodes.values()
    }

    /// Roots of all concept trees (application domains).
    pub fn roots(&self) -> impl Iterator<Item = &ConceptNode> {
        self.nodes.values().filter(|n| n.parent.is_none())
    }

    /// Adds a concept node. `parent = None` starts a new tree. The tree
    /// stays acyclic because children always get fresh ids.
    pub fn add_concept(&mut self, parent: Option<ConceptId>, name: &str) -> Result<ConceptId> {
        if let Some(p) = parent {
            if !self.exists(p) {
                return Err(Error::UnknownConcept(p));
            }
        }
        let id = self.next_id;
        self.next_id += 1;
        self.nodes.insert(
            id,
            ConceptNode {
                id,
                name: name.to_string(),
                parent,
            },
        );
        Ok(id)
    }

    /// All concept ids in the subtree rooted at `root`, including it.
    pub fn subtree(&self, root: ConceptId) -> Result<Vec<ConceptId>> {
        if !self.exists(root) {
            return Err(Error::UnknownConcept(root));
        }
        let mut children: BTreeMap<ConceptId, Vec<ConceptId>> = BTreeMap::new();
        for node in self.nodes.values() {
            if let Some(p) = node.parent {
                children.entry(p).or_default().push(node.id);
            }
        }
        let mut out = Vec::new();
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            out.push(id);
            if let Some(kids) = children.get(&id) {
                stack.extend(kids.iter().copied());
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Path of names from the tree root down to `id`.
    pub fn path(&self, id: ConceptId) -> Result<Vec<String>> {
        let mut node = self.get(id).ok_or(Error::UnknownConcept(id))?;
        let mut path = vec![node.name.clone()];
        while let Some(p) = node.parent {
            node = self.get(p).ok_or(Error::UnknownConcept(p))?;
            path.push(node.name.clone());
        }
        path.reverse();
        Ok(path)
    }
}
