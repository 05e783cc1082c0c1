//! Aggregation topologies: star (1-n), binary tree, and Tree-P grouping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Star1n,
    BinaryTree,
    TreeP,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopoNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Site index for leaf nodes; internal (virtual) nodes carry `None`.
    pub leaf_site: Option<usize>,
}

/// A rooted aggregation tree over `m` leaf sites. Leaves occupy node ids
/// 0..m in site order; internal nodes are appended as levels are built, so
/// the layout is deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    kind: TopologyKind,
    m: usize,
    p: Option<usize>,
    nodes: Vec<TopoNode>,
    levels: Vec<Vec<NodeId>>,
    root: NodeId,
}

impl Topology {
    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn leaf_count(&self) -> usize {
        self.m
    }

    pub fn group_size(&self) -> Option<usize> {
        self.p
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn nodes(&self) -> &[TopoNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &TopoNode {
        &self.nodes[id]
    }

    /// Node lists per merge level; level 0 holds the leaves, the last level
    /// holds only the root. A node promoted without a merge partner appears
    /// in consecutive levels.
    pub fn levels(&self) -> &[Vec<NodeId>] {
        &self.levels
    }

    /// Leaf node id of a site (identical to the site index).
    pub fn leaf_of_site(&self, site: usize) -> NodeId {
        site
    }

    /// Human-readable node label used in message traces.
    pub fn label(&self, id: NodeId) -> String {
        match self.nodes[id].leaf_site {
            Some(site) => format!("site:{site}"),
            None => format!("node:{id}"),
        }
    }

    /// Structural self-check used by tests: child limits, leaf count,
    /// connectivity and acyclicity.
    pub fn validate(&self) -> Result<()> {
        let leaf_count = self.nodes.iter().filter(|n| n.leaf_site.is_some()).count();
        if leaf_count != self.m {
            return Err(Error::InvalidParameter(format!(
                "expected {} leaves, found {leaf_count}",
                self.m
            )));
        }
        let limit = match self.kind {
            TopologyKind::BinaryTree => Some(2),
            TopologyKind::TreeP => self.p,
            TopologyKind::Star1n => None,
        };
        for node in &self.nodes {
            if let Some(limit) = limit {
                if node.children.len() > limit {
                    return Err(Error::InvalidParameter(format!(
                        "node {} has {} children (limit {limit})",
                        node.id,
                        node.children.len()
                    )));
                }
            }
            for &c in &node.children {
                if self.nodes[c].parent != Some(node.id) {
                    return Err(Error::InvalidParameter(format!(
                        "child {c} does not point back to {}",
                        node.id
                    )));
                }
            }
        }
        // Walk from the root; every node must be reached exactly once.
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if seen[id] {
                return Err(Error::InvalidParameter(format!("cycle through node {id}")));
            }
            seen[id] = true;
            stack.extend(&self.nodes[id].children);
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::InvalidParameter("disconnected topology".into()));
        }
        Ok(())
    }
}

/// Builds a topology over `m` sites. `p` is required (>= 2) for Tree-P and
/// ignored otherwise. Leaves are laid out left-to-right by site index.
pub fn build_topology(m: usize, kind: TopologyKind, p: Option<usize>) -> Result<Topology> {
    if m == 0 {
        return Err(Error::InvalidParameter("leaf count m must be >= 1".into()));
    }
    let group = match kind {
        TopologyKind::BinaryTree => 2,
        TopologyKind::TreeP => match p {
            Some(p) if p >= 2 => p,
            Some(_) => {
                return Err(Error::InvalidParameter(
                    "tree_p group size p must be >= 2".into(),
                ))
            }
            None => {
                return Err(Error::InvalidParameter(
                    "tree_p requires a group size p".into(),
                ))
            }
        },
        // A star is a single grouping round over all leaves.
        TopologyKind::Star1n => m.max(2),
    };

    let mut nodes: Vec<TopoNode> = (0..m)
        .map(|site| TopoNode {
            id: site,
            parent: None,
            children: Vec::new(),
            leaf_site: Some(site),
        })
        .collect();
    let mut level: Vec<NodeId> = (0..m).collect();
    let mut levels = vec![level.clone()];
    while level.len() > 1 {
        let mut next = Vec::new();
        for chunk in level.chunks(group) {
            if chunk.len() == 1 {
                next.push(chunk[0]);
                continue;
            }
            let id = nodes.len();
            nodes.push(TopoNode {
                id,
                parent: None,
                children: chunk.to_vec(),
                leaf_site: None,
            });
            for &c in chunk {
                nodes[c].parent = Some(id);
            }
            next.push(id);
        }
        levels.push(next.clone());
        level = next;
    }
    let root = level[0];
    Ok(Topology {
        kind,
        m,
        p: match kind {
            TopologyKind::TreeP => p,
            _ => None,
        },
        nodes,
        levels,
        root,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_leaves_binary_has_one_internal_root() {
        let t = build_topology(2, TopologyKind::BinaryTree, None).unwrap();
        t.validate().unwrap();
        assert_eq!(t.leaf_count(), 2);
        assert_eq!(t.nodes().len(), 3);
        assert_eq!(t.node(t.root()).children, vec![0, 1]);
        assert_eq!(t.levels().len(), 2);
    }

    #[test]
    fn single_node_topology() {
        for kind in [
            TopologyKind::Star1n,
            TopologyKind::BinaryTree,
            TopologyKind::TreeP,
        ] {
            let t = build_topology(1, kind, Some(3)).unwrap();
            t.validate().unwrap();
            assert_eq!(t.nodes().len(), 1);
            assert_eq!(t.root(), 0);
            assert_eq!(t.levels(), &[vec![0]]);
        }
    }

    #[test]
    fn nine_leaves_tree_p_three_groups_plus_root() {
        let t = build_topology(9, TopologyKind::TreeP, Some(3)).unwrap();
        t.validate().unwrap();
        // 9 leaves, 3 group nodes, 1 root.
        assert_eq!(t.nodes().len(), 13);
        let internal: Vec<_> = t.nodes().iter().filter(|n| n.leaf_site.is_none()).collect();
        assert_eq!(internal.len(), 4);
        assert_eq!(t.node(t.root()).children.len(), 3);
        assert_eq!(t.levels().len(), 3);
    }

    #[test]
    fn star_is_single_grouping_round() {
        let t = build_topology(5, TopologyKind::Star1n, None).unwrap();
        t.validate().unwrap();
        assert_eq!(t.levels().len(), 2);
        assert_eq!(t.node(t.root()).children.len(), 5);
    }

    #[test]
    fn odd_leaf_is_promoted() {
        let t = build_topology(3, TopologyKind::BinaryTree, None).unwrap();
        t.validate().unwrap();
        // Leaf 2 is carried into level 1 and merged at the root.
        assert_eq!(t.levels()[1], vec![3, 2]);
        assert_eq!(t.node(t.root()).children, vec![3, 2]);
    }

    #[test]
    fn tree_p_requires_group_size() {
        assert!(build_topology(4, TopologyKind::TreeP, None).is_err());
        assert!(build_topology(4, TopologyKind::TreeP, Some(1)).is_err());
        assert!(build_topology(0, TopologyKind::BinaryTree, None).is_err());
    }
}
