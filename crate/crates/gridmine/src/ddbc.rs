//! Hierarchical merging of local density models into sub-global and global
//! models over binary or Tree-P topologies.
//!
//! Merging a pair of models runs in two steps: cluster extension (noise
//! from the other site is absorbed by clusters whose representatives reach
//! it) and cluster merging. When the two local epsilon values are close
//! (difference within the disaggregating threshold) whole clusters merge
//! under the smaller epsilon; otherwise individual representative pairs of
//! the larger-epsilon model migrate into clusters of the smaller-epsilon
//! model under an averaged epsilon.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Metric, Point, PointId};
use crate::dbscan::{Label, LocalDensityModel, RepresentativePair};
use crate::error::{Error, Result};
use crate::sim::topology::{NodeId, Topology};
use crate::sim::trace::frame_bytes;
use crate::util::{max_weight_assignment, UnionFind};

/// Disaggregating threshold: the epsilon difference above which two models
/// are merged by representative migration instead of direct aggregation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum ThetaRule {
    /// theta = fraction * min(E_x, E_y).
    FractionOfMinEps(f64),
    Absolute(f64),
}

impl Default for ThetaRule {
    fn default() -> Self {
        ThetaRule::FractionOfMinEps(0.25)
    }
}

impl ThetaRule {
    pub fn threshold(&self, ex: f64, ey: f64) -> f64 {
        match *self {
            ThetaRule::FractionOfMinEps(f) => f * ex.min(ey),
            ThetaRule::Absolute(t) => t,
        }
    }
}

/// Epsilon used in the disaggregating case in place of min(E_x, E_y).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum EpsAverRule {
    #[default]
    Mean,
    Min,
    Explicit(f64),
}

impl EpsAverRule {
    pub fn value(&self, ex: f64, ey: f64) -> f64 {
        match *self {
            EpsAverRule::Mean => 0.5 * (ex + ey),
            EpsAverRule::Min => ex.min(ey),
            EpsAverRule::Explicit(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MergeConfig {
    #[serde(default)]
    pub theta: ThetaRule,
    #[serde(default)]
    pub eps_aver: EpsAverRule,
    #[serde(default)]
    pub metric: Metric,
}

/// Origin of a merged cluster: the site and local cluster id it came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub site: usize,
    pub cluster: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergedCluster {
    pub id: usize,
    pub pairs: Vec<RepresentativePair>,
    /// Points added to the cluster while merging: absorbed noise and the
    /// endpoints of migrated representative pairs (the A sets).
    pub absorbed: Vec<Point>,
    pub provenance: Vec<Provenance>,
}

/// Result of merging local models; same shape as a local model plus the
/// absorbed set and provenance of each cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergedModel {
    pub eps: f64,
    pub minpts: usize,
    pub clusters: Vec<MergedCluster>,
    pub noise: Vec<Point>,
}

impl MergedModel {
    pub fn from_local(site: usize, model: &LocalDensityModel) -> Self {
        MergedModel {
            eps: model.eps,
            minpts: model.minpts,
            clusters: model
                .clusters
                .iter()
                .map(|c| MergedCluster {
                    id: c.id,
                    pairs: c.pairs.clone(),
                    absorbed: Vec::new(),
                    provenance: vec![Provenance {
                        site,
                        cluster: c.id,
                    }],
                })
                .collect(),
            noise: model.noise.clone(),
        }
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn dim(&self) -> Option<usize> {
        self.clusters
            .iter()
            .flat_map(|c| c.pairs.first())
            .map(|p| p.s.dim())
            .next()
            .or_else(|| self.noise.first().map(Point::dim))
    }
}

/// Splits noise into the points reachable from a cluster's representatives
/// (within eps of some pair endpoint, inclusive) and the rest.
pub fn absorb_noise(
    pairs: &[RepresentativePair],
    noise: &[Point],
    eps: f64,
    metric: Metric,
) -> (Vec<Point>, Vec<Point>) {
    let mut absorbed = Vec::new();
    let mut remaining = Vec::new();
    for p in noise {
        let hit = pairs.iter().any(|pair| {
            pair.endpoints()
                .iter()
                .any(|e| metric.dist(&p.coords, &e.coords) <= eps)
        });
        if hit {
            absorbed.push(p.clone());
        } else {
            remaining.push(p.clone());
        }
    }
    (absorbed, remaining)
}

/// Nearest witness distance between a point and a cluster's pair endpoints.
fn witness_distance(point: &Point, pairs: &[RepresentativePair], metric: Metric) -> f64 {
    pairs
        .iter()
        .flat_map(RepresentativePair::endpoints)
        .map(|e| metric.dist(&point.coords, &e.coords))
        .fold(f64::INFINITY, f64::min)
}

/// Whether two clusters satisfy the merge condition: some cross pair of
/// representative endpoints lies within eps.
fn clusters_linked(
    a: &[RepresentativePair],
    b: &[RepresentativePair],
    eps: f64,
    metric: Metric,
) -> bool {
    a.iter().any(|pa| {
        pa.endpoints()
            .iter()
            .any(|ea| witness_distance(ea, b, metric) <= eps)
    })
}

/// Assigns each noise point to the cluster with the nearest in-range
/// witness, if any.
fn assign_noise(
    noise: &[Point],
    clusters: &[MergedCluster],
    eps: f64,
    metric: Metric,
) -> Vec<Option<usize>> {
    noise
        .iter()
        .map(|p| {
            let mut best: Option<(f64, usize)> = None;
            for (idx, cluster) in clusters.iter().enumerate() {
                let d = witness_distance(p, &cluster.pairs, metric);
                if d <= eps && best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, idx));
                }
            }
            best.map(|(_, idx)| idx)
        })
        .collect()
}

/// Merges two models into a new sub-global model. Both models must share
/// the dimension and the minpts their local clusterings used.
pub fn merge_pair(x: &MergedModel, y: &MergedModel, cfg: &MergeConfig) -> Result<MergedModel> {
    if x.minpts != y.minpts {
        return Err(Error::InvalidParameter(format!(
            "models built with different minpts: {} vs {}",
            x.minpts, y.minpts
        )));
    }
    if let (Some(dx), Some(dy)) = (x.dim(), y.dim()) {
        if dx != dy {
            return Err(Error::DimensionMismatch {
                expected: dx,
                got: dy,
            });
        }
    }
    let (ex, ey) = (x.eps, y.eps);
    let eps = ex.min(ey);
    let delta = (ex - ey).abs();
    let theta = cfg.theta.threshold(ex, ey);
    if delta <= theta {
        Ok(direct_merge(x, y, eps, x.minpts, cfg.metric))
    } else {
        let eaver = cfg.eps_aver.value(ex, ey);
        let (small, large) = if ex <= ey { (x, y) } else { (y, x) };
        Ok(disaggregate_merge(small, large, eaver, x.minpts, cfg.metric))
    }
}

fn direct_merge(
    x: &MergedModel,
    y: &MergedModel,
    eps: f64,
    minpts: usize,
    metric: Metric,
) -> MergedModel {
    // Step 1: cluster extension, both directions.
    let y_noise_target = assign_noise(&y.noise, &x.clusters, eps, metric);
    let x_noise_target = assign_noise(&x.noise, &y.clusters, eps, metric);

    // Step 2: merge clusters linked by representative endpoints, closing
    // the relation transitively.
    let nx = x.clusters.len();
    let ny = y.clusters.len();
    let mut uf = UnionFind::new(nx + ny);
    for (i, cx) in x.clusters.iter().enumerate() {
        for (j, cy) in y.clusters.iter().enumerate() {
            if clusters_linked(&cx.pairs, &cy.pairs, eps, metric) {
                uf.union(i, nx + j);
            }
        }
    }

    // Components ordered by smallest member index, x clusters first.
    let mut component_of: BTreeMap<usize, usize> = BTreeMap::new();
    let mut clusters: Vec<MergedCluster> = Vec::new();
    for node in 0..nx + ny {
        let root = uf.find(node);
        let cid = *component_of.entry(root).or_insert_with(|| {
            clusters.push(MergedCluster {
                id: clusters.len(),
                pairs: Vec::new(),
                absorbed: Vec::new(),
                provenance: Vec::new(),
            });
            clusters.len() - 1
        });
        let source = if node < nx {
            &x.clusters[node]
        } else {
            &y.clusters[node - nx]
        };
        clusters[cid].pairs.extend(source.pairs.iter().cloned());
        clusters[cid]
            .absorbed
            .extend(source.absorbed.iter().cloned());
        clusters[cid]
            .provenance
            .extend(source.provenance.iter().copied());
    }
    let mut uf = uf;
    let mut noise = Vec::new();
    for (p, target) in x.noise.iter().zip(&x_noise_target) {
        match target {
            Some(j) => {
                let cid = component_of[&uf.find(nx + *j)];
                clusters[cid].absorbed.push(p.clone());
            }
            None => noise.push(p.clone()),
        }
    }
    for (p, target) in y.noise.iter().zip(&y_noise_target) {
        match target {
            Some(i) => {
                let cid = component_of[&uf.find(*i)];
                clusters[cid].absorbed.push(p.clone());
            }
            None => noise.push(p.clone()),
        }
    }

    MergedModel {
        eps,
        minpts,
        clusters,
        noise,
    }
}

fn disaggregate_merge(
    small: &MergedModel,
    large: &MergedModel,
    eps_aver: f64,
    minpts: usize,
    metric: Metric,
) -> MergedModel {
    let mut clusters: Vec<MergedCluster> = small.clusters.clone();

    // Step 1: clusters of the smaller-epsilon model absorb the other
    // site's noise. The larger-epsilon side does not extend.
    let noise_target = assign_noise(&large.noise, &clusters, eps_aver, metric);
    let mut remaining_large_noise = Vec::new();
    for (p, target) in large.noise.iter().zip(&noise_target) {
        match target {
            Some(i) => clusters[*i].absorbed.push(p.clone()),
            None => remaining_large_noise.push(p.clone()),
        }
    }

    // Step 2: migrate individual representative pairs of the larger-epsilon
    // model into the nearest satisfying cluster.
    let mut survivors: Vec<MergedCluster> = Vec::new();
    for source in &large.clusters {
        let mut kept = Vec::new();
        let mut first_target: Option<usize> = None;
        for pair in &source.pairs {
            let mut best: Option<(f64, usize)> = None;
            for (idx, cluster) in clusters.iter().enumerate() {
                let d = pair
                    .endpoints()
                    .iter()
                    .map(|e| witness_distance(e, &cluster.pairs, metric))
                    .fold(f64::INFINITY, f64::min);
                if d <= eps_aver && best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, idx));
                }
            }
            match best {
                Some((_, idx)) => {
                    clusters[idx].absorbed.push(pair.s.clone());
                    clusters[idx].absorbed.push(pair.c.clone());
                    first_target.get_or_insert(idx);
                }
                None => kept.push(pair.clone()),
            }
        }
        if kept.is_empty() {
            // Fully migrated: its earlier absorbed points and provenance
            // follow the first pair's target so nothing is lost.
            let target = first_target.expect("cluster with no pairs");
            clusters[target]
                .absorbed
                .extend(source.absorbed.iter().cloned());
            clusters[target]
                .provenance
                .extend(source.provenance.iter().copied());
        } else {
            survivors.push(MergedCluster {
                id: 0,
                pairs: kept,
                absorbed: source.absorbed.clone(),
                provenance: source.provenance.clone(),
            });
        }
    }
    clusters.extend(survivors);
    for (id, c) in clusters.iter_mut().enumerate() {
        c.id = id;
    }

    let mut noise = small.noise.clone();
    noise.extend(remaining_large_noise);
    MergedModel {
        eps: eps_aver,
        minpts,
        clusters,
        noise,
    }
}

/// One merge performed at a topology node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeTraceEntry {
    pub node: NodeId,
    pub inputs: Vec<NodeId>,
    pub input_clusters: Vec<usize>,
    pub output_clusters: usize,
    pub bytes_in: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelTraceEntry {
    pub level: usize,
    pub merges: Vec<MergeTraceEntry>,
}

/// Full record of a hierarchical merge: the model computed at every
/// topology node plus a per-level trace of models in/out and byte counts.
#[derive(Clone, Debug)]
pub struct MergeRun {
    pub node_models: BTreeMap<NodeId, MergedModel>,
    pub level_trace: Vec<LevelTraceEntry>,
    pub root: NodeId,
}

impl MergeRun {
    pub fn root_model(&self) -> &MergedModel {
        &self.node_models[&self.root]
    }
}

/// Merges leaf models along the topology, recording every internal merge.
/// Children of a node are merged left-to-right by repeated [`merge_pair`].
pub fn merge_over(
    models: &[LocalDensityModel],
    topology: &Topology,
    cfg: &MergeConfig,
) -> Result<MergeRun> {
    if models.len() != topology.leaf_count() {
        return Err(Error::InvalidParameter(format!(
            "{} models for a topology with {} leaves",
            models.len(),
            topology.leaf_count()
        )));
    }
    let mut node_models: BTreeMap<NodeId, MergedModel> = models
        .iter()
        .enumerate()
        .map(|(site, m)| {
            (
                topology.leaf_of_site(site),
                MergedModel::from_local(site, m),
            )
        })
        .collect();
    let mut level_trace = Vec::new();
    for (level, nodes) in topology.levels().iter().enumerate().skip(1) {
        let mut merges = Vec::new();
        for &node in nodes {
            if node_models.contains_key(&node) {
                continue; // promoted without a merge partner
            }
            let children = &topology.node(node).children;
            let mut bytes_in = 0;
            let mut input_clusters = Vec::new();
            let mut acc: Option<MergedModel> = None;
            for &child in children {
                let child_model = node_models
                    .get(&child)
                    .expect("children computed before parents");
                bytes_in += frame_bytes(child_model);
                input_clusters.push(child_model.cluster_count());
                acc = Some(match acc {
                    None => child_model.clone(),
                    Some(prev) => merge_pair(&prev, child_model, cfg)?,
                });
            }
            let merged = acc.expect("internal node without children");
            merges.push(MergeTraceEntry {
                node,
                inputs: children.clone(),
                input_clusters,
                output_clusters: merged.cluster_count(),
                bytes_in,
            });
            node_models.insert(node, merged);
        }
        level_trace.push(LevelTraceEntry { level, merges });
    }
    Ok(MergeRun {
        node_models,
        level_trace,
        root: topology.root(),
    })
}

/// Merges leaf models all the way to the root and returns the global model.
pub fn hierarchical_merge(
    models: &[LocalDensityModel],
    topology: &Topology,
    cfg: &MergeConfig,
) -> Result<MergedModel> {
    Ok(merge_over(models, topology, cfg)?.root_model().clone())
}

/// Stops the merge at `level` (0 = leaves) and returns that level's
/// sub-global models in node order.
pub fn hierarchical_merge_to_level(
    models: &[LocalDensityModel],
    topology: &Topology,
    cfg: &MergeConfig,
    level: usize,
) -> Result<Vec<MergedModel>> {
    if level >= topology.levels().len() {
        return Err(Error::InvalidParameter(format!(
            "level {level} out of range; topology has {} levels",
            topology.levels().len()
        )));
    }
    let run = merge_over(models, topology, cfg)?;
    Ok(topology.levels()[level]
        .iter()
        .map(|node| run.node_models[node].clone())
        .collect())
}

/// Reconstructs point membership from a merged model: a point belongs to
/// the cluster of its nearest representative endpoint if that endpoint is
/// within the model epsilon, otherwise it is noise.
pub fn assign_members(
    model: &MergedModel,
    ds: &Dataset,
    metric: Metric,
) -> BTreeMap<PointId, Label> {
    ds.iter()
        .map(|(id, p)| {
            let mut best: Option<(f64, usize)> = None;
            for (idx, cluster) in model.clusters.iter().enumerate() {
                let d = witness_distance(p, &cluster.pairs, metric);
                if d <= model.eps && best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, idx));
                }
            }
            let label = match best {
                Some((_, idx)) => Label::Cluster(idx),
                None => Label::Noise,
            };
            (id, label)
        })
        .collect()
}

/// Agreement between a distributed and a centralized labeling in [0, 1]:
/// clusters are matched one-to-one by maximum overlap on the contingency
/// table, noise matches only noise, and the matched fraction is returned.
pub fn quality_p(
    distributed: &BTreeMap<PointId, Label>,
    centralized: &BTreeMap<PointId, Label>,
) -> Result<f64> {
    if distributed.len() != centralized.len() || !distributed.keys().eq(centralized.keys()) {
        return Err(Error::InvalidParameter(
            "labelings cover different point sets".into(),
        ));
    }
    let n = distributed.len();
    if n == 0 {
        return Ok(1.0);
    }
    let mut dist_ids: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cent_ids: BTreeMap<usize, usize> = BTreeMap::new();
    let mut both_noise = 0u64;
    let mut cells: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for (id, dl) in distributed {
        let cl = centralized[id];
        match (*dl, cl) {
            (Label::Noise, Label::Noise) => both_noise += 1,
            (Label::Cluster(a), Label::Cluster(b)) => {
                let next_a = dist_ids.len();
                let i = *dist_ids.entry(a).or_insert(next_a);
                let next_b = cent_ids.len();
                let j = *cent_ids.entry(b).or_insert(next_b);
                *cells.entry((i, j)).or_insert(0) += 1;
            }
            _ => {}
        }
    }
    let mut weights = vec![vec![0u64; cent_ids.len()]; dist_ids.len()];
    for ((i, j), w) in cells {
        weights[i][j] = w;
    }
    let matched = if weights.is_empty() {
        0
    } else {
        max_weight_assignment(&weights)
    };
    Ok((matched + both_noise) as f64 / n as f64)
}

/// Speedup of the distributed approach over centralized clustering for m
/// nodes, representative fraction mu, and N total points:
/// (m-1) * log N / ((mu^2 * m - 1) * log m).
pub fn speedup(m: usize, mu: f64, n_total: usize) -> Result<f64> {
    if m <= 1 {
        return Err(Error::InvalidParameter(
            "speedup requires m >= 2 (log m = 0 otherwise)".into(),
        ));
    }
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::InvalidParameter("mu must lie in (0, 1]".into()));
    }
    if n_total == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    let denom = mu * mu * m as f64 - 1.0;
    if denom < 0.0 {
        return Err(Error::InvalidParameter(
            "speedup requires mu^2 * m >= 1".into(),
        ));
    }
    Ok((m as f64 - 1.0) * (n_total as f64).ln() / (denom * (m as f64).ln()))
}
