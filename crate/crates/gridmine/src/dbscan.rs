//! Per-site DBSCAN clustering and construction of the compact local density
//! model (representative pairs, local epsilon, noise set).
//!
//! Core points are found with an inclusive epsilon neighborhood (the query
//! point counts toward `minpts`), clusters are the connected components of
//! the core-core reachability graph, and border points join the cluster of
//! their nearest core. That formulation makes the produced partition
//! independent of input order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Metric, Point, PointId};
use crate::error::{Error, Result};
use crate::util::UnionFind;

/// Cluster assignment of one point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Noise,
    Cluster(usize),
}

/// DBSCAN output aligned with the dataset order it was computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct Labeling {
    ids: Vec<PointId>,
    labels: Vec<Label>,
    core: Vec<bool>,
    cluster_count: usize,
}

impl Labeling {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_count
    }

    pub fn label_at(&self, pos: usize) -> Label {
        self.labels[pos]
    }

    pub fn is_core_at(&self, pos: usize) -> bool {
        self.core[pos]
    }

    pub fn iter(&self) -> impl Iterator<Item = (PointId, Label, bool)> + '_ {
        self.ids
            .iter()
            .zip(&self.labels)
            .zip(&self.core)
            .map(|((&id, &l), &c)| (id, l, c))
    }

    /// point-id -> label map over the whole domain.
    pub fn to_map(&self) -> BTreeMap<PointId, Label> {
        self.iter().map(|(id, l, _)| (id, l)).collect()
    }

    /// Cluster partition as id sets, indexed by cluster id.
    pub fn partition(&self) -> Vec<BTreeSet<PointId>> {
        let mut sets = vec![BTreeSet::new(); self.cluster_count];
        for (id, label, _) in self.iter() {
            if let Label::Cluster(c) = label {
                sets[c].insert(id);
            }
        }
        sets
    }

    pub fn noise_set(&self) -> BTreeSet<PointId> {
        self.iter()
            .filter(|(_, l, _)| *l == Label::Noise)
            .map(|(id, _, _)| id)
            .collect()
    }
}

/// Uniform grid over the feature space with cell size eps. Both supported
/// metrics satisfy |coord delta| <= dist, so candidates within eps always
/// sit in the 3^d adjacent cells.
struct GridIndex {
    cell: f64,
    keys: Vec<Vec<i64>>,
    cells: HashMap<Vec<i64>, Vec<usize>>,
    brute: bool,
}

impl GridIndex {
    fn build(ds: &Dataset, eps: f64) -> Self {
        // 3^d cell probes stop paying off in higher dimensions.
        let brute = ds.dim() > 8;
        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        let mut keys = Vec::with_capacity(ds.len());
        if !brute {
            for (pos, p) in ds.points().iter().enumerate() {
                let key: Vec<i64> = p.coords.iter().map(|&x| (x / eps).floor() as i64).collect();
                cells.entry(key.clone()).or_default().push(pos);
                keys.push(key);
            }
        }
        GridIndex {
            cell: eps,
            keys,
            cells,
            brute,
        }
    }

    /// Positions (including `pos` itself) within eps of the point at `pos`.
    fn neighbors(&self, ds: &Dataset, pos: usize, eps: f64, metric: Metric) -> Vec<usize> {
        debug_assert_eq!(self.cell, eps);
        let origin = &ds.points()[pos];
        let mut out = Vec::new();
        if self.brute {
            for (q, p) in ds.points().iter().enumerate() {
                if metric.dist(&origin.coords, &p.coords) <= eps {
                    out.push(q);
                }
            }
            return out;
        }
        let key = &self.keys[pos];
        let mut probe = key.clone();
        self.visit_cells(ds, origin, eps, metric, key, &mut probe, 0, &mut out);
        out.sort_unstable();
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn visit_cells(
        &self,
        ds: &Dataset,
        origin: &Point,
        eps: f64,
        metric: Metric,
        key: &[i64],
        probe: &mut Vec<i64>,
        depth: usize,
        out: &mut Vec<usize>,
    ) {
        if depth == key.len() {
            if let Some(bucket) = self.cells.get(probe.as_slice()) {
                for &q in bucket {
                    if metric.dist(&origin.coords, &ds.points()[q].coords) <= eps {
                        out.push(q);
                    }
                }
            }
            return;
        }
        for delta in -1..=1 {
            probe[depth] = key[depth] + delta;
            self.visit_cells(ds, origin, eps, metric, key, probe, depth + 1, out);
        }
        probe[depth] = key[depth];
    }
}

/// Density-based clustering with parameters eps (inclusive neighborhood
/// radius) and minpts (core threshold, query point included).
pub fn dbscan(ds: &Dataset, eps: f64, minpts: usize, metric: Metric) -> Result<Labeling> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter("eps must be positive".into()));
    }
    if minpts == 0 {
        return Err(Error::InvalidParameter("minpts must be >= 1".into()));
    }
    let n = ds.len();
    if n == 0 {
        return Ok(Labeling {
            ids: Vec::new(),
            labels: Vec::new(),
            core: Vec::new(),
            cluster_count: 0,
        });
    }

    let grid = GridIndex::build(ds, eps);
    let neighborhoods: Vec<Vec<usize>> = (0..n)
        .map(|pos| grid.neighbors(ds, pos, eps, metric))
        .collect();
    let core: Vec<bool> = neighborhoods.iter().map(|nb| nb.len() >= minpts).collect();

    let mut uf = UnionFind::new(n);
    for pos in 0..n {
        if !core[pos] {
            continue;
        }
        for &q in &neighborhoods[pos] {
            if core[q] {
                uf.union(pos, q);
            }
        }
    }

    // Dense cluster ids in order of first core appearance.
    let mut cluster_of_root: HashMap<usize, usize> = HashMap::new();
    let mut labels = vec![Label::Noise; n];
    let mut cluster_count = 0;
    for pos in 0..n {
        if core[pos] {
            let root = uf.find(pos);
            let cid = *cluster_of_root.entry(root).or_insert_with(|| {
                let c = cluster_count;
                cluster_count += 1;
                c
            });
            labels[pos] = Label::Cluster(cid);
        }
    }
    // Border points join the cluster of the nearest core in range;
    // ties broken by lower point id so the result is order-independent.
    for pos in 0..n {
        if core[pos] {
            continue;
        }
        let mut best: Option<(f64, PointId, usize)> = None;
        for &q in &neighborhoods[pos] {
            if !core[q] {
                continue;
            }
            let d = metric.dist(&ds.points()[pos].coords, &ds.points()[q].coords);
            let key = (d, ds.id(q));
            if best.map_or(true, |(bd, bid, _)| key < (bd, bid)) {
                best = Some((d, ds.id(q), q));
            }
        }
        if let Some((_, _, q)) = best {
            labels[pos] = labels[q];
        }
    }

    Ok(Labeling {
        ids: ds.ids().to_vec(),
        labels,
        core,
        cluster_count,
    })
}

/// An absolute core point together with its furthest reachable core point,
/// coordinates cached for shipping. Point ids are only meaningful on the
/// site that built the pair and are dropped from the wire form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentativePair {
    pub s: Point,
    pub c: Point,
    #[serde(skip)]
    pub s_id: Option<PointId>,
    #[serde(skip)]
    pub c_id: Option<PointId>,
}

impl RepresentativePair {
    pub fn endpoints(&self) -> [&Point; 2] {
        [&self.s, &self.c]
    }
}

/// Representative pairs of one cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReps {
    pub id: usize,
    pub pairs: Vec<RepresentativePair>,
}

/// The compact local model shipped to merge sites in place of raw data:
/// representative pairs per cluster, the local epsilon, and local noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalDensityModel {
    pub eps: f64,
    pub minpts: usize,
    pub clusters: Vec<ClusterReps>,
    pub noise: Vec<Point>,
}

impl LocalDensityModel {
    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    /// Feature-space dimension, if the model holds any point.
    pub fn dim(&self) -> Option<usize> {
        self.clusters
            .iter()
            .flat_map(|c| c.pairs.first())
            .map(|p| p.s.dim())
            .next()
            .or_else(|| self.noise.first().map(Point::dim))
    }

    /// Total representative endpoints (two per pair).
    pub fn representative_point_count(&self) -> usize {
        self.clusters.iter().map(|c| c.pairs.len() * 2).sum()
    }
}

/// Selects, per cluster, a set of pairwise eps-separated core points that
/// jointly cover all of the cluster's cores, each paired with its furthest
/// core point in range. Selection scans cores in ascending point-id order,
/// so the output is deterministic.
pub fn absolute_core_set(
    labeling: &Labeling,
    ds: &Dataset,
    eps: f64,
    metric: Metric,
) -> Result<Vec<Vec<RepresentativePair>>> {
    if labeling.len() != ds.len() {
        return Err(Error::InvalidParameter(
            "labeling does not match dataset".into(),
        ));
    }
    // Per-cluster core positions, ordered by point id.
    let mut cores: Vec<Vec<usize>> = vec![Vec::new(); labeling.cluster_count()];
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.sort_by_key(|&pos| ds.id(pos));
    for pos in order {
        if !labeling.is_core_at(pos) {
            continue;
        }
        match labeling.label_at(pos) {
            Label::Cluster(c) => cores[c].push(pos),
            Label::Noise => {
                return Err(Error::InvalidParameter(
                    "core point labeled noise".into(),
                ))
            }
        }
    }

    let mut result = Vec::with_capacity(cores.len());
    for cluster_cores in &cores {
        if cluster_cores.is_empty() {
            return Err(Error::InvalidParameter(
                "cluster without core points".into(),
            ));
        }
        let mut selected: Vec<usize> = Vec::new();
        for &pos in cluster_cores {
            let blocked = selected.iter().any(|&s| {
                metric.dist(&ds.points()[s].coords, &ds.points()[pos].coords) <= eps
            });
            if !blocked {
                selected.push(pos);
            }
        }
        let pairs = selected
            .iter()
            .map(|&s| {
                // Furthest core of the same cluster within eps of s; the
                // neighborhood always contains s itself. Ties by lower id.
                let mut best = (0.0f64, ds.id(s), s);
                for &c in cluster_cores {
                    let d = metric.dist(&ds.points()[s].coords, &ds.points()[c].coords);
                    if d <= eps && (d > best.0 || (d == best.0 && ds.id(c) < best.1)) {
                        best = (d, ds.id(c), c);
                    }
                }
                let c = best.2;
                RepresentativePair {
                    s: ds.points()[s].clone(),
                    c: ds.points()[c].clone(),
                    s_id: Some(ds.id(s)),
                    c_id: Some(ds.id(c)),
                }
            })
            .collect();
        result.push(pairs);
    }
    Ok(result)
}

/// Runs DBSCAN and packages the result as a local density model.
pub fn build_local_model(
    ds: &Dataset,
    eps: f64,
    minpts: usize,
    metric: Metric,
) -> Result<LocalDensityModel> {
    let labeling = dbscan(ds, eps, minpts, metric)?;
    let reps = absolute_core_set(&labeling, ds, eps, metric)?;
    let clusters = reps
        .into_iter()
        .enumerate()
        .map(|(id, pairs)| ClusterReps { id, pairs })
        .collect();
    let mut noise = Vec::new();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.sort_by_key(|&pos| ds.id(pos));
    for pos in order {
        if labeling.label_at(pos) == Label::Noise {
            noise.push(ds.points()[pos].clone());
        }
    }
    Ok(LocalDensityModel {
        eps,
        minpts,
        clusters,
        noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_gaussian_mixture, GaussianComponent};

    fn ds_from(coords: &[&[f64]]) -> Dataset {
        Dataset::new(coords.iter().map(|c| Point::from(c.to_vec())).collect()).unwrap()
    }

    /// Independent oracle: cores by quadratic scan, clusters by BFS over
    /// core-core reachability.
    fn oracle_dbscan(
        ds: &Dataset,
        eps: f64,
        minpts: usize,
        metric: Metric,
    ) -> (Vec<bool>, Vec<BTreeSet<PointId>>, BTreeSet<PointId>) {
        let n = ds.len();
        let within = |a: usize, b: usize| {
            metric.dist(&ds.points()[a].coords, &ds.points()[b].coords) <= eps
        };
        let core: Vec<bool> = (0..n)
            .map(|i| (0..n).filter(|&j| within(i, j)).count() >= minpts)
            .collect();
        let mut comp = vec![usize::MAX; n];
        let mut clusters: Vec<BTreeSet<PointId>> = Vec::new();
        for start in 0..n {
            if !core[start] || comp[start] != usize::MAX {
                continue;
            }
            let cid = clusters.len();
            clusters.push(BTreeSet::new());
            let mut stack = vec![start];
            comp[start] = cid;
            while let Some(i) = stack.pop() {
                clusters[cid].insert(ds.id(i));
                for j in 0..n {
                    if core[j] && comp[j] == usize::MAX && within(i, j) {
                        comp[j] = cid;
                        stack.push(j);
                    }
                }
            }
        }
        let mut noise = BTreeSet::new();
        for i in 0..n {
            if core[i] {
                continue;
            }
            if (0..n).any(|j| core[j] && within(i, j)) {
                // border point; reachable, not noise
            } else {
                noise.insert(ds.id(i));
            }
        }
        (core, clusters, noise)
    }

    #[test]
    fn collinear_grid_single_cluster_no_noise() {
        let coords: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let ds = Dataset::new(coords.into_iter().map(Point::from).collect()).unwrap();
        let labeling = dbscan(&ds, 1.5, 3, Metric::Euclidean).unwrap();
        assert_eq!(labeling.cluster_count(), 1);
        assert!(labeling.noise_set().is_empty());
    }

    #[test]
    fn tiny_eps_minpts_two_all_noise() {
        let ds = ds_from(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let labeling = dbscan(&ds, 1e-12, 2, Metric::Euclidean).unwrap();
        assert_eq!(labeling.cluster_count(), 0);
        assert_eq!(labeling.noise_set().len(), 3);
    }

    #[test]
    fn empty_dataset_empty_labeling() {
        let ds = Dataset::new(Vec::new()).unwrap();
        let labeling = dbscan(&ds, 1.0, 2, Metric::Euclidean).unwrap();
        assert!(labeling.is_empty());
        assert_eq!(labeling.cluster_count(), 0);
    }

    #[test]
    fn minpts_one_labels_everything_core() {
        let ds = ds_from(&[&[0.0], &[100.0], &[200.0]]);
        let labeling = dbscan(&ds, 1.0, 1, Metric::Euclidean).unwrap();
        assert_eq!(labeling.cluster_count(), 3);
        assert!((0..3).all(|pos| labeling.is_core_at(pos)));
    }

    #[test]
    fn eps_boundary_is_inclusive() {
        let ds = ds_from(&[&[0.0], &[1.0]]);
        let labeling = dbscan(&ds, 1.0, 2, Metric::Euclidean).unwrap();
        assert_eq!(labeling.cluster_count(), 1);
        assert!(labeling.noise_set().is_empty());
    }

    #[test]
    fn matches_oracle_on_random_data() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for case in 0..25 {
            let n = rng.random_range(5..60);
            let points: Vec<Point> = (0..n)
                .map(|_| {
                    Point::from(vec![
                        rng.random_range(0.0..4.0f64),
                        rng.random_range(0.0..4.0f64),
                    ])
                })
                .collect();
            let ds = Dataset::new(points).unwrap();
            let eps = rng.random_range(0.2..1.0);
            let minpts = rng.random_range(1..6);
            let metric = if case % 2 == 0 {
                Metric::Euclidean
            } else {
                Metric::Manhattan
            };
            let labeling = dbscan(&ds, eps, minpts, metric).unwrap();
            let (core, clusters, noise) = oracle_dbscan(&ds, eps, minpts, metric);
            for pos in 0..ds.len() {
                assert_eq!(labeling.is_core_at(pos), core[pos], "core flag at {pos}");
            }
            // Core partition must match exactly (set of sets).
            let mut mine: Vec<BTreeSet<PointId>> = labeling
                .partition()
                .into_iter()
                .map(|s| {
                    s.into_iter()
                        .filter(|id| {
                            let pos = ds.ids().iter().position(|i| i == id).unwrap();
                            core[pos]
                        })
                        .collect()
                })
                .collect();
            let mut theirs = clusters;
            mine.sort();
            theirs.sort();
            assert_eq!(mine, theirs, "core partition eps={eps} minpts={minpts}");
            assert_eq!(labeling.noise_set(), noise);
        }
    }

    #[test]
    fn partition_invariant_under_permutation() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let comps = [
            GaussianComponent {
                center: vec![0.0, 0.0],
                stdev: 0.3,
                count: 40,
            },
            GaussianComponent {
                center: vec![5.0, 5.0],
                stdev: 0.3,
                count: 40,
            },
        ];
        let ds = gen_gaussian_mixture(&comps, 21).unwrap();
        let labeling = dbscan(&ds, 0.5, 4, Metric::Euclidean).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..5 {
            let mut order: Vec<usize> = (0..ds.len()).collect();
            order.shuffle(&mut rng);
            let ids = order.iter().map(|&i| ds.id(i)).collect();
            let points = order.iter().map(|&i| ds.points()[i].clone()).collect();
            let shuffled = Dataset::from_parts(ids, points).unwrap();
            let other = dbscan(&shuffled, 0.5, 4, Metric::Euclidean).unwrap();
            let mut a = labeling.partition();
            let mut b = other.partition();
            a.sort();
            b.sort();
            assert_eq!(a, b);
            assert_eq!(labeling.noise_set(), other.noise_set());
        }
    }

    #[test]
    fn absolute_cores_single_cover() {
        // All cores within eps of point 0.
        let ds = ds_from(&[&[0.0, 0.0], &[0.3, 0.0], &[0.0, 0.3], &[-0.3, 0.0]]);
        let labeling = dbscan(&ds, 0.5, 2, Metric::Euclidean).unwrap();
        assert_eq!(labeling.cluster_count(), 1);
        let reps = absolute_core_set(&labeling, &ds, 0.5, Metric::Euclidean).unwrap();
        assert_eq!(reps[0].len(), 1);
        assert_eq!(reps[0][0].s_id, Some(0));
    }

    #[test]
    fn absolute_cores_two_separated_self_pairs() {
        // Two dense pairs far apart: per cluster a single absolute core
        // whose furthest reachable core is its partner.
        let ds = ds_from(&[&[0.0], &[0.4], &[10.0], &[10.4]]);
        let labeling = dbscan(&ds, 0.5, 2, Metric::Euclidean).unwrap();
        assert_eq!(labeling.cluster_count(), 2);
        let reps = absolute_core_set(&labeling, &ds, 0.5, Metric::Euclidean).unwrap();
        for pairs in &reps {
            assert_eq!(pairs.len(), 1);
            assert_ne!(pairs[0].s_id, pairs[0].c_id);
        }
        // Two isolated cores beyond eps of each other in the same cluster
        // cannot exist; exercise the self-pair case with minpts 1.
        let ds2 = ds_from(&[&[0.0], &[10.0]]);
        let labeling2 = dbscan(&ds2, 0.5, 1, Metric::Euclidean).unwrap();
        let reps2 = absolute_core_set(&labeling2, &ds2, 0.5, Metric::Euclidean).unwrap();
        assert_eq!(reps2.len(), 2);
        for pairs in &reps2 {
            assert_eq!(pairs.len(), 1);
            assert_eq!(pairs[0].s_id, pairs[0].c_id);
        }
    }

    #[test]
    fn absolute_cores_separation_and_coverage() {
        // 30-core cluster; verify both predicates exhaustively.
        let comps = [GaussianComponent {
            center: vec![0.0, 0.0],
            stdev: 0.5,
            count: 60,
        }];
        let ds = gen_gaussian_mixture(&comps, 13).unwrap();
        let eps = 0.35;
        let labeling = dbscan(&ds, eps, 4, Metric::Euclidean).unwrap();
        assert!(labeling.cluster_count() >= 1);
        let reps = absolute_core_set(&labeling, &ds, eps, Metric::Euclidean).unwrap();
        for (cid, pairs) in reps.iter().enumerate() {
            let abs_pos: Vec<usize> = pairs
                .iter()
                .map(|p| {
                    let id = p.s_id.unwrap();
                    ds.ids().iter().position(|&i| i == id).unwrap()
                })
                .collect();
            // Pairwise separation.
            for (i, &a) in abs_pos.iter().enumerate() {
                for &b in &abs_pos[i + 1..] {
                    let d = Metric::Euclidean.dist(&ds.points()[a].coords, &ds.points()[b].coords);
                    assert!(d > eps, "absolute cores too close: {d}");
                }
            }
            // Coverage of every core in the cluster.
            for pos in 0..ds.len() {
                if labeling.is_core_at(pos) && labeling.label_at(pos) == Label::Cluster(cid) {
                    let covered = abs_pos.iter().any(|&a| {
                        Metric::Euclidean.dist(&ds.points()[a].coords, &ds.points()[pos].coords)
                            <= eps
                    });
                    assert!(covered, "core at pos {pos} uncovered");
                }
            }
            // Partner is the furthest in-range core.
            for p in pairs {
                let d = Metric::Euclidean.dist(&p.s.coords, &p.c.coords);
                assert!(d <= eps);
            }
        }
    }

    #[test]
    fn representative_compression_on_dense_cluster() {
        let comps = [GaussianComponent {
            center: vec![0.0, 0.0],
            stdev: 0.4,
            count: 200,
        }];
        let ds = gen_gaussian_mixture(&comps, 29).unwrap();
        let labeling = dbscan(&ds, 0.25, 4, Metric::Euclidean).unwrap();
        let reps = absolute_core_set(&labeling, &ds, 0.25, Metric::Euclidean).unwrap();
        for (cid, pairs) in reps.iter().enumerate() {
            let size = labeling.partition()[cid].len();
            let n_cores = (0..ds.len())
                .filter(|&p| labeling.is_core_at(p) && labeling.label_at(p) == Label::Cluster(cid))
                .count();
            assert!(pairs.len() <= n_cores);
            if size >= 50 {
                assert!(
                    (pairs.len() as f64) < 0.3 * size as f64,
                    "compression failed: {} reps for {} points",
                    pairs.len(),
                    size
                );
            }
        }
    }

    #[test]
    fn noise_is_far_from_all_representatives() {
        let comps = [
            GaussianComponent {
                center: vec![0.0, 0.0],
                stdev: 0.3,
                count: 80,
            },
            GaussianComponent {
                center: vec![6.0, 0.0],
                stdev: 2.5,
                count: 10,
            },
        ];
        let ds = gen_gaussian_mixture(&comps, 41).unwrap();
        let eps = 0.3;
        let labeling = dbscan(&ds, eps, 4, Metric::Euclidean).unwrap();
        let model = build_local_model(&ds, eps, 4, Metric::Euclidean).unwrap();
        let noise_ids = labeling.noise_set();
        for (id, p) in ds.iter() {
            if !noise_ids.contains(&id) {
                continue;
            }
            for cluster in &model.clusters {
                for pair in &cluster.pairs {
                    for endpoint in pair.endpoints() {
                        let d = Metric::Euclidean.dist(&p.coords, &endpoint.coords);
                        assert!(d > eps, "noise {id} within eps of a representative");
                    }
                }
            }
        }
    }

    #[test]
    fn all_noise_dataset_gives_empty_model() {
        let ds = ds_from(&[&[0.0, 0.0], &[10.0, 0.0], &[0.0, 10.0]]);
        let model = build_local_model(&ds, 0.5, 2, Metric::Euclidean).unwrap();
        assert!(model.clusters.is_empty());
        assert_eq!(model.noise.len(), 3);
    }

    #[test]
    fn local_model_wire_format() {
        let ds = ds_from(&[&[0.0, 0.0], &[0.2, 0.0], &[0.4, 0.0], &[9.0, 9.0]]);
        let model = build_local_model(&ds, 0.5, 3, Metric::Euclidean).unwrap();
        let json = serde_json::to_value(&model).unwrap();
        assert!(json["eps"].is_number());
        assert!(json["minpts"].is_number());
        let clusters = json["clusters"].as_array().unwrap();
        assert_eq!(clusters.len(), 1);
        assert!(clusters[0]["id"].is_number());
        let pairs = clusters[0]["pairs"].as_array().unwrap();
        assert!(pairs[0]["s"].is_array());
        assert!(pairs[0]["c"].is_array());
        let noise = json["noise"].as_array().unwrap();
        assert_eq!(noise.len(), 1);
        assert!(noise[0].is_array());
        // Round-trips through the wire form.
        let back: LocalDensityModel = serde_json::from_value(json).unwrap();
        assert_eq!(back.cluster_count(), model.cluster_count());
        assert_eq!(back.noise, model.noise);
    }
}
