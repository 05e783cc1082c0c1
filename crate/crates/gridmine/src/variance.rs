//! Variance-based distributed clustering: per-site subcluster generation,
//! global merging of subcluster statistics under an increasing-variance
//! limit, and border perturbation.
//!
//! Sites ship only (center, size, variance) triples per subcluster, so the
//! aggregator can merge without moving data: pooled statistics of a union
//! are exactly computable from the parts.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use ordered_float::NotNan;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Metric, Point};
use crate::error::{Error, Result};

/// Key of a subcluster: (site, local id).
pub type SubKey = (usize, usize);

/// Sufficient statistics of one subcluster: center (mean of members),
/// member count, and scalar variance (within-cluster sum of squared
/// Euclidean distances to the center).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubclusterStat {
    pub site: usize,
    pub local_id: usize,
    pub size: usize,
    pub center: Point,
    pub variance: f64,
}

impl SubclusterStat {
    /// Exact statistics of a concrete member set.
    pub fn from_points<'a, I>(site: usize, local_id: usize, points: I) -> Self
    where
        I: IntoIterator<Item = &'a Point> + Clone,
    {
        let mut size = 0usize;
        let mut center: Vec<f64> = Vec::new();
        for p in points.clone() {
            if center.is_empty() {
                center = vec![0.0; p.dim()];
            }
            for (c, x) in center.iter_mut().zip(&p.coords) {
                *c += x;
            }
            size += 1;
        }
        assert!(size > 0, "subcluster needs at least one member");
        for c in &mut center {
            *c /= size as f64;
        }
        let mut variance = 0.0;
        for p in points {
            variance += p
                .coords
                .iter()
                .zip(&center)
                .map(|(x, c)| (x - c) * (x - c))
                .sum::<f64>();
        }
        SubclusterStat {
            site,
            local_id,
            size,
            center: Point { coords: center },
            variance,
        }
    }

    pub fn key(&self) -> SubKey {
        (self.site, self.local_id)
    }
}

/// Pooled statistics of the union of two subclusters. Exact: matches the
/// directly computed statistic of the concatenated member sets.
pub fn union_stat(a: &SubclusterStat, b: &SubclusterStat) -> SubclusterStat {
    assert_eq!(a.center.dim(), b.center.dim(), "dimension mismatch");
    let size = a.size + b.size;
    let (wa, wb) = (a.size as f64, b.size as f64);
    let center: Vec<f64> = a
        .center
        .coords
        .iter()
        .zip(&b.center.coords)
        .map(|(ca, cb)| (wa * ca + wb * cb) / (wa + wb))
        .collect();
    let sep: f64 = a
        .center
        .coords
        .iter()
        .zip(&b.center.coords)
        .map(|(ca, cb)| (ca - cb) * (ca - cb))
        .sum();
    let variance = a.variance + b.variance + wa * wb / (wa + wb) * sep;
    let key = a.key().min(b.key());
    SubclusterStat {
        site: key.0,
        local_id: key.1,
        size,
        center: Point { coords: center },
        variance,
    }
}

/// Local clustering algorithm used to build subclusters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalAlgo {
    #[default]
    Kmeans,
    Kharmonic,
}

/// Runs the chosen local algorithm and summarizes each of the k subclusters
/// as sufficient statistics. Statistics are recomputed from the final hard
/// assignment so centers are exact member means.
pub fn local_subclusters(
    ds: &Dataset,
    k: usize,
    algo: LocalAlgo,
    site: usize,
    seed: u64,
) -> Result<Vec<SubclusterStat>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if k > ds.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds dataset size {}",
            ds.len()
        )));
    }
    let points = ds.points();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_init(points, k, &mut rng);
    let assignment = match algo {
        LocalAlgo::Kmeans => lloyd(points, &mut centers),
        LocalAlgo::Kharmonic => {
            harmonic_iterate(points, &mut centers);
            let mut assignment = assign_nearest(points, &centers);
            fix_empty_clusters(points, &centers, &mut assignment, k);
            assignment
        }
    };
    let stats = (0..k)
        .map(|c| {
            let members: Vec<&Point> = assignment
                .iter()
                .enumerate()
                .filter(|(_, &a)| a == c)
                .map(|(i, _)| &points[i])
                .collect();
            SubclusterStat::from_points(site, c, members)
        })
        .collect();
    Ok(stats)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding.
fn plus_plus_init(points: &[Point], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let first = rng.random_range(0..points.len());
    let mut centers = vec![points[first].coords.clone()];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(&p.coords, &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // All mass at existing centers; take the lowest index.
            0
        } else {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        };
        centers.push(points[next].coords.clone());
        let latest = centers.last().unwrap().clone();
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(&p.coords, &latest));
        }
    }
    centers
}

fn assign_nearest(points: &[Point], centers: &[Vec<f64>]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let mut best = (f64::INFINITY, 0usize);
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(&p.coords, center);
                if d < best.0 {
                    best = (d, c);
                }
            }
            best.1
        })
        .collect()
}

/// Reassigns the farthest points of multi-member clusters into empty ones
/// so every cluster keeps at least one member.
fn fix_empty_clusters(
    points: &[Point],
    centers: &[Vec<f64>],
    assignment: &mut [usize],
    k: usize,
) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignment.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut donor: Option<(f64, usize)> = None;
        for (i, &a) in assignment.iter().enumerate() {
            if sizes[a] <= 1 {
                continue;
            }
            let d = sq_dist(&points[i].coords, &centers[a]);
            if donor.map_or(true, |(bd, _)| d > bd) {
                donor = Some((d, i));
            }
        }
        let (_, idx) = donor.expect("no donor for empty cluster");
        assignment[idx] = empty;
    }
}

/// Lloyd iterations until the assignment is stable.
fn lloyd(points: &[Point], centers: &mut [Vec<f64>]) -> Vec<usize> {
    let k = centers.len();
    let dim = points[0].dim();
    let mut assignment = assign_nearest(points, centers);
    fix_empty_clusters(points, centers, &mut assignment, k);
    for _ in 0..100 {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &a) in assignment.iter().enumerate() {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(&points[i].coords) {
                *s += x;
            }
        }
        for (c, (sum, count)) in centers.iter_mut().zip(sums.iter().zip(&counts)) {
            if *count > 0 {
                *c = sum.iter().map(|s| s / *count as f64).collect();
            }
        }
        let mut next = assign_nearest(points, centers);
        fix_empty_clusters(points, centers, &mut next, k);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    assignment
}

/// k-harmonic-means center updates (power parameter 3.5); the caller takes
/// a hard assignment afterwards for the statistics.
fn harmonic_iterate(points: &[Point], centers: &mut [Vec<f64>]) {
    const P: f64 = 3.5;
    const EPS: f64 = 1e-12;
    let k = centers.len();
    let dim = points[0].dim();
    for _ in 0..100 {
        let mut num = vec![vec![0.0; dim]; k];
        let mut den = vec![0.0; k];
        for p in points {
            let d: Vec<f64> = centers
                .iter()
                .map(|c| sq_dist(&p.coords, c).sqrt().max(EPS))
                .collect();
            let inv_p2: Vec<f64> = d.iter().map(|&x| x.powf(-(P + 2.0))).collect();
            let sum_inv_p: f64 = d.iter().map(|&x| x.powf(-P)).sum();
            let sum_inv_p2: f64 = inv_p2.iter().sum();
            let w = sum_inv_p2 / (sum_inv_p * sum_inv_p);
            for c in 0..k {
                let m = inv_p2[c] / sum_inv_p2;
                den[c] += m * w;
                for (n, x) in num[c].iter_mut().zip(&p.coords) {
                    *n += m * w * x;
                }
            }
        }
        let mut moved = 0.0f64;
        for c in 0..k {
            if den[c] > 0.0 {
                let updated: Vec<f64> = num[c].iter().map(|n| n / den[c]).collect();
                moved = moved.max(sq_dist(&centers[c], &updated));
                centers[c] = updated;
            }
        }
        if moved < 1e-18 {
            break;
        }
    }
}

/// Global cluster assignment of subclusters: (site, local_id) -> dense id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GlobalLabeling {
    #[serde(with = "labels_as_seq")]
    pub label_of: BTreeMap<SubKey, usize>,
    pub cluster_count: usize,
}

/// The tuple-keyed assignment persists as a flat array of
/// {site, local_id, label} records.
mod labels_as_seq {
    use super::SubKey;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    struct Row {
        site: usize,
        local_id: usize,
        label: usize,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<SubKey, usize>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let rows: Vec<Row> = map
            .iter()
            .map(|(&(site, local_id), &label)| Row {
                site,
                local_id,
                label,
            })
            .collect();
        rows.serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<SubKey, usize>, D::Error> {
        let rows = Vec::<Row>::deserialize(deserializer)?;
        Ok(rows
            .into_iter()
            .map(|r| ((r.site, r.local_id), r.label))
            .collect())
    }
}

impl GlobalLabeling {
    /// Member keys per global cluster.
    pub fn groups(&self) -> Vec<Vec<SubKey>> {
        let mut groups = vec![Vec::new(); self.cluster_count];
        for (&key, &label) in &self.label_of {
            groups[label].push(key);
        }
        groups
    }
}

#[derive(Clone, Debug)]
pub struct GlobalMergeOutcome {
    pub labeling: GlobalLabeling,
    /// Number of executed merges (the merge-iteration run metric).
    pub iterations: usize,
    /// Union variances of accepted merges in execution order.
    pub accepted_variances: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceConfig {
    /// Maximum allowed variance of a merged union.
    pub var_limit: f64,
    /// Per global cluster, b = ceil(border_fraction * member_count)
    /// farthest subclusters become perturbation candidates.
    pub border_fraction: f64,
    pub max_rounds: usize,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        VarianceConfig {
            var_limit: 1.0,
            border_fraction: 0.2,
            max_rounds: 8,
        }
    }
}

/// Greedy agglomeration: repeatedly merge the pair of current clusters with
/// the smallest union variance while that variance stays within the limit.
pub fn global_merge(stats: &[SubclusterStat], cfg: &VarianceConfig) -> GlobalLabeling {
    global_merge_detailed(stats, cfg).labeling
}

pub fn global_merge_detailed(
    stats: &[SubclusterStat],
    cfg: &VarianceConfig,
) -> GlobalMergeOutcome {
    #[derive(Clone)]
    struct Agg {
        stat: SubclusterStat,
        members: Vec<SubKey>,
    }
    let mut slots: Vec<Option<Agg>> = stats
        .iter()
        .map(|s| {
            Some(Agg {
                stat: s.clone(),
                members: vec![s.key()],
            })
        })
        .collect();

    type Entry = Reverse<(NotNan<f64>, SubKey, SubKey, usize, usize)>;
    let mut heap: BinaryHeap<Entry> = BinaryHeap::new();
    let push_pair = |heap: &mut BinaryHeap<Entry>, slots: &[Option<Agg>], i: usize, j: usize| {
        let (a, b) = (slots[i].as_ref().unwrap(), slots[j].as_ref().unwrap());
        let var = union_stat(&a.stat, &b.stat).variance;
        let var = NotNan::new(var).expect("finite union variance");
        let (ka, kb) = (
            a.stat.key().min(b.stat.key()),
            a.stat.key().max(b.stat.key()),
        );
        heap.push(Reverse((var, ka, kb, i, j)));
    };
    for i in 0..slots.len() {
        for j in i + 1..slots.len() {
            push_pair(&mut heap, &slots, i, j);
        }
    }

    let mut accepted = Vec::new();
    while let Some(Reverse((var, _, _, i, j))) = heap.pop() {
        if slots[i].is_none() || slots[j].is_none() {
            continue; // stale entry
        }
        if var.into_inner() > cfg.var_limit {
            break; // smallest admissible pair already exceeds the limit
        }
        let a = slots[i].take().unwrap();
        let b = slots[j].take().unwrap();
        let mut members = a.members;
        members.extend(b.members);
        members.sort_unstable();
        let merged = Agg {
            stat: union_stat(&a.stat, &b.stat),
            members,
        };
        accepted.push(var.into_inner());
        let idx = slots.len();
        slots.push(Some(merged));
        for other in 0..idx {
            if slots[other].is_some() {
                push_pair(&mut heap, &slots, other, idx);
            }
        }
    }

    // Dense ids ordered by smallest member key.
    let mut clusters: Vec<&Agg> = slots.iter().flatten().collect();
    clusters.sort_by_key(|agg| agg.members[0]);
    let mut label_of = BTreeMap::new();
    for (label, agg) in clusters.iter().enumerate() {
        for &key in &agg.members {
            label_of.insert(key, label);
        }
    }
    GlobalMergeOutcome {
        labeling: GlobalLabeling {
            label_of,
            cluster_count: clusters.len(),
        },
        iterations: accepted.len(),
        accepted_variances: accepted,
    }
}

fn stat_by_key<'a>(stats: &'a [SubclusterStat], key: SubKey) -> &'a SubclusterStat {
    stats
        .iter()
        .find(|s| s.key() == key)
        .expect("labeling references unknown subcluster")
}

/// Pooled statistic of a set of subclusters.
fn pooled(stats: &[SubclusterStat], keys: &[SubKey]) -> SubclusterStat {
    let mut it = keys.iter().map(|&k| stat_by_key(stats, k).clone());
    let first = it.next().expect("empty global cluster");
    it.fold(first, |acc, s| union_stat(&acc, &s))
}

/// Total sum-of-squared-error of a labeling: the pooled variance summed
/// over global clusters.
pub fn total_sse(labeling: &GlobalLabeling, stats: &[SubclusterStat]) -> f64 {
    labeling
        .groups()
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| pooled(stats, g).variance)
        .sum()
}

/// Per global cluster, the b farthest member subclusters (center distance
/// to the pooled center), b = ceil(border_fraction * member_count).
/// Clusters with a single member contribute none.
pub fn border_candidates(
    labeling: &GlobalLabeling,
    stats: &[SubclusterStat],
    border_fraction: f64,
) -> Vec<SubKey> {
    let mut out = Vec::new();
    for group in labeling.groups() {
        if group.len() < 2 {
            continue;
        }
        let center = pooled(stats, &group).center;
        let b = (border_fraction * group.len() as f64).ceil() as usize;
        let mut ranked: Vec<(Reverse<NotNan<f64>>, SubKey)> = group
            .iter()
            .map(|&key| {
                let d = Metric::Euclidean
                    .dist(&stat_by_key(stats, key).center.coords, &center.coords);
                (Reverse(NotNan::new(d).unwrap()), key)
            })
            .collect();
        ranked.sort();
        out.extend(ranked.into_iter().take(b.min(group.len())).map(|(_, k)| k));
    }
    out
}

/// Moves border candidates to a neighboring global cluster whenever the
/// move strictly decreases total SSE, trying candidates closest to a
/// neighboring cluster first. Stops at a fixed point or after max rounds.
pub fn perturbation(
    labeling: &GlobalLabeling,
    stats: &[SubclusterStat],
    cfg: &VarianceConfig,
) -> GlobalLabeling {
    let mut label_of = labeling.label_of.clone();
    let mut groups: BTreeMap<usize, Vec<SubKey>> = BTreeMap::new();
    for (&key, &label) in &label_of {
        groups.entry(label).or_default().push(key);
    }

    for _ in 0..cfg.max_rounds {
        let current = GlobalLabeling {
            label_of: label_of.clone(),
            cluster_count: labeling.cluster_count,
        };
        let candidates = border_candidates(&current, stats, cfg.border_fraction);
        if candidates.is_empty() {
            break;
        }
        // Nearest neighboring cluster center per candidate; closest first.
        let centers: BTreeMap<usize, Point> = groups
            .iter()
            .filter(|(_, g)| !g.is_empty())
            .map(|(&label, g)| (label, pooled(stats, g).center))
            .collect();
        let mut ordered: Vec<(NotNan<f64>, SubKey)> = candidates
            .iter()
            .map(|&key| {
                let own = label_of[&key];
                let c = &stat_by_key(stats, key).center;
                let d = centers
                    .iter()
                    .filter(|(&l, _)| l != own)
                    .map(|(_, center)| Metric::Euclidean.dist(&c.coords, &center.coords))
                    .fold(f64::INFINITY, f64::min);
                (
                    NotNan::new(d).unwrap_or_else(|_| NotNan::new(f64::MAX).unwrap()),
                    key,
                )
            })
            .collect();
        ordered.sort();

        let mut changed = false;
        for (_, key) in ordered {
            let own = label_of[&key];
            if groups[&own].len() <= 1 {
                continue;
            }
            let own_group = groups[&own].clone();
            let own_sse = pooled(stats, &own_group).variance;
            let remaining: Vec<SubKey> = own_group.iter().copied().filter(|&k| k != key).collect();
            let own_sse_without = pooled(stats, &remaining).variance;
            let mut best: Option<(f64, usize)> = None;
            for (&target, group) in &groups {
                if target == own || group.is_empty() {
                    continue;
                }
                let target_sse = pooled(stats, group).variance;
                let mut with: Vec<SubKey> = group.clone();
                with.push(key);
                let target_sse_with = pooled(stats, &with).variance;
                let delta = (own_sse_without + target_sse_with) - (own_sse + target_sse);
                if delta < -1e-12 && best.map_or(true, |(bd, _)| delta < bd) {
                    best = Some((delta, target));
                }
            }
            if let Some((_, target)) = best {
                groups.get_mut(&own).unwrap().retain(|&k| k != key);
                let t = groups.get_mut(&target).unwrap();
                t.push(key);
                t.sort_unstable();
                label_of.insert(key, target);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // Renumber densely in order of smallest member key.
    let mut survivors: Vec<(SubKey, usize)> = groups
        .iter()
        .filter(|(_, g)| !g.is_empty())
        .map(|(&label, g)| (*g.iter().min().unwrap(), label))
        .collect();
    survivors.sort();
    let relabel: BTreeMap<usize, usize> = survivors
        .iter()
        .enumerate()
        .map(|(new, &(_, old))| (old, new))
        .collect();
    GlobalLabeling {
        label_of: label_of
            .into_iter()
            .map(|(key, label)| (key, relabel[&label]))
            .collect(),
        cluster_count: relabel.len(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub limit: f64,
    pub cluster_count: usize,
    pub total_sse: f64,
}

/// Runs the global merge once per limit (ascending) and reports cluster
/// count and total SSE per row.
pub fn sweep_var_limit(stats: &[SubclusterStat], limits: &[f64]) -> Result<Vec<SweepRow>> {
    if limits.is_empty() {
        return Err(Error::InvalidParameter("no limits to sweep".into()));
    }
    if limits.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter(
            "limits must be sorted ascending".into(),
        ));
    }
    Ok(limits
        .iter()
        .map(|&limit| {
            let labeling = global_merge(
                stats,
                &VarianceConfig {
                    var_limit: limit,
                    ..VarianceConfig::default()
                },
            );
            SweepRow {
                limit,
                cluster_count: labeling.cluster_count,
                total_sse: total_sse(&labeling, stats),
            }
        })
        .collect())
}

/// Scalars a site actually ships to the aggregator: center (d) plus size
/// and variance per subcluster.
pub fn raw_scalars(k_i: usize, dim: usize) -> usize {
    k_i * (dim + 2)
}

/// The 3d-per-subcluster envelope used when reporting communication in
/// paper units.
pub fn paper_unit_elements(k_i: usize, dim: usize) -> usize {
    3 * dim * k_i
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_gaussian_mixture, round_robin_partition, GaussianComponent};

    fn pt(coords: &[f64]) -> Point {
        Point::from(coords.to_vec())
    }

    fn singleton(site: usize, id: usize, coords: &[f64]) -> SubclusterStat {
        SubclusterStat::from_points(site, id, [&pt(coords)])
    }

    fn blobs_3d4() -> Dataset {
        let comps = [
            GaussianComponent {
                center: vec![0.0, 0.0, 0.0, 0.0],
                stdev: 0.34,
                count: 50,
            },
            GaussianComponent {
                center: vec![6.0, 0.0, 0.0, 0.0],
                stdev: 0.26,
                count: 50,
            },
            GaussianComponent {
                center: vec![3.0, 5.0, 2.0, 0.0],
                stdev: 0.26,
                count: 50,
            },
        ];
        gen_gaussian_mixture(&comps, 3).unwrap()
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let ds = gen_gaussian_mixture(
            &[GaussianComponent {
                center: vec![0.0, 0.0],
                stdev: 1.0,
                count: 12,
            }],
            3,
        )
        .unwrap();
        let stats = local_subclusters(&ds, 12, LocalAlgo::Kmeans, 0, 1).unwrap();
        assert_eq!(stats.len(), 12);
        for s in &stats {
            assert_eq!(s.size, 1);
            assert_eq!(s.variance, 0.0);
        }
    }

    #[test]
    fn five_and_seven_subclusters() {
        let ds = blobs_3d4();
        let part = round_robin_partition(&ds, 2).unwrap();
        let sites = ds.split(&part).unwrap();
        for (site, k, algo) in [
            (0usize, 5usize, LocalAlgo::Kmeans),
            (1, 7, LocalAlgo::Kharmonic),
        ] {
            let stats = local_subclusters(&sites[site], k, algo, site, 42).unwrap();
            assert_eq!(stats.len(), k);
            let total: usize = stats.iter().map(|s| s.size).sum();
            assert_eq!(total, sites[site].len());
            assert!(stats.iter().all(|s| s.size >= 1));
        }
    }

    #[test]
    fn k_one_center_is_mean_variance_is_sse() {
        let ds = gen_gaussian_mixture(
            &[GaussianComponent {
                center: vec![2.0, -1.0],
                stdev: 0.8,
                count: 40,
            }],
            7,
        )
        .unwrap();
        let stats = local_subclusters(&ds, 1, LocalAlgo::Kmeans, 0, 5).unwrap();
        assert_eq!(stats.len(), 1);
        // Brute-force SSE oracle.
        let n = ds.len() as f64;
        let mut mean = vec![0.0; 2];
        for (_, p) in ds.iter() {
            for (m, x) in mean.iter_mut().zip(&p.coords) {
                *m += x / n;
            }
        }
        let mut sse = 0.0;
        for (_, p) in ds.iter() {
            sse += p
                .coords
                .iter()
                .zip(&mean)
                .map(|(x, m)| (x - m) * (x - m))
                .sum::<f64>();
        }
        for (a, b) in stats[0].center.coords.iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((stats[0].variance - sse).abs() / sse.max(1.0) < 1e-12);
    }

    #[test]
    fn k_greater_than_n_is_error() {
        let ds = gen_gaussian_mixture(
            &[GaussianComponent {
                center: vec![0.0],
                stdev: 1.0,
                count: 3,
            }],
            1,
        )
        .unwrap();
        assert!(local_subclusters(&ds, 4, LocalAlgo::Kmeans, 0, 1).is_err());
        assert!(local_subclusters(&ds, 0, LocalAlgo::Kmeans, 0, 1).is_err());
    }

    #[test]
    fn union_of_coincident_singletons_has_zero_variance() {
        let a = singleton(0, 0, &[1.0, 2.0]);
        let b = singleton(0, 1, &[1.0, 2.0]);
        let u = union_stat(&a, &b);
        assert_eq!(u.size, 2);
        assert_eq!(u.variance, 0.0);
    }

    #[test]
    fn union_of_singletons_at_zero_and_two() {
        let a = singleton(0, 0, &[0.0]);
        let b = singleton(0, 1, &[2.0]);
        let u = union_stat(&a, &b);
        assert_eq!(u.center.coords, vec![1.0]);
        assert_eq!(u.variance, 2.0); // (0-1)^2 + (2-1)^2
    }

    #[test]
    fn union_stat_is_associative_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mk = |rng: &mut ChaCha8Rng, id: usize| {
                let pts: Vec<Point> = (0..rng.random_range(1..8))
                    .map(|_| pt(&[rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]))
                    .collect();
                SubclusterStat::from_points(0, id, pts.iter())
            };
            let (a, b, c) = (mk(&mut rng, 0), mk(&mut rng, 1), mk(&mut rng, 2));
            let left = union_stat(&a, &union_stat(&b, &c));
            let right = union_stat(&union_stat(&a, &b), &c);
            let scale = left.variance.abs().max(1.0);
            assert!((left.variance - right.variance).abs() / scale < 1e-9);
        }
    }

    #[test]
    fn union_stat_matches_direct_computation() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let mk = |rng: &mut ChaCha8Rng| -> Vec<Point> {
                (0..rng.random_range(1..12))
                    .map(|_| {
                        pt(&[
                            rng.random_range(-10.0..10.0),
                            rng.random_range(-10.0..10.0),
                            rng.random_range(-10.0..10.0),
                        ])
                    })
                    .collect()
            };
            let (xs, ys) = (mk(&mut rng), mk(&mut rng));
            let a = SubclusterStat::from_points(0, 0, xs.iter());
            let b = SubclusterStat::from_points(0, 1, ys.iter());
            let u = union_stat(&a, &b);
            let direct = SubclusterStat::from_points(0, 0, xs.iter().chain(ys.iter()));
            assert_eq!(u.size, direct.size);
            let scale = direct.variance.abs().max(1.0);
            assert!((u.variance - direct.variance).abs() / scale < 1e-9);
            for (x, y) in u.center.coords.iter().zip(&direct.center.coords) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn merge_with_tiny_limit_keeps_everything_apart() {
        let stats = vec![
            singleton(0, 0, &[0.0]),
            singleton(0, 1, &[1.0]),
            singleton(1, 0, &[2.0]),
        ];
        let labeling = global_merge(
            &stats,
            &VarianceConfig {
                var_limit: 1e-6,
                ..VarianceConfig::default()
            },
        );
        assert_eq!(labeling.cluster_count, 3);
    }

    #[test]
    fn merge_with_huge_limit_collapses_to_one() {
        let stats = vec![
            singleton(0, 0, &[0.0]),
            singleton(0, 1, &[10.0]),
            singleton(1, 0, &[50.0]),
            singleton(1, 1, &[90.0]),
        ];
        let labeling = global_merge(
            &stats,
            &VarianceConfig {
                var_limit: f64::INFINITY,
                ..VarianceConfig::default()
            },
        );
        assert_eq!(labeling.cluster_count, 1);
    }

    #[test]
    fn fig2_analogue_three_blobs_from_5_plus_7() {
        let ds = blobs_3d4();
        let part = round_robin_partition(&ds, 2).unwrap();
        let sites = ds.split(&part).unwrap();
        let mut stats = local_subclusters(&sites[0], 5, LocalAlgo::Kmeans, 0, 45).unwrap();
        stats.extend(local_subclusters(&sites[1], 7, LocalAlgo::Kmeans, 1, 7).unwrap());
        let max_individual = stats.iter().map(|s| s.variance).fold(0.0, f64::max);
        let labeling = global_merge(
            &stats,
            &VarianceConfig {
                var_limit: 2.0 * max_individual,
                ..VarianceConfig::default()
            },
        );
        assert_eq!(labeling.cluster_count, 3);
    }

    #[test]
    fn greedy_accepts_nondecreasing_variances_within_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..10 {
            let stats: Vec<SubclusterStat> = (0..14)
                .map(|i| {
                    let pts: Vec<Point> = (0..rng.random_range(1..6))
                        .map(|_| pt(&[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]))
                        .collect();
                    SubclusterStat::from_points(i % 3, i / 3, pts.iter())
                })
                .collect();
            let limit = rng.random_range(0.5..30.0);
            let outcome = global_merge_detailed(
                &stats,
                &VarianceConfig {
                    var_limit: limit,
                    ..VarianceConfig::default()
                },
            );
            for w in outcome.accepted_variances.windows(2) {
                assert!(w[0] <= w[1] + 1e-12, "accepted variances decreased");
            }
            for &v in &outcome.accepted_variances {
                assert!(v <= limit);
            }
        }
    }

    #[test]
    fn border_skips_singleton_clusters() {
        let stats = vec![singleton(0, 0, &[0.0]), singleton(0, 1, &[100.0])];
        let labeling = global_merge(
            &stats,
            &VarianceConfig {
                var_limit: 1e-9,
                ..VarianceConfig::default()
            },
        );
        assert!(border_candidates(&labeling, &stats, 0.2).is_empty());
    }

    #[test]
    fn border_picks_extreme_end_of_collinear_centers() {
        let stats: Vec<SubclusterStat> =
            (0..5).map(|i| singleton(0, i, &[i as f64, 0.0])).collect();
        let mut label_of = BTreeMap::new();
        for s in &stats {
            label_of.insert(s.key(), 0);
        }
        let labeling = GlobalLabeling {
            label_of,
            cluster_count: 1,
        };
        // b = ceil(0.2 * 5) = 1: the farthest center from the pooled mean
        // (2, 0). Both ends are at distance 2; the lower key wins the sort.
        let candidates = border_candidates(&labeling, &stats, 0.2);
        assert_eq!(candidates, vec![(0, 0)]);
    }

    #[test]
    fn border_count_follows_proportional_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..10 {
            let n = rng.random_range(2..12);
            let stats: Vec<SubclusterStat> = (0..n)
                .map(|i| singleton(0, i, &[rng.random_range(-1.0..1.0), 0.0]))
                .collect();
            let mut label_of = BTreeMap::new();
            for s in &stats {
                label_of.insert(s.key(), 0);
            }
            let labeling = GlobalLabeling {
                label_of,
                cluster_count: 1,
            };
            let frac = rng.random_range(0.1..0.9);
            let expected = ((frac * n as f64).ceil() as usize).min(n);
            assert_eq!(border_candidates(&labeling, &stats, frac).len(), expected);
        }
    }

    #[test]
    fn perturbation_fixes_misassigned_border_subcluster() {
        // Two groups of singleton subclusters; one subcluster near the
        // right group starts labeled with the left group.
        let mut stats: Vec<SubclusterStat> = vec![
            singleton(0, 0, &[0.0, 0.0]),
            singleton(0, 1, &[0.2, 0.0]),
            singleton(0, 2, &[0.4, 0.0]),
            singleton(1, 0, &[5.0, 0.0]),
            singleton(1, 1, &[5.2, 0.0]),
        ];
        stats.push(singleton(1, 2, &[4.8, 0.0]));
        let mut label_of = BTreeMap::new();
        for s in &stats[0..3] {
            label_of.insert(s.key(), 0);
        }
        for s in &stats[3..5] {
            label_of.insert(s.key(), 1);
        }
        label_of.insert((1, 2), 0);
        let labeling = GlobalLabeling {
            label_of,
            cluster_count: 2,
        };
        let before = total_sse(&labeling, &stats);
        let cfg = VarianceConfig {
            var_limit: 1.0,
            border_fraction: 0.34,
            max_rounds: 4,
        };
        let after = perturbation(&labeling, &stats, &cfg);
        let after_sse = total_sse(&after, &stats);
        assert!(
            after_sse < before,
            "SSE did not drop: {after_sse} >= {before}"
        );
        assert_eq!(after.label_of[&(1, 2)], after.label_of[&(1, 0)]);

        // Exhaustive single-move oracle: no single move beats the result.
        let groups = after.groups();
        let best_single_move = {
            let mut best = after_sse;
            for (from, group) in groups.iter().enumerate() {
                for &key in group {
                    for to in 0..groups.len() {
                        if to == from || groups[from].len() <= 1 {
                            continue;
                        }
                        let mut label_of = after.label_of.clone();
                        label_of.insert(key, to);
                        let candidate = GlobalLabeling {
                            label_of,
                            cluster_count: after.cluster_count,
                        };
                        best = best.min(total_sse(&candidate, &stats));
                    }
                }
            }
            best
        };
        assert!(after_sse <= best_single_move + 1e-9);

        // Idempotence at the fixed point.
        let again = perturbation(&after, &stats, &cfg);
        assert_eq!(again.label_of, after.label_of);
    }

    #[test]
    fn perturbation_never_increases_sse() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for _ in 0..10 {
            let stats: Vec<SubclusterStat> = (0..10)
                .map(|i| {
                    singleton(
                        i % 2,
                        i / 2,
                        &[rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)],
                    )
                })
                .collect();
            let labeling = global_merge(
                &stats,
                &VarianceConfig {
                    var_limit: rng.random_range(0.5..20.0),
                    ..VarianceConfig::default()
                },
            );
            let before = total_sse(&labeling, &stats);
            let after = perturbation(&labeling, &stats, &VarianceConfig::default());
            assert!(total_sse(&after, &stats) <= before + 1e-9);
        }
    }

    #[test]
    fn sweep_zero_limit_keeps_all_apart() {
        let stats: Vec<SubclusterStat> = (0..6).map(|i| singleton(0, i, &[i as f64])).collect();
        let rows = sweep_var_limit(&stats, &[0.0]).unwrap();
        assert_eq!(rows[0].cluster_count, 6);
    }

    #[test]
    fn sweep_infinite_limit_collapses() {
        let stats: Vec<SubclusterStat> = (0..6).map(|i| singleton(0, i, &[i as f64])).collect();
        let rows = sweep_var_limit(&stats, &[f64::INFINITY]).unwrap();
        assert_eq!(rows[0].cluster_count, 1);
    }

    #[test]
    fn sweep_is_monotone_and_plateaus_at_three_blobs() {
        let ds = blobs_3d4();
        let part = round_robin_partition(&ds, 2).unwrap();
        let sites = ds.split(&part).unwrap();
        let mut stats = local_subclusters(&sites[0], 5, LocalAlgo::Kmeans, 0, 45).unwrap();
        stats.extend(local_subclusters(&sites[1], 7, LocalAlgo::Kmeans, 1, 7).unwrap());
        let limits: Vec<f64> = (0..14).map(|i| 0.5 * 1.8f64.powi(i)).collect();
        let rows = sweep_var_limit(&stats, &limits).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].cluster_count <= w[0].cluster_count);
        }
        // The widest plateau over this geometric grid sits at the true
        // blob count.
        let mut plateau: BTreeMap<usize, usize> = BTreeMap::new();
        for row in &rows {
            *plateau.entry(row.cluster_count).or_insert(0) += 1;
        }
        let (count, _) = plateau
            .iter()
            .max_by_key(|(_, &len)| len)
            .unwrap();
        assert_eq!(*count, 3);
        assert!(sweep_var_limit(&stats, &[]).is_err());
        assert!(sweep_var_limit(&stats, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn accounting_units() {
        assert_eq!(raw_scalars(5, 4), 30); // (4 + 2) * 5
        assert_eq!(paper_unit_elements(5, 4), 60); // 3 * 4 * 5
    }
}
