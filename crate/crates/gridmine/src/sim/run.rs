//! Executes a job: local phase on every leaf site, aggregation along the
//! topology, and message accounting. The transport trace is the only
//! inter-site channel, so every cross-site data movement appears in it.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::apriori::{
    candidate_ratio, centralized_apriori, classical_baseline, gen_baskets, global_topdown,
    BasketSpec, SiteNode, TransactionDB,
};
use crate::data::{
    gen_gaussian_mixture, round_robin_partition, Dataset, GaussianMixtureSpec,
};
use crate::dbscan::{build_local_model, dbscan, LocalDensityModel};
use crate::ddbc::{assign_members, merge_over, quality_p, speedup, MergeConfig, MergedModel};
use crate::error::{Error, Result};
use crate::sim::job::{
    AlgorithmConfig, AprioriJobConfig, DdbcConfig, JobSpec, SupportSpec, VarLimitSpec,
    VarianceJobConfig,
};
use crate::sim::topology::{build_topology, Topology};
use crate::sim::trace::{frame_bytes, MessageTrace};
use crate::variance::{
    global_merge_detailed, local_subclusters, paper_unit_elements, perturbation, raw_scalars,
    total_sse, SubclusterStat, VarianceConfig,
};

/// Per-run metrics; everything except wall time is deterministic for a
/// fixed spec and seed.
#[derive(Clone, Debug, Serialize)]
pub struct Metrics {
    pub experiment: String,
    pub algorithm: String,
    pub m: usize,
    pub result_count: usize,
    pub passes: Option<usize>,
    pub rounds: u64,
    pub messages: usize,
    pub elements: usize,
    pub bytes: usize,
    pub elements_paper_units: Option<usize>,
    pub merge_iterations: Option<usize>,
    pub quality_p: Option<f64>,
    pub oracle_match: Option<bool>,
    pub speedup_estimate: Option<f64>,
    pub wall_ms: u128,
}

impl Metrics {
    pub const CSV_HEADER: &'static str = "experiment,algorithm,m,result_count,passes,rounds,\
         messages,elements,bytes,elements_paper_units,merge_iterations,quality_p,oracle_match,\
         speedup_estimate,wall_ms";

    pub fn csv_row(&self) -> String {
        fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map(T::to_string).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.algorithm,
            self.m,
            self.result_count,
            opt(&self.passes),
            self.rounds,
            self.messages,
            self.elements,
            self.bytes,
            opt(&self.elements_paper_units),
            opt(&self.merge_iterations),
            opt(&self.quality_p),
            opt(&self.oracle_match),
            opt(&self.speedup_estimate),
            self.wall_ms
        )
    }
}

#[derive(Clone, Debug)]
pub struct JobOutcome {
    pub result: serde_json::Value,
    pub trace: MessageTrace,
    pub metrics: Metrics,
}

/// Derives a per-site RNG stream from the job seed.
pub fn seed_for(seed: u64, site: usize) -> u64 {
    seed.wrapping_add((site as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Coordinate scalars held by a model payload.
fn model_elements(model: &MergedModel) -> usize {
    let dim = model.dim().unwrap_or(0);
    let points: usize = model
        .clusters
        .iter()
        .map(|c| c.pairs.len() * 2 + c.absorbed.len())
        .sum::<usize>()
        + model.noise.len();
    points * dim
}

/// Runs the job and writes its result, trace, and metrics artifacts.
/// Relative paths in the spec resolve against `base`.
pub fn run_job(spec: &JobSpec, base: &Path, seed: u64, oracle: bool) -> Result<JobOutcome> {
    spec.validate()?;
    let started = Instant::now();
    let topology = build_topology(spec.sites, spec.topology.kind, spec.topology.p)?;
    let mut trace = MessageTrace::new();

    let (result, mut metrics) = match &spec.algorithm {
        AlgorithmConfig::Ddbc(cfg) => run_ddbc(spec, cfg, base, &topology, oracle, &mut trace)?,
        AlgorithmConfig::Variance(cfg) => {
            run_variance(spec, cfg, base, &topology, seed, &mut trace)?
        }
        AlgorithmConfig::Apriori(cfg) => run_apriori(spec, cfg, base, oracle, &mut trace)?,
    };

    let summary = crate::sim::trace::account(&trace);
    metrics.rounds = trace.last_round();
    metrics.messages = trace.len();
    metrics.elements = summary.total_elements;
    metrics.bytes = summary.total_bytes;
    metrics.wall_ms = started.elapsed().as_millis();

    write_outputs(spec, base, &result, &trace, &metrics)?;
    Ok(JobOutcome {
        result,
        trace,
        metrics,
    })
}

fn blank_metrics(spec: &JobSpec) -> Metrics {
    Metrics {
        experiment: spec.id.clone(),
        algorithm: spec.algorithm.name().to_string(),
        m: spec.sites,
        result_count: 0,
        passes: None,
        rounds: 0,
        messages: 0,
        elements: 0,
        bytes: 0,
        elements_paper_units: None,
        merge_iterations: None,
        quality_p: None,
        oracle_match: None,
        speedup_estimate: None,
        wall_ms: 0,
    }
}

fn run_ddbc(
    spec: &JobSpec,
    cfg: &DdbcConfig,
    base: &Path,
    topology: &Topology,
    oracle: bool,
    trace: &mut MessageTrace,
) -> Result<(serde_json::Value, Metrics)> {
    let ds = Dataset::read_csv_file(resolve(base, &spec.dataset))?;
    let part = round_robin_partition(&ds, spec.sites)?;
    let site_data = ds.split(&part)?;

    let models: Vec<LocalDensityModel> = site_data
        .par_iter()
        .enumerate()
        .map(|(site, sds)| {
            build_local_model(sds, cfg.eps.for_site(site), cfg.minpts, cfg.metric)
        })
        .collect::<Result<_>>()?;

    let merge_cfg = MergeConfig {
        theta: cfg.theta,
        eps_aver: cfg.eps_aver,
        metric: cfg.metric,
    };
    let run = merge_over(&models, topology, &merge_cfg)?;

    // Every child model travels one edge up per merge level.
    for entry in &run.level_trace {
        for merge in &entry.merges {
            for &child in &merge.inputs {
                let child_model = &run.node_models[&child];
                trace.record(
                    entry.level as u64,
                    topology.label(child),
                    topology.label(merge.node),
                    "MODEL",
                    frame_bytes(child_model),
                    model_elements(child_model),
                );
            }
        }
    }

    let global = run.root_model();
    let mut metrics = blank_metrics(spec);
    metrics.result_count = global.cluster_count();

    // Representative fraction drives the speedup estimate.
    let n_total = ds.len();
    if n_total > 0 && spec.sites > 1 {
        let mut mu_sum = 0.0;
        for (model, sds) in models.iter().zip(&site_data) {
            if !sds.is_empty() {
                mu_sum += model.representative_point_count() as f64 / sds.len() as f64;
            }
        }
        let mu = (mu_sum / spec.sites as f64).clamp(0.0, 1.0);
        metrics.speedup_estimate = speedup(spec.sites, mu, n_total).ok();
    }

    if oracle {
        let oracle_eps = cfg.oracle_eps.unwrap_or_else(|| {
            (0..spec.sites)
                .map(|s| cfg.eps.for_site(s))
                .fold(f64::INFINITY, f64::min)
        });
        let centralized = dbscan(&ds, oracle_eps, cfg.minpts, cfg.metric)?;
        let members = assign_members(global, &ds, cfg.metric);
        metrics.quality_p = Some(quality_p(&members, &centralized.to_map())?);
        metrics.oracle_match =
            Some(global.cluster_count() == centralized.cluster_count());
    }

    let mut result = json!({
        "cluster_count": global.cluster_count(),
        "global_model": global,
        "level_trace": run.level_trace,
    });
    if let Some(level) = cfg.stop_level {
        if level >= topology.levels().len() {
            return Err(Error::InvalidJob(format!(
                "stop_level {level} out of range for {} levels",
                topology.levels().len()
            )));
        }
        let sub: Vec<&MergedModel> = topology.levels()[level]
            .iter()
            .map(|n| &run.node_models[n])
            .collect();
        result["stop_level"] = json!(level);
        result["sub_global_models"] = json!(sub);
    }
    Ok((result, metrics))
}

fn run_variance(
    spec: &JobSpec,
    cfg: &VarianceJobConfig,
    base: &Path,
    topology: &Topology,
    seed: u64,
    trace: &mut MessageTrace,
) -> Result<(serde_json::Value, Metrics)> {
    let ds = Dataset::read_csv_file(resolve(base, &spec.dataset))?;
    let part = round_robin_partition(&ds, spec.sites)?;
    let site_data = ds.split(&part)?;
    let dim = ds.dim();

    let per_site: Vec<Vec<SubclusterStat>> = site_data
        .par_iter()
        .enumerate()
        .map(|(site, sds)| {
            local_subclusters(sds, cfg.k.for_site(site), cfg.algo, site, seed_for(seed, site))
        })
        .collect::<Result<_>>()?;

    // Gather: one statistics payload per site, straight to the root.
    let root = topology.label(topology.root());
    let mut stats: Vec<SubclusterStat> = Vec::new();
    let mut paper_units = 0;
    for (site, site_stats) in per_site.iter().enumerate() {
        trace.record(
            1,
            topology.label(topology.leaf_of_site(site)),
            root.clone(),
            "STATS",
            frame_bytes(site_stats),
            raw_scalars(site_stats.len(), dim),
        );
        paper_units += paper_unit_elements(site_stats.len(), dim);
        stats.extend(site_stats.iter().cloned());
    }

    let var_limit = match cfg.var_limit {
        VarLimitSpec::Absolute(v) => v,
        VarLimitSpec::MaxIndividualFactor(f) => {
            f * stats.iter().map(|s| s.variance).fold(0.0, f64::max)
        }
    };
    let vcfg = VarianceConfig {
        var_limit,
        border_fraction: cfg.border_fraction,
        max_rounds: cfg.max_rounds,
    };
    let outcome = global_merge_detailed(&stats, &vcfg);
    let labeling = if cfg.perturb {
        perturbation(&outcome.labeling, &stats, &vcfg)
    } else {
        outcome.labeling.clone()
    };

    let pooled: Vec<serde_json::Value> = labeling
        .groups()
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .map(|(id, group)| {
            let stat = group
                .iter()
                .map(|key| stats.iter().find(|s| s.key() == *key).unwrap().clone())
                .reduce(|a, b| crate::variance::union_stat(&a, &b))
                .unwrap();
            json!({
                "id": id,
                "size": stat.size,
                "center": stat.center,
                "variance": stat.variance,
            })
        })
        .collect();

    if let Some(stats_path) = &spec.output.stats {
        let mut lines = String::new();
        for s in &stats {
            lines.push_str(&serde_json::to_string(s)?);
            lines.push('\n');
        }
        std::fs::write(resolve(base, stats_path), lines)?;
    }

    let mut metrics = blank_metrics(spec);
    metrics.result_count = labeling.cluster_count;
    metrics.merge_iterations = Some(outcome.iterations);
    metrics.elements_paper_units = Some(paper_units);

    let result = json!({
        "cluster_count": labeling.cluster_count,
        "var_limit": var_limit,
        "total_sse": total_sse(&labeling, &stats),
        "labeling": labeling,
        "clusters": pooled,
    });
    Ok((result, metrics))
}

fn run_apriori(
    spec: &JobSpec,
    cfg: &AprioriJobConfig,
    base: &Path,
    oracle: bool,
    trace: &mut MessageTrace,
) -> Result<(serde_json::Value, Metrics)> {
    let db = TransactionDB::read_text_file(resolve(base, &spec.dataset))?;
    // Round-robin split of transactions over sites.
    let mut split: Vec<Vec<Vec<u32>>> = vec![Vec::new(); spec.sites];
    for (i, txn) in db.transactions().iter().enumerate() {
        split[i % spec.sites].push(txn.clone());
    }
    let dbs: Vec<TransactionDB> = split.into_iter().map(TransactionDB::new).collect();
    let global_support = cfg.min_support.absolute_for(db.len());

    let mut sites: Vec<SiteNode> = dbs
        .par_iter()
        .enumerate()
        .map(|(site, sdb)| {
            let local = match cfg.min_support {
                SupportSpec::Absolute(_) => {
                    // Proportional share keeps the global collection exact.
                    SupportSpec::Relative(global_support as f64 / db.len().max(1) as f64)
                        .absolute_for(sdb.len())
                }
                SupportSpec::Relative(_) => cfg.min_support.absolute_for(sdb.len()),
            };
            SiteNode::mine(site, sdb.clone(), local.max(1))
        })
        .collect::<Result<_>>()?;

    let topdown = global_topdown(&mut sites, cfg.k, global_support)?;

    // Coordinator rounds: requests and replies per pass, at the root.
    for record in &topdown.trace.passes {
        let round = record.pass as u64;
        for (site, itemsets) in record.per_site_itemsets.iter().enumerate() {
            if itemsets.is_empty() {
                continue;
            }
            let elements: usize = itemsets.iter().map(Vec::len).sum();
            let counts = &record.per_site_counts[site];
            if record.pass == 1 {
                // Sites volunteer their itemsets with counts attached.
                let payload: Vec<(&Vec<u32>, &u64)> = itemsets.iter().zip(counts).collect();
                trace.record(
                    round,
                    format!("site:{site}"),
                    "coordinator",
                    "ITEMSETS",
                    frame_bytes(&payload),
                    elements + counts.len(),
                );
            } else {
                trace.record(
                    round,
                    "coordinator",
                    format!("site:{site}"),
                    "COUNT_REQUEST",
                    frame_bytes(itemsets),
                    elements,
                );
                trace.record(
                    round,
                    format!("site:{site}"),
                    "coordinator",
                    "COUNTS",
                    frame_bytes(counts),
                    counts.len(),
                );
            }
        }
    }

    let mut metrics = blank_metrics(spec);
    metrics.result_count = topdown.frequent.len();
    metrics.passes = Some(topdown.trace.pass_count());

    let frequent: Vec<serde_json::Value> = topdown
        .frequent
        .iter()
        .map(|items| {
            json!({
                "items": items,
                "support": topdown.counts.get(items),
            })
        })
        .collect();
    let mut result = json!({
        "itemset_count": topdown.frequent.len(),
        "passes": topdown.trace.pass_count(),
        "candidates": topdown.trace.total_candidates(),
        "frequent": frequent,
        "pass_trace": topdown.trace,
    });

    if cfg.compare_baseline {
        let (baseline_set, baseline_trace) = classical_baseline(&dbs, cfg.k, global_support)?;
        result["baseline"] = json!({
            "passes": baseline_trace.pass_count(),
            "itemset_count": baseline_set.len(),
            "matches_topdown": baseline_set == topdown.frequent,
            "candidate_ratio": candidate_ratio(&topdown.trace, &baseline_trace)?,
        });
    }
    if oracle {
        let centralized = centralized_apriori(&dbs, cfg.k, global_support)?;
        metrics.oracle_match = Some(centralized == topdown.frequent);
    }
    Ok((result, metrics))
}

fn write_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

fn write_outputs(
    spec: &JobSpec,
    base: &Path,
    result: &serde_json::Value,
    trace: &MessageTrace,
    metrics: &Metrics,
) -> Result<()> {
    write_pretty(&resolve(base, &spec.output.result), result)?;
    write_pretty(&resolve(base, &spec.output.trace), trace)?;

    let metrics_path = resolve(base, &spec.output.metrics);
    if let Some(parent) = metrics_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(
        metrics_path,
        format!("{}\n{}\n", Metrics::CSV_HEADER, metrics.csv_row()),
    )?;
    Ok(())
}

/// Generator spec file: either a Gaussian mixture (point datasets) or a
/// basket spec (transaction datasets).
#[derive(Clone, Debug, serde::Deserialize)]
#[serde(untagged)]
pub enum GenSpec {
    Gaussian(GaussianMixtureSpec),
    Basket(BasketSpec),
}

impl GenSpec {
    pub fn seed(&self) -> Option<u64> {
        match self {
            GenSpec::Gaussian(g) => g.seed,
            GenSpec::Basket(b) => b.seed,
        }
    }

    /// Generates and writes the dataset; returns (kind, record count).
    pub fn generate_to(&self, path: &Path, seed: u64) -> Result<(&'static str, usize)> {
        match self {
            GenSpec::Gaussian(g) => {
                let ds = gen_gaussian_mixture(&g.components, seed)?;
                ds.write_csv_file(path)?;
                Ok(("gaussian", ds.len()))
            }
            GenSpec::Basket(b) => {
                let db = gen_baskets(b, seed)?;
                let file = std::fs::File::create(path)?;
                db.write_text(std::io::BufWriter::new(file))?;
                Ok(("basket", db.len()))
            }
        }
    }
}
