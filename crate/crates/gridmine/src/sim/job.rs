//! Job descriptors: which algorithm, over which dataset, split how, merged
//! along which topology, written where.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::Metric;
use crate::ddbc::{EpsAverRule, ThetaRule};
use crate::error::{Error, Result};
use crate::sim::topology::TopologyKind;
use crate::variance::LocalAlgo;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
}

impl Default for TopologySpec {
    fn default() -> Self {
        TopologySpec {
            kind: TopologyKind::BinaryTree,
            p: None,
        }
    }
}

/// A single value for every site or one value per site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerSite<T> {
    Uniform(T),
    Each(Vec<T>),
}

impl<T: Copy> PerSite<T> {
    pub fn for_site(&self, site: usize) -> T {
        match self {
            PerSite::Uniform(v) => *v,
            PerSite::Each(vs) => vs[site],
        }
    }

    pub fn validate_len(&self, sites: usize, what: &str) -> Result<()> {
        if let PerSite::Each(vs) = self {
            if vs.len() != sites {
                return Err(Error::InvalidJob(format!(
                    "{what} lists {} values for {sites} sites",
                    vs.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DdbcConfig {
    pub eps: PerSite<f64>,
    pub minpts: usize,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default)]
    pub theta: ThetaRule,
    #[serde(default)]
    pub eps_aver: EpsAverRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_level: Option<usize>,
    /// Epsilon for the centralized oracle run; defaults to the smallest
    /// site epsilon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_eps: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum VarLimitSpec {
    Absolute(f64),
    /// Limit = factor * the highest individual subcluster variance.
    MaxIndividualFactor(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceJobConfig {
    pub k: PerSite<usize>,
    #[serde(default)]
    pub algo: LocalAlgo,
    pub var_limit: VarLimitSpec,
    #[serde(default = "default_border_fraction")]
    pub border_fraction: f64,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_true")]
    pub perturb: bool,
}

fn default_border_fraction() -> f64 {
    0.2
}

fn default_max_rounds() -> usize {
    8
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SupportSpec {
    Absolute(u64),
    Relative(f64),
}

impl SupportSpec {
    /// Absolute count for a database of n transactions (ceiling for
    /// relative specs).
    pub fn absolute_for(&self, n: usize) -> u64 {
        match *self {
            SupportSpec::Absolute(c) => c,
            SupportSpec::Relative(f) => (f * n as f64).ceil().max(1.0) as u64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriJobConfig {
    /// Requested itemset size.
    pub k: usize,
    pub min_support: SupportSpec,
    #[serde(default)]
    pub compare_baseline: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "config", rename_all = "lowercase")]
pub enum AlgorithmConfig {
    Ddbc(DdbcConfig),
    Variance(VarianceJobConfig),
    Apriori(AprioriJobConfig),
}

impl AlgorithmConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmConfig::Ddbc(_) => "ddbc",
            AlgorithmConfig::Variance(_) => "variance",
            AlgorithmConfig::Apriori(_) => "apriori",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub result: PathBuf,
    pub trace: PathBuf,
    pub metrics: PathBuf,
    /// Variance jobs write the gathered subcluster statistics here as
    /// JSON lines when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub id: String,
    /// CSV dataset for clustering jobs, transaction file for apriori.
    pub dataset: PathBuf,
    pub sites: usize,
    #[serde(default)]
    pub topology: TopologySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub algorithm: AlgorithmConfig,
    pub output: OutputSpec,
}

impl JobSpec {
    pub fn from_json(json: &str) -> Result<Self> {
        let spec: JobSpec = serde_json::from_str(json)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::InvalidJob("job id must not be empty".into()));
        }
        if self.sites == 0 {
            return Err(Error::InvalidJob("site count must be >= 1".into()));
        }
        if self.topology.kind == TopologyKind::TreeP {
            match self.topology.p {
                Some(p) if p >= 2 => {}
                _ => {
                    return Err(Error::InvalidJob(
                        "tree_p topology requires group size p >= 2".into(),
                    ))
                }
            }
        }
        match &self.algorithm {
            AlgorithmConfig::Ddbc(cfg) => {
                cfg.eps.validate_len(self.sites, "eps")?;
                for site in 0..self.sites {
                    if !(cfg.eps.for_site(site) > 0.0) {
                        return Err(Error::InvalidJob("eps must be positive".into()));
                    }
                }
                if cfg.minpts == 0 {
                    return Err(Error::InvalidJob("minpts must be >= 1".into()));
                }
            }
            AlgorithmConfig::Variance(cfg) => {
                cfg.k.validate_len(self.sites, "k")?;
                for site in 0..self.sites {
                    if cfg.k.for_site(site) == 0 {
                        return Err(Error::InvalidJob("k must be >= 1".into()));
                    }
                }
                match cfg.var_limit {
                    VarLimitSpec::Absolute(v) if v > 0.0 => {}
                    VarLimitSpec::MaxIndividualFactor(f) if f > 0.0 => {}
                    _ => {
                        return Err(Error::InvalidJob(
                            "variance limit must be positive".into(),
                        ))
                    }
                }
                if !(cfg.border_fraction > 0.0 && cfg.border_fraction <= 1.0) {
                    return Err(Error::InvalidJob(
                        "border_fraction must lie in (0, 1]".into(),
                    ));
                }
            }
            AlgorithmConfig::Apriori(cfg) => {
                if cfg.k == 0 {
                    return Err(Error::InvalidJob("requested size k must be >= 1".into()));
                }
                match cfg.min_support {
                    SupportSpec::Absolute(c) if c >= 1 => {}
                    SupportSpec::Relative(f) if f > 0.0 && f <= 1.0 => {}
                    _ => {
                        return Err(Error::InvalidJob(
                            "min_support must be a positive count or a fraction in (0, 1]".into(),
                        ))
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_json(algorithm: &str, config: serde_json::Value) -> String {
        serde_json::json!({
            "id": "demo",
            "dataset": "data.csv",
            "sites": 2,
            "algorithm": algorithm,
            "config": config,
            "output": {
                "result": "result.json",
                "trace": "trace.json",
                "metrics": "metrics.csv"
            }
        })
        .to_string()
    }

    #[test]
    fn ddbc_job_round_trip() {
        let json = demo_json(
            "ddbc",
            serde_json::json!({"eps": 0.01, "minpts": 4}),
        );
        let spec = JobSpec::from_json(&json).unwrap();
        assert_eq!(spec.algorithm.name(), "ddbc");
        let AlgorithmConfig::Ddbc(cfg) = &spec.algorithm else {
            panic!()
        };
        assert_eq!(cfg.eps.for_site(1), 0.01);
        let back: JobSpec =
            serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn per_site_lists_must_match_site_count() {
        let json = demo_json(
            "ddbc",
            serde_json::json!({"eps": [0.01, 0.02, 0.03], "minpts": 4}),
        );
        assert!(matches!(
            JobSpec::from_json(&json),
            Err(Error::InvalidJob(_))
        ));
    }

    #[test]
    fn config_kind_must_match_algorithm() {
        let json = demo_json("variance", serde_json::json!({"eps": 0.01, "minpts": 4}));
        assert!(JobSpec::from_json(&json).is_err());
    }

    #[test]
    fn variance_and_apriori_configs_validate() {
        let json = demo_json(
            "variance",
            serde_json::json!({
                "k": [5, 7],
                "var_limit": {"rule": "max_individual_factor", "value": 2.0}
            }),
        );
        let spec = JobSpec::from_json(&json).unwrap();
        let AlgorithmConfig::Variance(cfg) = &spec.algorithm else {
            panic!()
        };
        assert_eq!(cfg.k.for_site(1), 7);
        assert!(cfg.perturb);

        let json = demo_json(
            "apriori",
            serde_json::json!({
                "k": 4,
                "min_support": {"kind": "relative", "value": 0.1}
            }),
        );
        let spec = JobSpec::from_json(&json).unwrap();
        let AlgorithmConfig::Apriori(cfg) = &spec.algorithm else {
            panic!()
        };
        assert_eq!(cfg.min_support.absolute_for(100), 10);
        assert_eq!(SupportSpec::Absolute(7).absolute_for(100), 7);
        assert_eq!(SupportSpec::Relative(0.101).absolute_for(100), 11);
    }

    #[test]
    fn invalid_topology_is_rejected() {
        let mut spec = JobSpec::from_json(&demo_json(
            "ddbc",
            serde_json::json!({"eps": 0.01, "minpts": 4}),
        ))
        .unwrap();
        spec.topology = TopologySpec {
            kind: TopologyKind::TreeP,
            p: None,
        };
        assert!(spec.validate().is_err());
    }
}
