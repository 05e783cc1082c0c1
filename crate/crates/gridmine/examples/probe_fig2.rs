use gridmine::data::{gen_gaussian_mixture, round_robin_partition, GaussianComponent, Metric};
use gridmine::dbscan::{build_local_model, dbscan};
use gridmine::ddbc::*;
use gridmine::sim::{build_topology, TopologyKind};

fn blobs(seed: u64, stdev: f64) -> gridmine::data::Dataset {
    let centers = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 1.0]];
    let comps: Vec<GaussianComponent> = centers
        .iter()
        .enumerate()
        .map(|(i, c)| GaussianComponent { center: c.to_vec(), stdev, count: if i < 2 { 54 } else { 53 } })
        .collect();
    gen_gaussian_mixture(&comps, seed).unwrap()
}

fn main() {
    let seeds = [101u64, 102, 103, 104, 105];
    for stdev in [0.045] {
        for eps in [0.03, 0.035, 0.04, 0.045] {
            for factor in [1.0, 1.25] {
                print!("stdev={stdev} eps={eps} f={factor}:");
                for &seed in &seeds {
                    let ds = blobs(seed, stdev);
                    let cent = dbscan(&ds, eps, 4, Metric::Euclidean).unwrap();
                    let part = round_robin_partition(&ds, 2).unwrap();
                    let sites = ds.split(&part).unwrap();
                    let leps = eps * factor;
                    let models: Vec<_> = sites.iter().map(|s| build_local_model(s, leps, 4, Metric::Euclidean).unwrap()).collect();
                    let counts: Vec<usize> = models.iter().map(|m| m.cluster_count()).collect();
                    let topo = build_topology(2, TopologyKind::BinaryTree, None).unwrap();
                    let global = hierarchical_merge(&models, &topo, &MergeConfig::default()).unwrap();
                    let members = assign_members(&global, &ds, Metric::Euclidean);
                    let p = quality_p(&members, &cent.to_map()).unwrap();
                    print!(" [{seed}: c={} l={}/{} g={} p={:.3}]", cent.cluster_count(), counts[0], counts[1], global.cluster_count(), p);
                }
                println!();
            }
        }
    }
}
