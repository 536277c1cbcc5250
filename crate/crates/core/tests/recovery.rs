use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use arealrisk::estimators::quantile_sorted;
use arealrisk::graph::AdjacencyGraph;
use arealrisk::model::{Dataset, Link, ModelSpec};
use arealrisk::sampler::{run_chain, SamplerConfig};

const SLOPE: f64 = 0.4;

fn simulate(graph: &AdjacencyGraph, rng: &mut ChaCha8Rng) -> Dataset {
    let ni = graph.n_regions();
    let cols = 5;
    let n: Vec<f64> = (0..ni).map(|_| rng.random_range(20_000.0..80_000.0)).collect();
    let x: Vec<f64> = (0..ni).map(|_| rng.random_range(-1.0..1.0)).collect();
    // smooth east-west gradient, centered
    let phi: Vec<f64> = (0..ni).map(|i| 0.1 * ((i % cols) as f64 - 2.0)).collect();
    let y: Vec<u64> = (0..ni)
        .map(|i| {
            let p = Link::Logit.probability(-6.5 + SLOPE * x[i] + phi[i]);
            Poisson::new(n[i] * p).unwrap().sample(rng) as u64
        })
        .collect();
    Dataset::new(graph.region_ids().to_vec(), None, y, n, vec!["x".into()], x).unwrap()
}

#[test]
fn covariate_slope_interval_covers_truth() {
    let graph = AdjacencyGraph::lattice(5, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let replicates = 50;
    let mut covered = 0;
    for b in 0..replicates {
        let data = simulate(&graph, &mut rng);
        let config = SamplerConfig {
            n_iterations: 6000,
            burn_in: 2000,
            seed: 1000 + b as u64,
            ..SamplerConfig::default()
        };
        let samples = run_chain(&data, &graph, &ModelSpec::cg_static(Link::Logit), &config).unwrap();
        let mut slope: Vec<f64> = (0..samples.n_draws).map(|d| samples.beta_draw(d)[1]).collect();
        slope.sort_by(f64::total_cmp);
        let (lo, hi) = (quantile_sorted(&slope, 0.05), quantile_sorted(&slope, 0.95));
        if lo <= SLOPE && SLOPE <= hi {
            covered += 1;
        }
    }
    assert!(covered >= 40, "slope covered in {covered} of {replicates} replicates");
}
