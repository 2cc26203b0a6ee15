//! Fixtures shared by the benchmarks.

use nlsg::experiment::{preset, ExperimentConfig};
use nlsg::models::{catalog_pair, CatalogEntry, PairOptions};
use nlsg::rng::SeededRng;

/// The bundled closed-loop preset.
pub fn paper_sim() -> ExperimentConfig {
    preset("paper_sim.cfg").expect("bundled preset parses")
}

/// Catalog entry `name` with default options.
pub fn entry(name: &str) -> CatalogEntry {
    catalog_pair(name, &PairOptions::default()).expect("catalog pair")
}

/// `n` regressor/observation pairs drawn from the entry's operating set.
pub fn stream(entry: &CatalogEntry, n: usize, seed: u64) -> Vec<(Vec<f64>, f64)> {
    let mut draws = entry.sampler(seed);
    let mut rng = SeededRng::new(seed ^ 0x5eed);
    (0..n)
        .map(|_| {
            let d = draws();
            let y = entry.observe(&d.phi, &d.theta_star, &mut rng);
            (d.phi, y)
        })
        .collect()
}
