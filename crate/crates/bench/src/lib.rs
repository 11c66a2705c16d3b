//! Seeded inputs for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use stylodrift::synth::{gen_document_corpus, DriftProfile, SynthCorpusConfig};
use stylodrift::{Document, TimeSeries};

/// `k` Gaussian blobs of `per` points in `dim` dimensions.
pub fn blobs(k: usize, per: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    centers
        .iter()
        .flat_map(|c| {
            (0..per)
                .map(|_| c.iter().map(|v| v + noise.sample(&mut rng)).collect::<Vec<f64>>())
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Piecewise-constant series with a level shift every `n / 4` points.
pub fn step_series(n: usize, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let values = (0..n)
        .map(|i| (i * 4 / n.max(1)) as f64 * 2.0 + noise.sample(&mut rng))
        .collect();
    TimeSeries::from_values(values)
}

pub fn documents(authors_per_group: usize, docs_per_period: usize, seed: u64) -> Vec<Document> {
    let cfg = SynthCorpusConfig {
        groups: vec![
            (DriftProfile::adopter(), authors_per_group),
            (DriftProfile::resistor(), authors_per_group),
        ],
        noise_authors: 0,
        docs_per_author_per_period: docs_per_period,
        ..Default::default()
    };
    gen_document_corpus(&cfg, seed).documents
}
