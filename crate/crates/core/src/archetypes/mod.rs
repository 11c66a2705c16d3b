//! Density clustering of change vectors and archetype naming.

mod hdbscan;
mod validity;

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delta::{AuthorDelta, Feature};
use crate::util::percentile_sorted;

pub use validity::{adjusted_rand_index, davies_bouldin, silhouette_inliers};

pub const NOISE: i32 = -1;
/// Mean bootstrap ARI that counts as a stable clustering.
pub const ARI_THRESHOLD: f64 = 0.73;

#[derive(Debug, thiserror::Error)]
pub enum ArchetypeError {
    #[error("row {row} has {found} coordinates, expected {expected}")]
    Dimension { row: usize, expected: usize, found: usize },
    #[error("row {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("{n} points is fewer than min_cluster_size {min_cluster_size}")]
    TooFewPoints { n: usize, min_cluster_size: usize },
    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid clustering config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    #[default]
    Eom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HdbscanConfig {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub metric: Metric,
    pub selection: Selection,
    pub alpha: f64,
}

impl Default for HdbscanConfig {
    fn default() -> Self {
        Self {
            min_cluster_size: 15,
            min_samples: 5,
            metric: Metric::Euclidean,
            selection: Selection::Eom,
            alpha: 1.0,
        }
    }
}

impl HdbscanConfig {
    pub fn validate(&self) -> Result<(), ArchetypeError> {
        if self.min_cluster_size < 2 {
            return Err(ArchetypeError::Config("min_cluster_size must be at least 2".into()));
        }
        if self.min_samples < 1 {
            return Err(ArchetypeError::Config("min_samples must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(ArchetypeError::Config(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Archetype {
    Adopter,
    Resistor,
    Pragmatist,
    Unnamed,
}

impl std::fmt::Display for Archetype {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// Cluster per point, numbered by first member; −1 is noise.
    pub labels: Vec<i32>,
    pub membership_strength: Vec<f64>,
    pub centroids: Vec<Vec<f64>>,
    pub stabilities: Vec<f64>,
    pub silhouette_inliers: Option<f64>,
    pub davies_bouldin: Option<f64>,
    pub archetype_names: BTreeMap<i32, Archetype>,
}

impl ClusterResult {
    pub fn n_clusters(&self) -> usize {
        self.centroids.len()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    pub fn archetype_of(&self, point: usize) -> Option<Archetype> {
        self.archetype_names.get(&self.labels[point]).copied()
    }
}

/// Cluster labels only, without validity metrics.
pub fn hdbscan_labels(points: &[Vec<f64>], cfg: &HdbscanConfig) -> Result<Vec<i32>, ArchetypeError> {
    Ok(hdbscan::run(points, cfg)?.labels)
}

pub fn hdbscan(points: &[Vec<f64>], cfg: &HdbscanConfig) -> Result<ClusterResult, ArchetypeError> {
    let flat = hdbscan::run(points, cfg)?;
    let k = flat.stabilities.len();
    let centroids = (0..k as i32)
        .map(|c| {
            let members: Vec<usize> = (0..points.len()).filter(|&i| flat.labels[i] == c).collect();
            validity::centroid(points, &members)
        })
        .collect();
    Ok(ClusterResult {
        silhouette_inliers: silhouette_inliers(points, &flat.labels),
        davies_bouldin: davies_bouldin(points, &flat.labels),
        labels: flat.labels,
        membership_strength: flat.strength,
        centroids,
        stabilities: flat.stabilities,
        archetype_names: BTreeMap::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NamingConfig {
    /// Style-axis cut in standardized units.
    pub style_threshold: f64,
}

impl Default for NamingConfig {
    fn default() -> Self {
        Self { style_threshold: 0.25 }
    }
}

/// Names clusters from their `(style, theme)` centroids: the largest style
/// above the threshold is Adopter, the smallest below minus the threshold is
/// Resistor, near-zero style with positive theme is Pragmatist.
pub fn name_from_centroids(centroids: &[(f64, f64)], cfg: &NamingConfig) -> Vec<Archetype> {
    let t = cfg.style_threshold;
    let argmax = (0..centroids.len()).reduce(|a, b| if centroids[b].0 > centroids[a].0 { b } else { a });
    let argmin = (0..centroids.len()).reduce(|a, b| if centroids[b].0 < centroids[a].0 { b } else { a });
    centroids
        .iter()
        .enumerate()
        .map(|(i, &(style, theme))| {
            if Some(i) == argmax && style > t {
                Archetype::Adopter
            } else if Some(i) == argmin && style < -t {
                Archetype::Resistor
            } else if style.abs() <= t && theme > 0.0 {
                Archetype::Pragmatist
            } else {
                Archetype::Unnamed
            }
        })
        .collect()
}

/// Names the clusters of `result` from member means of `d_ppl` (style) and
/// `d_ai_topic_share` (theme). `deltas` must be in the clustered order.
pub fn name_archetypes(result: &ClusterResult, deltas: &[AuthorDelta], cfg: &NamingConfig) -> BTreeMap<i32, Archetype> {
    let k = result.n_clusters();
    let mut sums = vec![(0.0, 0.0, 0usize); k];
    for (d, &l) in deltas.iter().zip(&result.labels) {
        if l != NOISE {
            let s = &mut sums[l as usize];
            s.0 += d.get(Feature::Ppl);
            s.1 += d.get(Feature::AiTopicShare);
            s.2 += 1;
        }
    }
    let centroids: Vec<(f64, f64)> = sums
        .iter()
        .map(|&(a, b, n)| (a / n.max(1) as f64, b / n.max(1) as f64))
        .collect();
    name_from_centroids(&centroids, cfg)
        .into_iter()
        .enumerate()
        .map(|(c, a)| (c as i32, a))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub iterations: usize,
    pub sample_ratio: f64,
    pub seed: u64,
    /// Iterations with an ARI; the rest had fewer than two points that were
    /// clustered in both runs, or too few points to cluster.
    pub scored_iterations: usize,
    pub skipped_iterations: usize,
    pub mean_ari: Option<f64>,
    pub ari_ci95: Option<(f64, f64)>,
    /// Share of base inliers whose modal aligned bootstrap label is their base label.
    pub consistency: Option<f64>,
    pub ari_threshold: f64,
    pub meets_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub iterations: usize,
    pub sample_ratio: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            sample_ratio: 0.8,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), ArchetypeError> {
        if !(self.sample_ratio > 0.0 && self.sample_ratio <= 1.0) {
            return Err(ArchetypeError::Config(format!(
                "sample_ratio must be in (0, 1], got {}",
                self.sample_ratio
            )));
        }
        Ok(())
    }
}

struct Iteration {
    ari: Option<f64>,
    /// (point, base label its bootstrap cluster maps to, or noise)
    aligned: Vec<(usize, i32)>,
}

fn bootstrap_iteration(points: &[Vec<f64>], base: &[i32], cfg: &HdbscanConfig, size: usize, seed: u64) -> Iteration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, points.len(), size).into_vec();
    idx.sort_unstable();
    let sub: Vec<Vec<f64>> = idx.iter().map(|&i| points[i].clone()).collect();
    let Ok(labels) = hdbscan_labels(&sub, cfg) else {
        return Iteration {
            ari: None,
            aligned: Vec::new(),
        };
    };
    let both: Vec<usize> = (0..idx.len())
        .filter(|&k| labels[k] != NOISE && base[idx[k]] != NOISE)
        .collect();
    let ari = if both.len() >= 2 {
        let a: Vec<i32> = both.iter().map(|&k| base[idx[k]]).collect();
        let b: Vec<i32> = both.iter().map(|&k| labels[k]).collect();
        adjusted_rand_index(&a, &b).ok()
    } else {
        None
    };
    // Majority base label for each bootstrap cluster, ties to the smaller label.
    let mut votes: BTreeMap<i32, BTreeMap<i32, usize>> = BTreeMap::new();
    for &k in &both {
        *votes.entry(labels[k]).or_default().entry(base[idx[k]]).or_default() += 1;
    }
    let mapping: BTreeMap<i32, i32> = votes
        .into_iter()
        .map(|(c, v)| {
            let best = v.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(l, _)| *l);
            (c, best.unwrap_or(NOISE))
        })
        .collect();
    let aligned = idx
        .iter()
        .zip(&labels)
        .map(|(&i, &l)| (i, mapping.get(&l).copied().unwrap_or(NOISE)))
        .collect();
    Iteration { ari, aligned }
}

/// Re-clusters `iterations` subsamples of `⌈ratio·n⌉` points drawn without
/// replacement; iteration `i` draws with seed `seed + i`.
pub fn bootstrap_stability(
    points: &[Vec<f64>],
    base_labels: &[i32],
    cfg: &HdbscanConfig,
    boot: &BootstrapConfig,
    seed: u64,
) -> Result<StabilityReport, ArchetypeError> {
    boot.validate()?;
    cfg.validate()?;
    hdbscan::validate_points(points)?;
    if base_labels.len() != points.len() {
        return Err(ArchetypeError::LengthMismatch(points.len(), base_labels.len()));
    }
    let n = points.len();
    let size = ((boot.sample_ratio * n as f64).ceil() as usize).min(n);
    let runs: Vec<Iteration> = (0..boot.iterations as u64)
        .into_par_iter()
        .map(|i| bootstrap_iteration(points, base_labels, cfg, size, seed.wrapping_add(i)))
        .collect();

    let mut aris: Vec<f64> = runs.iter().filter_map(|r| r.ari).collect();
    let mean_ari = (!aris.is_empty()).then(|| aris.iter().sum::<f64>() / aris.len() as f64);
    aris.sort_by(f64::total_cmp);
    let ari_ci95 = (!aris.is_empty()).then(|| (percentile_sorted(&aris, 0.025), percentile_sorted(&aris, 0.975)));

    let mut tally: Vec<BTreeMap<i32, usize>> = vec![BTreeMap::new(); n];
    for r in &runs {
        for &(i, l) in &r.aligned {
            *tally[i].entry(l).or_default() += 1;
        }
    }
    let mut kept = 0usize;
    let mut eligible = 0usize;
    for (i, t) in tally.iter().enumerate() {
        if base_labels[i] == NOISE || t.is_empty() {
            continue;
        }
        eligible += 1;
        let modal = t.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(l, _)| *l);
        if modal == Some(base_labels[i]) {
            kept += 1;
        }
    }
    let consistency = (eligible > 0).then(|| kept as f64 / eligible as f64);
    Ok(StabilityReport {
        iterations: boot.iterations,
        sample_ratio: boot.sample_ratio,
        seed,
        scored_iterations: aris.len(),
        skipped_iterations: boot.iterations - aris.len(),
        mean_ari,
        ari_ci95,
        consistency,
        ari_threshold: ARI_THRESHOLD,
        meets_threshold: mean_ari.is_some_and(|m| m >= ARI_THRESHOLD),
    })
}

/// Re-clusters a seeded permutation of `points` and returns its ARI against
/// `base_labels` after undoing the permutation.
pub fn permutation_ari(
    points: &[Vec<f64>],
    base_labels: &[i32],
    cfg: &HdbscanConfig,
    seed: u64,
) -> Result<f64, ArchetypeError> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let shuffled: Vec<Vec<f64>> = order.iter().map(|&i| points[i].clone()).collect();
    let labels = hdbscan_labels(&shuffled, cfg)?;
    let mut restored = vec![NOISE; points.len()];
    for (k, &i) in order.iter().enumerate() {
        restored[i] = labels[k];
    }
    adjusted_rand_index(base_labels, &restored)
}

/// Per-author assignment table: author_id, label, archetype, strength.
pub fn write_assignment_csv<W: Write>(author_ids: &[String], result: &ClusterResult, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["author_id", "label", "archetype", "strength"])?;
    for (i, id) in author_ids.iter().enumerate() {
        let name = result
            .archetype_of(i)
            .map(|a| a.to_string())
            .unwrap_or_else(|| "Noise".into());
        w.write_record([
            id.clone(),
            result.labels[i].to_string(),
            name,
            result.membership_strength[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
