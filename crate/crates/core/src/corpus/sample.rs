use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BoundaryConfig, CorpusError, Document, Period};

/// Stratum that absorbs categories not listed in the quota map.
pub const OTHER_CATEGORY: &str = "Other";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuotaConfig {
    pub fractions: BTreeMap<String, f64>,
    pub tolerance: f64,
    /// Documents to draw per sampling group. When absent, the largest size
    /// that every stratum can satisfy at its quota is used.
    pub sample_size: Option<usize>,
}

impl Default for QuotaConfig {
    fn default() -> Self {
        let fractions = [("Gaming", 0.23), ("Tech", 0.31), ("Social", 0.28), ("Other", 0.18)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        Self {
            fractions,
            tolerance: 0.02,
            sample_size: None,
        }
    }
}

impl QuotaConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.fractions.is_empty() {
            return Err(CorpusError::Config("quota map is empty".into()));
        }
        if let Some((k, v)) = self.fractions.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(CorpusError::Config(format!("quota for {k} is {v}, outside [0, 1]")));
        }
        let sum: f64 = self.fractions.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::Config(format!("quota fractions sum to {sum}, not 1")));
        }
        if self.tolerance < 0.0 {
            return Err(CorpusError::Config("tolerance must be non-negative".into()));
        }
        Ok(())
    }

    fn stratum_of<'a>(&'a self, category: &'a str) -> Option<&'a str> {
        if self.fractions.contains_key(category) {
            Some(category)
        } else if self.fractions.contains_key(OTHER_CATEGORY) {
            Some(OTHER_CATEGORY)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumCount {
    pub available: usize,
    pub target: usize,
    pub taken: usize,
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    /// `None` when sampling is pooled across periods.
    pub period: Option<Period>,
    pub size: usize,
    pub strata: BTreeMap<String, StratumCount>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SampleReport {
    pub groups: Vec<GroupReport>,
    pub warnings: Vec<String>,
}

/// Apportions `total` across `weights` by the largest-remainder method.
/// Remainder ties go to the earlier key.
fn apportion(total: usize, weights: &BTreeMap<&str, f64>) -> BTreeMap<String, usize> {
    let wsum: f64 = weights.values().sum();
    if wsum <= 0.0 {
        return weights.keys().map(|k| (k.to_string(), 0)).collect();
    }
    let mut out = BTreeMap::new();
    let mut rems = Vec::new();
    let mut assigned = 0;
    for (k, w) in weights {
        let exact = total as f64 * w / wsum;
        let base = exact.floor() as usize;
        assigned += base;
        out.insert(k.to_string(), base);
        rems.push((exact - base as f64, *k));
    }
    rems.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    for (_, k) in rems.into_iter().take(total.saturating_sub(assigned)) {
        *out.get_mut(k).unwrap() += 1;
    }
    out
}

/// Quota-balanced sample. Output is sorted by `(timestamp, doc_id)` and is a
/// pure function of the document set, quotas and seed.
///
/// With `per_period` set, pre and post documents are sampled as separate
/// groups (split at the boundary timestamp) so each side meets the quotas.
/// An exhausted stratum contributes everything it has and the remaining
/// quota mass is renormalized over the other strata.
pub fn stratified_sample(
    docs: &[Document],
    quotas: &QuotaConfig,
    per_period: Option<&BoundaryConfig>,
    seed: u64,
) -> Result<(Vec<Document>, SampleReport), CorpusError> {
    quotas.validate()?;
    let mut groups: BTreeMap<Option<Period>, BTreeMap<&str, Vec<&Document>>> = BTreeMap::new();
    for doc in docs {
        let stratum = quotas.stratum_of(&doc.category).ok_or_else(|| {
            CorpusError::Config(format!(
                "category {:?} has no quota and no {OTHER_CATEGORY:?} stratum exists",
                doc.category
            ))
        })?;
        let key = per_period.map(|b| {
            if doc.timestamp < b.boundary_ts {
                Period::Pre
            } else {
                Period::Post
            }
        });
        groups.entry(key).or_default().entry(stratum).or_default().push(doc);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SampleReport::default();
    let mut sampled: Vec<Document> = Vec::new();

    for (period, mut strata) in groups {
        let available: BTreeMap<&str, usize> = quotas
            .fractions
            .keys()
            .map(|k| (k.as_str(), strata.get(k.as_str()).map_or(0, Vec::len)))
            .collect();
        let size = quotas.sample_size.unwrap_or_else(|| {
            quotas
                .fractions
                .iter()
                .filter(|(_, f)| **f > 0.0)
                .map(|(k, f)| (available[k.as_str()] as f64 / f).floor() as usize)
                .min()
                .unwrap_or(0)
        });

        let mut fixed: BTreeMap<&str, usize> = BTreeMap::new();
        let targets = loop {
            let budget = size.saturating_sub(fixed.values().sum());
            let open: BTreeMap<&str, f64> = quotas
                .fractions
                .iter()
                .filter(|(k, _)| !fixed.contains_key(k.as_str()))
                .map(|(k, f)| (k.as_str(), *f))
                .collect();
            let targets = apportion(budget, &open);
            let newly: Vec<&str> = open.keys().copied().filter(|k| available[k] < targets[*k]).collect();
            if newly.is_empty() {
                break targets;
            }
            for k in newly {
                report.warnings.push(format!(
                    "stratum {k} exhausted ({} available, {} wanted){}; remaining quotas renormalized",
                    available[k],
                    targets[k],
                    period.map(|p| format!(" in {p:?} period")).unwrap_or_default(),
                ));
                fixed.insert(k, available[k]);
            }
        };

        let mut counts = BTreeMap::new();
        for (k, &avail) in &available {
            let (target, exhausted) = match fixed.get(k) {
                Some(&n) => (n, true),
                None => (targets[*k], false),
            };
            if let Some(pool) = strata.get_mut(k) {
                pool.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
                pool.shuffle(&mut rng);
                sampled.extend(pool.iter().take(target).map(|d| (*d).clone()));
            }
            counts.insert(
                k.to_string(),
                StratumCount {
                    available: avail,
                    target,
                    taken: target.min(avail),
                    exhausted,
                },
            );
        }
        let taken: usize = counts.values().map(|c| c.taken).sum();
        for (k, c) in &counts {
            if c.exhausted || taken == 0 {
                continue;
            }
            let achieved = c.taken as f64 / taken as f64;
            let wanted = quotas.fractions[k];
            if fixed.is_empty() && (achieved - wanted).abs() > quotas.tolerance {
                report.warnings.push(format!(
                    "stratum {k} at {achieved:.4}, quota {wanted:.4} outside tolerance"
                ));
            }
        }
        report.groups.push(GroupReport {
            period,
            size: taken,
            strata: counts,
        });
    }

    sampled.sort_by(|a, b| (a.timestamp, &a.doc_id).cmp(&(b.timestamp, &b.doc_id)));
    Ok((sampled, report))
}
