use chrono::{DateTime, Datelike};
use serde::{Deserialize, Serialize};

use super::Document;
use crate::changepoint::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    #[default]
    Monthly,
    Quarterly,
}

impl Granularity {
    fn index(self, ts: i64) -> i64 {
        let dt = DateTime::from_timestamp(ts, 0).unwrap_or_default();
        let month0 = dt.month0() as i64;
        match self {
            Granularity::Monthly => dt.year() as i64 * 12 + month0,
            Granularity::Quarterly => dt.year() as i64 * 4 + month0 / 3,
        }
    }

    fn label(self, index: i64) -> String {
        match self {
            Granularity::Monthly => {
                format!("{:04}-{:02}", index.div_euclid(12), index.rem_euclid(12) + 1)
            }
            Granularity::Quarterly => {
                format!("{:04}Q{}", index.div_euclid(4), index.rem_euclid(4) + 1)
            }
        }
    }
}

/// Calendar-aligned buckets from the first to the last populated one.
/// Interior buckets without values are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketedSeries {
    pub granularity: Granularity,
    pub labels: Vec<String>,
    pub values: Vec<Option<f64>>,
    pub counts: Vec<usize>,
}

impl BucketedSeries {
    /// Non-missing buckets only, in order.
    pub fn to_time_series(&self) -> TimeSeries {
        let (labels, values) = self
            .labels
            .iter()
            .zip(&self.values)
            .filter_map(|(l, v)| v.map(|v| (l.clone(), v)))
            .unzip();
        TimeSeries::new(labels, values)
    }

    pub fn missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

/// Buckets documents by UTC calendar month or quarter and averages
/// `value_of` within each bucket. Documents whose value is `None` are skipped.
pub fn bucket_series<F>(docs: &[Document], value_of: F, granularity: Granularity) -> BucketedSeries
where
    F: Fn(&Document) -> Option<f64>,
{
    let points: Vec<(i64, f64)> = docs
        .iter()
        .filter_map(|d| value_of(d).map(|v| (granularity.index(d.timestamp), v)))
        .collect();
    let (Some(lo), Some(hi)) = (points.iter().map(|p| p.0).min(), points.iter().map(|p| p.0).max()) else {
        return BucketedSeries {
            granularity,
            labels: vec![],
            values: vec![],
            counts: vec![],
        };
    };
    let len = (hi - lo + 1) as usize;
    let mut sums = vec![0.0; len];
    let mut counts = vec![0usize; len];
    for (idx, v) in points {
        let slot = (idx - lo) as usize;
        sums[slot] += v;
        counts[slot] += 1;
    }
    BucketedSeries {
        granularity,
        labels: (lo..=hi).map(|i| granularity.label(i)).collect(),
        values: sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| (c > 0).then(|| s / c as f64))
            .collect(),
        counts,
    }
}
