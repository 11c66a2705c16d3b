//! Per-author change vectors across the boundary.
//!
//! Two standardization stages: per-document values are z-scored within each
//! author over the pooled pre and post documents (so a raw delta is in author
//! SD units), then each delta column is winsorized and standardized across
//! authors before clustering.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::stylometry::FeatureRecord;
use crate::util::{mean, percentile_sorted, population_sd, sample_sd};

pub const FEATURE_COUNT: usize = 8;
const DEGENERATE_SD: f64 = 1e-12;
/// Below this many authors percentile clipping is skipped.
pub const MIN_AUTHORS_FOR_WINSORIZING: usize = 40;
pub const WINSOR_LOWER: f64 = 0.025;
pub const WINSOR_UPPER: f64 = 0.975;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Ppl,
    Ttr,
    Fkgl,
    Passive,
    FirstPerson,
    Punct,
    SentLen,
    AiTopicShare,
}

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::Ppl,
        Feature::Ttr,
        Feature::Fkgl,
        Feature::Passive,
        Feature::FirstPerson,
        Feature::Punct,
        Feature::SentLen,
        Feature::AiTopicShare,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn column(self) -> &'static str {
        match self {
            Feature::Ppl => "d_ppl",
            Feature::Ttr => "d_ttr",
            Feature::Fkgl => "d_fkgl",
            Feature::Passive => "d_passive",
            Feature::FirstPerson => "d_firstperson",
            Feature::Punct => "d_punct",
            Feature::SentLen => "d_sentlen",
            Feature::AiTopicShare => "d_ai_topic_share",
        }
    }

    /// Name of the underlying per-document measurement.
    pub fn doc_column(self) -> &'static str {
        match self {
            Feature::Ppl => "delta_ppl",
            Feature::Ttr => "ttr",
            Feature::Fkgl => "fkgl",
            Feature::Passive => "passive_pct",
            Feature::FirstPerson => "first_person_pct",
            Feature::Punct => "punct_density",
            Feature::SentLen => "mean_sent_len",
            Feature::AiTopicShare => "ai_topic_share",
        }
    }
}

pub type DocValues = [Option<f64>; FEATURE_COUNT];

pub fn doc_values(features: &FeatureRecord, delta_ppl: Option<f64>) -> DocValues {
    [
        delta_ppl,
        features.ttr,
        features.fkgl,
        features.passive_pct,
        features.first_person_pct,
        features.punct_density,
        features.mean_sent_len,
        features.ai_topic_share,
    ]
}

/// Per-document values of one author, split by period.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuthorValues {
    pub author_id: String,
    pub pre: Vec<DocValues>,
    pub post: Vec<DocValues>,
}

impl AuthorValues {
    fn column(docs: &[DocValues], f: usize) -> Vec<f64> {
        docs.iter().filter_map(|d| d[f]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodMeans {
    pub pre: DocValues,
    pub post: DocValues,
}

/// Per-period arithmetic means, ignoring missing values.
pub fn author_period_means(values: &AuthorValues) -> PeriodMeans {
    let mut pre = [None; FEATURE_COUNT];
    let mut post = [None; FEATURE_COUNT];
    for f in 0..FEATURE_COUNT {
        pre[f] = mean(&AuthorValues::column(&values.pre, f));
        post[f] = mean(&AuthorValues::column(&values.post, f));
    }
    PeriodMeans { pre, post }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDelta {
    pub author_id: String,
    /// Post mean minus pre mean of the within-author z-scored values.
    /// `None` when either period has no valid value.
    pub values: DocValues,
    /// Features whose pooled within-author SD is (near) zero; their delta is 0.
    pub degenerate: Vec<Feature>,
    pub n_pre: usize,
    pub n_post: usize,
}

pub fn raw_delta(values: &AuthorValues) -> RawDelta {
    let mut out = [None; FEATURE_COUNT];
    let mut degenerate = Vec::new();
    for f in Feature::ALL {
        let pre = AuthorValues::column(&values.pre, f.index());
        let post = AuthorValues::column(&values.post, f.index());
        let (Some(m_pre), Some(m_post)) = (mean(&pre), mean(&post)) else {
            continue;
        };
        // Canonical order so swapping periods gives the identical SD.
        let mut pooled: Vec<f64> = pre.iter().chain(&post).copied().collect();
        pooled.sort_by(f64::total_cmp);
        let sd = sample_sd(&pooled).unwrap_or(0.0);
        out[f.index()] = Some(if sd < DEGENERATE_SD {
            degenerate.push(f);
            0.0
        } else {
            (m_post - m_pre) / sd
        });
    }
    RawDelta {
        author_id: values.author_id.clone(),
        values: out,
        degenerate,
        n_pre: values.pre.len(),
        n_post: values.post.len(),
    }
}

/// Standardized change vector of one author.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorDelta {
    pub author_id: String,
    pub values: [f64; FEATURE_COUNT],
    pub n_pre: usize,
    pub n_post: usize,
}

impl AuthorDelta {
    pub fn get(&self, f: Feature) -> f64 {
        self.values[f.index()]
    }
    pub fn d_ppl(&self) -> f64 {
        self.get(Feature::Ppl)
    }
    pub fn d_ai_topic_share(&self) -> f64 {
        self.get(Feature::AiTopicShare)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStandardization {
    pub feature: Feature,
    /// Winsorization bounds (2.5th / 97.5th percentiles before clipping).
    pub lower: f64,
    pub upper: f64,
    pub winsorized: usize,
    /// Mean and population SD of the clipped column.
    pub mean: f64,
    pub sd: f64,
    pub dropped: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StandardizationReport {
    pub features: Vec<FeatureStandardization>,
    /// Authors left out for a missing component.
    pub excluded_authors: Vec<String>,
    pub clipping_skipped: bool,
    pub warnings: Vec<String>,
}

impl StandardizationReport {
    pub fn active_features(&self) -> Vec<Feature> {
        self.features.iter().filter(|f| !f.dropped).map(|f| f.feature).collect()
    }
}

/// Clips `values` in place to the `[lo_q, hi_q]` percentiles (linear
/// interpolation). Returns the bounds and how many values were changed.
pub fn winsorize(values: &mut [f64], lo_q: f64, hi_q: f64) -> (f64, f64, usize) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = percentile_sorted(&sorted, lo_q);
    let hi = percentile_sorted(&sorted, hi_q);
    let mut changed = 0;
    for v in values.iter_mut() {
        let c = v.clamp(lo, hi);
        if c != *v {
            changed += 1;
            *v = c;
        }
    }
    (lo, hi, changed)
}

/// Winsorizes each column at 2.5/97.5 percentiles and standardizes it to
/// population mean 0 and SD 1 across authors. Authors with any missing
/// component are excluded. A column with zero spread is dropped (set to 0).
pub fn winsorize_and_standardize(raw: &[RawDelta]) -> (Vec<AuthorDelta>, StandardizationReport) {
    let mut report = StandardizationReport::default();
    let complete: Vec<(&RawDelta, [f64; FEATURE_COUNT])> = raw
        .iter()
        .filter_map(|r| {
            let mut vals = [0.0; FEATURE_COUNT];
            for (slot, v) in vals.iter_mut().zip(&r.values) {
                *slot = (*v)?;
            }
            Some((r, vals))
        })
        .collect();
    report.excluded_authors = raw
        .iter()
        .filter(|r| r.values.iter().any(Option::is_none))
        .map(|r| r.author_id.clone())
        .collect();
    if complete.is_empty() {
        report.warnings.push("no author has a complete change vector".into());
        return (Vec::new(), report);
    }
    let clip = complete.len() >= MIN_AUTHORS_FOR_WINSORIZING;
    if !clip {
        report.clipping_skipped = true;
        report.warnings.push(format!(
            "only {} complete authors (< {MIN_AUTHORS_FOR_WINSORIZING}); winsorization skipped",
            complete.len()
        ));
    }

    let mut columns: Vec<Vec<f64>> = (0..FEATURE_COUNT)
        .map(|f| complete.iter().map(|(_, v)| v[f]).collect())
        .collect();
    for (f, col) in Feature::ALL.iter().zip(columns.iter_mut()) {
        let (lower, upper, winsorized) = if clip {
            winsorize(col, WINSOR_LOWER, WINSOR_UPPER)
        } else {
            let mut s = col.clone();
            s.sort_by(f64::total_cmp);
            (
                percentile_sorted(&s, WINSOR_LOWER),
                percentile_sorted(&s, WINSOR_UPPER),
                0,
            )
        };
        let m = mean(col).unwrap_or(0.0);
        let sd = population_sd(col).unwrap_or(0.0);
        let dropped = sd < DEGENERATE_SD;
        if dropped {
            report.warnings.push(format!(
                "{} has no spread across authors; dropped from the vector",
                f.column()
            ));
        }
        for v in col.iter_mut() {
            *v = if dropped { 0.0 } else { (*v - m) / sd };
        }
        report.features.push(FeatureStandardization {
            feature: *f,
            lower,
            upper,
            winsorized,
            mean: m,
            sd,
            dropped,
        });
    }

    let deltas = complete
        .iter()
        .enumerate()
        .map(|(i, (r, _))| {
            let mut values = [0.0; FEATURE_COUNT];
            for (f, v) in values.iter_mut().enumerate() {
                *v = columns[f][i];
            }
            AuthorDelta {
                author_id: r.author_id.clone(),
                values,
                n_pre: r.n_pre,
                n_post: r.n_post,
            }
        })
        .collect();
    (deltas, report)
}

/// Rows of the clustering input and the features they hold. The theme axis
/// is included only when `include_theme` is set; dropped features never are.
pub fn clustering_matrix(
    deltas: &[AuthorDelta],
    report: &StandardizationReport,
    include_theme: bool,
) -> (Vec<Vec<f64>>, Vec<Feature>) {
    let features: Vec<Feature> = report
        .active_features()
        .into_iter()
        .filter(|f| include_theme || *f != Feature::AiTopicShare)
        .collect();
    let rows = deltas
        .iter()
        .map(|d| features.iter().map(|f| d.get(*f)).collect())
        .collect();
    (rows, features)
}

fn header() -> Vec<&'static str> {
    let mut h = vec!["author_id"];
    h.extend(Feature::ALL.iter().map(|f| f.column()));
    h.extend(["n_pre", "n_post"]);
    h
}

pub fn write_delta_csv<W: Write>(deltas: &[AuthorDelta], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    for d in deltas {
        let mut row = vec![d.author_id.clone()];
        row.extend(d.values.iter().map(f64::to_string));
        row.extend([d.n_pre.to_string(), d.n_post.to_string()]);
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Raw (within-author) deltas; missing components are empty cells.
pub fn write_raw_delta_csv<W: Write>(deltas: &[RawDelta], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    for d in deltas {
        let mut row = vec![d.author_id.clone()];
        row.extend(d.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        row.extend([d.n_pre.to_string(), d.n_post.to_string()]);
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_delta_csv<R: Read>(input: R) -> Result<Vec<AuthorDelta>, csv::Error> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let bad = |what: &str| {
            csv::Error::from(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("bad {what} in delta row {:?}", row.position().map(|p| p.line())),
            ))
        };
        if row.len() != FEATURE_COUNT + 3 {
            return Err(bad("column count"));
        }
        let mut values = [0.0; FEATURE_COUNT];
        for (f, v) in values.iter_mut().enumerate() {
            *v = row[f + 1].parse().map_err(|_| bad("value"))?;
        }
        out.push(AuthorDelta {
            author_id: row[0].to_string(),
            values,
            n_pre: row[FEATURE_COUNT + 1].parse().map_err(|_| bad("n_pre"))?,
            n_post: row[FEATURE_COUNT + 2].parse().map_err(|_| bad("n_post"))?,
        });
    }
    Ok(out)
}

/// Mean standardized delta per group label, for archetype profiles.
pub fn group_profiles<K: Ord + Clone>(
    deltas: &[AuthorDelta],
    label_of: impl Fn(&AuthorDelta) -> K,
) -> BTreeMap<K, [f64; FEATURE_COUNT]> {
    let mut acc: BTreeMap<K, ([f64; FEATURE_COUNT], usize)> = BTreeMap::new();
    for d in deltas {
        let e = acc.entry(label_of(d)).or_insert(([0.0; FEATURE_COUNT], 0));
        for (s, v) in e.0.iter_mut().zip(&d.values) {
            *s += v;
        }
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (mut s, n))| {
            s.iter_mut().for_each(|v| *v /= n as f64);
            (k, s)
        })
        .collect()
}
