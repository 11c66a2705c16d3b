use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stylodrift::ai_likeness::{self, GapEntry};
use stylodrift::archetypes::{self, NOISE};
use stylodrift::changepoint::{self, SegmentStats};
use stylodrift::corpus::{self, bucket_series, Period};
use stylodrift::delta::{self, AuthorValues};
use stylodrift::stats::{self, PanelRow};
use stylodrift::stylometry::{self, LexiconConfig};
use stylodrift::synth::gen_document_corpus;
use stylodrift::{
    Archetype, AuthorDelta, ClusterResult, Document, Feature, FeatureRecord, GapRecord, StabilityReport,
    StandardizationReport,
};

use crate::run::{Run, StageDir};
use crate::CliError;

pub const STAGES: [&str; 8] = [
    "synth",
    "ingest",
    "features",
    "deltas",
    "changepoint",
    "cluster",
    "stats",
    "report",
];

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_reader(open(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn data_err(path: &Path) -> impl Fn(&dyn std::fmt::Display) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

/// Configured input path, or the run's own synth output.
fn input_or_synth(run: &Run, configured: &Option<PathBuf>, file: &str) -> Result<PathBuf, CliError> {
    match configured {
        Some(p) if p.is_file() => Ok(p.clone()),
        Some(p) => Err(CliError::Config(format!("input {} does not exist", p.display()))),
        None => run.require("synth", file),
    }
}

pub fn synth(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    run.stage("synth", &[], |out| {
        let corpus = gen_document_corpus(&cfg.synth, cfg.seeds.main);
        log::info!(
            "synth: {} documents from {} authors",
            corpus.documents.len(),
            corpus.truth.len()
        );
        out.write_with("corpus.jsonl", |w| corpus.write_corpus(w))?;
        out.write_with("logprobs.jsonl", |w| ai_likeness::write_logprobs(&corpus.logprobs, w))?;
        out.write_with("truth.csv", |w| corpus.write_truth(w))
    })
}

#[derive(Debug, Serialize)]
struct IngestReport {
    parse_warnings: Vec<corpus::ParseWarning>,
    filter: corpus::FilterAudit,
    sample: Option<corpus::SampleReport>,
    dropped_in_window: usize,
    excluded_authors: BTreeMap<String, (usize, usize)>,
    authors: usize,
    documents_pre: usize,
    documents_post: usize,
}

pub fn ingest(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let corpus_path = input_or_synth(run, &cfg.corpus, "corpus.jsonl")?;
    let mut inputs = vec![corpus_path.clone()];
    if let Some(b) = &cfg.bot_list {
        inputs.push(b.clone());
    }
    run.stage("ingest", &inputs, |out| {
        let loaded = corpus::load_corpus(&corpus_path).map_err(CliError::data)?;
        let mut filter = cfg.filter.clone();
        if let Some(b) = &cfg.bot_list {
            filter
                .bot_authors
                .extend(corpus::load_bot_list(b).map_err(CliError::data)?);
        }
        let (kept, audit) = corpus::filter_documents(loaded.documents, &filter).map_err(CliError::data)?;
        let (kept, sample) = match &cfg.quotas {
            Some(q) => {
                let (docs, report) =
                    corpus::stratified_sample(&kept, q, Some(&cfg.boundary), cfg.seeds.main).map_err(CliError::data)?;
                (docs, Some(report))
            }
            None => (kept, None),
        };
        let split = corpus::split_by_boundary(&kept, &cfg.boundary);
        let mut docs: Vec<&Document> = split
            .authors
            .values()
            .flat_map(|s| s.pre.iter().chain(&s.post))
            .collect();
        if docs.is_empty() {
            return Err(CliError::Data(
                "no documents survive filtering and the boundary split".into(),
            ));
        }
        let order = |a: &&Document, b: &&Document| {
            (&a.author_id, a.timestamp, &a.doc_id).cmp(&(&b.author_id, b.timestamp, &b.doc_id))
        };
        docs.sort_by(order);
        // Time series keep the window documents; only the author split drops them.
        let mut filtered: Vec<&Document> = kept.iter().collect();
        filtered.sort_by(order);
        write_jsonl(out, "documents.jsonl", &docs)?;
        write_jsonl(out, "filtered.jsonl", &filtered)?;
        let report = IngestReport {
            parse_warnings: loaded.warnings,
            filter: audit,
            sample,
            dropped_in_window: split.dropped_in_window,
            excluded_authors: split.excluded,
            authors: split.authors.len(),
            documents_pre: split.authors.values().map(|s| s.pre.len()).sum(),
            documents_post: split.authors.values().map(|s| s.post.len()).sum(),
        };
        log::info!(
            "ingest: {} authors, {} pre / {} post documents",
            report.authors,
            report.documents_pre,
            report.documents_post
        );
        out.write_json("ingest_report.json", &report)
    })
}

fn write_jsonl(out: &StageDir, name: &str, docs: &[&Document]) -> Result<(), CliError> {
    out.write_with(name, |w| -> std::io::Result<()> {
        for d in docs {
            serde_json::to_writer(&mut *w, d)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

/// Retained authors' pre and post documents.
fn load_documents(run: &Run) -> Result<(PathBuf, Vec<Document>), CliError> {
    load_jsonl(run, "documents.jsonl")
}

/// Every document that passed filtering, window included.
fn load_filtered(run: &Run) -> Result<(PathBuf, Vec<Document>), CliError> {
    load_jsonl(run, "filtered.jsonl")
}

fn load_jsonl(run: &Run, file: &str) -> Result<(PathBuf, Vec<Document>), CliError> {
    let path = run.require("ingest", file)?;
    let loaded = corpus::load_corpus(&path).map_err(CliError::data)?;
    Ok((path, loaded.documents))
}

#[derive(Debug, Serialize, Deserialize)]
struct LexiconOut {
    terms: Vec<String>,
    idf: Vec<f64>,
    threshold: f64,
}

#[derive(Debug, Serialize)]
struct FeaturesReport {
    documents: usize,
    scored: usize,
    unscored: Vec<String>,
    degenerate_authors: BTreeSet<String>,
    excluded_authors: BTreeSet<String>,
    warnings: Vec<String>,
}

pub fn features(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let (docs_path, docs) = load_filtered(run)?;
    let logprob_path = input_or_synth(run, &cfg.logprobs, "logprobs.jsonl")?;
    let mut inputs = vec![docs_path, logprob_path.clone()];
    if let Some(l) = &cfg.lexicon {
        inputs.push(l.clone());
    }
    run.stage("features", &inputs, |out| {
        let lex_cfg = match &cfg.lexicon {
            Some(p) => LexiconConfig::load(p).map_err(|e| CliError::Config(e.to_string()))?,
            None => LexiconConfig::default(),
        };
        let lexicon = stylometry::build_lexicon(&docs, &lex_cfg);
        let records = stylometry::extract_all(&docs, &lexicon, &cfg.features);
        out.write_with("features.csv", |w| stylometry::write_feature_csv(&records, w))?;

        let logprobs = ai_likeness::load_logprobs(&logprob_path).map_err(CliError::data)?;
        let chars: BTreeMap<String, usize> = docs.iter().map(|d| (d.doc_id.clone(), d.char_count)).collect();
        let table = ai_likeness::compute_gaps(&logprobs, &cfg.judge_model, &cfg.current_model, &chars)
            .map_err(CliError::data)?;
        let mut per_author: BTreeMap<String, Vec<GapEntry>> = BTreeMap::new();
        for d in &docs {
            let (Some(&gap), Some(period)) = (table.gaps.get(&d.doc_id), cfg.boundary.period_of(d.timestamp)) else {
                continue;
            };
            per_author.entry(d.author_id.clone()).or_default().push(GapEntry {
                doc_id: d.doc_id.clone(),
                delta_ppl: gap,
                period,
            });
        }
        let index = ai_likeness::ai_likeness_index(&per_author);
        let gaps: Vec<GapRecord> = docs
            .iter()
            .filter_map(|d| {
                table.gaps.get(&d.doc_id).map(|&g| GapRecord {
                    doc_id: d.doc_id.clone(),
                    delta_ppl: g,
                    ai_likeness: index.index.get(&d.doc_id).copied(),
                })
            })
            .collect();
        out.write_with("gaps.csv", |w| ai_likeness::write_gap_csv(&gaps, w))?;
        out.write_json(
            "lexicon.json",
            &LexiconOut {
                terms: lexicon.terms.clone(),
                idf: lexicon.idf.clone(),
                threshold: lexicon.threshold,
            },
        )?;
        if !table.unscored.is_empty() {
            log::warn!("features: {} documents lack scorer records", table.unscored.len());
        }
        out.write_json(
            "features_report.json",
            &FeaturesReport {
                documents: docs.len(),
                scored: gaps.len(),
                unscored: table.unscored,
                degenerate_authors: index.degenerate,
                excluded_authors: index.excluded,
                warnings: index.warnings,
            },
        )
    })
}

/// Per-document features and gaps joined on doc_id.
struct DocTable {
    features: HashMap<String, FeatureRecord>,
    gaps: HashMap<String, GapRecord>,
}

impl DocTable {
    fn load(run: &Run) -> Result<(Vec<PathBuf>, Self), CliError> {
        let fpath = run.require("features", "features.csv")?;
        let gpath = run.require("features", "gaps.csv")?;
        let features = stylometry::read_feature_csv(open(&fpath)?)
            .map_err(|e| data_err(&fpath)(&e))?
            .into_iter()
            .map(|r| (r.doc_id.clone(), r))
            .collect();
        let gaps = ai_likeness::read_gap_csv(open(&gpath)?)
            .map_err(|e| data_err(&gpath)(&e))?
            .into_iter()
            .map(|r| (r.doc_id.clone(), r))
            .collect();
        Ok((vec![fpath, gpath], Self { features, gaps }))
    }

    /// Raw per-document value of `f`; the perplexity gap for `Ppl`.
    fn raw(&self, doc_id: &str, f: Feature) -> Option<f64> {
        if f == Feature::Ppl {
            return self.gaps.get(doc_id).map(|g| g.delta_ppl);
        }
        let r = self.features.get(doc_id)?;
        delta::doc_values(r, None)[f.index()]
    }

    fn ai_likeness(&self, doc_id: &str) -> Option<f64> {
        self.gaps.get(doc_id).and_then(|g| g.ai_likeness)
    }
}

pub fn deltas(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let (docs_path, docs) = load_documents(run)?;
    let (mut inputs, table) = DocTable::load(run)?;
    inputs.insert(0, docs_path);
    run.stage("deltas", &inputs, |out| {
        let mut authors: BTreeMap<&str, AuthorValues> = BTreeMap::new();
        for d in &docs {
            let Some(period) = cfg.boundary.period_of(d.timestamp) else {
                continue;
            };
            let Some(rec) = table.features.get(&d.doc_id) else {
                continue;
            };
            let values = delta::doc_values(rec, table.ai_likeness(&d.doc_id));
            let a = authors.entry(&d.author_id).or_insert_with(|| AuthorValues {
                author_id: d.author_id.clone(),
                ..Default::default()
            });
            match period {
                Period::Pre => a.pre.push(values),
                Period::Post => a.post.push(values),
            }
        }
        let raw: Vec<_> = authors.values().map(delta::raw_delta).collect();
        let (std_deltas, report) = delta::winsorize_and_standardize(&raw);
        if std_deltas.is_empty() {
            return Err(CliError::Data("no author has a complete delta vector".into()));
        }
        for w in &report.warnings {
            log::warn!("deltas: {w}");
        }
        out.write_with("raw_deltas.csv", |w| delta::write_raw_delta_csv(&raw, w))?;
        out.write_with("deltas.csv", |w| delta::write_delta_csv(&std_deltas, w))?;
        out.write_json("standardization.json", &report)
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeatureBreaks {
    pub feature: Feature,
    pub breakpoints: Vec<usize>,
    pub bucket_labels_at_breaks: Vec<String>,
    pub bucket_labels: Vec<String>,
    pub total_cost: f64,
    pub segments: Vec<SegmentStats>,
    pub missing_buckets: usize,
    pub warnings: Vec<String>,
}

pub fn changepoint(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let (docs_path, docs) = load_filtered(run)?;
    let (mut inputs, table) = DocTable::load(run)?;
    inputs.insert(0, docs_path);
    run.stage("changepoint", &inputs, |out| {
        let mut all = Vec::new();
        let mut rows = Vec::new();
        for f in Feature::ALL {
            let bucketed = bucket_series(&docs, |d| table.raw(&d.doc_id, f), cfg.granularity);
            let series = bucketed.to_time_series();
            let breaks = changepoint::pelt(&series, &cfg.pelt).map_err(CliError::data)?;
            for (i, label) in bucketed.labels.iter().enumerate() {
                rows.push((f, label.clone(), bucketed.values[i], bucketed.counts[i]));
            }
            all.push(FeatureBreaks {
                feature: f,
                bucket_labels_at_breaks: breaks.breakpoints.iter().map(|&b| series.labels[b].clone()).collect(),
                breakpoints: breaks.breakpoints,
                bucket_labels: series.labels.clone(),
                total_cost: breaks.total_cost,
                segments: breaks.segments,
                missing_buckets: bucketed.missing(),
                warnings: breaks.warnings,
            });
        }
        out.write_json("breaks.json", &all)?;
        out.write_with("series.csv", |w| -> Result<(), csv::Error> {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["feature", "bucket", "value", "count"])?;
            for (f, label, v, n) in &rows {
                c.write_record([
                    f.doc_column().to_string(),
                    label.clone(),
                    v.map(|x| x.to_string()).unwrap_or_default(),
                    n.to_string(),
                ])?;
            }
            c.flush()?;
            Ok(())
        })
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClusterOutput {
    pub features: Vec<Feature>,
    pub author_ids: Vec<String>,
    pub result: ClusterResult,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub permutation_ari: f64,
    pub silhouette_inliers: Option<f64>,
    pub davies_bouldin: Option<f64>,
    pub n_clusters: usize,
    pub noise_fraction: f64,
}

fn load_deltas(run: &Run) -> Result<(Vec<PathBuf>, Vec<AuthorDelta>, StandardizationReport), CliError> {
    let dpath = run.require("deltas", "deltas.csv")?;
    let spath = run.require("deltas", "standardization.json")?;
    let deltas = delta::read_delta_csv(open(&dpath)?).map_err(|e| data_err(&dpath)(&e))?;
    let report = read_json(&spath)?;
    Ok((vec![dpath, spath], deltas, report))
}

pub fn cluster(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let (inputs, deltas, report) = load_deltas(run)?;
    run.stage("cluster", &inputs, |out| {
        let (points, features) = delta::clustering_matrix(&deltas, &report, cfg.include_theme);
        let mut result = archetypes::hdbscan(&points, &cfg.hdbscan).map_err(CliError::data)?;
        result.archetype_names = archetypes::name_archetypes(&result, &deltas, &cfg.naming);
        log::info!(
            "cluster: {} clusters, {} noise of {} authors",
            result.n_clusters(),
            result.noise_count(),
            points.len()
        );
        let stability = archetypes::bootstrap_stability(
            &points,
            &result.labels,
            &cfg.hdbscan,
            &cfg.bootstrap,
            cfg.seeds.robustness,
        )
        .map_err(CliError::data)?;
        if !stability.meets_threshold {
            log::warn!("cluster: bootstrap mean ARI {:?} below threshold", stability.mean_ari);
        }
        let perm = archetypes::permutation_ari(&points, &result.labels, &cfg.hdbscan, cfg.seeds.validation)
            .map_err(CliError::data)?;
        let author_ids: Vec<String> = deltas.iter().map(|d| d.author_id.clone()).collect();
        out.write_with("assignments.csv", |w| {
            archetypes::write_assignment_csv(&author_ids, &result, w)
        })?;
        out.write_json("stability.json", &stability)?;
        out.write_json(
            "validation.json",
            &ValidationReport {
                seed: cfg.seeds.validation,
                permutation_ari: perm,
                silhouette_inliers: result.silhouette_inliers,
                davies_bouldin: result.davies_bouldin,
                n_clusters: result.n_clusters(),
                noise_fraction: result.noise_count() as f64 / points.len() as f64,
            },
        )?;
        out.write_json(
            "cluster.json",
            &ClusterOutput {
                features,
                author_ids,
                result,
            },
        )
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StatsReport {
    pub regressions: Vec<stats::RegressionRow>,
    /// Features whose regression could not be estimated, with the reason.
    pub failed: BTreeMap<String, String>,
    pub partial_correlation: Option<PartialCorrelation>,
    /// Effect size of the AI-likeness index, post versus pre documents.
    pub cohens_d_ai_likeness: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PartialCorrelation {
    pub x: String,
    pub y: String,
    pub controls: Vec<String>,
    pub n: usize,
    pub r: f64,
    pub p: f64,
}

pub fn stats(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let (docs_path, docs) = load_documents(run)?;
    let (mut inputs, table) = DocTable::load(run)?;
    inputs.insert(0, docs_path);
    run.stage("stats", &inputs, |out| {
        let periods: Vec<Option<Period>> = docs.iter().map(|d| cfg.boundary.period_of(d.timestamp)).collect();
        let mut results = Vec::new();
        let mut failed = BTreeMap::new();
        for f in Feature::ALL {
            let rows: Vec<PanelRow> = docs
                .iter()
                .zip(&periods)
                .filter_map(|(d, p)| {
                    let y = table.raw(&d.doc_id, f)?;
                    Some(PanelRow {
                        author_id: d.author_id.clone(),
                        category: d.category.clone(),
                        post_llm: u8::from((*p)? == Period::Post),
                        length: d.char_count as f64,
                        y,
                    })
                })
                .collect();
            match stats::fe_regress(&rows) {
                Ok(r) => results.push((f.doc_column().to_string(), r)),
                Err(e) => {
                    log::warn!("stats: {} not estimable: {e}", f.doc_column());
                    failed.insert(f.doc_column().to_string(), e.to_string());
                }
            }
        }
        let regressions = if results.is_empty() {
            Vec::new()
        } else {
            stats::regression_table(results, cfg.holm_alpha).map_err(CliError::data)?
        };

        let control_features = [Feature::Fkgl, Feature::Ttr, Feature::SentLen];
        let (mut x, mut y) = (Vec::new(), Vec::new());
        let mut controls = vec![Vec::new(); control_features.len()];
        for d in &docs {
            let Some(a) = table.ai_likeness(&d.doc_id) else {
                continue;
            };
            let Some(t) = table.raw(&d.doc_id, Feature::AiTopicShare) else {
                continue;
            };
            let Some(cs) = control_features
                .iter()
                .map(|&f| table.raw(&d.doc_id, f))
                .collect::<Option<Vec<f64>>>()
            else {
                continue;
            };
            x.push(a);
            y.push(t);
            for (col, v) in controls.iter_mut().zip(cs) {
                col.push(v);
            }
        }
        let partial = if x.len() >= control_features.len() + 3 {
            stats::partial_correlation(&x, &y, &controls)
                .map_err(CliError::data)?
                .map(|(r, p)| PartialCorrelation {
                    x: "ai_likeness".into(),
                    y: Feature::AiTopicShare.doc_column().into(),
                    controls: control_features.iter().map(|f| f.doc_column().to_string()).collect(),
                    n: x.len(),
                    r,
                    p,
                })
        } else {
            None
        };

        let (mut pre, mut post) = (Vec::new(), Vec::new());
        for (d, p) in docs.iter().zip(&periods) {
            if let (Some(a), Some(p)) = (table.ai_likeness(&d.doc_id), p) {
                match p {
                    Period::Pre => pre.push(a),
                    Period::Post => post.push(a),
                }
            }
        }
        out.write_with("regression.csv", |w| stats::write_regression_csv(&regressions, w))?;
        out.write_json(
            "stats.json",
            &StatsReport {
                regressions,
                failed,
                partial_correlation: partial,
                cohens_d_ai_likeness: stats::cohens_d(&post, &pre),
            },
        )
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub authors_clustered: usize,
    pub clusters: BTreeMap<i32, ClusterSummary>,
    pub noise: usize,
    pub silhouette_inliers: Option<f64>,
    pub davies_bouldin: Option<f64>,
    pub bootstrap_mean_ari: Option<f64>,
    pub bootstrap_meets_threshold: bool,
    pub permutation_ari: f64,
    pub significant_features: Vec<String>,
    pub breakpoints: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub archetype: Archetype,
    pub size: usize,
    pub stability: f64,
}

pub fn report(run: &Run) -> Result<(), CliError> {
    let (mut inputs, deltas, _) = load_deltas(run)?;
    let files = [
        ("cluster", "cluster.json"),
        ("cluster", "stability.json"),
        ("cluster", "validation.json"),
        ("changepoint", "breaks.json"),
        ("changepoint", "series.csv"),
        ("stats", "stats.json"),
    ];
    for (stage, file) in files {
        inputs.push(run.require(stage, file)?);
    }
    let clusters: ClusterOutput = read_json(&inputs[2])?;
    let stability: StabilityReport = read_json(&inputs[3])?;
    let validation: ValidationReport = read_json(&inputs[4])?;
    let breaks: Vec<FeatureBreaks> = read_json(&inputs[5])?;
    let series_path = inputs[6].clone();
    let stats_report: StatsReport = read_json(&inputs[7])?;
    if clusters.author_ids.len() != deltas.len()
        || clusters.author_ids.iter().zip(&deltas).any(|(a, d)| *a != d.author_id)
    {
        return Err(CliError::Data("cluster assignments do not match deltas.csv".into()));
    }
    run.stage("report", &inputs, |out| {
        let result = &clusters.result;
        let name = |i: usize| {
            result
                .archetype_of(i)
                .map(|a| a.to_string())
                .unwrap_or_else(|| "Noise".into())
        };
        out.write_with("archetype_map.csv", |w| -> Result<(), csv::Error> {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["author_id", "style", "theme", "label", "archetype", "strength"])?;
            for (i, d) in deltas.iter().enumerate() {
                c.write_record([
                    d.author_id.clone(),
                    d.d_ppl().to_string(),
                    d.d_ai_topic_share().to_string(),
                    result.labels[i].to_string(),
                    name(i),
                    result.membership_strength[i].to_string(),
                ])?;
            }
            c.flush()?;
            Ok(())
        })?;

        let index: HashMap<&str, usize> = deltas
            .iter()
            .enumerate()
            .map(|(i, d)| (d.author_id.as_str(), i))
            .collect();
        let profiles = delta::group_profiles(&deltas, |d| result.labels[index[d.author_id.as_str()]]);
        let sizes: BTreeMap<i32, usize> = result.labels.iter().fold(BTreeMap::new(), |mut m, &l| {
            *m.entry(l).or_insert(0) += 1;
            m
        });
        out.write_with("archetype_profiles.csv", |w| -> Result<(), csv::Error> {
            let mut c = csv::Writer::from_writer(w);
            let mut header = vec!["label", "archetype", "size"];
            header.extend(Feature::ALL.iter().map(|f| f.column()));
            c.write_record(header)?;
            for (label, profile) in &profiles {
                let archetype = result
                    .archetype_names
                    .get(label)
                    .map(|a| a.to_string())
                    .unwrap_or_else(|| "Noise".into());
                let mut row = vec![label.to_string(), archetype, sizes[label].to_string()];
                row.extend(profile.iter().map(f64::to_string));
                c.write_record(row)?;
            }
            c.flush()?;
            Ok(())
        })?;

        out.write_with("timeseries.csv", |w| -> Result<(), csv::Error> {
            let mut r = csv::Reader::from_reader(open(&series_path).map_err(|e| std::io::Error::other(e.to_string()))?);
            let mut c = csv::Writer::from_writer(w);
            c.write_record([
                "feature",
                "bucket",
                "value",
                "count",
                "segment",
                "segment_mean",
                "is_break",
            ])?;
            let by_feature: HashMap<&str, &FeatureBreaks> =
                breaks.iter().map(|b| (b.feature.doc_column(), b)).collect();
            for row in r.records() {
                let row = row?;
                let b = by_feature.get(&row[0]);
                let pos = b.and_then(|b| b.bucket_labels.iter().position(|l| *l == row[1]));
                let (segment, seg_mean, is_break) = match (b, pos) {
                    (Some(b), Some(p)) => {
                        let s = b.segments.iter().position(|s| s.start <= p && p < s.end);
                        (
                            s.map(|s| s.to_string()).unwrap_or_default(),
                            s.map(|s| b.segments[s].mean.to_string()).unwrap_or_default(),
                            b.breakpoints.contains(&p),
                        )
                    }
                    _ => (String::new(), String::new(), false),
                };
                c.write_record([
                    &row[0],
                    &row[1],
                    &row[2],
                    &row[3],
                    &segment,
                    &seg_mean,
                    &is_break.to_string(),
                ])?;
            }
            c.flush()?;
            Ok(())
        })?;

        let summary = Summary {
            authors_clustered: deltas.len(),
            clusters: result
                .archetype_names
                .iter()
                .map(|(&l, &a)| {
                    (
                        l,
                        ClusterSummary {
                            archetype: a,
                            size: sizes.get(&l).copied().unwrap_or(0),
                            stability: result.stabilities[l as usize],
                        },
                    )
                })
                .collect(),
            noise: sizes.get(&NOISE).copied().unwrap_or(0),
            silhouette_inliers: result.silhouette_inliers,
            davies_bouldin: result.davies_bouldin,
            bootstrap_mean_ari: stability.mean_ari,
            bootstrap_meets_threshold: stability.meets_threshold,
            permutation_ari: validation.permutation_ari,
            significant_features: stats_report
                .regressions
                .iter()
                .filter(|r| r.reject)
                .map(|r| r.feature.clone())
                .collect(),
            breakpoints: breaks
                .iter()
                .map(|b| (b.feature.doc_column().to_string(), b.bucket_labels_at_breaks.clone()))
                .collect(),
        };
        out.write_json("summary.json", &summary)
    })
}

/// Runs every stage in order; synthesizes a corpus first when none is configured.
pub fn all(run: &Run) -> Result<(), CliError> {
    if run.config.corpus.is_none() || run.config.logprobs.is_none() {
        if run.dir.join("synth").is_dir() {
            log::info!("all: reusing existing synth outputs");
        } else {
            synth(run)?;
        }
    }
    ingest(run)?;
    features(run)?;
    deltas(run)?;
    changepoint(run)?;
    cluster(run)?;
    stats(run)?;
    report(run)
}
