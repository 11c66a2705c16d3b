use std::collections::BTreeMap;

use stylodrift::corpus::{filter_documents, read_corpus, split_by_boundary, stratified_sample, Period};
use stylodrift::synth::{gen_document_corpus, DriftProfile, SynthCorpusConfig};
use stylodrift::{BoundaryConfig, Document, FilterConfig, Genre, QuotaConfig};

const DAY: i64 = 86_400;

fn small_synth() -> Vec<Document> {
    let cfg = SynthCorpusConfig {
        groups: vec![(DriftProfile::adopter(), 6), (DriftProfile::pragmatist(), 6)],
        noise_authors: 3,
        docs_per_author_per_period: 12,
        ..Default::default()
    };
    gen_document_corpus(&cfg, 9).documents
}

#[test]
fn synth_corpus_survives_default_filters_intact() {
    let docs = small_synth();
    let n = docs.len();
    let (kept, audit) = filter_documents(docs, &FilterConfig::default()).unwrap();
    assert_eq!(kept.len(), n, "{audit:?}");
    let split = split_by_boundary(&kept, &BoundaryConfig::default());
    assert_eq!(split.authors.len(), 15);
    assert_eq!(split.dropped_in_window, 0);
}

#[test]
fn window_edges_are_inclusive() {
    let b = BoundaryConfig::default();
    let t0 = b.boundary_ts;
    assert_eq!(b.period_of(t0), None);
    assert_eq!(b.period_of(t0 - 7 * DAY), None);
    assert_eq!(b.period_of(t0 + 7 * DAY), None);
    assert_eq!(b.period_of(t0 - 7 * DAY - 1), Some(Period::Pre));
    assert_eq!(b.period_of(t0 + 7 * DAY + 1), Some(Period::Post));
}

#[test]
fn jsonl_round_trip_recomputes_char_count() {
    let line = r#"{"doc_id":"x","author_id":"a","timestamp":5,"genre":"formal","category":"Tech","text":"héllo wörld","char_count":999}"#;
    let loaded = read_corpus(format!("{line}\nnot json\n{line}\n").as_bytes()).unwrap();
    assert_eq!(loaded.documents.len(), 1);
    assert_eq!(loaded.documents[0].char_count, 11);
    assert_eq!(loaded.documents[0].genre, Genre::Formal);
    assert_eq!(loaded.warnings.len(), 2);
}

#[test]
fn stratified_sample_hits_quotas_per_period() {
    let mut docs = Vec::new();
    let b = BoundaryConfig::default();
    let cats = ["Gaming", "Tech", "Social", "Education", "Music"];
    for i in 0..2000 {
        let side = if i % 2 == 0 { -1 } else { 1 };
        let ts = b.boundary_ts + side * (10 + (i as i64 % 200)) * DAY;
        docs.push(Document::new(
            format!("d{i:04}"),
            format!("a{}", i % 40),
            ts,
            Genre::Social,
            cats[i % cats.len()],
            format!("text number {i} for the sample"),
        ));
    }
    let quotas = QuotaConfig {
        sample_size: Some(400),
        ..Default::default()
    };
    let (a, report) = stratified_sample(&docs, &quotas, Some(&b), 42).unwrap();
    let (again, _) = stratified_sample(&docs, &quotas, Some(&b), 42).unwrap();
    assert_eq!(a, again);
    assert_eq!(report.groups.len(), 2);
    for period in [Period::Pre, Period::Post] {
        let mine: Vec<&Document> = a.iter().filter(|d| b.period_of(d.timestamp) == Some(period)).collect();
        assert_eq!(mine.len(), 400);
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for d in &mine {
            let s = if quotas.fractions.contains_key(&d.category) {
                d.category.as_str()
            } else {
                "Other"
            };
            *counts.entry(s).or_default() += 1;
        }
        for (cat, frac) in &quotas.fractions {
            let share = counts.get(cat.as_str()).copied().unwrap_or(0) as f64 / 400.0;
            assert!((share - frac).abs() <= quotas.tolerance, "{cat}: {share} vs {frac}");
        }
    }
}
