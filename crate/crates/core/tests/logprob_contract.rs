use std::collections::BTreeMap;

use stylodrift::ai_likeness::{compute_gaps, load_logprobs, read_logprobs, write_logprobs, AiLikenessError};
use stylodrift::synth::{gen_document_corpus, DriftProfile, SynthCorpusConfig};
use stylodrift::LogProbRecord;

fn record(doc: &str, model: &str, nll: f64, chars: usize) -> LogProbRecord {
    LogProbRecord {
        doc_id: doc.into(),
        model_id: model.into(),
        total_nll_nats: nll,
        char_count: chars,
    }
}

#[test]
fn field_names_are_exact() {
    let mut out = Vec::new();
    write_logprobs(&[record("d1", "gpt2", 12.5, 40)], &mut out).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(keys, ["char_count", "doc_id", "model_id", "total_nll_nats"]);
}

#[test]
fn scorer_lines_parse_including_extra_flags() {
    let text = concat!(
        r#"{"doc_id":"d1","model_id":"judge","total_nll_nats":300.0,"char_count":100}"#,
        "\n\n",
        r#"{"doc_id":"d1","model_id":"current","total_nll_nats":200,"char_count":100,"truncated":true}"#,
        "\n"
    );
    let recs = read_logprobs(text.as_bytes()).unwrap();
    assert_eq!(recs.len(), 2);
    let chars = BTreeMap::from([("d1".to_string(), 100)]);
    let gaps = compute_gaps(&recs, "judge", "current", &chars).unwrap();
    assert_eq!(gaps.gaps["d1"], 1.0);
}

#[test]
fn invalid_records_are_rejected() {
    let negative = r#"{"doc_id":"d","model_id":"m","total_nll_nats":-1.0,"char_count":10}"#;
    assert!(matches!(
        read_logprobs(negative.as_bytes()),
        Err(AiLikenessError::Parse { line: 1, .. })
    ));
    let zero = r#"{"doc_id":"d","model_id":"m","total_nll_nats":1.0,"char_count":0}"#;
    assert!(read_logprobs(zero.as_bytes()).is_err());
    let missing = r#"{"doc_id":"d","model_id":"m","char_count":3}"#;
    assert!(read_logprobs(missing.as_bytes()).is_err());
    let dup = format!("{negative}\n").replace("-1.0", "1.0").repeat(2);
    assert!(matches!(
        read_logprobs(dup.as_bytes()),
        Err(AiLikenessError::Duplicate { .. })
    ));
}

#[test]
fn char_count_mismatch_names_the_document() {
    let recs = [record("d9", "j", 10.0, 50), record("d9", "c", 10.0, 50)];
    let chars = BTreeMap::from([("d9".to_string(), 51)]);
    match compute_gaps(&recs, "j", "c", &chars) {
        Err(AiLikenessError::CharCountMismatch { doc_id, .. }) => assert_eq!(doc_id, "d9"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn identical_model_configuration_gives_zero_gaps() {
    let cfg = SynthCorpusConfig {
        groups: vec![(DriftProfile::adopter(), 4)],
        noise_authors: 2,
        docs_per_author_per_period: 10,
        ..Default::default()
    };
    let corpus = gen_document_corpus(&cfg, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lp.jsonl");
    write_logprobs(&corpus.logprobs, std::fs::File::create(&path).unwrap()).unwrap();
    let recs = load_logprobs(&path).unwrap();
    assert_eq!(recs, corpus.logprobs);
    let chars: BTreeMap<String, usize> = corpus
        .documents
        .iter()
        .map(|d| (d.doc_id.clone(), d.char_count))
        .collect();
    let same = compute_gaps(&recs, "current", "current", &chars).unwrap();
    assert_eq!(same.gaps.len(), corpus.documents.len());
    assert!(same.gaps.values().all(|g| *g == 0.0));
    assert!(same.unscored.is_empty());
}

#[test]
fn documents_without_both_scores_are_unscored() {
    let recs = [
        record("a", "j", 10.0, 5),
        record("a", "c", 5.0, 5),
        record("b", "j", 1.0, 5),
    ];
    let chars = BTreeMap::from([("a".to_string(), 5), ("b".to_string(), 5), ("z".to_string(), 5)]);
    let t = compute_gaps(&recs, "j", "c", &chars).unwrap();
    assert_eq!(t.gaps.len(), 1);
    assert_eq!(t.unscored, ["b", "z"]);
}
