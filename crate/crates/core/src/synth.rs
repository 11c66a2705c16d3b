//! Synthetic populations with planted structure.
//!
//! `gen_delta_population` draws change vectors directly; `gen_document_corpus`
//! writes template text plus matching model scores so the whole pipeline can
//! be run against known archetypes.

use std::collections::HashSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ai_likeness::LogProbRecord;
use crate::archetypes::{Archetype, NOISE};
use crate::corpus::{content_hash, BoundaryConfig, Document, Genre, SECONDS_PER_DAY};
use crate::delta::{AuthorDelta, FEATURE_COUNT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeSpec {
    pub name: String,
    pub count: usize,
    /// Mean of the seven stylometric components, in delta-column order.
    pub style_delta_mean: [f64; 7],
    pub theme_delta_mean: f64,
    pub cov_scale: f64,
}

/// Isotropic Gaussian clusters plus uniform noise in the clusters' bounding
/// box inflated 1.5× about its centre. Noise points get label −1.
pub fn gen_delta_population(specs: &[ArchetypeSpec], noise_count: usize, seed: u64) -> (Vec<AuthorDelta>, Vec<i32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deltas = Vec::new();
    let mut labels = Vec::new();
    for (k, spec) in specs.iter().enumerate() {
        let g = Normal::new(0.0, spec.cov_scale.max(0.0)).expect("finite scale");
        let mut mean = [0.0; FEATURE_COUNT];
        mean[..7].copy_from_slice(&spec.style_delta_mean);
        mean[7] = spec.theme_delta_mean;
        for _ in 0..spec.count {
            let mut values = mean;
            values.iter_mut().for_each(|v| *v += g.sample(&mut rng));
            deltas.push(values);
            labels.push(k as i32);
        }
    }
    let mut lo = [f64::INFINITY; FEATURE_COUNT];
    let mut hi = [f64::NEG_INFINITY; FEATURE_COUNT];
    for v in &deltas {
        for f in 0..FEATURE_COUNT {
            lo[f] = lo[f].min(v[f]);
            hi[f] = hi[f].max(v[f]);
        }
    }
    if deltas.is_empty() {
        lo = [-1.0; FEATURE_COUNT];
        hi = [1.0; FEATURE_COUNT];
    }
    for _ in 0..noise_count {
        let mut values = [0.0; FEATURE_COUNT];
        for f in 0..FEATURE_COUNT {
            let centre = 0.5 * (lo[f] + hi[f]);
            let half = 0.75 * (hi[f] - lo[f]);
            values[f] = if half > 0.0 {
                rng.random_range(centre - half..=centre + half)
            } else {
                centre
            };
        }
        deltas.push(values);
        labels.push(NOISE);
    }
    let out = deltas
        .into_iter()
        .enumerate()
        .map(|(i, values)| AuthorDelta {
            author_id: format!("s{i:04}"),
            values,
            n_pre: 0,
            n_post: 0,
        })
        .collect();
    (out, labels)
}

/// Pre→post shifts of the generator parameters for one author group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftProfile {
    pub name: String,
    pub archetype: Option<Archetype>,
    /// Added to the judge-minus-current gap, in nats per character.
    pub ppl_shift: f64,
    /// Added to the per-noun probability of using a lexicon term.
    pub topic_rate_shift: f64,
    /// Added to the probability that a sentence opens in the first person.
    pub first_person_shift: f64,
    /// Added to the mean sentence length, in words.
    pub sent_len_shift: f64,
    /// Relative change of the content vocabulary size.
    pub diversity_shift: f64,
    /// Added to the per-phrase comma probability.
    pub comma_shift: f64,
}

impl DriftProfile {
    pub fn zero(name: &str) -> Self {
        Self {
            name: name.into(),
            archetype: None,
            ppl_shift: 0.0,
            topic_rate_shift: 0.0,
            first_person_shift: 0.0,
            sent_len_shift: 0.0,
            diversity_shift: 0.0,
            comma_shift: 0.0,
        }
    }

    pub fn adopter() -> Self {
        Self {
            name: "adopter".into(),
            archetype: Some(Archetype::Adopter),
            ppl_shift: 0.1,
            topic_rate_shift: 0.1,
            first_person_shift: -0.25,
            sent_len_shift: 4.0,
            diversity_shift: 0.4,
            comma_shift: 0.15,
        }
    }

    pub fn resistor() -> Self {
        Self {
            name: "resistor".into(),
            archetype: Some(Archetype::Resistor),
            ppl_shift: -0.1,
            topic_rate_shift: 0.0,
            first_person_shift: 0.25,
            sent_len_shift: -3.0,
            diversity_shift: -0.3,
            comma_shift: -0.1,
        }
    }

    pub fn pragmatist() -> Self {
        Self {
            name: "pragmatist".into(),
            archetype: Some(Archetype::Pragmatist),
            topic_rate_shift: 0.1,
            ..Self::zero("pragmatist")
        }
    }

    fn random(rng: &mut ChaCha8Rng) -> Self {
        Self {
            name: "noise".into(),
            archetype: None,
            ppl_shift: rng.random_range(-0.15..0.15),
            topic_rate_shift: rng.random_range(-0.03..0.15),
            first_person_shift: rng.random_range(-0.35..0.35),
            sent_len_shift: rng.random_range(-5.0..6.0),
            diversity_shift: rng.random_range(-0.45..0.6),
            comma_shift: rng.random_range(-0.2..0.2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthCorpusConfig {
    /// Author groups and their sizes.
    pub groups: Vec<(DriftProfile, usize)>,
    /// Authors whose shifts are drawn at random per author.
    pub noise_authors: usize,
    pub docs_per_author_per_period: usize,
    pub boundary: BoundaryConfig,
    /// Documents are spread over this many days on each side of the window.
    pub span_days: i64,
    pub judge_model: String,
    pub current_model: String,
}

impl Default for SynthCorpusConfig {
    fn default() -> Self {
        Self {
            groups: vec![
                (DriftProfile::adopter(), 100),
                (DriftProfile::resistor(), 100),
                (DriftProfile::pragmatist(), 100),
            ],
            noise_authors: 60,
            docs_per_author_per_period: 40,
            boundary: BoundaryConfig::default(),
            span_days: 300,
            judge_model: "judge".into(),
            current_model: "current".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub author_id: String,
    pub group: String,
    pub archetype: Option<Archetype>,
}

#[derive(Debug, Clone, Default)]
pub struct SynthCorpus {
    pub documents: Vec<Document>,
    pub logprobs: Vec<LogProbRecord>,
    pub truth: Vec<TruthRow>,
}

impl SynthCorpus {
    pub fn write_corpus<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for d in &self.documents {
            serde_json::to_writer(&mut out, d)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_truth<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["author_id", "group", "archetype"])?;
        for t in &self.truth {
            let a = t.archetype.map(|a| a.to_string()).unwrap_or_default();
            w.write_record([t.author_id.as_str(), t.group.as_str(), a.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }
}

const NOUNS: &[&str] = &[
    "house", "garden", "river", "window", "coffee", "market", "street", "kitchen", "forest", "letter", "school",
    "bridge", "music", "camera", "engine", "island", "mountain", "painting", "pocket", "station", "table", "teacher",
    "ticket", "village", "weather", "winter", "summer", "morning", "evening", "weekend", "friend", "neighbor",
    "family", "cousin", "doctor", "farmer", "artist", "writer", "player", "singer", "guitar", "piano", "violin",
    "drum", "song", "movie", "story", "novel", "poem", "picture", "bicycle", "car", "train", "boat", "plane", "truck",
    "road", "path", "park", "beach", "apple", "butter", "cheese", "soup", "salad", "cake", "pizza", "rice", "pasta",
    "tea", "dog", "cat", "horse", "bird", "fish", "rabbit", "turtle", "tiger", "monkey", "sheep", "chair", "lamp",
    "door", "floor", "roof", "wall", "stair", "mirror", "clock", "blanket", "shirt", "jacket", "shoe", "hat", "scarf",
    "glove", "button", "ribbon", "basket", "bottle", "city", "country", "ocean", "desert", "valley", "meadow",
    "canyon", "harbor", "castle", "temple", "game", "puzzle", "match", "party", "festival", "concert", "lesson",
    "homework", "project", "meeting", "idea", "plan", "question", "answer", "problem", "reason", "habit", "memory",
    "dream", "hobby", "paper", "pencil", "notebook", "folder", "envelope", "stamp", "parcel", "package", "receipt",
    "coupon", "garage", "office", "library", "museum", "theater", "hospital", "airport", "factory", "bakery",
    "pharmacy",
];

const ADJECTIVES: &[&str] = &[
    "small", "large", "quiet", "noisy", "bright", "dark", "warm", "cold", "fresh", "old", "new", "happy", "strange",
    "simple", "busy", "lazy", "clever", "gentle", "brave", "calm", "green", "blue", "yellow", "purple", "orange",
    "golden", "silver", "wooden", "heavy", "light", "early", "late", "short", "long", "tiny", "huge", "sweet", "sour",
    "spicy", "salty", "lovely", "messy", "tidy", "cheap", "fancy", "plain", "rare", "common", "local", "distant",
];

const VERBS: &[&str] = &[
    "like", "recall", "visit", "enjoy", "watch", "clean", "carry", "fix", "paint", "share", "open", "close", "check",
    "follow", "remember", "explore", "prefer", "notice", "borrow", "deliver", "build", "draw", "bring", "keep", "find",
    "hold", "sell", "buy", "love", "miss",
];

const TOPIC_TERMS: &[&str] = &[
    "ai",
    "gpt",
    "llm",
    "chatgpt",
    "prompt",
    "model",
    "neural",
    "transformer",
    "embedding",
    "chatbot",
    "dataset",
    "algorithm",
    "automation",
    "bot",
    "assistant",
    "inference",
    "token",
    "openai",
    "copilot",
];

const CATEGORIES: [(&str, f64); 4] = [("Gaming", 0.23), ("Tech", 0.31), ("Social", 0.28), ("Education", 0.18)];

/// Per-author generator parameters for one period.
#[derive(Debug, Clone, Copy)]
struct StyleParams {
    gap: f64,
    topic_rate: f64,
    first_person: f64,
    sent_len: f64,
    vocab: f64,
    comma: f64,
}

impl StyleParams {
    fn base(rng: &mut ChaCha8Rng) -> Self {
        Self {
            gap: rng.random_range(0.05..0.15),
            topic_rate: rng.random_range(0.0..0.03),
            first_person: rng.random_range(0.2..0.5),
            sent_len: rng.random_range(9.0..14.0),
            vocab: rng.random_range(0.35..0.6),
            comma: rng.random_range(0.15..0.35),
        }
    }

    fn shifted(&self, p: &DriftProfile) -> Self {
        Self {
            gap: self.gap + p.ppl_shift,
            topic_rate: (self.topic_rate + p.topic_rate_shift).clamp(0.0, 0.6),
            first_person: (self.first_person + p.first_person_shift).clamp(0.0, 1.0),
            sent_len: (self.sent_len + p.sent_len_shift).max(5.0),
            vocab: (self.vocab * (1.0 + p.diversity_shift)).clamp(0.1, 1.0),
            comma: (self.comma + p.comma_shift).clamp(0.0, 0.9),
        }
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str], frac: f64) -> &'a str {
    let n = ((pool.len() as f64 * frac).round() as usize).clamp(5, pool.len());
    pool[rng.random_range(0..n)]
}

fn noun(rng: &mut ChaCha8Rng, s: &StyleParams) -> String {
    if rng.random::<f64>() < s.topic_rate {
        TOPIC_TERMS[rng.random_range(0..TOPIC_TERMS.len())].to_string()
    } else {
        pick(rng, NOUNS, s.vocab).to_string()
    }
}

fn sentence(rng: &mut ChaCha8Rng, s: &StyleParams) -> String {
    let len_noise = Normal::new(0.0, 2.5).expect("valid sd");
    let target = (s.sent_len + len_noise.sample(rng)).round().max(4.0) as usize;
    let mut words: Vec<String> = Vec::with_capacity(target + 4);
    if rng.random::<f64>() < s.first_person {
        words.push(["I", "we"][rng.random_range(0..2)].to_string());
    } else {
        words.push(["the", "this", "that"][rng.random_range(0..3)].to_string());
        words.push(noun(rng, s));
    }
    words.push(pick(rng, VERBS, 1.0).to_string());
    words.push("the".into());
    words.push(noun(rng, s));
    while words.len() < target {
        if rng.random::<f64>() < s.comma {
            if let Some(last) = words.last_mut() {
                last.push(',');
            }
        }
        match rng.random_range(0..5) {
            0 => {
                words.push("and".into());
                words.push("the".into());
                words.push(pick(rng, ADJECTIVES, s.vocab).into());
                words.push(noun(rng, s));
            }
            1 => {
                words.push("with".into());
                words.push("a".into());
                words.push(noun(rng, s));
            }
            2 => {
                words.push("for".into());
                words.push("the".into());
                words.push(noun(rng, s));
            }
            3 => {
                words.push("in".into());
                words.push("the".into());
                words.push(pick(rng, ADJECTIVES, s.vocab).into());
                words.push(noun(rng, s));
            }
            _ => {
                words.push("near".into());
                words.push("our".into());
                words.push(noun(rng, s));
            }
        }
    }
    let mut text = words.join(" ");
    if let Some(first) = text.get(..1) {
        let upper = first.to_uppercase();
        text.replace_range(..1, &upper);
    }
    text.push(if rng.random::<f64>() < 0.05 { '!' } else { '.' });
    text
}

fn document_text(rng: &mut ChaCha8Rng, s: &StyleParams) -> String {
    let n = rng.random_range(6..=10);
    (0..n).map(|_| sentence(rng, s)).collect::<Vec<_>>().join(" ")
}

/// Template corpus with planted pre→post drift per author group, plus judge
/// and current model scores whose gap shifts by the group's `ppl_shift`.
/// Authors are numbered in group order, noise authors last.
pub fn gen_document_corpus(cfg: &SynthCorpusConfig, seed: u64) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut profiles: Vec<DriftProfile> = Vec::new();
    for (p, count) in &cfg.groups {
        profiles.extend(std::iter::repeat_n(p.clone(), *count));
    }
    for _ in 0..cfg.noise_authors {
        profiles.push(DriftProfile::random(&mut rng));
    }
    let gap_noise = Normal::<f64>::new(0.0, 0.05).expect("valid sd");
    let nll_noise = Normal::<f64>::new(0.0, 0.05).expect("valid sd");
    let mut out = SynthCorpus::default();
    let mut seen = HashSet::new();
    let gap_secs = (cfg.boundary.exclusion_halfwidth_days + 1) * SECONDS_PER_DAY;
    let span_secs = cfg.span_days.max(1) * SECONDS_PER_DAY;
    for (a, profile) in profiles.iter().enumerate() {
        let author = format!("u{a:04}");
        let category = {
            let r: f64 = rng.random();
            let mut acc = 0.0;
            CATEGORIES
                .iter()
                .find(|(_, w)| {
                    acc += w;
                    r < acc
                })
                .map_or(CATEGORIES[3].0, |(c, _)| *c)
        };
        let members: u64 = rng.random_range(150..5000);
        let pre = StyleParams::base(&mut rng);
        let post = pre.shifted(profile);
        out.truth.push(TruthRow {
            author_id: author.clone(),
            group: profile.name.clone(),
            archetype: profile.archetype,
        });
        for (tag, params, sign) in [("pre", pre, -1i64), ("post", post, 1i64)] {
            for k in 0..cfg.docs_per_author_per_period {
                let text = loop {
                    let t = document_text(&mut rng, &params);
                    if seen.insert(content_hash(&t)) {
                        break t;
                    }
                };
                let offset = gap_secs + rng.random_range(0..span_secs);
                let doc_id = format!("{author}-{tag}-{k:03}");
                let mut doc = Document::new(
                    doc_id.clone(),
                    author.clone(),
                    cfg.boundary.boundary_ts + sign * offset,
                    Genre::Social,
                    category,
                    text,
                );
                doc.server_members = Some(members);
                let chars = doc.char_count;
                let current: f64 = (1.2 + nll_noise.sample(&mut rng)).max(0.2);
                let judge = (current + params.gap + gap_noise.sample(&mut rng)).max(0.0);
                out.logprobs.push(LogProbRecord {
                    doc_id: doc_id.clone(),
                    model_id: cfg.current_model.clone(),
                    total_nll_nats: current * chars as f64,
                    char_count: chars,
                });
                out.logprobs.push(LogProbRecord {
                    doc_id,
                    model_id: cfg.judge_model.clone(),
                    total_nll_nats: judge * chars as f64,
                    char_count: chars,
                });
                out.documents.push(doc);
            }
        }
    }
    out
}
