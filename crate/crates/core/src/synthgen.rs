//! Synthetic corpora with planted structure.
//!
//! Files belong to topics and own a handful of topic concepts. Every concept
//! has two lexical forms sharing one embedding vector, and reports mention
//! their fixed files' concepts through a randomly chosen form, so lexical
//! matching sees only part of the overlap that embeddings see. A size metric
//! tracks the topic so metric buckets carry signal as well.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Duration, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::corpus::BugReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub num_reports: usize,
    pub num_files: usize,
    /// Number of distinct concept words (both synonym forms count).
    pub vocab_size: usize,
    pub dim: usize,
    pub topic_count: usize,
    /// Probability that a report token is drawn uniformly from the vocabulary.
    pub noise_rate: f64,
    /// Give each concept two lexical forms; otherwise one.
    pub synonyms: bool,
    pub concepts_per_file: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            num_reports: 500,
            num_files: 150,
            vocab_size: 800,
            dim: 24,
            topic_count: 10,
            noise_rate: 0.1,
            synonyms: true,
            concepts_per_file: 3,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_reports", self.num_reports),
            ("num_files", self.num_files),
            ("vocab_size", self.vocab_size),
            ("dim", self.dim),
            ("topic_count", self.topic_count),
            ("concepts_per_file", self.concepts_per_file),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("synth {name} must be positive")));
        }
        if self.topic_count > self.vocab_size {
            return Err(Error::Config("synth topic_count exceeds vocab_size".into()));
        }
        if self.synonyms && self.vocab_size < 2 * self.topic_count {
            return Err(Error::Config(
                "synth vocab_size too small for synonym pairs".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::Config("synth noise_rate must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Generated interchange files, as text.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub reports_jsonl: String,
    pub sources_jsonl: String,
    pub metrics_csv: String,
    pub embeddings_txt: String,
}

impl SynthCorpus {
    /// Writes `reports.jsonl`, `sources.jsonl`, `metrics.csv` and `embeddings.txt`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("reports.jsonl", &self.reports_jsonl),
            ("sources.jsonl", &self.sources_jsonl),
            ("metrics.csv", &self.metrics_csv),
            ("embeddings.txt", &self.embeddings_txt),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const GENERIC_WORDS: usize = 12;

/// Pronounceable, lowercase, collision-free pseudo-word for an index.
fn word(mut index: usize) -> String {
    let base = CONSONANTS.len() * VOWELS.len();
    let mut out = String::new();
    for _ in 0..3 {
        let syl = index % base;
        index /= base;
        out.push(CONSONANTS[syl / VOWELS.len()] as char);
        out.push(VOWELS[syl % VOWELS.len()] as char);
    }
    while index > 0 {
        out.push(CONSONANTS[index % CONSONANTS.len()] as char);
        index /= CONSONANTS.len();
    }
    out
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next()
        .map(|f| f.to_ascii_uppercase().to_string() + c.as_str())
        .unwrap_or_default()
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[derive(Serialize)]
struct SourceLine<'a> {
    path: &'a str,
    content: &'a str,
}

pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let forms = if spec.synonyms { 2 } else { 1 };
    let concepts = spec.vocab_size / forms;
    let concept_words = concepts * forms;
    let form_word = |concept: usize, form: usize| word(concept * forms + form);
    let generic_word = |g: usize| word(concept_words + g);

    let centers: Vec<Vec<f64>> = (0..spec.topic_count)
        .map(|_| gaussian(&mut rng, spec.dim))
        .collect();
    let concept_vecs: Vec<Vec<f64>> = (0..concepts)
        .map(|c| {
            let center = &centers[c % spec.topic_count];
            gaussian(&mut rng, spec.dim)
                .into_iter()
                .zip(center)
                .map(|(x, m)| 0.6 * m + x)
                .collect()
        })
        .collect();
    let generic_vecs: Vec<Vec<f64>> = (0..GENERIC_WORDS)
        .map(|_| gaussian(&mut rng, spec.dim))
        .collect();

    let topic_of = |f: usize| f % spec.topic_count;
    let paths: Vec<String> = (0..spec.num_files)
        .map(|f| format!("pkg{}/Module{f:03}.java", topic_of(f)))
        .collect();
    let owned: Vec<Vec<usize>> = (0..spec.num_files)
        .map(|f| {
            let mut pool: Vec<usize> = (0..concepts)
                .filter(|c| c % spec.topic_count == topic_of(f))
                .collect();
            pool.shuffle(&mut rng);
            pool.truncate(spec.concepts_per_file);
            pool.sort_unstable();
            pool
        })
        .collect();

    let mut sources = String::new();
    for (f, path) in paths.iter().enumerate() {
        let mut pieces = vec![format!("class Module{f:03} {{")];
        for g in 0..GENERIC_WORDS {
            if rng.random_bool(0.7) {
                for _ in 0..rng.random_range(1..=3) {
                    pieces.push(format!("{}();", generic_word(g)));
                }
            }
        }
        for &c in &owned[f] {
            let form = rng.random_range(0..forms);
            for _ in 0..2 {
                pieces.push(format!(
                    "{}.{};",
                    generic_word(c % GENERIC_WORDS),
                    form_word(c, form)
                ));
            }
        }
        pieces.push("}".into());
        let content = pieces.join(" ");
        sources.push_str(&serde_json::to_string(&SourceLine {
            path,
            content: &content,
        })?);
        sources.push('\n');
    }

    let start = Utc
        .with_ymd_and_hms(2021, 1, 1, 0, 0, 0)
        .single()
        .expect("valid date");
    let mut reports = String::new();
    for i in 0..spec.num_reports {
        let primary = rng.random_range(0..spec.num_files);
        let mut fixed = BTreeSet::from([primary]);
        if rng.random_bool(0.25) {
            let same_topic: Vec<usize> = (0..spec.num_files)
                .filter(|&f| f != primary && topic_of(f) == topic_of(primary))
                .collect();
            if let Some(&extra) = same_topic.choose(&mut rng) {
                fixed.insert(extra);
            }
        }
        let pool: Vec<usize> = fixed
            .iter()
            .flat_map(|&f| owned[f].iter().copied())
            .collect();
        let count = rng.random_range(6..=12);
        let mut tokens = Vec::with_capacity(count);
        for _ in 0..count {
            let w = if rng.random_bool(spec.noise_rate) || pool.is_empty() {
                word(rng.random_range(0..concept_words))
            } else {
                let c = *pool.choose(&mut rng).expect("non-empty pool");
                form_word(c, rng.random_range(0..forms))
            };
            tokens.push(w);
        }
        let mut rendered = Vec::new();
        let mut t = 0;
        while t < tokens.len() {
            if t + 1 < tokens.len() && rng.random_bool(0.2) {
                rendered.push(format!("{}{}", tokens[t], capitalize(&tokens[t + 1])));
                t += 2;
            } else {
                rendered.push(tokens[t].clone());
                t += 1;
            }
        }
        let split = rendered.len().min(3);
        let report = BugReport {
            id: format!("SYN-{i:05}"),
            summary: rendered[..split].join(" "),
            description: rendered[split..].join(" "),
            report_time: start + Duration::hours(6 * i as i64),
            status: "resolved fixed".into(),
            fixed_files: fixed.iter().map(|&f| paths[f].clone()).collect(),
        };
        reports.push_str(&serde_json::to_string(&report)?);
        reports.push('\n');
    }

    let mut metrics = String::from("path,metric,value\n");
    for (f, path) in paths.iter().enumerate() {
        let topic = topic_of(f) as f64;
        let loc = 200.0 * topic + rng.random_range(0.0..150.0);
        let cc = 3.0 * topic + rng.random_range(0.0..6.0);
        let _ = writeln!(metrics, "{path},LOC,{loc:.3}");
        let _ = writeln!(metrics, "{path},CC,{cc:.3}");
    }

    let mut embeddings = format!("{} {}\n", concept_words + GENERIC_WORDS, spec.dim);
    let mut push_row = |token: String, v: &[f64]| {
        embeddings.push_str(&token);
        for x in v {
            let _ = write!(embeddings, " {x:.6}");
        }
        embeddings.push('\n');
    };
    for (c, v) in concept_vecs.iter().enumerate() {
        for form in 0..forms {
            push_row(form_word(c, form), v);
        }
    }
    for (g, v) in generic_vecs.iter().enumerate() {
        push_row(generic_word(g), v);
    }

    Ok(SynthCorpus {
        reports_jsonl: reports,
        sources_jsonl: sources,
        metrics_csv: metrics,
        embeddings_txt: embeddings,
    })
}
