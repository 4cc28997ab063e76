use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use bugloc::corpus::TokenConfig;
use bugloc::eval::{EvalConfig, Evaluation};
use bugloc::pipeline::{Dataset, DatasetPaths, Localizer, Method, PipelineConfig};

const REPORTS: &[(&str, &str, &str, &[&str])] = &[
    (
        "T-1",
        "parser crash on xml",
        "resolved fixed",
        &["xml/Parser.java"],
    ),
    (
        "T-2",
        "socket timeout dropping connection",
        "resolved fixed",
        &["net/Conn.java"],
    ),
    (
        "T-3",
        "canvas render crash",
        "resolved fixed",
        &["ui/Canvas.java", "ui/View.java"],
    ),
    (
        "T-4",
        "xml schema parser rejects input",
        "resolved fixed",
        &["xml/Parser.java", "xml/Schema.java"],
    ),
    ("T-5", "render lag", "open", &["ui/View.java"]),
    (
        "Q-1",
        "xml parser error",
        "resolved fixed",
        &["xml/Parser.java"],
    ),
    ("Q-2", "canvas render glitch", "resolved", &["ui/View.java"]),
    (
        "Q-3",
        "connection timeout crash",
        "resolved fixed",
        &["net/Conn.java", "net/Pool.java"],
    ),
    (
        "Q-4",
        "typo in readme",
        "resolved fixed",
        &["docs/README.md"],
    ),
];

const SOURCES: &[(&str, &str)] = &[
    ("xml/Parser.java", "class Parser { parse xml schema }"),
    ("xml/Schema.java", "class Schema { schema parser }"),
    ("net/Conn.java", "class Conn { socket connection timeout }"),
    ("net/Pool.java", "class Pool { connection pool }"),
    ("ui/Canvas.java", "class Canvas { canvas render }"),
    ("ui/View.java", "class View { render view }"),
];

fn write_dataset(dir: &Path, with_sources: bool) {
    let mut reports = String::new();
    for (i, (id, text, status, fixed)) in REPORTS.iter().enumerate() {
        let line = serde_json::json!({
            "id": id, "summary": text, "description": "",
            "report_time": format!("2020-03-{:02} 10:00:00", i + 1),
            "status": status, "fixed_files": fixed,
        });
        reports.push_str(&format!("{line}\n"));
    }
    fs::write(dir.join("reports.jsonl"), reports).unwrap();
    if with_sources {
        let docs: Vec<String> = SOURCES
            .iter()
            .map(|(p, c)| serde_json::json!({"path": p, "content": c}).to_string())
            .collect();
        fs::write(dir.join("sources.jsonl"), docs.join("\n")).unwrap();
    }
    let mut metrics = String::from("path,metric,value\n");
    for (i, (p, _)) in SOURCES.iter().enumerate() {
        metrics.push_str(&format!("{p},LOC,{}\n", 100 + 10 * i));
    }
    fs::write(dir.join("metrics.csv"), metrics).unwrap();
    let words = [
        ("parser", [1.0, 0.0]),
        ("xml", [0.9, 0.1]),
        ("schema", [0.8, 0.3]),
        ("crash", [0.5, 0.5]),
        ("socket", [0.0, 1.0]),
        ("timeout", [0.1, 0.9]),
        ("connection", [0.2, 0.8]),
        ("canvas", [-1.0, 0.2]),
        ("render", [-0.9, 0.1]),
        ("error", [0.6, 0.2]),
        ("glitch", [-0.5, 0.3]),
    ];
    let mut emb = format!("{} 2\n", words.len());
    for (w, v) in words {
        emb.push_str(&format!("{w} {} {}\n", v[0], v[1]));
    }
    fs::write(dir.join("embeddings.txt"), emb).unwrap();
}

fn config() -> PipelineConfig {
    PipelineConfig {
        train_fraction: 0.5,
        ..PipelineConfig::default()
    }
}

/// Straight-line recomputation of the BoW baseline and AP@k.
fn oracle_bow_map(
    train: &[(Vec<String>, Vec<String>)],
    queries: &[(Vec<String>, Vec<String>)],
    universe: &BTreeSet<String>,
    k: usize,
) -> f64 {
    let n = train.len() as f64;
    let mut df: BTreeMap<&str, f64> = BTreeMap::new();
    for (tokens, _) in train {
        for t in tokens.iter().collect::<BTreeSet<_>>() {
            *df.entry(t).or_default() += 1.0;
        }
    }
    let vec_of = |tokens: &[String]| -> BTreeMap<String, f64> {
        let mut v = BTreeMap::new();
        for t in tokens {
            if let Some(&d) = df.get(t.as_str()) {
                *v.entry(t.clone()).or_insert(0.0) += (n / d).ln();
            }
        }
        v.retain(|_, w| *w > 0.0);
        v
    };
    let cos = |a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>| {
        let dot: f64 = a.iter().map(|(t, w)| w * b.get(t).unwrap_or(&0.0)).sum();
        let na = a.values().map(|w| w * w).sum::<f64>().sqrt();
        let nb = b.values().map(|w| w * w).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    };
    let train_vecs: Vec<_> = train.iter().map(|(t, f)| (vec_of(t), f)).collect();
    let mut aps = Vec::new();
    for (tokens, fixed) in queries {
        let relevant: BTreeSet<&String> = fixed.iter().filter(|f| universe.contains(*f)).collect();
        if relevant.is_empty() {
            continue;
        }
        let q = vec_of(tokens);
        let mut scores: BTreeMap<&String, f64> = universe.iter().map(|p| (p, 0.0)).collect();
        for (v, files) in &train_vecs {
            for f in files.iter() {
                *scores.get_mut(f).unwrap() += cos(&q, v) / files.len() as f64;
            }
        }
        let mut ranked: Vec<(&String, f64)> = scores.into_iter().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        let mut hits = 0.0;
        let mut sum = 0.0;
        for (i, (p, _)) in ranked.iter().take(k).enumerate() {
            if relevant.contains(p) {
                hits += 1.0;
                sum += hits / (i + 1) as f64;
            }
        }
        aps.push(sum / relevant.len() as f64);
    }
    aps.iter().sum::<f64>() / aps.len() as f64
}

#[test]
fn toy_corpus_matches_brute_force_oracle() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), true);
    let tokens = TokenConfig::default();
    let dataset = Dataset::load("toy", &DatasetPaths::in_dir(dir.path()), &tokens, true).unwrap();
    assert_eq!(dataset.unresolved_dropped, 1);
    let localizer = Localizer::fit(&dataset, &config()).unwrap();
    assert_eq!(localizer.queries().len(), 4);

    let evaluation = Evaluation::run(&localizer, &EvalConfig::default()).unwrap();
    assert_eq!(evaluation.excluded, ["Q-4"]);
    assert_eq!(evaluation.num_queries(), 3);

    let as_pairs = |rs: &[bugloc::corpus::BugReport]| -> Vec<(Vec<String>, Vec<String>)> {
        rs.iter()
            .map(|r| {
                (
                    bugloc::corpus::tokenize(&r.text(), &tokens),
                    r.fixed_files.clone(),
                )
            })
            .collect()
    };
    let (train, queries) = dataset.split(0.5);
    for (ki, &k) in evaluation.config.ks.iter().enumerate() {
        let want = oracle_bow_map(
            &as_pairs(train),
            &as_pairs(queries),
            localizer.universe(),
            k,
        );
        let got = evaluation.map_at(Method::BowCosine, 0, ki).unwrap();
        assert!((got - want).abs() < 1e-12, "k={k}: {got} vs {want}");
    }
    for row in evaluation.best_rows().unwrap() {
        assert!((0.0..=1.0).contains(&row.map));
    }
}

#[test]
fn embedding_needs_source_docs() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), false);
    let mut paths = DatasetPaths::in_dir(dir.path());
    paths.sources = None;
    let dataset = Dataset::load("toy", &paths, &TokenConfig::default(), true).unwrap();
    let localizer = Localizer::fit(&dataset, &config()).unwrap();
    assert!(Evaluation::run(&localizer, &EvalConfig::default()).is_err());
    let bulner_only = EvalConfig {
        methods: vec![Method::BowCosine, Method::Bulner],
        ..EvalConfig::default()
    };
    assert!(Evaluation::run(&localizer, &bulner_only).is_ok());
}

#[test]
fn unknown_fix_links_fail_unless_dropped() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), true);
    let text = fs::read_to_string(dir.path().join("reports.jsonl")).unwrap();
    fs::write(
        dir.path().join("reports.jsonl"),
        text.replacen("net/Conn.java", "net/Gone.java", 1),
    )
    .unwrap();
    let dataset = Dataset::load(
        "toy",
        &DatasetPaths::in_dir(dir.path()),
        &TokenConfig::default(),
        true,
    )
    .unwrap();
    let err = Localizer::fit(&dataset, &config())
        .err()
        .expect("unknown link must fail");
    assert!(err.to_string().contains("T-2"), "{err}");
    let lenient = PipelineConfig {
        drop_unknown_links: true,
        ..config()
    };
    assert!(Localizer::fit(&dataset, &lenient).is_ok());
}

#[test]
fn fitting_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), true);
    let dataset = Dataset::load(
        "toy",
        &DatasetPaths::in_dir(dir.path()),
        &TokenConfig::default(),
        true,
    )
    .unwrap();
    let a = Evaluation::run(
        &Localizer::fit(&dataset, &config()).unwrap(),
        &EvalConfig::default(),
    )
    .unwrap();
    let b = Evaluation::run(
        &Localizer::fit(&dataset, &config()).unwrap(),
        &EvalConfig::default(),
    )
    .unwrap();
    assert_eq!(a.sweep_rows().unwrap(), b.sweep_rows().unwrap());
}
