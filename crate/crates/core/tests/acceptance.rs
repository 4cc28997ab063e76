//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bugloc::cli::main_with_args;
use bugloc::corpus::TokenConfig;
use bugloc::embeddings::EmbeddingTable;
use bugloc::eval::{
    average_precision_at_k, mean_average_precision, paired_t_test, precision_at_k, EvalConfig,
    Evaluation,
};
use bugloc::network::{HeteroNetwork, NodeKind, TypedNode};
use bugloc::pipeline::{Dataset, DatasetPaths, Localizer, Method, PipelineConfig};
use bugloc::regularizer::{closed_form_solve, solve, Initialization, Solution, SolverConfig};
use bugloc::synthgen::{generate, SynthSpec};

const ORACLE_RUNS: usize = 120;
const ORACLE_TOLERANCE: f64 = 1e-10;
const DIRECTIONAL_MARGIN: f64 = 0.02;

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

/// Random valid network with at most 30 nodes whose free parts all reach a
/// clamped term, and the embedding table clamping it.
fn random_network(seed: u64) -> (HeteroNetwork, EmbeddingTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(1..=4);
    let nb = rng.random_range(1..=8);
    let nt = rng.random_range(1..=8);
    let n_oov = rng.random_range(0..=2);
    let ns = rng.random_range(1..=7);
    let nm = rng.random_range(0..=4);

    let mut table = EmbeddingTable::new(dim);
    let mut net = HeteroNetwork::new();
    let b: Vec<usize> = (0..nb)
        .map(|i| net.add_node(TypedNode::new(NodeKind::B, format!("b{i:02}"))))
        .collect();
    let mut clamped = Vec::new();
    let mut oov = Vec::new();
    for i in 0..nt + n_oov {
        let key = format!("t{i:02}");
        let idx = net.add_node(TypedNode::new(NodeKind::T, key.clone()));
        if i < nt {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            table.insert(key, v).unwrap();
            clamped.push(idx);
        } else {
            oov.push(idx);
        }
    }
    let s: Vec<usize> = (0..ns)
        .map(|i| net.add_node(TypedNode::new(NodeKind::S, format!("s{i:02}"))))
        .collect();
    let m: Vec<usize> = (0..nm)
        .map(|i| net.add_node(TypedNode::new(NodeKind::M, format!("m{i:02}"))))
        .collect();

    let mut seen = BTreeSet::new();
    let mut link = |net: &mut HeteroNetwork, rng: &mut ChaCha8Rng, x: usize, y: usize| {
        let key = (x.min(y), x.max(y));
        if seen.insert(key) {
            net.add_edge(x, y, rng.random_range(0.1..3.0));
        }
    };
    let pick = |rng: &mut ChaCha8Rng, v: &[usize]| v[rng.random_range(0..v.len())];
    // A spanning backbone: every B touches a clamped term, every S a B, every M an S.
    for &x in &b {
        let t = pick(&mut rng, &clamped);
        link(&mut net, &mut rng, t, x);
    }
    for &x in &oov {
        let y = pick(&mut rng, &b);
        link(&mut net, &mut rng, x, y);
    }
    for &x in &s {
        let y = pick(&mut rng, &b);
        link(&mut net, &mut rng, y, x);
    }
    for &x in &m {
        let y = pick(&mut rng, &s);
        link(&mut net, &mut rng, y, x);
    }
    let all_t: Vec<usize> = clamped.iter().chain(&oov).copied().collect();
    for _ in 0..rng.random_range(0..20) {
        match rng.random_range(0..3) {
            0 => {
                let (x, y) = (pick(&mut rng, &all_t), pick(&mut rng, &b));
                link(&mut net, &mut rng, x, y)
            }
            1 => {
                let (x, y) = (pick(&mut rng, &b), pick(&mut rng, &s));
                link(&mut net, &mut rng, x, y)
            }
            _ if !m.is_empty() => {
                let (x, y) = (pick(&mut rng, &s), pick(&mut rng, &m));
                link(&mut net, &mut rng, x, y)
            }
            _ => {}
        }
    }
    (net, table)
}

fn linf(a: &Solution, b: &bugloc::regularizer::RepresentationModel) -> f64 {
    (0..a.model.len())
        .flat_map(|i| {
            a.model
                .vector_at(i)
                .iter()
                .zip(b.vector_at(i))
                .map(|(x, y)| (x - y).abs())
        })
        .fold(0.0, f64::max)
}

struct OracleRun {
    net: HeteroNetwork,
    table: EmbeddingTable,
    solution: Solution,
}

fn oracle_runs() -> Vec<OracleRun> {
    let config = SolverConfig {
        max_iters: 1_000_000,
        tolerance: ORACLE_TOLERANCE,
        init: Initialization::Zeros,
    };
    (0..ORACLE_RUNS as u64)
        .map(|seed| {
            let (net, table) = random_network(seed);
            let solution = solve(&net, &table, &config);
            OracleRun {
                net,
                table,
                solution,
            }
        })
        .collect()
}

fn criterion_oracle(runs: &[OracleRun], elapsed: Duration) -> Outcome {
    let mut worst: f64 = 0.0;
    for (seed, run) in runs.iter().enumerate() {
        check(
            run.net.node_count() <= 30,
            format!("seed {seed}: {} nodes", run.net.node_count()),
        )?;
        check(
            run.solution.report.converged,
            format!("seed {seed}: sweeps did not converge"),
        )?;
        check(
            run.solution.report.isolated.is_empty(),
            format!("seed {seed}: isolated free nodes"),
        )?;
        let exact = closed_form_solve(&run.net, &run.table).map_err(|e| e.to_string())?;
        worst = worst.max(linf(&run.solution, &exact.model));
    }
    check(worst <= 1e-6, format!("max L-inf gap {worst:.3e} > 1e-6"))?;
    check(
        elapsed < Duration::from_secs(60),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "{} networks, max L-inf gap {worst:.2e}, {:.2?}",
        runs.len(),
        elapsed
    ))
}

fn criterion_energy(runs: &[OracleRun]) -> Outcome {
    let mut sweeps = 0;
    for (seed, run) in runs.iter().enumerate() {
        for w in run.solution.report.energy_trace.windows(2) {
            sweeps += 1;
            check(
                w[1] <= w[0] * (1.0 + 1e-12),
                format!("seed {seed}: energy rose {} -> {}", w[0], w[1]),
            )?;
        }
    }
    Ok(format!("{sweeps} sweeps, energy never increased"))
}

fn criterion_harmonic(runs: &[OracleRun]) -> Outcome {
    // The exact solution must sit inside the clamped range; the sweep
    // solution may trail it by no more than the oracle tolerance.
    let mut overshoot: f64 = 0.0;
    for (seed, run) in runs.iter().enumerate() {
        let exact = closed_form_solve(&run.net, &run.table)
            .map_err(|e| e.to_string())?
            .model;
        let model = &run.solution.model;
        let dim = model.dim();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for (i, node) in run.net.nodes().iter().enumerate() {
            if model.is_clamped_at(i) {
                let y = run.table.get(&node.key).unwrap();
                check(
                    model.vector_at(i) == y,
                    format!("seed {seed}: clamped {node} moved"),
                )?;
                for d in 0..dim {
                    lo[d] = lo[d].min(y[d]);
                    hi[d] = hi[d].max(y[d]);
                }
            }
        }
        for i in (0..model.len()).filter(|&i| !model.is_clamped_at(i)) {
            for d in 0..dim {
                let outside = |v: f64| (lo[d] - v).max(v - hi[d]).max(0.0);
                check(
                    outside(exact.vector_at(i)[d]) <= 1e-12,
                    format!(
                        "seed {seed}: exact {} leaves the clamped range",
                        run.net.node(i)
                    ),
                )?;
                overshoot = overshoot.max(outside(model.vector_at(i)[d]));
            }
        }
    }
    check(
        overshoot <= 1e-6,
        format!("sweep solution leaves the clamped range by {overshoot:.3e}"),
    )?;
    let bound = 10.0 * ORACLE_TOLERANCE;
    let mut worst: f64 = 0.0;
    for (seed, run) in runs.iter().take(10).enumerate() {
        // Converge both runs well past the agreement bound.
        let tight = SolverConfig {
            max_iters: 1_000_000,
            tolerance: ORACLE_TOLERANCE * 1e-3,
            init: Initialization::Zeros,
        };
        let zero = solve(&run.net, &run.table, &tight);
        let random = solve(
            &run.net,
            &run.table,
            &SolverConfig {
                init: Initialization::Random {
                    seed: 1000 + seed as u64,
                },
                ..tight
            },
        );
        worst = worst.max(linf(&random, &zero.model));
    }
    check(
        worst <= bound,
        format!("random vs zero init differ by {worst:.3e} > {bound:.0e}"),
    )?;
    Ok(format!(
        "{} runs in range (sweep overshoot {overshoot:.1e}), clamps fixed; init gap {worst:.2e} on 10 runs",
        runs.len()
    ))
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn criterion_map_arithmetic(evaluation: &Evaluation) -> Outcome {
    // (ranking, relevant, k, AP@k), AP values computed by hand.
    let ap_cases: &[(&[&str], &[&str], usize, f64)] = &[
        (
            &["a", "x", "b", "y"],
            &["a", "b"],
            10,
            (1.0 + 2.0 / 3.0) / 2.0,
        ),
        (&["x", "y", "z"], &["a"], 10, 0.0),
        (&["a", "b"], &["a", "b"], 1, 0.5),
        (&["a", "b"], &["a", "b"], 2, 1.0),
        (&["x", "a"], &["a"], 10, 0.5),
        (&["x", "y", "a"], &["a"], 10, 1.0 / 3.0),
        (&["x", "y", "a"], &["a"], 2, 0.0),
        (&["a", "b", "c"], &["a", "b", "c"], 10, 1.0),
        (&["x", "a", "y", "b"], &["a", "b"], 10, (0.5 + 0.5) / 2.0),
        (
            &["a", "x", "y", "z", "b"],
            &["a", "b"],
            5,
            (1.0 + 0.4) / 2.0,
        ),
        (&["a", "x", "y", "z", "b"], &["a", "b"], 4, 0.5),
        (
            &["x", "a", "b", "c"],
            &["a", "b", "c", "d"],
            10,
            (0.5 + 2.0 / 3.0 + 0.75) / 4.0,
        ),
        (&["a"], &["a", "b", "c"], 10, 1.0 / 3.0),
        (&["x", "y", "z", "w", "v", "a"], &["a"], 5, 0.0),
        (&["x", "y", "z", "w", "v", "a"], &["a"], 6, 1.0 / 6.0),
    ];
    let p_cases: &[(&[&str], &[&str], usize, f64)] = &[
        (&["a", "x", "b"], &["a", "b"], 3, 2.0 / 3.0),
        (&["a", "x"], &["a"], 1, 1.0),
        (&["a", "x"], &["a"], 5, 0.2),
        (&["x", "y"], &["a"], 2, 0.0),
        (&["a", "b", "c", "d"], &["a", "c"], 4, 0.5),
    ];
    let map_cases: &[(&[f64], f64)] = &[
        (&[0.5, 1.0], 0.75),
        (&[0.3], 0.3),
        (&[0.0, 0.0, 1.0, 0.5], 0.375),
    ];

    let mut count = 0;
    for (ranking, rel, k, want) in ap_cases {
        let got = average_precision_at_k(ranking, &set(rel), *k).ok_or("AP undefined")?;
        check(
            (got - want).abs() <= 1e-12,
            format!("AP@{k} of {ranking:?}: {got} != {want}"),
        )?;
        count += 1;
    }
    check(
        average_precision_at_k(&["a"], &BTreeSet::new(), 10).is_none(),
        "NPI = 0 must be excluded",
    )?;
    for (ranking, rel, k, want) in p_cases {
        let got = precision_at_k(ranking, &set(rel), *k);
        check(
            (got - want).abs() <= 1e-12,
            format!("P@{k} of {ranking:?}: {got} != {want}"),
        )?;
        count += 1;
    }
    for (aps, want) in map_cases {
        let got = mean_average_precision(aps).map_err(|e| e.to_string())?;
        check(
            (got - want).abs() <= 1e-12,
            format!("MAP of {aps:?}: {got} != {want}"),
        )?;
        count += 1;
    }
    check(mean_average_precision(&[]).is_err(), "empty MAP must fail")?;

    let ks = &evaluation.config.ks;
    let mut checked = 0;
    for &method in &evaluation.config.methods {
        for a in 0..evaluation.config.alpha_grid.len() {
            let maps: Vec<f64> = (0..ks.len())
                .map(|k| evaluation.map_at(method, a, k).unwrap())
                .collect();
            check(
                maps.windows(2).all(|w| w[0] <= w[1]),
                format!("{method} alpha#{a}: MAP falls with k {maps:?}"),
            )?;
            checked += 1;
        }
    }
    Ok(format!(
        "{count} fixtures exact; MAP@1<=@5<=@10 on {checked} method/alpha rows"
    ))
}

fn criterion_alpha_zero(localizer: &Localizer<'_>) -> Outcome {
    let k = localizer.universe().len();
    for q in localizer.queries() {
        let base = localizer
            .rank(q, Method::BowCosine, 0.0, k)
            .map_err(|e| e.to_string())?;
        for method in [Method::Embedding, Method::Bulner] {
            let other = localizer
                .rank(q, method, 0.0, k)
                .map_err(|e| e.to_string())?;
            check(
                other.paths() == base.paths(),
                format!("{}: {method} differs at alpha 0", q.id),
            )?;
        }
    }
    Ok(format!(
        "{} queries, full rankings identical",
        localizer.queries().len()
    ))
}

fn criterion_directional(evaluation: &Evaluation, elapsed: Duration) -> Outcome {
    let rows = evaluation.best_rows().map_err(|e| e.to_string())?;
    let at10 = |m: Method| {
        rows.iter()
            .find(|r| r.method == m && r.k == 10)
            .map(|r| r.map)
            .unwrap()
    };
    let (bow, emb, bul) = (
        at10(Method::BowCosine),
        at10(Method::Embedding),
        at10(Method::Bulner),
    );
    let summary =
        format!("MAP@10 BULNER {bul:.4}, Embedding {emb:.4}, BoW {bow:.4}, {elapsed:.2?}");
    check(
        bul - bow >= DIRECTIONAL_MARGIN,
        format!("BULNER - BoW below {DIRECTIONAL_MARGIN}: {summary}"),
    )?;
    check(emb >= bow, format!("Embedding below BoW: {summary}"))?;
    check(bul > emb, format!("BULNER not above Embedding: {summary}"))?;
    check(
        elapsed < Duration::from_secs(300),
        format!("too slow: {summary}"),
    )?;
    Ok(summary)
}

fn criterion_ttest() -> Outcome {
    let t = paired_t_test(&[0.1, 0.2, 0.3], &[0.0; 3], 0.95).map_err(|e| e.to_string())?;
    let stat = t.t_statistic.ok_or("no t statistic")?;
    check((stat - 3.4641).abs() <= 1e-3, format!("t = {stat}"))?;
    let same = paired_t_test(&[0.4, 0.6], &[0.4, 0.6], 0.95).map_err(|e| e.to_string())?;
    check(
        same.degenerate && !same.significant,
        "identical lists must be degenerate, not significant",
    )?;
    let shifted =
        paired_t_test(&[0.5, 0.7, 0.9], &[0.4, 0.6, 0.8], 0.95).map_err(|e| e.to_string())?;
    check(
        shifted.degenerate && !shifted.significant,
        "constant shift must be degenerate",
    )?;
    check(
        paired_t_test(&[0.1], &[0.2, 0.3], 0.95).is_err(),
        "length mismatch must fail",
    )?;
    Ok(format!("t = {stat:.4}; degenerate inputs flagged"))
}

fn cli(args: &[&str]) -> Result<(), String> {
    let mut full = vec!["bugloc"];
    full.extend_from_slice(args);
    match main_with_args(&full) {
        0 => Ok(()),
        code => Err(format!("`{}` exited with {code}", args.join(" "))),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn criterion_determinism(data: &Path, work: &Path) -> Outcome {
    let d = data.to_str().unwrap();
    let dir = |name: &str| work.join(name).to_str().unwrap().to_string();
    cli(&["eval", "--dataset-dir", d, "--out-dir", &dir("run1")])?;
    cli(&["eval", "--dataset-dir", d, "--out-dir", &dir("run2")])?;
    for name in ["results.csv", "significance.csv"] {
        let a = read(&work.join("run1").join(name))?;
        let b = read(&work.join("run2").join(name))?;
        check(a == b, format!("{name} differs between identical runs"))?;
    }
    let model = work.join("solved").join("model.csv");
    cli(&["solve", "--dataset-dir", d, "--out-dir", &dir("solved")])?;
    cli(&[
        "eval",
        "--dataset-dir",
        d,
        "--out-dir",
        &dir("loaded"),
        "--model",
        model.to_str().unwrap(),
    ])?;
    for name in ["results.csv", "significance.csv"] {
        let a = read(&work.join("run1").join(name))?;
        let b = read(&work.join("loaded").join(name))?;
        check(a == b, format!("{name} differs after solve/dump/load"))?;
    }
    Ok("repeat eval byte-identical; dumped model reproduces the single-process results".into())
}

/// Writes a corpus in the interchange formats with the quirks of mined
/// trackers: mixed statuses, space-separated timestamps, an explicit config.
fn criterion_real_data_path(work: &Path) -> Outcome {
    let data = work.join("tracker");
    let spec = SynthSpec {
        seed: 11,
        num_reports: 200,
        num_files: 60,
        vocab_size: 400,
        ..SynthSpec::default()
    };
    let corpus = generate(&spec).map_err(|e| e.to_string())?;
    corpus.write_to(&data).map_err(|e| e.to_string())?;
    let mut reports = String::new();
    for (i, line) in corpus.reports_jsonl.lines().enumerate() {
        let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
        let ts = v["report_time"]
            .as_str()
            .unwrap()
            .replace('T', " ")
            .trim_end_matches('Z')
            .to_string();
        v["report_time"] = ts.into();
        if i % 9 == 0 {
            v["status"] = "new".into();
        }
        reports.push_str(&v.to_string());
        reports.push('\n');
    }
    fs::write(data.join("bugs.jsonl"), reports).map_err(|e| e.to_string())?;
    let out = work.join("tracker-out");
    let config = work.join("tracker.toml");
    let toml = format!(
        "dataset = \"Tracker\"\nreports = {:?}\nsources = {:?}\nmetrics = {:?}\nembeddings = {:?}\nout_dir = {:?}\n\n[eval]\nks = [1, 5, 10]\n",
        data.join("bugs.jsonl"),
        data.join("sources.jsonl"),
        data.join("metrics.csv"),
        data.join("embeddings.txt"),
        out
    );
    fs::write(&config, toml).map_err(|e| e.to_string())?;
    cli(&["eval", "--config", config.to_str().unwrap()])?;

    let text = String::from_utf8(read(&out.join("results.csv"))?).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    check(
        lines.next() == Some("method,dataset,alpha,k,map,num_queries"),
        "bad header",
    )?;
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    check(rows.len() == 9, format!("{} rows, expected 9", rows.len()))?;
    for method in ["BoWCosine", "Embedding", "BULNER"] {
        let ks: Vec<&str> = rows
            .iter()
            .filter(|r| r[0] == method)
            .map(|r| r[3])
            .collect();
        check(
            ks == ["1", "5", "10"],
            format!("{method} rows for k {ks:?}"),
        )?;
    }
    check(rows.iter().all(|r| r[1] == "Tracker"), "dataset column")?;
    check(out.join("manifest-eval.json").exists(), "no manifest")?;
    Ok("config-driven eval produced a 3 method x 3 k results table".into())
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();

    let start = Instant::now();
    let runs = oracle_runs();
    let oracle_time = start.elapsed();
    results.push(("1 oracle equivalence", criterion_oracle(&runs, oracle_time)));
    results.push(("2 energy monotonicity", criterion_energy(&runs)));
    results.push((
        "3 maximum principle, clamps, init independence",
        criterion_harmonic(&runs),
    ));

    let work = tempfile::tempdir().expect("temp dir");
    let data = work.path().join("planted");
    let start = Instant::now();
    let pipeline = (|| -> Result<_, String> {
        generate(&SynthSpec::default())
            .and_then(|c| c.write_to(&data))
            .map_err(|e| e.to_string())?;
        let dataset = Dataset::load(
            "planted",
            &DatasetPaths::in_dir(&data),
            &TokenConfig::default(),
            true,
        )
        .map_err(|e| e.to_string())?;
        Ok(dataset)
    })();
    match pipeline {
        Ok(dataset) => {
            let fitted =
                Localizer::fit(&dataset, &PipelineConfig::default()).map_err(|e| e.to_string());
            match fitted.and_then(|l| {
                let e = Evaluation::run(&l, &EvalConfig::default()).map_err(|e| e.to_string())?;
                Ok((l, e))
            }) {
                Ok((localizer, evaluation)) => {
                    let elapsed = start.elapsed();
                    results.push(("4 MAP arithmetic", criterion_map_arithmetic(&evaluation)));
                    results.push(("5 alpha = 0 reduction", criterion_alpha_zero(&localizer)));
                    results.push((
                        "6 directional ordering",
                        criterion_directional(&evaluation, elapsed),
                    ));
                }
                Err(e) => {
                    for name in [
                        "4 MAP arithmetic",
                        "5 alpha = 0 reduction",
                        "6 directional ordering",
                    ] {
                        results.push((name, Err(e.clone())));
                    }
                }
            }
        }
        Err(e) => {
            for name in [
                "4 MAP arithmetic",
                "5 alpha = 0 reduction",
                "6 directional ordering",
            ] {
                results.push((name, Err(e.clone())));
            }
        }
    }
    results.push(("7 t-test", criterion_ttest()));
    results.push((
        "8 end-to-end determinism",
        criterion_determinism(&data, work.path()),
    ));
    results.push((
        "9 tracker-format end-to-end",
        criterion_real_data_path(work.path()),
    ));

    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
