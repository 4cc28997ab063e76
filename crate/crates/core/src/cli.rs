//! Command-line front end.
//!
//! Every subcommand reads an optional TOML config (see [`RunConfig`]);
//! flags override config keys. Exit status is 0 on success, 1 on validation
//! errors (bad input, config or usage) and 2 on runtime failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{self, BugReport, TokenConfig};
use crate::error::{Error, Result};
use crate::eval::{self, EvalConfig, Evaluation};
use crate::network::validate_network;
use crate::pipeline::{Dataset, DatasetPaths, Localizer, Method, PipelineConfig};
use crate::regularizer::{
    self, ConvergenceReport, Initialization, RepresentationModel, SolverConfig,
};
use crate::synthgen::{self, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "bugloc", version, about = "Rank source files for bug reports")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Combination factor for `query`.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Cut-offs, comma separated (`query` uses the largest).
    #[arg(long, global = true, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub dataset_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Seed for `synth`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Buckets per code metric.
    #[arg(long, global = true)]
    pub buckets: Option<usize>,
    /// Methods, comma separated: BoWCosine, Embedding, BULNER.
    #[arg(long, global = true, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Previously dumped model to use instead of solving.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate inputs and cache the tokenized corpus.
    Ingest,
    /// Build and validate the network; dump its edge list.
    Build,
    /// Regularize and dump the learned model.
    Solve,
    /// Rank files for one report (JSON object) or many (JSONL).
    Query {
        #[arg(long)]
        report: PathBuf,
    },
    /// Best-α MAP@k per method, plus paired t-tests.
    Eval,
    /// MAP@k for every method at every grid α.
    Sweep,
    /// Generate a synthetic planted corpus.
    Synth,
}

/// Run configuration file schema. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Name written to the `dataset` column of result files.
    pub dataset: String,
    /// Directory with `reports.jsonl`, `embeddings.txt` and optionally `sources.jsonl`, `metrics.csv`.
    pub dataset_dir: Option<PathBuf>,
    pub reports: Option<PathBuf>,
    pub sources: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub filter_resolved: bool,
    pub drop_unknown_links: bool,
    pub tokens: TokenRules,
    pub network: NetworkRules,
    pub solver: SolverRules,
    pub eval: EvalRules,
    pub query: QueryRules,
    pub synth: SynthRules,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: "dataset".into(),
            dataset_dir: None,
            reports: None,
            sources: None,
            metrics: None,
            embeddings: None,
            out_dir: PathBuf::from("out"),
            filter_resolved: true,
            drop_unknown_links: false,
            tokens: TokenRules::default(),
            network: NetworkRules::default(),
            solver: SolverRules::default(),
            eval: EvalRules::default(),
            query: QueryRules::default(),
            synth: SynthRules::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenRules {
    pub min_len: usize,
    /// Stoplist file replacing the built-in list.
    pub stopwords: Option<PathBuf>,
    pub stem: bool,
}

impl Default for TokenRules {
    fn default() -> Self {
        Self {
            min_len: 2,
            stopwords: None,
            stem: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkRules {
    pub buckets: usize,
}

impl Default for NetworkRules {
    fn default() -> Self {
        Self { buckets: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverRules {
    pub max_iters: usize,
    pub tolerance: f64,
    /// Seed for random initialization of free nodes; zeros when absent.
    pub random_init_seed: Option<u64>,
}

impl Default for SolverRules {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tolerance: 1e-6,
            random_init_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalRules {
    pub ks: Vec<usize>,
    pub alpha_step: f64,
    /// Explicit grid; overrides `alpha_step`.
    pub alpha_grid: Option<Vec<f64>>,
    pub train_fraction: f64,
    pub methods: Vec<String>,
    pub confidence: f64,
}

impl Default for EvalRules {
    fn default() -> Self {
        Self {
            ks: vec![1, 5, 10],
            alpha_step: 0.05,
            alpha_grid: None,
            train_fraction: 0.8,
            methods: Method::ALL.iter().map(|m| m.as_str().to_string()).collect(),
            confidence: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryRules {
    pub alpha: f64,
    pub k: usize,
    pub method: String,
}

impl Default for QueryRules {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            k: 10,
            method: Method::Bulner.as_str().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthRules {
    pub seed: u64,
    pub num_reports: usize,
    pub num_files: usize,
    pub vocab_size: usize,
    pub dim: usize,
    pub topic_count: usize,
    pub noise_rate: f64,
    pub synonyms: bool,
    pub concepts_per_file: usize,
}

impl Default for SynthRules {
    fn default() -> Self {
        let s = SynthSpec::default();
        Self {
            seed: s.seed,
            num_reports: s.num_reports,
            num_files: s.num_files,
            vocab_size: s.vocab_size,
            dim: s.dim,
            topic_count: s.topic_count,
            noise_rate: s.noise_rate,
            synonyms: s.synonyms,
            concepts_per_file: s.concepts_per_file,
        }
    }
}

impl From<&SynthRules> for SynthSpec {
    fn from(r: &SynthRules) -> Self {
        SynthSpec {
            seed: r.seed,
            num_reports: r.num_reports,
            num_files: r.num_files,
            vocab_size: r.vocab_size,
            dim: r.dim,
            topic_count: r.topic_count,
            noise_rate: r.noise_rate,
            synonyms: r.synonyms,
            concepts_per_file: r.concepts_per_file,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Applies command-line overrides.
    pub fn apply(&mut self, flags: &Flags) {
        if let Some(a) = flags.alpha {
            self.query.alpha = a;
        }
        if let Some(ks) = &flags.k {
            self.eval.ks = ks.clone();
            if let Some(&max) = ks.iter().max() {
                self.query.k = max;
            }
        }
        if let Some(d) = &flags.dataset_dir {
            self.dataset_dir = Some(d.clone());
        }
        if let Some(d) = &flags.out_dir {
            self.out_dir = d.clone();
        }
        if let Some(s) = flags.seed {
            self.synth.seed = s;
        }
        if let Some(m) = flags.max_iters {
            self.solver.max_iters = m;
        }
        if let Some(t) = flags.tolerance {
            self.solver.tolerance = t;
        }
        if let Some(b) = flags.buckets {
            self.network.buckets = b;
        }
        if let Some(m) = &flags.methods {
            self.eval.methods = m.clone();
            if let Some(first) = m.first() {
                self.query.method = first.clone();
            }
        }
    }

    pub fn dataset_paths(&self) -> Result<DatasetPaths> {
        let base = self.dataset_dir.as_ref().map(DatasetPaths::in_dir);
        let pick = |explicit: &Option<PathBuf>, fallback: Option<PathBuf>, name: &str| {
            explicit
                .clone()
                .or(fallback)
                .ok_or_else(|| Error::Config(format!("no {name} path: set dataset_dir or {name}")))
        };
        let paths = DatasetPaths {
            reports: pick(
                &self.reports,
                base.as_ref().map(|b| b.reports.clone()),
                "reports",
            )?,
            embeddings: pick(
                &self.embeddings,
                base.as_ref().map(|b| b.embeddings.clone()),
                "embeddings",
            )?,
            sources: self
                .sources
                .clone()
                .or_else(|| base.as_ref().and_then(|b| b.sources.clone())),
            metrics: self
                .metrics
                .clone()
                .or_else(|| base.as_ref().and_then(|b| b.metrics.clone())),
        };
        if let Some(missing) = paths.all().into_iter().find(|p| !p.exists()) {
            return Err(Error::Config(format!(
                "input file {} does not exist",
                missing.display()
            )));
        }
        Ok(paths)
    }

    pub fn token_config(&self) -> Result<TokenConfig> {
        let cfg = TokenConfig {
            min_len: self.tokens.min_len,
            stem: self.tokens.stem,
            ..TokenConfig::default()
        };
        match &self.tokens.stopwords {
            Some(p) => cfg.load_stoplist(p),
            None => Ok(cfg),
        }
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        if self.network.buckets == 0 {
            return Err(Error::Config("buckets must be positive".into()));
        }
        if self.solver.max_iters == 0
            || self.solver.tolerance.is_nan()
            || self.solver.tolerance <= 0.0
        {
            return Err(Error::Config(
                "solver needs max_iters > 0 and tolerance > 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.eval.train_fraction) {
            return Err(Error::Config("train_fraction must lie in [0, 1]".into()));
        }
        Ok(PipelineConfig {
            tokens: self.token_config()?,
            buckets: self.network.buckets,
            solver: SolverConfig {
                max_iters: self.solver.max_iters,
                tolerance: self.solver.tolerance,
                init: match self.solver.random_init_seed {
                    Some(seed) => Initialization::Random { seed },
                    None => Initialization::Zeros,
                },
            },
            train_fraction: self.eval.train_fraction,
            drop_unknown_links: self.drop_unknown_links,
        })
    }

    pub fn eval_config(&self) -> Result<EvalConfig> {
        let methods = self
            .eval
            .methods
            .iter()
            .map(|m| m.parse::<Method>())
            .collect::<Result<Vec<_>>>()?;
        let cfg = EvalConfig {
            ks: self.eval.ks.clone(),
            alpha_grid: match &self.eval.alpha_grid {
                Some(g) => g.clone(),
                None if self.eval.alpha_step > 0.0 && self.eval.alpha_step <= 1.0 => {
                    eval::alpha_grid(self.eval.alpha_step)
                }
                None => return Err(Error::Config("alpha_step must lie in (0, 1]".into())),
            },
            methods,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: String,
    config: &'a RunConfig,
    inputs: BTreeMap<String, String>,
    convergence: Option<ConvergenceSummary>,
    outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
struct ConvergenceSummary {
    iterations: usize,
    converged: bool,
    final_displacement: f64,
    final_energy: f64,
    isolated_nodes: usize,
}

impl From<&ConvergenceReport> for ConvergenceSummary {
    fn from(r: &ConvergenceReport) -> Self {
        Self {
            iterations: r.iterations,
            converged: r.converged,
            final_displacement: r.final_displacement,
            final_energy: r.final_energy,
            isolated_nodes: r.isolated.len(),
        }
    }
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

struct Session {
    config: RunConfig,
    model_path: Option<PathBuf>,
    outputs: Vec<PathBuf>,
    convergence: Option<ConvergenceSummary>,
    inputs: Vec<PathBuf>,
}

impl Session {
    fn out_path(&mut self, name: &str) -> Result<PathBuf> {
        let dir = &self.config.out_dir;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(name);
        self.outputs.push(path.clone());
        Ok(path)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out_path(name)?;
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    fn load_dataset(&mut self) -> Result<Dataset> {
        let paths = self.config.dataset_paths()?;
        self.inputs
            .extend(paths.all().into_iter().map(Path::to_path_buf));
        let tokens = self.config.token_config()?;
        Dataset::load(
            &self.config.dataset,
            &paths,
            &tokens,
            self.config.filter_resolved,
        )
    }

    fn localizer<'a>(&mut self, dataset: &'a Dataset) -> Result<Localizer<'a>> {
        let pipeline = self.config.pipeline_config()?;
        let localizer = match &self.model_path {
            Some(path) => {
                let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
                let model = RepresentationModel::load(BufReader::new(file), &dataset.embeddings)?;
                self.inputs.push(path.clone());
                Localizer::with_model(dataset, &pipeline, model)?
            }
            None => Localizer::fit(dataset, &pipeline)?,
        };
        if let Some(report) = localizer.convergence() {
            eprintln!("solver: {}", regularizer::describe(report));
            self.convergence = Some(report.into());
        }
        Ok(localizer)
    }

    fn finish(&mut self, command: &str) -> Result<()> {
        let mut inputs = BTreeMap::new();
        for p in &self.inputs {
            inputs.insert(p.display().to_string(), file_sha256(p)?);
        }
        let manifest = Manifest {
            command,
            config_hash: self.config.hash(),
            config: &self.config,
            inputs,
            convergence: self.convergence.take(),
            outputs: self
                .outputs
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
        };
        let json = serde_json::to_vec_pretty(&manifest)?;
        let dir = &self.config.out_dir;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(format!("manifest-{command}.json"));
        fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }
}

#[derive(Serialize)]
struct CachedReport<'a> {
    id: &'a str,
    report_time: String,
    fixed_files: &'a [String],
    tokens: Vec<String>,
}

/// Reads one JSON object, or JSONL with one report per line.
fn load_query_reports(path: &Path) -> Result<Vec<BugReport>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if let Ok(single) = serde_json::from_str::<BugReport>(&text) {
        return Ok(vec![single]);
    }
    corpus::parse_bug_reports(&text, path)
}

fn file_stem_for(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Runs one parsed command; returns the process exit status.
pub fn dispatch(cli: Cli) -> i32 {
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

/// Parses arguments and dispatches. Usage errors exit with status 1.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(cli),
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            code
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    config.apply(&cli.flags);
    let mut session = Session {
        config,
        model_path: cli.flags.model.clone(),
        outputs: Vec::new(),
        convergence: None,
        inputs: Vec::new(),
    };

    let name = match &cli.command {
        Command::Ingest => {
            let dataset = session.load_dataset()?;
            let tokens = session.config.token_config()?;
            let mut cache = Vec::new();
            for r in &dataset.reports {
                let line = CachedReport {
                    id: &r.id,
                    report_time: r.report_time.to_rfc3339(),
                    fixed_files: &r.fixed_files,
                    tokens: corpus::tokenize(&r.text(), &tokens),
                };
                serde_json::to_writer(&mut cache, &line)?;
                cache.push(b'\n');
            }
            session.write("corpus.jsonl", &cache)?;
            println!(
                "reports={} unresolved_dropped={} sources={} metric_rows={} embeddings={}x{}",
                dataset.reports.len(),
                dataset.unresolved_dropped,
                dataset.sources.as_ref().map_or(0, Vec::len),
                dataset.metrics.as_ref().map_or(0, Vec::len),
                dataset.embeddings.len(),
                dataset.embeddings.dim()
            );
            "ingest"
        }
        Command::Build => {
            let dataset = session.load_dataset()?;
            let localizer = Localizer::build(&dataset, &session.config.pipeline_config()?)?;
            let mut edges = Vec::new();
            localizer.network().write_edge_list(&mut edges)?;
            session.write("network.csv", &edges)?;
            let report = validate_network(localizer.network());
            for (kind, n) in &report.node_counts {
                println!("nodes {kind}: {n}");
            }
            for ((a, b), n) in &report.edge_counts {
                println!("edges {a}-{b}: {n}");
            }
            for issue in &report.issues {
                println!("diagnostic: {issue}");
            }
            if !report.is_valid() {
                session.finish("build")?;
                return Err(Error::Validation(
                    "network violates structural rules".into(),
                ));
            }
            "build"
        }
        Command::Solve => {
            let dataset = session.load_dataset()?;
            let localizer = session.localizer(&dataset)?;
            let mut dump = Vec::new();
            localizer.model().dump(&mut dump)?;
            let path = session.write("model.csv", &dump)?;
            println!("model written to {}", path.display());
            "solve"
        }
        Command::Query { report } => {
            let queries = load_query_reports(report)?;
            session.inputs.push(report.clone());
            let dataset = session.load_dataset()?;
            let localizer = session.localizer(&dataset)?;
            let (alpha, k) = (session.config.query.alpha, session.config.query.k);
            let method: Method = session.config.query.method.parse()?;
            for q in &queries {
                let result = localizer.rank(q, method, alpha, k)?;
                let mut csv = Vec::new();
                result.write_csv(&mut csv)?;
                session.write(&format!("query-{}.csv", file_stem_for(&q.id)), &csv)?;
                if queries.len() == 1 {
                    std::io::stdout()
                        .write_all(&csv)
                        .map_err(|e| Error::io("<stdout>", e))?;
                }
            }
            if queries.len() > 1 {
                println!(
                    "ranked {} reports into {}",
                    queries.len(),
                    session.config.out_dir.display()
                );
            }
            "query"
        }
        Command::Eval => {
            let dataset = session.load_dataset()?;
            let localizer = session.localizer(&dataset)?;
            let evaluation = Evaluation::run(&localizer, &session.config.eval_config()?)?;
            let mut results = Vec::new();
            eval::write_rows(&evaluation.best_rows()?, &mut results)?;
            session.write("results.csv", &results)?;
            let mut sig = Vec::new();
            eval::write_significance(
                &evaluation.significance(session.config.eval.confidence)?,
                &mut sig,
            )?;
            session.write("significance.csv", &sig)?;
            std::io::stdout()
                .write_all(&results)
                .map_err(|e| Error::io("<stdout>", e))?;
            if !evaluation.excluded.is_empty() {
                eprintln!(
                    "{} queries excluded (no indexed ground truth)",
                    evaluation.excluded.len()
                );
            }
            "eval"
        }
        Command::Sweep => {
            let dataset = session.load_dataset()?;
            let localizer = session.localizer(&dataset)?;
            let evaluation = Evaluation::run(&localizer, &session.config.eval_config()?)?;
            let mut rows = Vec::new();
            eval::write_rows(&evaluation.sweep_rows()?, &mut rows)?;
            let path = session.write("sweep.csv", &rows)?;
            println!("sweep written to {}", path.display());
            "sweep"
        }
        Command::Synth => {
            let spec = SynthSpec::from(&session.config.synth);
            let dir = session
                .config
                .dataset_dir
                .clone()
                .unwrap_or_else(|| session.config.out_dir.clone());
            synthgen::generate(&spec)?.write_to(&dir)?;
            for name in [
                "reports.jsonl",
                "sources.jsonl",
                "metrics.csv",
                "embeddings.txt",
            ] {
                session.outputs.push(dir.join(name));
            }
            println!("synthetic corpus written to {}", dir.display());
            "synth"
        }
    };
    session.finish(name)
}
