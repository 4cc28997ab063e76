//! Dataset loading and the trained localizer that ties the modules together.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::corpus::{self, BowVector, BugReport, SourceDoc, TokenConfig, Vocabulary};
use crate::embeddings::{self, EmbeddingTable};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricRecord};
use crate::network::{self, HeteroNetwork, NetworkInputs};
use crate::ranker::{self, FileScores, IndexedReport, QueryResult};
use crate::regularizer::{self, ConvergenceReport, RepresentationModel, SolverConfig};

/// Retrieval method evaluated by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// TF-IDF cosine with similar-report transfer only.
    BowCosine,
    /// BoW combined with query/file embedding cosine.
    Embedding,
    /// BoW combined with the regularized bug-code space.
    Bulner,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::BowCosine, Method::Embedding, Method::Bulner];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::BowCosine => "BoWCosine",
            Method::Embedding => "Embedding",
            Method::Bulner => "BULNER",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bowcosine" | "bow" => Ok(Method::BowCosine),
            "embedding" | "wemb" => Ok(Method::Embedding),
            "bulner" => Ok(Method::Bulner),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// Input file locations. `sources` and `metrics` are optional.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPaths {
    pub reports: PathBuf,
    pub sources: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub embeddings: PathBuf,
}

impl DatasetPaths {
    /// Conventional layout: `reports.jsonl`, `embeddings.txt`, and when present
    /// `sources.jsonl` and `metrics.csv`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        let optional = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
        Self {
            reports: dir.join("reports.jsonl"),
            sources: optional("sources.jsonl"),
            metrics: optional("metrics.csv"),
            embeddings: dir.join("embeddings.txt"),
        }
    }

    pub fn all(&self) -> Vec<&Path> {
        let mut out = vec![self.reports.as_path(), self.embeddings.as_path()];
        out.extend(self.sources.as_deref());
        out.extend(self.metrics.as_deref());
        out
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub reports: Vec<BugReport>,
    pub sources: Option<Vec<SourceDoc>>,
    pub metrics: Option<Vec<MetricRecord>>,
    pub embeddings: EmbeddingTable,
    /// Reports dropped at ingestion for not being resolved.
    pub unresolved_dropped: usize,
}

impl Dataset {
    pub fn load(
        name: &str,
        paths: &DatasetPaths,
        tokens: &TokenConfig,
        filter_resolved: bool,
    ) -> Result<Self> {
        let mut reports = corpus::load_bug_reports(&paths.reports)?;
        let unresolved_dropped = if filter_resolved {
            corpus::retain_resolved(&mut reports)
        } else {
            0
        };
        let sources = paths
            .sources
            .as_ref()
            .map(|p| corpus::load_source_docs(p, tokens))
            .transpose()?;
        let metrics = paths
            .metrics
            .as_ref()
            .map(metrics::load_metrics)
            .transpose()?;
        let embeddings = embeddings::load_embeddings(&paths.embeddings)?;
        Ok(Self {
            name: name.to_string(),
            reports,
            sources,
            metrics,
            embeddings,
            unresolved_dropped,
        })
    }

    /// Every source path known to the dataset: source documents and metric
    /// rows when either is given, otherwise all fix links.
    pub fn file_universe(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = BTreeSet::new();
        if let Some(s) = &self.sources {
            out.extend(s.iter().map(|d| d.path.clone()));
        }
        if let Some(m) = &self.metrics {
            out.extend(m.iter().map(|r| r.path.clone()));
        }
        if self.sources.is_none() && self.metrics.is_none() {
            out.extend(
                self.reports
                    .iter()
                    .flat_map(|r| r.fixed_files.iter().cloned()),
            );
        }
        out
    }

    /// Chronological split: the first `train_fraction` of reports train, the rest are queries.
    pub fn split(&self, train_fraction: f64) -> (&[BugReport], &[BugReport]) {
        let n = self.reports.len();
        let cut = ((n as f64) * train_fraction.clamp(0.0, 1.0)).floor() as usize;
        self.reports.split_at(cut.min(n))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub tokens: TokenConfig,
    pub buckets: usize,
    pub solver: SolverConfig,
    pub train_fraction: f64,
    /// Drop training fix links to files outside the universe instead of failing.
    pub drop_unknown_links: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tokens: TokenConfig::default(),
            buckets: 5,
            solver: SolverConfig::default(),
            train_fraction: 0.8,
            drop_unknown_links: false,
        }
    }
}

struct TrainEntry {
    bow: BowVector,
    fixed_files: Vec<String>,
}

/// Raw component scores for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryScores {
    pub bow: FileScores,
    pub embedding: Option<FileScores>,
    pub bulner: FileScores,
    pub oov_terms: usize,
}

impl QueryScores {
    /// The second component for `method`; BoW-only uses the BoW map itself at α fixed to 0.
    pub fn component(&self, method: Method) -> Option<&FileScores> {
        match method {
            Method::BowCosine => Some(&self.bow),
            Method::Embedding => self.embedding.as_ref(),
            Method::Bulner => Some(&self.bulner),
        }
    }
}

/// Vocabulary, training index, network and learned model for one dataset.
pub struct Localizer<'a> {
    dataset: &'a Dataset,
    tokens: TokenConfig,
    vocab: Vocabulary,
    train: Vec<TrainEntry>,
    train_count: usize,
    universe: BTreeSet<String>,
    network: HeteroNetwork,
    model: RepresentationModel,
    convergence: Option<ConvergenceReport>,
    file_embeddings: Option<BTreeMap<String, Vec<f64>>>,
}

impl<'a> Localizer<'a> {
    /// Builds the network over the training split and solves it.
    pub fn fit(dataset: &'a Dataset, config: &PipelineConfig) -> Result<Self> {
        let mut this = Self::build(dataset, config)?;
        let solution = regularizer::solve(&this.network, &dataset.embeddings, &config.solver);
        this.model = solution.model;
        this.convergence = Some(solution.report);
        Ok(this)
    }

    /// Builds the network and adopts a previously solved model instead of solving.
    pub fn with_model(
        dataset: &'a Dataset,
        config: &PipelineConfig,
        model: RepresentationModel,
    ) -> Result<Self> {
        let mut this = Self::build(dataset, config)?;
        if model.nodes() != this.network.nodes() {
            return Err(Error::Validation(
                "loaded model does not match the network built from this dataset and config".into(),
            ));
        }
        this.model = model;
        Ok(this)
    }

    /// Everything except the solve; the model is the zero-initialized one.
    pub fn build(dataset: &'a Dataset, config: &PipelineConfig) -> Result<Self> {
        let (train_reports, _) = dataset.split(config.train_fraction);
        let universe = dataset.file_universe();

        let mut train_reports: Vec<BugReport> = train_reports.to_vec();
        if config.drop_unknown_links {
            for r in &mut train_reports {
                let before = r.fixed_files.len();
                r.fixed_files.retain(|f| universe.contains(f));
                if r.fixed_files.len() < before {
                    log::warn!(
                        "report {:?}: dropped {} fix link(s) outside the file universe",
                        r.id,
                        before - r.fixed_files.len()
                    );
                }
            }
        }

        let token_lists: Vec<Vec<String>> = train_reports
            .iter()
            .map(|r| corpus::tokenize(&r.text(), &config.tokens))
            .collect();
        let vocab = corpus::build_vocabulary(&token_lists);
        let bows: Vec<BowVector> = token_lists
            .iter()
            .map(|t| corpus::bow_vectorize(t, &vocab))
            .collect();
        let bow_by_id: HashMap<String, BowVector> = train_reports
            .iter()
            .zip(&bows)
            .map(|(r, b)| (r.id.clone(), b.clone()))
            .collect();

        let buckets = dataset
            .metrics
            .as_ref()
            .map(|m| metrics::discretize(m, config.buckets))
            .unwrap_or_default();
        let network = network::build_network(&NetworkInputs {
            reports: &train_reports,
            bow_vectors: &bow_by_id,
            vocab: &vocab,
            source_paths: &universe,
            buckets: &buckets,
        })?;
        let model = regularizer::initialize_representation(&network, &dataset.embeddings);

        let file_embeddings = dataset.sources.as_ref().map(|docs| {
            docs.iter()
                .filter(|d| universe.contains(&d.path))
                .map(|d| {
                    (
                        d.path.clone(),
                        mean_embedding(&d.tokens, &dataset.embeddings),
                    )
                })
                .collect()
        });

        let train = train_reports
            .iter()
            .zip(bows)
            .map(|(r, bow)| TrainEntry {
                bow,
                fixed_files: r.fixed_files.clone(),
            })
            .collect();

        Ok(Self {
            dataset,
            tokens: config.tokens.clone(),
            vocab,
            train,
            train_count: train_reports.len(),
            universe,
            network,
            model,
            convergence: None,
            file_embeddings,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn network(&self) -> &HeteroNetwork {
        &self.network
    }

    pub fn model(&self) -> &RepresentationModel {
        &self.model
    }

    pub fn convergence(&self) -> Option<&ConvergenceReport> {
        self.convergence.as_ref()
    }

    pub fn universe(&self) -> &BTreeSet<String> {
        &self.universe
    }

    pub fn has_source_docs(&self) -> bool {
        self.file_embeddings.is_some()
    }

    /// Reports after the training split.
    pub fn queries(&self) -> &'a [BugReport] {
        &self.dataset.reports[self.train_count..]
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        corpus::tokenize(text, &self.tokens)
    }

    pub fn score(&self, report: &BugReport) -> QueryScores {
        let tokens = self.tokenize(&report.text());
        let bow = corpus::bow_vectorize(&tokens, &self.vocab);
        let bow_scores = ranker::bow_file_scores(
            &bow,
            self.train.iter().map(|t| IndexedReport {
                bow: &t.bow,
                fixed_files: &t.fixed_files,
            }),
            &self.universe,
        );
        let (bulner, oov_terms) =
            ranker::bulner_file_scores(&tokens, &self.model, &self.dataset.embeddings, &self.vocab);
        let embedding = self.file_embeddings.as_ref().map(|files| {
            let weights = self.vocab.term_weights(&tokens);
            let (query, _) = embeddings::embed_tokens(&tokens, &weights, &self.dataset.embeddings);
            let zero = vec![0.0; self.dataset.embeddings.dim()];
            self.universe
                .iter()
                .map(|p| {
                    let v = files.get(p).unwrap_or(&zero);
                    (p.clone(), ranker::cosine(&query, v).unwrap_or(0.0))
                })
                .collect()
        });
        QueryScores {
            bow: bow_scores,
            embedding,
            bulner,
            oov_terms,
        }
    }

    /// Ranks files for `report`. BoWCosine ignores `alpha`.
    pub fn rank(
        &self,
        report: &BugReport,
        method: Method,
        alpha: f64,
        k: usize,
    ) -> Result<QueryResult> {
        let scores = self.score(report);
        rank_with(&report.id, &scores, method, alpha, k)
    }
}

/// Combines precomputed component scores for one method.
pub fn rank_with(
    query_id: &str,
    scores: &QueryScores,
    method: Method,
    alpha: f64,
    k: usize,
) -> Result<QueryResult> {
    let (other, alpha) = match method {
        Method::BowCosine => (&scores.bow, 0.0),
        _ => (
            scores.component(method).ok_or_else(|| {
                Error::Validation("Embedding method requires source documents".into())
            })?,
            alpha,
        ),
    };
    ranker::combine_and_rank(query_id, &scores.bow, other, alpha, k)
}

/// Mean of token embeddings over occurrences.
fn mean_embedding(tokens: &[String], table: &EmbeddingTable) -> Vec<f64> {
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.clone()).or_default() += 1.0;
    }
    embeddings::embed_tokens(tokens, &counts, table).0
}
