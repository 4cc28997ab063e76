//! MAP@k evaluation, method comparison, α-sweeps and paired t-tests.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::pipeline::{rank_with, Localizer, Method};

/// `|top-k ∩ relevant| / k`.
pub fn precision_at_k<S: AsRef<str>>(ranking: &[S], relevant: &BTreeSet<String>, k: usize) -> f64 {
    assert!(k >= 1, "k must be positive");
    let hits = ranking
        .iter()
        .take(k)
        .filter(|p| relevant.contains(p.as_ref()))
        .count();
    hits as f64 / k as f64
}

/// Sum of `P(i)` over relevant positions `i ≤ k`, divided by `|relevant|`.
///
/// `None` when there are no relevant files.
pub fn average_precision_at_k<S: AsRef<str>>(
    ranking: &[S],
    relevant: &BTreeSet<String>,
    k: usize,
) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, p) in ranking.iter().take(k).enumerate() {
        if relevant.contains(p.as_ref()) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / relevant.len() as f64)
}

pub fn mean_average_precision(per_query_ap: &[f64]) -> Result<f64> {
    if per_query_ap.is_empty() {
        return Err(Error::Validation("MAP over zero queries".into()));
    }
    Ok(per_query_ap.iter().sum::<f64>() / per_query_ap.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub alpha_grid: Vec<f64>,
    pub methods: Vec<Method>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: vec![1, 5, 10],
            alpha_grid: alpha_grid(0.05),
            methods: Method::ALL.to_vec(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ks.contains(&0) || !self.ks.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(format!(
                "ks must be positive and strictly ascending, got {:?}",
                self.ks
            )));
        }
        if self.alpha_grid.is_empty() || self.alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Config("alpha grid values must lie in [0, 1]".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        Ok(())
    }
}

/// `0, step, 2·step, …, 1`, each point computed as `i / n` to avoid drift.
pub fn alpha_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round().max(1.0) as usize;
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub method: Method,
    pub dataset: String,
    pub alpha: f64,
    pub k: usize,
    pub map: f64,
    pub num_queries: usize,
}

/// CSV `method,dataset,alpha,k,map,num_queries`.
pub fn write_rows<W: Write>(rows: &[EvalRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "dataset", "alpha", "k", "map", "num_queries"])?;
    for r in rows {
        w.write_record([
            r.method.as_str().to_string(),
            r.dataset.clone(),
            r.alpha.to_string(),
            r.k.to_string(),
            r.map.to_string(),
            r.num_queries.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<results>", e))?;
    Ok(())
}

/// Per-query AP for every method, α and k over one query split.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub dataset: String,
    pub config: EvalConfig,
    /// Ids of evaluated queries, in order.
    pub query_ids: Vec<String>,
    /// Queries with no ground-truth file in the indexed universe.
    pub excluded: Vec<String>,
    /// `ap[method][alpha index][k index][query index]`.
    ap: BTreeMap<Method, Vec<Vec<Vec<f64>>>>,
}

impl Evaluation {
    pub fn run(localizer: &Localizer<'_>, config: &EvalConfig) -> Result<Self> {
        config.validate()?;
        if config.methods.contains(&Method::Embedding) && !localizer.has_source_docs() {
            return Err(Error::Validation(
                "Embedding method requires source documents".into(),
            ));
        }
        let max_k = *config.ks.last().expect("validated non-empty");
        let mut ap: BTreeMap<Method, Vec<Vec<Vec<f64>>>> = config
            .methods
            .iter()
            .map(|&m| {
                (
                    m,
                    vec![vec![Vec::new(); config.ks.len()]; config.alpha_grid.len()],
                )
            })
            .collect();
        let mut query_ids = Vec::new();
        let mut excluded = Vec::new();

        for query in localizer.queries() {
            let relevant: BTreeSet<String> = query
                .fixed_files
                .iter()
                .filter(|f| localizer.universe().contains(*f))
                .cloned()
                .collect();
            if relevant.is_empty() {
                log::warn!(
                    "query {:?} has no fixed file in the indexed set; excluded",
                    query.id
                );
                excluded.push(query.id.clone());
                continue;
            }
            query_ids.push(query.id.clone());
            let scores = localizer.score(query);
            for (&method, per_alpha) in ap.iter_mut() {
                for (ai, &alpha) in config.alpha_grid.iter().enumerate() {
                    let ranked = rank_with(&query.id, &scores, method, alpha, max_k)?;
                    let paths = ranked.paths();
                    for (ki, &k) in config.ks.iter().enumerate() {
                        let value = average_precision_at_k(&paths, &relevant, k)
                            .expect("relevant is non-empty");
                        per_alpha[ai][ki].push(value);
                    }
                }
            }
        }
        if !excluded.is_empty() {
            log::warn!(
                "{} of {} queries excluded",
                excluded.len(),
                excluded.len() + query_ids.len()
            );
        }
        Ok(Self {
            dataset: localizer.dataset().name.clone(),
            config: config.clone(),
            query_ids,
            excluded,
            ap,
        })
    }

    pub fn num_queries(&self) -> usize {
        self.query_ids.len()
    }

    fn check_selection(
        &self,
        method: Method,
        alpha_index: usize,
        k_index: usize,
    ) -> Result<&[f64]> {
        let cube = self
            .ap
            .get(&method)
            .ok_or_else(|| Error::Validation(format!("{method} was not evaluated")))?;
        cube.get(alpha_index)
            .and_then(|by_k| by_k.get(k_index))
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Validation("alpha or k index out of range".into()))
    }

    /// Per-query AP for one cell of the grid.
    pub fn per_query_ap(
        &self,
        method: Method,
        alpha_index: usize,
        k_index: usize,
    ) -> Result<&[f64]> {
        self.check_selection(method, alpha_index, k_index)
    }

    pub fn map_at(&self, method: Method, alpha_index: usize, k_index: usize) -> Result<f64> {
        mean_average_precision(self.check_selection(method, alpha_index, k_index)?)
    }

    /// Index of the best grid α for `method` at `k`; the smallest α wins ties
    /// and BoWCosine is pinned to α = 0.
    pub fn best_alpha_index(&self, method: Method, k_index: usize) -> Result<usize> {
        if method == Method::BowCosine {
            return self
                .config
                .alpha_grid
                .iter()
                .position(|&a| a == 0.0)
                .map_or(Ok(0), Ok);
        }
        let mut best = (0, f64::NEG_INFINITY);
        for ai in 0..self.config.alpha_grid.len() {
            let m = self.map_at(method, ai, k_index)?;
            if m > best.1 {
                best = (ai, m);
            }
        }
        Ok(best.0)
    }

    /// Summary rows: per method and k, MAP at the method's best α.
    pub fn best_rows(&self) -> Result<Vec<EvalRow>> {
        let mut rows = Vec::new();
        for &method in &self.config.methods {
            for (ki, &k) in self.config.ks.iter().enumerate() {
                let ai = self.best_alpha_index(method, ki)?;
                rows.push(EvalRow {
                    method,
                    dataset: self.dataset.clone(),
                    alpha: if method == Method::BowCosine {
                        0.0
                    } else {
                        self.config.alpha_grid[ai]
                    },
                    k,
                    map: self.map_at(method, ai, ki)?,
                    num_queries: self.num_queries(),
                });
            }
        }
        Ok(rows)
    }

    /// One row per method, grid α and k.
    pub fn sweep_rows(&self) -> Result<Vec<EvalRow>> {
        let mut rows = Vec::new();
        for &method in &self.config.methods {
            for (ai, &alpha) in self.config.alpha_grid.iter().enumerate() {
                for (ki, &k) in self.config.ks.iter().enumerate() {
                    rows.push(EvalRow {
                        method,
                        dataset: self.dataset.clone(),
                        alpha,
                        k,
                        map: self.map_at(method, ai, ki)?,
                        num_queries: self.num_queries(),
                    });
                }
            }
        }
        Ok(rows)
    }

    /// Paired t-tests of each non-baseline method (at its best α) against BoWCosine, per k.
    pub fn significance(&self, confidence: f64) -> Result<Vec<SignificanceRow>> {
        let mut rows = Vec::new();
        if !self.config.methods.contains(&Method::BowCosine) || self.num_queries() < 2 {
            return Ok(rows);
        }
        for &method in self
            .config
            .methods
            .iter()
            .filter(|&&m| m != Method::BowCosine)
        {
            for (ki, &k) in self.config.ks.iter().enumerate() {
                let ai = self.best_alpha_index(method, ki)?;
                let base = self.best_alpha_index(Method::BowCosine, ki)?;
                let test = paired_t_test(
                    self.per_query_ap(method, ai, ki)?,
                    self.per_query_ap(Method::BowCosine, base, ki)?,
                    confidence,
                )?;
                rows.push(SignificanceRow {
                    method,
                    k,
                    alpha: self.config.alpha_grid[ai],
                    test,
                });
            }
        }
        Ok(rows)
    }
}

/// Thin wrapper: best-α rows for every configured method.
pub fn evaluate_methods(localizer: &Localizer<'_>, config: &EvalConfig) -> Result<Vec<EvalRow>> {
    Evaluation::run(localizer, config)?.best_rows()
}

/// Thin wrapper: MAP for every method at every grid α.
pub fn sweep_alpha(localizer: &Localizer<'_>, config: &EvalConfig) -> Result<Vec<EvalRow>> {
    Evaluation::run(localizer, config)?.sweep_rows()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTest {
    /// `None` when the differences have zero variance.
    pub t_statistic: Option<f64>,
    pub degrees_of_freedom: usize,
    pub p_value: Option<f64>,
    pub significant: bool,
    pub degenerate: bool,
}

/// Two-sided paired Student's t-test on `a − b`.
pub fn paired_t_test(a: &[f64], b: &[f64], confidence: f64) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "paired samples of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Validation(
            "paired t-test needs at least two pairs".into(),
        ));
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::Validation(format!(
            "confidence {confidence} outside (0, 1)"
        )));
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    let df = a.len() - 1;
    if var <= f64::EPSILON * f64::EPSILON * mean.abs().max(1.0) {
        return Ok(TTest {
            t_statistic: None,
            degrees_of_freedom: df,
            p_value: None,
            significant: false,
            degenerate: true,
        });
    }
    let t = mean / (var.sqrt() / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Validation(e.to_string()))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TTest {
        t_statistic: Some(t),
        degrees_of_freedom: df,
        p_value: Some(p),
        significant: p < 1.0 - confidence,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceRow {
    pub method: Method,
    pub k: usize,
    pub alpha: f64,
    pub test: TTest,
}

/// CSV `method,baseline,k,alpha,t,df,p_value,significant,degenerate`.
pub fn write_significance<W: Write>(rows: &[SignificanceRow], out: W) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "baseline",
        "k",
        "alpha",
        "t",
        "df",
        "p_value",
        "significant",
        "degenerate",
    ])?;
    for r in rows {
        w.write_record([
            r.method.as_str().to_string(),
            Method::BowCosine.as_str().to_string(),
            r.k.to_string(),
            r.alpha.to_string(),
            opt(r.test.t_statistic),
            r.test.degrees_of_freedom.to_string(),
            opt(r.test.p_value),
            r.test.significant.to_string(),
            r.test.degenerate.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<significance>", e))?;
    Ok(())
}
