//! Learning the bug-code vector space by clamped graph regularization.
//!
//! Term nodes found in the embedding table are clamped to their embedding;
//! every other node is free. The objective is the weighted sum of squared
//! differences across edges, whose minimizer under the clamps is the harmonic
//! solution: each free node equals the weighted mean of its neighbors.
//!
//! [`solve`] reaches it by in-place Gauss–Seidel sweeps that push
//! information out along the chain (reports, terms without embeddings,
//! files, metric buckets) and back again. [`closed_form_solve`] computes the
//! same minimizer with a dense linear solve and exists to check the sweeps.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::network::{HeteroNetwork, NodeKind, TypedNode};

/// Upper bound on free nodes accepted by [`closed_form_solve`].
pub const DENSE_SOLVE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Initialization {
    Zeros,
    /// Free components drawn uniformly from `[-1, 1]`.
    Random {
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub tolerance: f64,
    pub init: Initialization,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tolerance: 1e-6,
            init: Initialization::Zeros,
        }
    }
}

/// Learned vectors for every network node.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationModel {
    dim: usize,
    nodes: Vec<TypedNode>,
    index: HashMap<TypedNode, usize>,
    vectors: Vec<f64>,
    clamped: Vec<bool>,
}

impl RepresentationModel {
    fn from_parts(
        dim: usize,
        nodes: Vec<TypedNode>,
        vectors: Vec<f64>,
        clamped: Vec<bool>,
    ) -> Self {
        debug_assert_eq!(vectors.len(), dim * nodes.len());
        let index = nodes
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, n)| (n, i))
            .collect();
        Self {
            dim,
            nodes,
            index,
            vectors,
            clamped,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[TypedNode] {
        &self.nodes
    }

    pub fn vector(&self, node: &TypedNode) -> Option<&[f64]> {
        self.index.get(node).map(|&i| self.vector_at(i))
    }

    pub fn vector_at(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    fn vector_at_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_clamped(&self, node: &TypedNode) -> bool {
        self.index.get(node).is_some_and(|&i| self.clamped[i])
    }

    pub fn is_clamped_at(&self, i: usize) -> bool {
        self.clamped[i]
    }

    pub fn clamped_count(&self) -> usize {
        self.clamped.iter().filter(|&&c| c).count()
    }

    /// Nodes of one kind with their vectors, in model order.
    pub fn of_kind(&self, kind: NodeKind) -> impl Iterator<Item = (&TypedNode, &[f64])> {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.kind == kind)
            .map(|(i, n)| (n, self.vector_at(i)))
    }

    /// SHA-256 over the sorted keys of the clamped terms.
    pub fn clamped_hash(&self) -> String {
        let keys: BTreeSet<&str> = self
            .nodes
            .iter()
            .zip(&self.clamped)
            .filter(|(_, &c)| c)
            .map(|(n, _)| n.key.as_str())
            .collect();
        clamped_hash(keys)
    }

    /// Writes `kind,key,f1..fd` rows after a `#` header carrying dim and the clamped-set hash.
    pub fn dump<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# bugloc-model dim={} nodes={} clamped={}",
            self.dim,
            self.nodes.len(),
            self.clamped_hash()
        )
        .map_err(|e| Error::io("<model dump>", e))?;
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        for (i, node) in self.nodes.iter().enumerate() {
            let mut row = vec![node.kind.as_str().to_string(), node.key.clone()];
            row.extend(self.vector_at(i).iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<model dump>", e))?;
        Ok(())
    }

    /// Reads a dump, re-deriving the clamped set from `table` and checking it
    /// against the stored hash.
    pub fn load<R: BufRead>(mut input: R, table: &EmbeddingTable) -> Result<Self> {
        let origin = std::path::Path::new("<model>");
        let mut header = String::new();
        input
            .read_line(&mut header)
            .map_err(|e| Error::io(origin, e))?;
        let field = |name: &str| -> Result<&str> {
            header
                .split_whitespace()
                .find_map(|f| f.strip_prefix(name).and_then(|v| v.strip_prefix('=')))
                .ok_or_else(|| Error::parse(origin, 1, format!("model header lacks {name}")))
        };
        if !header.starts_with("# bugloc-model") {
            return Err(Error::parse(origin, 1, "not a model dump"));
        }
        let dim: usize = field("dim")?
            .parse()
            .map_err(|_| Error::parse(origin, 1, "bad dim"))?;
        let count: usize = field("nodes")?
            .parse()
            .map_err(|_| Error::parse(origin, 1, "bad node count"))?;
        let expected_hash = field("clamped")?.to_string();
        if dim != table.dim() {
            return Err(Error::Validation(format!(
                "model dim {dim} does not match embedding dim {}",
                table.dim()
            )));
        }

        let mut nodes = Vec::with_capacity(count);
        let mut vectors = Vec::with_capacity(count * dim);
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(input);
        for (row, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = row + 2;
            if rec.len() != dim + 2 {
                return Err(Error::parse(
                    origin,
                    line,
                    format!("expected {} fields", dim + 2),
                ));
            }
            let kind = NodeKind::parse(&rec[0]).ok_or_else(|| {
                Error::parse(origin, line, format!("unknown node kind {:?}", &rec[0]))
            })?;
            nodes.push(TypedNode::new(kind, &rec[1]));
            for f in rec.iter().skip(2) {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::parse(origin, line, format!("bad component {f:?}")))?;
                vectors.push(v);
            }
        }
        if nodes.len() != count {
            return Err(Error::Validation(format!(
                "model header declares {count} nodes, body has {}",
                nodes.len()
            )));
        }
        let clamped: Vec<bool> = nodes
            .iter()
            .map(|n| n.kind == NodeKind::T && table.contains(&n.key))
            .collect();
        let model = Self::from_parts(dim, nodes, vectors, clamped);
        if model.clamped_hash() != expected_hash {
            return Err(Error::Validation(
                "model was solved against a different embedding table (clamped-set hash mismatch)"
                    .into(),
            ));
        }
        Ok(model)
    }
}

fn clamped_hash<'a>(keys: impl IntoIterator<Item = &'a str>) -> String {
    let mut h = Sha256::new();
    for k in keys {
        h.update(k.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Clamps embedded terms to their embedding and zeroes every other node.
pub fn initialize_representation(
    net: &HeteroNetwork,
    table: &EmbeddingTable,
) -> RepresentationModel {
    let dim = table.dim();
    let mut vectors = vec![0.0; dim * net.node_count()];
    let mut clamped = vec![false; net.node_count()];
    for (i, node) in net.nodes().iter().enumerate() {
        if node.kind != NodeKind::T {
            continue;
        }
        if let Some(y) = table.get(&node.key) {
            vectors[i * dim..(i + 1) * dim].copy_from_slice(y);
            clamped[i] = true;
        }
    }
    RepresentationModel::from_parts(dim, net.nodes().to_vec(), vectors, clamped)
}

/// Like [`initialize_representation`] but with free vectors drawn from `[-1, 1]`.
pub fn initialize_random(
    net: &HeteroNetwork,
    table: &EmbeddingTable,
    seed: u64,
) -> RepresentationModel {
    let mut model = initialize_representation(net, table);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..model.len() {
        if !model.clamped[i] {
            for v in model.vector_at_mut(i) {
                *v = rng.random_range(-1.0..=1.0);
            }
        }
    }
    model
}

/// Fixed update order and adjacency for repeated sweeps over one network.
struct Schedule {
    adjacency: Vec<Vec<(usize, f64)>>,
    order: Vec<usize>,
}

impl Schedule {
    fn new(net: &HeteroNetwork, model: &RepresentationModel) -> Self {
        assert_eq!(
            model.nodes,
            net.nodes(),
            "model does not belong to this network"
        );
        let free_of = |kind: NodeKind| -> Vec<usize> {
            let mut ids: Vec<usize> = (0..net.node_count())
                .filter(|&i| net.node(i).kind == kind && !model.clamped[i])
                .collect();
            ids.sort_by(|&a, &b| net.node(a).key.cmp(&net.node(b).key));
            ids
        };
        let (b, t, s, m) = (
            free_of(NodeKind::B),
            free_of(NodeKind::T),
            free_of(NodeKind::S),
            free_of(NodeKind::M),
        );
        let order = [&b, &t, &s, &m, &s, &b]
            .into_iter()
            .flat_map(|ids| ids.iter().copied())
            .collect();
        Self {
            adjacency: net.adjacency(),
            order,
        }
    }

    fn sweep(&self, model: &mut RepresentationModel) -> f64 {
        let dim = model.dim;
        let mut next = vec![0.0; dim];
        let mut max_disp = 0.0_f64;
        for &i in &self.order {
            let neighbors = &self.adjacency[i];
            if neighbors.is_empty() {
                continue;
            }
            next.iter_mut().for_each(|v| *v = 0.0);
            let mut total = 0.0;
            for &(j, w) in neighbors {
                total += w;
                for (acc, v) in next.iter_mut().zip(model.vector_at(j)) {
                    *acc += w * v;
                }
            }
            let current = model.vector_at_mut(i);
            let mut disp = 0.0;
            for (c, n) in current.iter_mut().zip(&next) {
                let updated = n / total;
                disp += (updated - *c) * (updated - *c);
                *c = updated;
            }
            max_disp = max_disp.max(disp.sqrt());
        }
        max_disp
    }
}

/// One forward-and-back sweep; returns the largest L2 change of any single node update.
pub fn sweep_update(model: &mut RepresentationModel, net: &HeteroNetwork) -> f64 {
    Schedule::new(net, model).sweep(model)
}

/// Sum over undirected edges of `w · ‖F(a) − F(b)‖²`.
pub fn energy(model: &RepresentationModel, net: &HeteroNetwork) -> f64 {
    net.edges()
        .iter()
        .map(|e| {
            let d2: f64 = model
                .vector_at(e.a)
                .iter()
                .zip(model.vector_at(e.b))
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            e.weight * d2
        })
        .sum()
}

/// Free nodes sharing a connected component with no clamped term.
pub fn unreachable_free_nodes(net: &HeteroNetwork, model: &RepresentationModel) -> Vec<usize> {
    let mut out: Vec<usize> = net
        .components_without(|i| model.clamped[i])
        .into_iter()
        .flatten()
        .collect();
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub converged: bool,
    pub final_displacement: f64,
    pub final_energy: f64,
    /// Energy before the first sweep followed by the energy after each sweep.
    pub energy_trace: Vec<f64>,
    /// Free nodes that no clamped term can reach; they keep their initial vector.
    pub isolated: Vec<TypedNode>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub model: RepresentationModel,
    pub report: ConvergenceReport,
}

/// Sweeps until the largest node displacement drops below the tolerance or
/// `max_iters` sweeps have run. Non-convergence is reported, not an error.
pub fn solve(net: &HeteroNetwork, table: &EmbeddingTable, config: &SolverConfig) -> Solution {
    let mut model = match config.init {
        Initialization::Zeros => initialize_representation(net, table),
        Initialization::Random { seed } => initialize_random(net, table, seed),
    };
    let isolated: Vec<TypedNode> = unreachable_free_nodes(net, &model)
        .into_iter()
        .map(|i| net.node(i).clone())
        .collect();
    if !isolated.is_empty() {
        log::warn!(
            "{} free node(s) cannot reach any embedded term and keep their initial vectors (first: {})",
            isolated.len(),
            isolated[0]
        );
    }

    let schedule = Schedule::new(net, &model);
    let mut trace = vec![energy(&model, net)];
    let mut displacement = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iters {
        displacement = schedule.sweep(&mut model);
        iterations += 1;
        trace.push(energy(&model, net));
        if displacement < config.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "solver stopped after {iterations} sweeps with displacement {displacement:e} (tolerance {:e})",
            config.tolerance
        );
    }
    let report = ConvergenceReport {
        iterations,
        converged,
        final_displacement: if iterations == 0 { 0.0 } else { displacement },
        final_energy: *trace.last().unwrap_or(&0.0),
        energy_trace: trace,
        isolated,
    };
    Solution { model, report }
}

#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub model: RepresentationModel,
    pub isolated: Vec<TypedNode>,
}

/// Harmonic solution by a dense linear solve, one right-hand side per dimension.
///
/// For each reachable free node `i`: `deg(i)·F(i) − Σ_free w·F(j) = Σ_clamped w·Y(j)`.
pub fn closed_form_solve(net: &HeteroNetwork, table: &EmbeddingTable) -> Result<ExactSolution> {
    let mut model = initialize_representation(net, table);
    let unreachable = unreachable_free_nodes(net, &model);
    let skip: BTreeSet<usize> = unreachable.iter().copied().collect();
    let free: Vec<usize> = (0..model.len())
        .filter(|&i| !model.clamped[i] && !skip.contains(&i))
        .collect();
    if free.len() > DENSE_SOLVE_LIMIT {
        return Err(Error::TooLarge {
            free: free.len(),
            limit: DENSE_SOLVE_LIMIT,
        });
    }
    let isolated: Vec<TypedNode> = unreachable.iter().map(|&i| net.node(i).clone()).collect();
    if !isolated.is_empty() {
        log::warn!(
            "{} free node(s) cannot reach any embedded term; set to zero",
            isolated.len()
        );
    }

    let dim = model.dim;
    let position: HashMap<usize, usize> = free.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    let adjacency = net.adjacency();
    let n = free.len();
    let mut lhs = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DMatrix::<f64>::zeros(n, dim);
    for (row, &i) in free.iter().enumerate() {
        for &(j, w) in &adjacency[i] {
            lhs[(row, row)] += w;
            if let Some(&col) = position.get(&j) {
                lhs[(row, col)] -= w;
            } else {
                for (d, y) in model.vector_at(j).iter().enumerate() {
                    rhs[(row, d)] += w * y;
                }
            }
        }
    }
    if n > 0 {
        let solved = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Validation("singular Laplacian block".into()))?;
        for (row, &i) in free.iter().enumerate() {
            for (d, v) in model.vector_at_mut(i).iter_mut().enumerate() {
                *v = solved[(row, d)];
            }
        }
    }
    Ok(ExactSolution { model, isolated })
}

/// Human-readable one-line summary of a convergence report.
pub fn describe(report: &ConvergenceReport) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "{} after {} sweep(s), displacement {:e}, energy {:.6e}",
        if report.converged {
            "converged"
        } else {
            "not converged"
        },
        report.iterations,
        report.final_displacement,
        report.final_energy
    );
    if !report.isolated.is_empty() {
        let _ = write!(s, ", {} isolated node(s)", report.isolated.len());
    }
    s
}
