//! Regularize a hand-made network by sweeps and compare against the dense
//! harmonic solve.
//!
//! ```bash
//! cargo run --example regularize_vs_closed_form
//! ```

use bugloc::embeddings::EmbeddingTable;
use bugloc::network::{HeteroNetwork, NodeKind, TypedNode};
use bugloc::regularizer::{closed_form_solve, describe, solve, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut table = EmbeddingTable::new(2);
    table.insert("parser", vec![1.0, 0.0])?;
    table.insert("socket", vec![0.0, 1.0])?;
    table.insert("timeout", vec![0.2, 0.8])?;

    // Nodes in (kind, key) order: B, T, S, M.
    let mut net = HeteroNetwork::new();
    let b1 = net.add_node(TypedNode::new(NodeKind::B, "BUG-1"));
    let b2 = net.add_node(TypedNode::new(NodeKind::B, "BUG-2"));
    let parser = net.add_node(TypedNode::new(NodeKind::T, "parser"));
    let socket = net.add_node(TypedNode::new(NodeKind::T, "socket"));
    let timeout = net.add_node(TypedNode::new(NodeKind::T, "timeout"));
    let s1 = net.add_node(TypedNode::new(NodeKind::S, "net/Conn.java"));
    let s2 = net.add_node(TypedNode::new(NodeKind::S, "xml/Parser.java"));
    let m = net.add_node(TypedNode::new(NodeKind::M, "LOC#1"));
    net.add_edge(parser, b1, 1.5);
    net.add_edge(timeout, b1, 0.4);
    net.add_edge(socket, b2, 2.0);
    net.add_edge(timeout, b2, 1.0);
    net.add_edge(b1, s2, 1.0);
    net.add_edge(b2, s1, 1.0);
    net.add_edge(s1, m, 1.0);
    net.add_edge(s2, m, 1.0);

    let solution = solve(&net, &table, &SolverConfig::default());
    println!("{}", describe(&solution.report));
    let exact = closed_form_solve(&net, &table)?;

    let mut worst: f64 = 0.0;
    for (i, node) in net.nodes().iter().enumerate() {
        let iterative = solution.model.vector_at(i);
        let direct = exact.model.vector_at(i);
        let gap = iterative
            .iter()
            .zip(direct)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(gap);
        let tag = if solution.model.is_clamped_at(i) {
            "clamped"
        } else {
            "free"
        };
        println!(
            "{:<20} {tag:<8} sweep {iterative:.5?}  exact {direct:.5?}",
            node.to_string()
        );
    }
    println!("max |sweep - exact| = {worst:.2e}");
    Ok(())
}
