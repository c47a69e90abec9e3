//! Build a hierarchy-context tree over a two-community graph and show that
//! the tree separates the communities, plus the analytic bound on how much
//! the privacy noise can inflate dissimilarities.

use fedwalk::federation::{run_hct_protocol, RunConfig};
use fedwalk::graph::Graph;
use fedwalk::hct::noise_inflation_bound;

fn main() -> fedwalk::Result<()> {
    // Two dense blocks of 6 joined by a single bridge edge.
    let mut edges = Vec::new();
    for base in [0, 6] {
        for i in 0..6 {
            for j in (i + 1)..6 {
                if (i + j) % 3 != 0 {
                    edges.push((base + i, base + j));
                }
            }
        }
    }
    edges.push((5, 6));
    let graph = Graph::from_edges(12, &edges)?;

    let config = RunConfig {
        k: Some(3),
        epsilon: 4.0,
        seed: 42,
        ..RunConfig::default()
    };
    let (artifacts, log) = run_hct_protocol(&graph, &config)?;
    println!(
        "protocol: {} messages ({} uploads)",
        log.len(),
        log.len() / 2
    );

    let tree = &artifacts.hct;
    println!("tree: {} leaves, {} internal nodes", tree.num_leaves(), tree.num_internal());

    // Leaves under each child of the root; a clean split puts one block on
    // each side.
    let (left, right) = tree.children_of(tree.root());
    println!(
        "root children subtree sizes: {} / {}",
        tree.subtree_leaves(left),
        tree.subtree_leaves(right)
    );

    println!("\npairwise tree distances (hops through the tree):");
    for (u, v) in [(0, 3), (6, 9), (0, 6), (5, 6)] {
        println!("  d({u},{v}) = {}", tree.tree_distance(u, v)?);
    }

    let bound = noise_inflation_bound(3, graph.max_degree(), config.epsilon);
    println!("\nexpected dissimilarity inflation bound: {bound:.2}");
    Ok(())
}
