//! Seeded random graph families for sweeps, property checks and benches.

use rand::seq::SliceRandom;
use rand::Rng;

use super::Topology;

/// A leader graph over `n_pursuers + 1` nodes with a directed spanning tree
/// rooted at the target. Each pursuer picks a parent among the target and the
/// pursuers already attached; extra pursuer-to-pursuer and target-to-pursuer
/// edges are then added with probability `extra_edge_prob`.
pub fn rooted_sensing_graph<R: Rng + ?Sized>(
    rng: &mut R,
    n_pursuers: usize,
    extra_edge_prob: f64,
) -> Topology {
    let mut order: Vec<usize> = (1..=n_pursuers).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    let mut attached = vec![0usize];
    for &p in &order {
        let parent = attached[rng.random_range(0..attached.len())];
        edges.push((parent, p));
        attached.push(p);
    }
    for from in 0..=n_pursuers {
        for to in 1..=n_pursuers {
            if from != to && !edges.contains(&(from, to)) && rng.random_bool(extra_edge_prob) {
                edges.push((from, to));
            }
        }
    }
    Topology::new(n_pursuers + 1, &edges, true).expect("generated edges are well formed")
}

/// A leaderless strongly connected digraph: a random Hamiltonian cycle plus
/// extra edges with probability `extra_edge_prob`.
pub fn strongly_connected_graph<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    extra_edge_prob: f64,
) -> Topology {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    if n > 1 {
        for k in 0..n {
            edges.push((order[k], order[(k + 1) % n]));
        }
    }
    for from in 0..n {
        for to in 0..n {
            if from != to && !edges.contains(&(from, to)) && rng.random_bool(extra_edge_prob) {
                edges.push((from, to));
            }
        }
    }
    Topology::new(n, &edges, false).expect("generated edges are well formed")
}
