//! Network characterization metrics.
//!
//! `density` and `average_degree` follow the published table's arithmetic:
//! directed edge count `E` with undirected normalization, `2E / (n(n-1))`
//! and `2E / n`. With reciprocal dependency pairs `density` can exceed 1, so
//! the plain density of the undirected projection is reported alongside.
//! Diameter, clustering, and path length use the undirected projection.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::model::{build_adjacency, DsmCase};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkMetrics {
    pub n: usize,
    pub e: usize,
    pub diameter: usize,
    pub density: f64,
    pub undirected_density: f64,
    pub average_degree: f64,
    pub clustering_coefficient: f64,
    pub average_path_length: f64,
    /// False when the undirected projection is disconnected; diameter and
    /// average path length then describe the largest component only (the
    /// one with the greater diameter, then total distance, on a size tie).
    pub connected: bool,
}

pub fn network_metrics(case: &DsmCase) -> NetworkMetrics {
    let m = build_adjacency(case);
    let n = m.n();
    let e = m.edge_count();

    let mut adj = vec![vec![false; n]; n];
    for &(i, j) in m.edge_indices() {
        adj[i][j] = true;
        adj[j][i] = true;
    }
    let neighbours: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).filter(|&j| adj[i][j]).collect()).collect();
    let undirected_edges = neighbours.iter().map(Vec::len).sum::<usize>() / 2;
    let pairs = (n * (n - 1)) as f64;

    let clustering = neighbours
        .iter()
        .map(|nb| {
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (a, &u) in nb.iter().enumerate() {
                for &v in &nb[a + 1..] {
                    if adj[u][v] {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (k * (k - 1)) as f64
        })
        .sum::<f64>()
        / n as f64;

    let components = components(&neighbours);
    let max_size = components.iter().map(Vec::len).max().expect("n >= 2");
    // equal-size components: take the widest so the result ignores node order
    let (diameter, total, size) = components
        .iter()
        .filter(|c| c.len() == max_size)
        .map(|c| {
            let (d, t) = path_stats(&neighbours, c);
            (d, t, c.len())
        })
        .max()
        .expect("at least one component");
    let average_path_length =
        if size > 1 { total as f64 / (size * (size - 1)) as f64 } else { 0.0 };
    if components.len() > 1 {
        log::warn!(
            "undirected projection has {} components; path metrics use the largest ({} nodes)",
            components.len(),
            size
        );
    }

    NetworkMetrics {
        n,
        e,
        diameter,
        density: 2.0 * e as f64 / pairs,
        undirected_density: 2.0 * undirected_edges as f64 / pairs,
        average_degree: 2.0 * e as f64 / n as f64,
        clustering_coefficient: clustering,
        average_path_length,
        connected: components.len() == 1,
    }
}

/// Diameter and sum of pairwise distances within one component.
fn path_stats(neighbours: &[Vec<usize>], component: &[usize]) -> (usize, usize) {
    let mut diameter = 0;
    let mut total = 0;
    for &src in component {
        let dist = bfs(neighbours, src);
        for &dst in component {
            if let Some(d) = dist[dst] {
                diameter = diameter.max(d);
                total += d;
            }
        }
    }
    (diameter, total)
}

fn bfs(neighbours: &[Vec<usize>], src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; neighbours.len()];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap();
        for &v in &neighbours[u] {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

fn components(neighbours: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; neighbours.len()];
    let mut out = Vec::new();
    for start in 0..neighbours.len() {
        if seen[start] {
            continue;
        }
        let dist = bfs(neighbours, start);
        let comp: Vec<usize> = (0..neighbours.len()).filter(|&v| dist[v].is_some()).collect();
        for &v in &comp {
            seen[v] = true;
        }
        out.push(comp);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::random_case;

    #[test]
    fn equal_components_pick_the_same_one_in_any_order() {
        // a path a-b-c and a triangle x-y-z, listed both ways round
        let edges = [("b", "a"), ("c", "b"), ("y", "x"), ("z", "y"), ("x", "z")];
        let one = DsmCase::from_ids(&["a", "b", "c", "x", "y", "z"], &edges).unwrap();
        let two = DsmCase::from_ids(&["x", "y", "z", "a", "b", "c"], &edges).unwrap();
        for case in [one, two] {
            let m = network_metrics(&case);
            assert!(!m.connected);
            assert_eq!(m.diameter, 2);
            assert!((m.average_path_length - 8.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_directed_triangle() {
        let case = DsmCase::from_ids(
            &["A", "B", "C"],
            &[("A", "B"), ("B", "A"), ("A", "C"), ("C", "A"), ("B", "C"), ("C", "B")],
        )
        .unwrap();
        let m = network_metrics(&case);
        assert_eq!(m.e, 6);
        assert!((m.undirected_density - 1.0).abs() < 1e-12);
        assert!((m.clustering_coefficient - 1.0).abs() < 1e-12);
        assert!((m.density - 2.0).abs() < 1e-12);
        assert_eq!(m.diameter, 1);
        assert!((m.average_path_length - 1.0).abs() < 1e-12);
        assert!(m.connected);
    }

    #[test]
    fn path_graph_metrics() {
        // a - b - c - d as a dependency chain
        let case = DsmCase::from_ids(&["a", "b", "c", "d"], &[("b", "a"), ("c", "b"), ("d", "c")]).unwrap();
        let m = network_metrics(&case);
        assert_eq!(m.diameter, 3);
        // distances: 1,2,3,1,2,1 each counted twice over 12 ordered pairs
        assert!((m.average_path_length - 20.0 / 12.0).abs() < 1e-12);
        assert_eq!(m.clustering_coefficient, 0.0);
    }

    #[test]
    fn disconnected_uses_largest_component() {
        let case =
            DsmCase::from_ids(&["a", "b", "c", "x", "y"], &[("b", "a"), ("c", "b"), ("y", "x")]).unwrap();
        let m = network_metrics(&case);
        assert!(!m.connected);
        assert_eq!(m.diameter, 2);
        assert!((m.average_path_length - 8.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn density_matches_average_degree() {
        for seed in 0..20 {
            let m = network_metrics(&random_case(9, 0.35, seed));
            assert!((m.density - m.average_degree / (m.n as f64 - 1.0)).abs() < 1e-9);
        }
    }
}
