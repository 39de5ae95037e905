use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::HeteroGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Local clustering coefficient per node position.
    pub per_node: Vec<f64>,
    pub mean: f64,
}

pub fn clustering_coefficients(g: &HeteroGraph) -> Clustering {
    let adj = g.adjacency();
    let matrix = g.adjacency_matrix();
    let per_node: Vec<f64> = adj
        .iter()
        .map(|nbrs| {
            let d = nbrs.len();
            if d < 2 {
                return 0.0;
            }
            let mut triangles = 0usize;
            for (a, &u) in nbrs.iter().enumerate() {
                for &v in &nbrs[a + 1..] {
                    triangles += matrix[u][v] as usize;
                }
            }
            triangles as f64 / (d * (d - 1) / 2) as f64
        })
        .collect();
    let mean = if per_node.is_empty() {
        0.0
    } else {
        per_node.iter().sum::<f64>() / per_node.len() as f64
    };
    Clustering { per_node, mean }
}

/// Symmetric normalized Laplacian `I - D^{-1/2} A D^{-1/2}`; rows of isolated
/// nodes are all zero.
pub fn normalized_laplacian(g: &HeteroGraph) -> DMatrix<f64> {
    let n = g.node_count();
    let deg = g.degrees();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        if deg[i] > 0 {
            l[(i, i)] = 1.0;
        }
    }
    for &(u, v) in g.edges() {
        let (pu, pv) = (g.position(u).unwrap(), g.position(v).unwrap());
        let w = -1.0 / ((deg[pu] * deg[pv]) as f64).sqrt();
        l[(pu, pv)] = w;
        l[(pv, pu)] = w;
    }
    l
}

/// Eigenvalues of the normalized Laplacian, ascending, clamped into `[0, 2]`.
pub fn laplacian_spectrum(g: &HeteroGraph) -> Vec<f64> {
    if g.node_count() == 0 {
        return Vec::new();
    }
    let eig = normalized_laplacian(g).symmetric_eigenvalues();
    let mut values: Vec<f64> = eig.iter().map(|&x| x.clamp(0.0, 2.0)).collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn degree_histogram(g: &HeteroGraph) -> BTreeMap<usize, f64> {
    let deg = g.degrees();
    let mut hist = BTreeMap::new();
    for d in &deg {
        *hist.entry(*d).or_insert(0.0) += 1.0;
    }
    let n = deg.len() as f64;
    hist.values_mut().for_each(|v| *v /= n);
    hist
}

pub fn node_type_histogram(g: &HeteroGraph) -> BTreeMap<String, f64> {
    let mut hist = BTreeMap::new();
    for node in g.nodes() {
        *hist.entry(node.ty.clone()).or_insert(0.0) += 1.0;
    }
    let n = g.node_count() as f64;
    hist.values_mut().for_each(|v| *v /= n);
    hist
}

/// Component index per node position, numbered in order of first appearance.
pub fn connected_components(g: &HeteroGraph) -> Vec<usize> {
    let adj = g.adjacency();
    let n = adj.len();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        stack.push(start);
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    comp
}

pub fn is_connected(g: &HeteroGraph) -> bool {
    connected_components(g).iter().all(|&c| c == 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{complete, cycle};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn clustering_fixtures() {
        let k3 = clustering_coefficients(&complete(3));
        assert_eq!(k3.per_node, vec![1.0; 3]);
        assert_eq!(k3.mean, 1.0);

        let path = HeteroGraph::from_edges(3, "n", &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(clustering_coefficients(&path).per_node, vec![0.0; 3]);

        // 4-cycle A-B-C-D plus chord A-C; triangles ABC and ACD.
        let g = HeteroGraph::from_edges(4, "n", &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])
            .unwrap();
        let c = clustering_coefficients(&g);
        assert!(close(&c.per_node, &[2.0 / 3.0, 1.0, 2.0 / 3.0, 1.0], 1e-15));
        assert!((c.mean - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn spectrum_fixtures() {
        assert!(close(&laplacian_spectrum(&complete(2)), &[0.0, 2.0], 1e-10));
        let two_k2 = HeteroGraph::from_edges(4, "n", &[(0, 1), (2, 3)]).unwrap();
        assert!(close(&laplacian_spectrum(&two_k2), &[0.0, 0.0, 2.0, 2.0], 1e-10));
        assert!(close(&laplacian_spectrum(&complete(3)), &[0.0, 1.5, 1.5], 1e-10));
        let isolated = HeteroGraph::from_edges(3, "n", &[(0, 1)]).unwrap();
        assert!(close(&laplacian_spectrum(&isolated), &[0.0, 0.0, 2.0], 1e-10));
        // C4 is bipartite: eigenvalues 1 - cos(2πk/4) = {0, 1, 1, 2}
        assert!(close(&laplacian_spectrum(&cycle(4)), &[0.0, 1.0, 1.0, 2.0], 1e-10));
    }

    #[test]
    fn histograms() {
        let k3 = complete(3);
        assert_eq!(degree_histogram(&k3), BTreeMap::from([(2, 1.0)]));
        assert_eq!(
            node_type_histogram(&k3),
            BTreeMap::from([("node".to_string(), 1.0)])
        );
        let mut g = HeteroGraph::new();
        for (i, ty) in ["author", "author", "paper", "paper", "paper"].iter().enumerate() {
            g.add_node(i as u32, ty).unwrap();
        }
        let h = node_type_histogram(&g);
        assert_eq!(h["author"], 0.4);
        assert_eq!(h["paper"], 0.6);
    }

    #[test]
    fn connectivity() {
        assert!(is_connected(&complete(3)));
        let two = HeteroGraph::from_edges(4, "n", &[(0, 1), (2, 3)]).unwrap();
        assert!(!is_connected(&two));
        assert_eq!(connected_components(&two), vec![0, 0, 1, 1]);
        assert!(is_connected(&HeteroGraph::from_edges(1, "n", &[]).unwrap()));
    }
}
