//! Structural inputs recomputed from the noisy graph at every diffusion step:
//! cycle participation, low Laplacian spectrum and degree.

use nalgebra::DMatrix;

use super::DenseGraphState;
use crate::neural::Matrix;

/// Number of nonzero Laplacian eigenvalues broadcast to every node.
pub const SPECTRAL_FEATURES: usize = 3;
/// Columns: triangles, 4-cycles, 5-cycles, `SPECTRAL_FEATURES` eigenvalues, degree.
pub const EXTRA_FEATURES: usize = 3 + SPECTRAL_FEATURES + 1;

const EIGEN_ZERO: f64 = 1e-6;

/// Raw per-node auxiliary features (`n × EXTRA_FEATURES`).
pub fn augment_extra_features(g: &DenseGraphState) -> Matrix {
    let n = g.n();
    let a = DMatrix::from_fn(n, n, |i, j| g.edge(i, j) as f64);
    let d: Vec<f64> = g.degrees().iter().map(|&x| x as f64).collect();
    let a2 = &a * &a;
    let a3 = &a2 * &a;
    let a4 = &a3 * &a;
    let a5 = &a4 * &a;
    let closed3: Vec<f64> = (0..n).map(|i| a3[(i, i)]).collect();
    // sum over neighbors of degree / closed 3-walks
    let a_d: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[(i, j)] * d[j]).sum()).collect();
    let a_c3: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[(i, j)] * closed3[j]).sum()).collect();
    // degrees of the other two corners, summed over triangles through i
    let tri_deg: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)] * a2[(i, j)] * d[j]).sum())
        .collect();

    let eig = spectral_features(g);
    let mut out = Matrix::zeros(n, EXTRA_FEATURES);
    for i in 0..n {
        let tri = closed3[i] / 2.0;
        let c4 = (a4[(i, i)] - d[i] * (d[i] - 1.0) - a_d[i]) / 2.0;
        // closed 5-walks that are a triangle plus one back-and-forth step
        let degenerate = tri * (4.0 * d[i] - 10.0) + 2.0 * tri_deg[i] + a_c3[i];
        let c5 = (a5[(i, i)] - degenerate) / 2.0;
        out[(i, 0)] = tri.max(0.0).round();
        out[(i, 1)] = c4.max(0.0).round();
        out[(i, 2)] = c5.max(0.0).round();
        for (k, &v) in eig.iter().enumerate() {
            out[(i, 3 + k)] = v;
        }
        out[(i, 3 + SPECTRAL_FEATURES)] = d[i];
    }
    out
}

/// Smallest nonzero normalized-Laplacian eigenvalues, zero-padded.
fn spectral_features(g: &DenseGraphState) -> [f64; SPECTRAL_FEATURES] {
    let n = g.n();
    let deg = g.degrees();
    let l = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            if deg[i] > 0 {
                1.0
            } else {
                0.0
            }
        } else if g.edge(i, j) == 1 {
            -1.0 / ((deg[i] * deg[j]) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut values: Vec<f64> = l.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    let mut out = [0.0; SPECTRAL_FEATURES];
    for (slot, v) in out.iter_mut().zip(values.into_iter().filter(|&v| v > EIGEN_ZERO)) {
        *slot = v;
    }
    out
}

/// Rescale raw extras for the network: counts and degree through `ln(1+x)`,
/// eigenvalues unchanged.
pub fn normalize_extra(raw: &Matrix) -> Matrix {
    let mut m = raw.clone();
    for r in 0..m.rows() {
        for c in [0, 1, 2, 3 + SPECTRAL_FEATURES] {
            m[(r, c)] = m[(r, c)].ln_1p();
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::HeteroGraph;

    fn state(n: usize, edges: &[(usize, usize)]) -> DenseGraphState {
        let mut s = DenseGraphState::empty(n);
        for &(i, j) in edges {
            s.set_edge(i, j, true);
        }
        s
    }

    /// Simple cycles of length `len` through each node, by DFS enumeration.
    fn brute_cycles(g: &DenseGraphState, len: usize) -> Vec<f64> {
        let n = g.n();
        let mut per_node = vec![0usize; n];
        let mut path = Vec::new();
        fn dfs(g: &DenseGraphState, len: usize, path: &mut Vec<usize>, per_node: &mut [usize]) {
            let start = path[0];
            let last = *path.last().unwrap();
            if path.len() == len {
                if g.edge(last, start) == 1 {
                    for &v in path.iter() {
                        per_node[v] += 1;
                    }
                }
                return;
            }
            for v in 0..g.n() {
                // start is the smallest index on the cycle
                if v > start && g.edge(last, v) == 1 && !path.contains(&v) {
                    path.push(v);
                    dfs(g, len, path, per_node);
                    path.pop();
                }
            }
        }
        for s in 0..n {
            path.clear();
            path.push(s);
            dfs(g, len, &mut path, &mut per_node);
        }
        // each cycle is traversed in both directions from its minimum
        per_node.iter().map(|&c| (c / 2) as f64).collect()
    }

    #[test]
    fn triangle_and_tree_and_square() {
        let tri = augment_extra_features(&state(3, &[(0, 1), (1, 2), (0, 2)]));
        for i in 0..3 {
            assert_eq!(tri[(i, 0)], 1.0);
            assert_eq!(tri[(i, 3 + SPECTRAL_FEATURES)], 2.0);
        }
        let tree = augment_extra_features(&state(5, &[(0, 1), (0, 2), (1, 3), (1, 4)]));
        for i in 0..5 {
            assert_eq!(&tree.row(i)[..3], &[0.0, 0.0, 0.0]);
        }
        let square = augment_extra_features(&state(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]));
        for i in 0..4 {
            assert_eq!(square[(i, 0)], 0.0);
            assert_eq!(square[(i, 1)], 1.0);
            // C4 spectrum {0,1,1,2}
            assert!((square[(i, 3)] - 1.0).abs() < 1e-9);
            assert!((square[(i, 5)] - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cycle_counts_match_enumeration() {
        let mut rng = crate::rng::seeded(8);
        use rand::Rng;
        for _ in 0..60 {
            let n = rng.random_range(3..9);
            let mut s = DenseGraphState::empty(n);
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random::<f64>() < 0.5 {
                        s.set_edge(i, j, true);
                    }
                }
            }
            let f = augment_extra_features(&s);
            for (col, len) in [(0, 3), (1, 4), (2, 5)] {
                let expect = brute_cycles(&s, len);
                for i in 0..n {
                    assert_eq!(f[(i, col)], expect[i], "len {len} node {i}");
                }
            }
        }
    }

    #[test]
    fn state_round_trip() {
        let vocab = vec!["a".to_string(), "b".to_string()];
        let mut g = HeteroGraph::new();
        g.add_node(0, "b").unwrap();
        g.add_node(1, "a").unwrap();
        g.add_node(2, "b").unwrap();
        g.add_edge(0, 2).unwrap();
        let s = DenseGraphState::from_graph(&g, &vocab).unwrap();
        assert_eq!(s.node_types, vec![1, 0, 1]);
        assert_eq!(s.to_graph(&vocab), g);
    }
}
