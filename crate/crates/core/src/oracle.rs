//! Slow reference implementations used to cross-check the fast paths.
//!
//! Nothing here touches the tape, CSR storage or the matrix kernels: every
//! quantity is expanded into explicit scalar sums.

use crate::dense::DenseMat;
use crate::sparse::EdgeList;

/// `D̃^{-1/2}(A+I)D̃^{-1/2}` as nested vectors, from an undirected edge list.
pub fn dense_normalized_adjacency(edges: &EdgeList) -> Vec<Vec<f64>> {
    let n = edges.num_nodes;
    let mut a = vec![vec![0.0; n]; n];
    for &(s, d) in &edges.edges {
        a[s][d] = 1.0;
        a[d][s] = 1.0;
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    for i in 0..n {
        for j in 0..n {
            a[i][j] /= (deg[i] * deg[j]).sqrt();
        }
    }
    a
}

/// `X⁽⁰⁾[v,:] = Σ_m X_init[v,m] · W⁽⁰⁾[m,:]`.
pub fn first_order_terms(x: &DenseMat, w0: &DenseMat) -> DenseMat {
    let k = w0.cols();
    let mut out = DenseMat::zeros(x.rows(), k);
    for v in 0..x.rows() {
        for m in 0..x.cols() {
            for c in 0..k {
                let cur = out.get(v, c);
                out.set(v, c, cur + x.get(v, m) * w0.get(m, c));
            }
        }
    }
    out
}

/// Every explicit block `X⁽⁰⁾ … X⁽ᴸ⁾` by full term enumeration: for block
/// `l` and node `v`, the sum over all node walks `u₀ → … → u_{l−1} → v` and
/// all feature tuples `(g₀, …, g_l)` of
///
/// ```text
/// t₀ = x[u₀,g₀] W⁽⁰⁾[g₀,:]
/// t_k = Â[u_k,u_{k−1}] · (t_{k−1} W⁽ᵏ⁾) ⊙ x[u_k,g_k] W⁽⁰⁾[g_k,:]
/// ```
///
/// `weights` is `[W⁽⁰⁾, W⁽¹⁾, …]`. Exponential in depth; tiny inputs only.
pub fn efi_blocks_by_enumeration(
    adj: &[Vec<f64>],
    x: &DenseMat,
    weights: &[DenseMat],
) -> Vec<DenseMat> {
    let e = Enumerator { adj, x, weights };
    let (n, k) = (x.rows(), weights[0].cols());
    (0..weights.len())
        .map(|l| {
            let mut acc = vec![vec![0.0; k]; n];
            for u0 in 0..n {
                for g0 in 0..x.cols() {
                    e.extend(0, l, u0, e.embed(u0, g0), &mut acc);
                }
            }
            DenseMat::from_vec(n, k, acc.concat()).expect("shape")
        })
        .collect()
}

struct Enumerator<'a> {
    adj: &'a [Vec<f64>],
    x: &'a DenseMat,
    weights: &'a [DenseMat],
}

impl Enumerator<'_> {
    fn embed(&self, u: usize, g: usize) -> Vec<f64> {
        let w0 = &self.weights[0];
        (0..w0.cols())
            .map(|c| self.x.get(u, g) * w0.get(g, c))
            .collect()
    }

    /// Adds every completion of the partial term `t`, currently at `node`
    /// after `depth` layers, into `acc`.
    fn extend(&self, depth: usize, target: usize, node: usize, t: Vec<f64>, acc: &mut [Vec<f64>]) {
        if depth == target {
            for (a, v) in acc[node].iter_mut().zip(&t) {
                *a += v;
            }
            return;
        }
        let w = &self.weights[depth + 1];
        let mixed: Vec<f64> = (0..w.cols())
            .map(|c| (0..t.len()).map(|j| t[j] * w.get(j, c)).sum())
            .collect();
        for next in 0..self.x.rows() {
            let a = self.adj[next][node];
            if a == 0.0 {
                continue;
            }
            for g in 0..self.x.cols() {
                let term = mixed
                    .iter()
                    .zip(self.embed(next, g))
                    .map(|(p, q)| a * p * q)
                    .collect();
                self.extend(depth + 1, target, next, term, acc);
            }
        }
    }
}

/// All simple undirected graphs on `n` labelled nodes.
pub fn all_graphs(n: usize) -> impl Iterator<Item = EdgeList> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    (0u64..1 << pairs.len()).map(move |mask| {
        let edges = pairs
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        EdgeList {
            num_nodes: n,
            edges,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_counts() {
        assert_eq!(all_graphs(1).count(), 1);
        assert_eq!(all_graphs(3).count(), 8);
        assert_eq!(all_graphs(4).count(), 64);
    }

    #[test]
    fn hand_sized_enumeration() {
        // One node, one feature, K = 1: X⁽¹⁾ = (x w₀)·w₁·(x w₀).
        let adj = vec![vec![1.0]];
        let x = DenseMat::scalar(2.0);
        let ws = vec![DenseMat::scalar(3.0), DenseMat::scalar(0.5)];
        let blocks = efi_blocks_by_enumeration(&adj, &x, &ws);
        assert_eq!(blocks[0].item(), 6.0);
        assert_eq!(blocks[1].item(), 18.0);
    }
}
