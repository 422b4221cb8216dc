//! Sparse adjacency in CSR form: construction, self-loops, symmetric
//! normalisation and sparse-dense products.

use serde::{Deserialize, Serialize};

use crate::dense::{axpy, DenseMat};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Raw directed edge pairs over `num_nodes` nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeList {
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

impl EdgeList {
    pub fn new(num_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let list = Self { num_nodes, edges };
        list.validate()?;
        Ok(list)
    }

    pub fn validate(&self) -> Result<()> {
        match self
            .edges
            .iter()
            .find(|&&(s, d)| s >= self.num_nodes || d >= self.num_nodes)
        {
            Some(&(src, dst)) => Err(Error::EdgeOutOfRange {
                src,
                dst,
                num_nodes: self.num_nodes,
            }),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseAdj<T = f64> {
    num_nodes: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

/// Builds a binary CSR matrix from an edge list. Duplicate edges collapse to
/// a single entry; with `symmetrize` every `(i, j)` also yields `(j, i)`.
pub fn build_csr(edges: &EdgeList, symmetrize: bool) -> Result<SparseAdj<f64>> {
    edges.validate()?;
    let n = edges.num_nodes;
    let mut pairs: Vec<(usize, usize)> =
        Vec::with_capacity(edges.len() * if symmetrize { 2 } else { 1 });
    for &(s, d) in &edges.edges {
        pairs.push((s, d));
        if symmetrize {
            pairs.push((d, s));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();

    let mut row_ptr = vec![0usize; n + 1];
    for &(s, _) in &pairs {
        row_ptr[s + 1] += 1;
    }
    for i in 0..n {
        row_ptr[i + 1] += row_ptr[i];
    }
    let col_idx = pairs.iter().map(|&(_, d)| d).collect::<Vec<_>>();
    let values = vec![1.0; col_idx.len()];
    Ok(SparseAdj {
        num_nodes: n,
        row_ptr,
        col_idx,
        values,
    })
}

/// `Ã = A + I`: every row gets a diagonal entry equal to 1, overwriting any
/// existing one.
pub fn add_self_loops<T: Scalar>(adj: &SparseAdj<T>) -> SparseAdj<T> {
    let n = adj.num_nodes;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(adj.nnz() + n);
    let mut values = Vec::with_capacity(adj.nnz() + n);
    row_ptr.push(0);
    for i in 0..n {
        let mut placed = false;
        for (j, v) in adj.row_entries(i) {
            if !placed && j >= i {
                col_idx.push(i);
                values.push(T::one());
                placed = true;
                if j == i {
                    continue;
                }
            }
            col_idx.push(j);
            values.push(v);
        }
        if !placed {
            col_idx.push(i);
            values.push(T::one());
        }
        row_ptr.push(col_idx.len());
    }
    SparseAdj {
        num_nodes: n,
        row_ptr,
        col_idx,
        values,
    }
}

/// `Â = D̃^{-1/2} Ã D̃^{-1/2}` with `D̃` the row sums of `Ã`.
pub fn sym_normalize(adj: &SparseAdj<f64>) -> Result<SparseAdj<f64>> {
    let deg: Vec<f64> = (0..adj.num_nodes)
        .map(|i| adj.row_entries(i).map(|(_, v)| v).sum())
        .collect();
    if let Some(i) = deg.iter().position(|&d| d <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "node {i} has zero degree; add self-loops before normalising"
        )));
    }
    let mut out = adj.clone();
    for i in 0..adj.num_nodes {
        for k in adj.row_ptr[i]..adj.row_ptr[i + 1] {
            let j = adj.col_idx[k];
            out.values[k] = adj.values[k] / (deg[i] * deg[j]).sqrt();
        }
    }
    Ok(out)
}

/// Convenience pipeline used by every model: CSR, self-loops, normalisation.
pub fn normalized_adjacency(edges: &EdgeList, symmetrize: bool) -> Result<SparseAdj<f64>> {
    sym_normalize(&add_self_loops(&build_csr(edges, symmetrize)?))
}

/// `Â · X`.
pub fn spmm<T: Scalar>(adj: &SparseAdj<T>, x: &DenseMat<T>) -> Result<DenseMat<T>> {
    if adj.num_nodes != x.rows() {
        return Err(Error::shape(
            "spmm",
            format!("{} nodes vs {} rows", adj.num_nodes, x.rows()),
        ));
    }
    let mut out = DenseMat::zeros(x.rows(), x.cols());
    for i in 0..adj.num_nodes {
        let out_row = out.row_mut(i);
        for k in adj.row_ptr[i]..adj.row_ptr[i + 1] {
            axpy(out_row, adj.values[k], x.row(adj.col_idx[k]));
        }
    }
    Ok(out)
}

/// `Âᵀ · Y`, the adjoint used by backpropagation.
pub fn spmm_transpose<T: Scalar>(adj: &SparseAdj<T>, y: &DenseMat<T>) -> Result<DenseMat<T>> {
    if adj.num_nodes != y.rows() {
        return Err(Error::shape(
            "spmm_transpose",
            format!("{} nodes vs {} rows", adj.num_nodes, y.rows()),
        ));
    }
    let mut out = DenseMat::zeros(y.rows(), y.cols());
    for i in 0..adj.num_nodes {
        let y_row = y.row(i);
        for k in adj.row_ptr[i]..adj.row_ptr[i + 1] {
            axpy(out.row_mut(adj.col_idx[k]), adj.values[k], y_row);
        }
    }
    Ok(out)
}

impl<T: Scalar> SparseAdj<T> {
    /// Identity adjacency: the normalised form of an edgeless graph.
    pub fn identity(n: usize) -> Self {
        Self {
            num_nodes: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    /// Assembles a CSR matrix from raw arrays, checking the structural
    /// invariants.
    pub fn from_parts(
        num_nodes: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        let adj = Self {
            num_nodes,
            row_ptr,
            col_idx,
            values,
        };
        adj.check_invariants()?;
        Ok(adj)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let bad = |d: String| Err(Error::InvalidArgument(format!("invalid CSR: {d}")));
        if self.row_ptr.len() != self.num_nodes + 1 || self.row_ptr[0] != 0 {
            return bad("row_ptr length or origin".into());
        }
        if self.row_ptr[self.num_nodes] != self.col_idx.len()
            || self.col_idx.len() != self.values.len()
        {
            return bad("row_ptr end does not match nnz".into());
        }
        for i in 0..self.num_nodes {
            if self.row_ptr[i] > self.row_ptr[i + 1] {
                return bad(format!("row_ptr decreases at row {i}"));
            }
            let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("columns not strictly increasing in row {i}"));
            }
            if cols.iter().any(|&j| j >= self.num_nodes) {
                return bad(format!("column out of range in row {i}"));
            }
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Stored value at `(i, j)`, zero when absent.
    pub fn get(&self, i: usize, j: usize) -> T {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn to_dense(&self) -> DenseMat<T> {
        let mut m = DenseMat::zeros(self.num_nodes, self.num_nodes);
        for i in 0..self.num_nodes {
            for (j, v) in self.row_entries(i) {
                m.set(i, j, v);
            }
        }
        m
    }

    /// True when every stored `(i, j)` has a bitwise-equal `(j, i)`.
    pub fn is_symmetric(&self) -> bool {
        (0..self.num_nodes).all(|i| {
            self.row_entries(i).all(|(j, v)| {
                let span = self.row_ptr[j]..self.row_ptr[j + 1];
                match self.col_idx[span.clone()].binary_search(&i) {
                    Ok(k) => self.values[span.start + k].to_bits_eq(v),
                    Err(_) => false,
                }
            })
        })
    }

    /// Principal submatrix over `nodes` (which are renumbered in the given
    /// order). `nodes` must be strictly increasing.
    pub fn submatrix(&self, nodes: &[usize]) -> Result<Self> {
        if nodes.windows(2).any(|w| w[0] >= w[1]) || nodes.iter().any(|&v| v >= self.num_nodes) {
            return Err(Error::InvalidArgument(
                "submatrix nodes must be strictly increasing and in range".into(),
            ));
        }
        let mut remap = vec![usize::MAX; self.num_nodes];
        for (new, &old) in nodes.iter().enumerate() {
            remap[old] = new;
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &old in nodes {
            for (j, v) in self.row_entries(old) {
                if remap[j] != usize::MAX {
                    col_idx.push(remap[j]);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            num_nodes: nodes.len(),
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn cast<U: Scalar>(&self) -> SparseAdj<U> {
        SparseAdj {
            num_nodes: self.num_nodes,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self
                .values
                .iter()
                .map(|v| U::from_f64(v.as_f64()))
                .collect(),
        }
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.num_nodes)
            .map(|i| self.row_entries(i).map(|(_, v)| v).sum())
            .collect()
    }
}

trait BitsEq {
    fn to_bits_eq(self, other: Self) -> bool;
}

impl<T: Scalar> BitsEq for T {
    fn to_bits_eq(self, other: Self) -> bool {
        self.as_f64().to_bits() == other.as_f64().to_bits()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(n: usize, e: &[(usize, usize)]) -> EdgeList {
        EdgeList::new(n, e.to_vec()).unwrap()
    }

    /// Dense reference for `D^{-1/2}(A+I)D^{-1/2}` built from scratch.
    fn dense_normalized(n: usize, e: &[(usize, usize)]) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; n]; n];
        for &(s, d) in e {
            a[s][d] = 1.0;
            a[d][s] = 1.0;
        }
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
        (0..n)
            .map(|i| (0..n).map(|j| a[i][j] / (deg[i] * deg[j]).sqrt()).collect())
            .collect()
    }

    #[test]
    fn single_edge_symmetrized() {
        let adj = build_csr(&edges(2, &[(0, 1)]), true).unwrap();
        assert_eq!(adj.row_ptr(), &[0, 1, 2]);
        assert_eq!(adj.col_idx(), &[1, 0]);
        assert_eq!(adj.values(), &[1.0, 1.0]);
    }

    #[test]
    fn empty_graph() {
        let adj = build_csr(&edges(1, &[]), true).unwrap();
        assert_eq!(adj.row_ptr(), &[0, 0]);
        assert_eq!(adj.nnz(), 0);
    }

    #[test]
    fn duplicates_collapse() {
        let adj = build_csr(&edges(3, &[(0, 1), (1, 0), (0, 1), (2, 1)]), true).unwrap();
        assert_eq!(adj.nnz(), 4);
        adj.check_invariants().unwrap();
    }

    #[test]
    fn directed_without_symmetrize() {
        let adj = build_csr(&edges(3, &[(0, 1), (2, 1)]), false).unwrap();
        assert_eq!(adj.get(0, 1), 1.0);
        assert_eq!(adj.get(1, 0), 0.0);
        assert!(!adj.is_symmetric());
    }

    #[test]
    fn out_of_range_edge_rejected() {
        let err = EdgeList::new(2, vec![(0, 1), (1, 5)]).unwrap_err();
        match err {
            Error::EdgeOutOfRange { src, dst, .. } => assert_eq!((src, dst), (1, 5)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_loop_examples() {
        let one = add_self_loops(&build_csr(&edges(1, &[]), true).unwrap());
        assert_eq!(one.to_dense().as_slice(), &[1.0]);
        let two = add_self_loops(&build_csr(&edges(2, &[(0, 1)]), true).unwrap());
        assert_eq!(two.to_dense().as_slice(), &[1.0; 4]);
        let tri = add_self_loops(&build_csr(&edges(3, &[(0, 1), (1, 2), (2, 0)]), true).unwrap());
        assert_eq!(tri.to_dense().as_slice(), &[1.0; 9]);
        tri.check_invariants().unwrap();
    }

    #[test]
    fn existing_diagonal_is_overwritten() {
        let adj = SparseAdj::from_parts(2, vec![0, 2, 2], vec![0, 1], vec![5.0, 1.0]).unwrap();
        let looped = add_self_loops(&adj);
        assert_eq!(looped.to_dense().as_slice(), &[1.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn normalisation_matches_dense_reference() {
        let isolated = normalized_adjacency(&edges(1, &[]), true).unwrap();
        assert_eq!(isolated.to_dense().as_slice(), &[1.0]);

        let tri_e = [(0, 1), (1, 2), (2, 0)];
        let tri = normalized_adjacency(&edges(3, &tri_e), true).unwrap();
        for v in tri.values() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let path = normalized_adjacency(&edges(2, &[(0, 1)]), true).unwrap();
        assert_eq!(path.to_dense().as_slice(), &[0.5; 4]);

        let e = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (4, 3)];
        let adj = normalized_adjacency(&edges(5, &e), true).unwrap();
        let reference = dense_normalized(5, &e);
        for (i, row) in reference.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert!((adj.get(i, j) - v).abs() < 1e-15);
            }
        }
        assert!(adj.is_symmetric());
    }

    #[test]
    fn zero_degree_rejected() {
        let adj = build_csr(&edges(2, &[]), true).unwrap();
        assert!(sym_normalize(&adj).is_err());
    }

    #[test]
    fn spmm_examples() {
        let x = DenseMat::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let id = SparseAdj::<f64>::identity(3);
        assert_eq!(spmm(&id, &x).unwrap(), x);

        let tri = normalized_adjacency(&edges(3, &[(0, 1), (1, 2), (2, 0)]), true).unwrap();
        let col = DenseMat::column(&[3.0, 6.0, 9.0]);
        let out = spmm(&tri, &col).unwrap();
        for v in out.as_slice() {
            assert!((v - 6.0).abs() < 1e-12);
        }
        assert!(spmm(&tri, &DenseMat::zeros(2, 1)).is_err());
    }

    #[test]
    fn triangle_rows_sum_to_one() {
        let tri = normalized_adjacency(&edges(3, &[(0, 1), (1, 2), (2, 0)]), true).unwrap();
        for s in tri.row_sums() {
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn submatrix_keeps_internal_entries() {
        let adj = build_csr(&edges(4, &[(0, 1), (1, 2), (2, 3)]), true).unwrap();
        let sub = adj.submatrix(&[1, 2]).unwrap();
        assert_eq!(sub.to_dense().as_slice(), &[0.0, 1.0, 1.0, 0.0]);
    }
}
