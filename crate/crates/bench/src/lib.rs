//! Synthetic inputs shared by the benchmarks in `benches/`.

use efignn::{normalized_adjacency, CsrMat, DenseMat, EdgeList, SparseAdj};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Workload {
    pub adj: SparseAdj,
    pub features: CsrMat,
    pub labels: Vec<usize>,
    pub classes: usize,
}

/// Random graph with about `degree` neighbours per node and binary
/// features at the given density, sized like a small citation graph.
pub fn workload(
    nodes: usize,
    features: usize,
    classes: usize,
    degree: usize,
    density: f64,
    seed: u64,
) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = (0..nodes * degree / 2)
        .map(|_| (rng.gen_range(0..nodes), rng.gen_range(0..nodes)))
        .filter(|(a, b)| a != b)
        .collect();
    let adj = normalized_adjacency(
        &EdgeList {
            num_nodes: nodes,
            edges,
        },
        true,
    )
    .expect("valid graph");
    let data = (0..nodes * features)
        .map(|_| if rng.gen_bool(density) { 1.0 } else { 0.0 })
        .collect();
    let dense = DenseMat::from_vec(nodes, features, data).expect("shape");
    Workload {
        adj,
        features: CsrMat::from_dense(&dense),
        labels: (0..nodes).map(|_| rng.gen_range(0..classes)).collect(),
        classes,
    }
}

/// Cora-sized workload.
pub fn cora_like() -> Workload {
    workload(2708, 1433, 7, 4, 0.0127, 0)
}

pub fn dense(rows: usize, cols: usize, seed: u64) -> DenseMat {
    DenseMat::uniform(rows, cols, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}
