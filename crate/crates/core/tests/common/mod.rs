#![allow(dead_code)]

use std::path::PathBuf;

use hycosbm::model::ModelParams;
use hycosbm::{AttributeMatrix, Hypergraph};
use ndarray::Array2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn load(name: &str) -> (Hypergraph, AttributeMatrix) {
    let edges = std::fs::File::open(fixture(&format!("{name}_edges.txt"))).unwrap();
    let h = hycosbm::read_hypergraph(std::io::BufReader::new(edges)).unwrap();
    let attrs = std::fs::File::open(fixture(&format!("{name}_attrs.csv"))).unwrap();
    let table = hycosbm::read_attribute_table(attrs).unwrap();
    let x = hycosbm::one_hot_encode(&table, &h).unwrap();
    (h, x)
}

pub const FIXTURES: [&str; 4] = ["office", "planted_k2", "planted_k3", "planted_k4"];

/// `Σ_{i<j∈e} Σ_{k,q} u_ik u_jq w_kq` by the defining double sum.
pub fn naive_intensity(nodes: &[usize], u: &Array2<f64>, w: &Array2<f64>) -> f64 {
    let mut total = 0.0;
    for (a, &i) in nodes.iter().enumerate() {
        for &j in &nodes[a + 1..] {
            for k in 0..u.ncols() {
                for q in 0..u.ncols() {
                    total += u[[i, k]] * u[[j, q]] * w[[k, q]];
                }
            }
        }
    }
    total
}

/// Exact binomial coefficient as f64 by the multiplicative formula.
pub fn binom(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut v = 1.0;
    for t in 0..k {
        v = v * (n - t) as f64 / (t + 1) as f64;
    }
    v.round()
}

/// All subsets of `0..n` with sizes in `2..=max_size`.
pub fn all_candidate_edges(n: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let size = mask.count_ones() as usize;
        if size >= 2 && size <= max_size {
            out.push((0..n).filter(|&i| mask & (1 << i) != 0).collect());
        }
    }
    out
}

fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|t| (t as f64).ln()).sum()
}

/// Structural log-likelihood by enumerating every candidate hyperedge:
/// `Σ_{e∈Ω} log Pois(A_e; λ_e/κ_e)`, then adding back the terms that do not
/// depend on the parameters (`A_e log κ_e + log A_e!`).
pub fn brute_force_structure(h: &Hypergraph, u: &Array2<f64>, w: &Array2<f64>) -> f64 {
    let n = h.num_nodes();
    let observed: std::collections::HashMap<Vec<usize>, u64> =
        h.edges().iter().map(|e| (e.nodes().to_vec(), e.weight())).collect();
    let mut total = 0.0;
    for e in all_candidate_edges(n, h.max_size()) {
        let d = e.len() as u64;
        let kappa = (d * (d - 1) / 2) as f64 * binom(n as u64 - 2, d - 2);
        let mean = naive_intensity(&e, u, w) / kappa;
        let count = observed.get(&e).copied().unwrap_or(0);
        let log_pmf = if count == 0 {
            -mean
        } else {
            count as f64 * mean.ln() - mean - ln_factorial(count)
        };
        let constants = if count == 0 {
            0.0
        } else {
            count as f64 * kappa.ln() + ln_factorial(count)
        };
        total += log_pmf + constants;
    }
    total
}

pub fn random_hypergraph(rng: &mut ChaCha8Rng, n: usize, max_size: usize, edges: usize) -> Hypergraph {
    loop {
        let mut list = Vec::new();
        for _ in 0..edges {
            let d = rng.gen_range(2..=max_size.min(n));
            let e = index::sample(rng, n, d).into_vec();
            list.push((e, rng.gen_range(1..=3u64)));
        }
        let h = Hypergraph::from_indices(n, list).unwrap();
        if h.max_size() == max_size.min(n) {
            return h;
        }
    }
}

pub fn random_params(rng: &mut ChaCha8Rng, n: usize, k: usize, z: usize) -> ModelParams {
    hycosbm::em::random_init(n, k, z, rng)
}

pub fn random_one_hot(rng: &mut ChaCha8Rng, n: usize, z: usize) -> AttributeMatrix {
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..z)).collect();
    AttributeMatrix::from_labels(&labels, z).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
