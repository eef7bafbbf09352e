//! Attributed hypergraphs with planted mixed-membership communities.
//!
//! Hyperedges of each size `d` are drawn by rejection sampling: uniformly
//! random node sets are accepted with probability `λ_e / λ_max(d)`, which
//! samples exactly from the planted Poisson intensity restricted to that size.

use std::collections::{BTreeMap, HashSet};

use ndarray::Array2;
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attributes::AttributeMatrix;
use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::model::{edge_intensity, log_binomial, ModelParams};
use crate::rng::{stream, Purpose};

/// Candidates drawn to estimate `λ_max(d)` before sampling.
pub const PILOT_SAMPLES: usize = 1000;
/// Abort when fewer than this fraction of candidates are accepted.
pub const MIN_ACCEPTANCE: f64 = 1e-6;
const MIN_ATTEMPTS_BEFORE_ABORT: u64 = 1_000_000;

/// Random planted parameters: every node has one dominant community with
/// membership in `[0.7, 1]` and membership `U(0, minor_max)` in the others;
/// `w` has unit diagonal and off-diagonal entries `U(0, off_diagonal_max)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomPlanted {
    pub minor_max: f64,
    pub off_diagonal_max: f64,
}

impl Default for RandomPlanted {
    fn default() -> Self {
        RandomPlanted {
            minor_max: 0.3,
            off_diagonal_max: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Planted {
    Random(RandomPlanted),
    /// User-supplied `u` (N rows of K) and `w` (K rows of K).
    Given { u: Vec<Vec<f64>>, w: Vec<Vec<f64>> },
}

impl Default for Planted {
    fn default() -> Self {
        Planted::Random(RandomPlanted::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n: usize,
    pub k: usize,
    /// Hyperedge count per size.
    pub dim_seq: BTreeMap<usize, usize>,
    #[serde(default)]
    pub planted: Planted,
    /// Fraction of nodes whose attribute is left equal to their dominant community.
    pub rho_match: f64,
    #[serde(default)]
    pub seed: u64,
}

impl GenConfig {
    /// The benchmark dimension sequence: 2720 hyperedges of sizes 2 to 20.
    pub fn benchmark_dim_seq() -> BTreeMap<usize, usize> {
        [
            (2, 300),
            (3, 300),
            (4, 200),
            (5, 200),
            (6, 150),
            (7, 150),
            (8, 150),
            (9, 150),
            (10, 120),
            (11, 120),
            (12, 120),
            (13, 120),
            (14, 100),
            (15, 100),
            (16, 100),
            (17, 100),
            (18, 80),
            (19, 80),
            (20, 80),
        ]
        .into_iter()
        .collect()
    }

    /// `N = 500` nodes with the benchmark dimension sequence.
    pub fn benchmark(k: usize, rho_match: f64, seed: u64) -> Self {
        GenConfig {
            n: 500,
            k,
            dim_seq: Self::benchmark_dim_seq(),
            planted: Planted::default(),
            rho_match,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.rho_match) {
            return Err(Error::Config(format!("rho_match {} outside [0, 1]", self.rho_match)));
        }
        if self.dim_seq.values().sum::<usize>() == 0 {
            return Err(Error::Config("dimension sequence requests no hyperedges".into()));
        }
        for (&d, &m) in &self.dim_seq {
            if d < 2 || d > self.n {
                return Err(Error::Config(format!("hyperedge size {d} outside [2, {}]", self.n)));
            }
            if m > 0 && log_binomial(self.n as u64, d as u64) < (m as f64).ln() - 1e-9 {
                return Err(Error::Config(format!(
                    "{m} distinct hyperedges of size {d} do not exist among {} nodes",
                    self.n
                )));
            }
        }
        if let Planted::Random(r) = &self.planted {
            if !(0.0..=1.0).contains(&r.minor_max) || r.off_diagonal_max < 0.0 {
                return Err(Error::Config("planted ranges must be nonnegative, minor_max ≤ 1".into()));
            }
        }
        Ok(())
    }
}

/// Planted `u` and `w` for the configuration (`β` is the identity when Z = K).
pub fn planted_params(config: &GenConfig) -> Result<ModelParams> {
    let (n, k) = (config.n, config.k);
    let (u, w) = match &config.planted {
        Planted::Random(r) => {
            let mut rng = stream(config.seed, Purpose::Planted, 0);
            let mut u = Array2::zeros((n, k));
            for i in 0..n {
                let dominant = rng.gen_range(0..k);
                for c in 0..k {
                    u[[i, c]] = if c == dominant {
                        rng.gen_range(0.7..=1.0)
                    } else {
                        rng.gen::<f64>() * r.minor_max
                    };
                }
            }
            let mut w = Array2::eye(k);
            for a in 0..k {
                for b in a + 1..k {
                    let v = rng.gen::<f64>() * r.off_diagonal_max;
                    w[[a, b]] = v;
                    w[[b, a]] = v;
                }
            }
            (u, w)
        }
        Planted::Given { u, w } => {
            let flat_u: Vec<f64> = u.iter().flatten().copied().collect();
            let flat_w: Vec<f64> = w.iter().flatten().copied().collect();
            let u = Array2::from_shape_vec((n, k), flat_u)
                .map_err(|_| Error::Shape(format!("planted u must be {n}x{k}")))?;
            let w = Array2::from_shape_vec((k, k), flat_w)
                .map_err(|_| Error::Shape(format!("planted w must be {k}x{k}")))?;
            (u, w)
        }
    };
    let params = ModelParams::new(u, w, Array2::eye(k))?;
    if params.constraint_violation() > 1e-12 {
        return Err(Error::Config("planted u must lie in [0,1] and w be symmetric nonnegative".into()));
    }
    Ok(params)
}

/// Sampling statistics for one hyperedge size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    pub size: usize,
    pub count: usize,
    pub attempts: u64,
    pub duplicates: u64,
    pub lambda_max: f64,
}

impl SizeStats {
    pub fn acceptance_rate(&self) -> f64 {
        self.count as f64 / self.attempts.max(1) as f64
    }
}

fn sample_size(
    size: usize,
    count: usize,
    params: &ModelParams,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Vec<usize>>, SizeStats)> {
    let n = params.num_nodes();
    let draw = |rng: &mut ChaCha8Rng| {
        let mut v = index::sample(rng, n, size).into_vec();
        v.sort_unstable();
        v
    };
    let mut lambda_max: f64 = 0.0;
    for _ in 0..PILOT_SAMPLES {
        let cand = draw(rng);
        lambda_max = lambda_max.max(edge_intensity(&cand, &params.u, &params.w)?);
    }
    if lambda_max.is_nan() || lambda_max <= 0.0 {
        return Err(Error::LowAcceptance {
            size,
            accepted: 0,
            attempts: PILOT_SAMPLES as u64,
        });
    }
    let mut accepted: HashSet<Vec<usize>> = HashSet::with_capacity(count);
    let mut edges = Vec::with_capacity(count);
    let mut attempts: u64 = 0;
    let mut duplicates: u64 = 0;
    while edges.len() < count {
        attempts += 1;
        if attempts >= MIN_ATTEMPTS_BEFORE_ABORT && (edges.len() as f64) < MIN_ACCEPTANCE * attempts as f64 {
            return Err(Error::LowAcceptance {
                size,
                accepted: edges.len(),
                attempts,
            });
        }
        let cand = draw(rng);
        let lambda = edge_intensity(&cand, &params.u, &params.w)?;
        if lambda > lambda_max {
            lambda_max = lambda;
        }
        if rng.gen::<f64>() * lambda_max >= lambda {
            continue;
        }
        if accepted.contains(&cand) {
            duplicates += 1;
            continue;
        }
        accepted.insert(cand.clone());
        edges.push(cand);
    }
    Ok((
        edges,
        SizeStats {
            size,
            count,
            attempts,
            duplicates,
            lambda_max,
        },
    ))
}

/// Samples a hypergraph whose per-size hyperedge counts equal `dim_seq`.
/// Returns the hypergraph, the planted parameters, and per-size statistics.
pub fn generate_hypergraph(config: &GenConfig) -> Result<(Hypergraph, ModelParams, Vec<SizeStats>)> {
    config.validate()?;
    let params = planted_params(config)?;
    let mut edges = Vec::new();
    let mut stats = Vec::new();
    for (&size, &count) in &config.dim_seq {
        if count == 0 {
            continue;
        }
        let mut rng = stream(config.seed, Purpose::Hyperedges, size as u64);
        let (sampled, st) = sample_size(size, count, &params, &mut rng)?;
        log::debug!(
            "size {size}: {count} accepted from {} draws (rate {:.3})",
            st.attempts,
            st.acceptance_rate()
        );
        edges.extend(sampled.into_iter().map(|e| (e, 1)));
        stats.push(st);
    }
    let h = Hypergraph::from_indices(config.n, edges)?;
    Ok((h, params, stats))
}

/// Index of the largest entry, lowest index on ties.
pub fn dominant(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (c, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = c;
        }
    }
    best
}

/// One categorical attribute with `z` levels: each node starts at its
/// dominant planted community, then a uniformly chosen set of
/// `round((1 − rho_match) N)` nodes gets a uniformly random level (which may
/// coincide with the original one).
pub fn generate_attributes(u_truth: &Array2<f64>, rho_match: f64, z: usize, rng: &mut ChaCha8Rng) -> Result<AttributeMatrix> {
    let k = u_truth.ncols();
    if z != k {
        return Err(Error::Config(format!("attribute count {z} must equal K = {k}")));
    }
    if !(0.0..=1.0).contains(&rho_match) {
        return Err(Error::Config(format!("rho_match {rho_match} outside [0, 1]")));
    }
    let n = u_truth.nrows();
    let mut labels: Vec<usize> = u_truth.rows().into_iter().map(dominant).collect();
    let shuffled = ((1.0 - rho_match) * n as f64).round() as usize;
    for i in index::sample(rng, n, shuffled.min(n)) {
        labels[i] = rng.gen_range(0..z);
    }
    AttributeMatrix::from_labels(&labels, z)
}

/// A generated dataset with its ground truth.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub hypergraph: Hypergraph,
    pub attributes: AttributeMatrix,
    pub truth: ModelParams,
    pub stats: Vec<SizeStats>,
}

pub fn generate(config: &GenConfig) -> Result<Dataset> {
    let (hypergraph, truth, stats) = generate_hypergraph(config)?;
    let mut rng = stream(config.seed, Purpose::Attributes, 0);
    let attributes = generate_attributes(&truth.u, config.rho_match, config.k, &mut rng)?;
    Ok(Dataset {
        hypergraph,
        attributes,
        truth,
        stats,
    })
}
