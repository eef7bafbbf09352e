//! Hyperedge-prediction AUC, cross-validation over `(K, γ)`, switch-one-out
//! negatives, and membership recovery scores.

use std::collections::HashSet;
use std::io::Write;

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attributes::AttributeMatrix;
use crate::em::{em_fit, FitConfig};
use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::model::{edge_intensity, log_kappa, ModelParams};
use crate::rng::{stream, Purpose};

/// Attempts at drawing a negative that is not an observed hyperedge.
pub const MAX_NEGATIVE_TRIES: usize = 100;

/// `[#(R₁ > R₀) + ½ #(R₁ = R₀)] / |R₁|` over paired scores.
pub fn auc_from_scores(positive: &[f64], negative: &[f64]) -> Result<f64> {
    if positive.is_empty() {
        return Err(Error::Config("AUC needs at least one comparison".into()));
    }
    if positive.len() != negative.len() {
        return Err(Error::Shape(format!(
            "{} positive scores vs {} negative",
            positive.len(),
            negative.len()
        )));
    }
    let mut wins = 0.0;
    for (p, n) in positive.iter().zip(negative) {
        if p > n {
            wins += 1.0;
        } else if p == n {
            wins += 0.5;
        }
    }
    Ok(wins / positive.len() as f64)
}

/// `log(λ_e / κ_e)`, the log of the expected count of `nodes`.
pub fn edge_log_mean(nodes: &[usize], params: &ModelParams) -> Result<f64> {
    let lambda = edge_intensity(nodes, &params.u, &params.w)?;
    Ok(lambda.ln() - log_kappa(nodes.len(), params.num_nodes())?)
}

/// `log P(A_e ≥ 1)` for a Poisson count with mean `λ_e / κ_e`.
///
/// Evaluated in log space: for tiny means `log(1 − e^{−m}) ≈ log m`, which
/// keeps distinct intensities distinct when `κ_e` is astronomically large.
pub fn edge_score(nodes: &[usize], params: &ModelParams) -> Result<f64> {
    let log_mean = edge_log_mean(nodes, params)?;
    if log_mean == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if log_mean < -30.0 {
        return Ok(log_mean);
    }
    Ok((-(-log_mean.exp()).exp_m1()).ln())
}

/// How negatives are paired with positive hyperedges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeMode {
    /// Uniformly random node set of the same size.
    Uniform,
    /// Swap one node of the positive for one outside it.
    Soo,
}

fn uniform_set(size: usize, num_nodes: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut v = index::sample(rng, num_nodes, size).into_vec();
    v.sort_unstable();
    v
}

fn switch_one(edge: &[usize], num_nodes: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if edge.len() >= num_nodes {
        return Err(Error::SizeExceedsNodes {
            size: edge.len() + 1,
            num_nodes,
        });
    }
    let drop = rng.gen_range(0..edge.len());
    // j-th node outside the edge, edge sorted
    let mut j = rng.gen_range(0..num_nodes - edge.len());
    for &v in edge {
        if v <= j {
            j += 1;
        } else {
            break;
        }
    }
    let mut out: Vec<usize> = edge
        .iter()
        .enumerate()
        .filter(|&(p, _)| p != drop)
        .map(|(_, &v)| v)
        .collect();
    out.push(j);
    out.sort_unstable();
    Ok(out)
}

/// Switch-one-out negatives: per edge, one member is replaced by a uniformly
/// chosen non-member. Input edges must be sorted.
pub fn soo_negatives(test_edges: &[Vec<usize>], num_nodes: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>> {
    test_edges.iter().map(|e| switch_one(e, num_nodes, rng)).collect()
}

/// `|a ∩ b| / |a ∪ b|` for sorted index sets.
pub fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let (mut i, mut j, mut common) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - common;
    if union == 0 {
        0.0
    } else {
        common as f64 / union as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeJaccard {
    pub size: usize,
    pub count: usize,
    pub mean_jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucReport {
    pub auc: f64,
    pub comparisons: usize,
    /// Negatives kept although they coincide with an observed hyperedge.
    pub resample_failures: usize,
    /// Mean Jaccard similarity between positive and negative, per size.
    pub jaccard_by_size: Vec<SizeJaccard>,
}

/// Estimates the AUC of `params` on `test_edges`, one negative per positive.
///
/// Negatives that coincide with a set in `observed` are redrawn up to
/// [`MAX_NEGATIVE_TRIES`] times and then kept.
pub fn auc_prediction(
    test_edges: &[Vec<usize>],
    params: &ModelParams,
    observed: &HashSet<Vec<usize>>,
    mode: NegativeMode,
    rng: &mut ChaCha8Rng,
) -> Result<AucReport> {
    if test_edges.is_empty() {
        return Err(Error::Config("empty test set".into()));
    }
    let n = params.num_nodes();
    let mut positive = Vec::with_capacity(test_edges.len());
    let mut negative = Vec::with_capacity(test_edges.len());
    let mut failures = 0;
    let max_size = test_edges.iter().map(Vec::len).max().unwrap_or(0);
    let mut jac = vec![(0usize, 0.0f64); max_size + 1];
    for edge in test_edges {
        if let Some(&v) = edge.iter().find(|&&v| v >= n) {
            return Err(Error::NodeOutOfRange { node: v, num_nodes: n });
        }
        if edge.len() > n {
            return Err(Error::SizeExceedsNodes {
                size: edge.len(),
                num_nodes: n,
            });
        }
        let mut tries = 0;
        let neg = loop {
            let cand = match mode {
                NegativeMode::Uniform => uniform_set(edge.len(), n, rng),
                NegativeMode::Soo => switch_one(edge, n, rng)?,
            };
            tries += 1;
            if !observed.contains(&cand) {
                break cand;
            }
            if tries >= MAX_NEGATIVE_TRIES {
                failures += 1;
                break cand;
            }
        };
        // same ranking as `edge_score`, without its saturation at 0 for large means
        positive.push(edge_log_mean(edge, params)?);
        negative.push(edge_log_mean(&neg, params)?);
        let slot = &mut jac[edge.len()];
        slot.0 += 1;
        slot.1 += jaccard(edge, &neg);
    }
    if failures > 0 {
        log::warn!("{failures} negative(s) coincide with observed hyperedges after {MAX_NEGATIVE_TRIES} tries");
    }
    Ok(AucReport {
        auc: auc_from_scores(&positive, &negative)?,
        comparisons: positive.len(),
        resample_failures: failures,
        jaccard_by_size: jac
            .into_iter()
            .enumerate()
            .filter(|(_, (c, _))| *c > 0)
            .map(|(size, (count, total))| SizeJaccard {
                size,
                count,
                mean_jaccard: total / count as f64,
            })
            .collect(),
    })
}

/// Cross-validation grid and shared fit settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvGrid {
    pub ks: Vec<usize>,
    pub gammas: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    /// Restarts and convergence controls; `k`, `gamma` and `seed` are
    /// overridden per cell.
    pub fit: FitConfig,
}

impl Default for CvGrid {
    fn default() -> Self {
        let mut gammas: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        gammas.extend([0.95, 0.99, 0.995, 1.0]);
        CvGrid {
            ks: (2..=30).collect(),
            gammas,
            folds: 5,
            seed: 0,
            fit: FitConfig::default(),
        }
    }
}

impl CvGrid {
    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.gammas.is_empty() {
            return Err(Error::Config("empty (K, gamma) grid".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("at least 2 folds are required".into()));
        }
        for &k in &self.ks {
            if k == 0 {
                return Err(Error::Config("K must be at least 1".into()));
            }
        }
        for &g in &self.gammas {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::Config(format!("gamma {g} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub k: usize,
    pub gamma: f64,
    pub fold: usize,
    pub auc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub k: usize,
    pub gamma: f64,
    pub mean_auc: f64,
    pub std_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<CvRow>,
    pub cells: Vec<CellSummary>,
    pub selected: CellSummary,
}

impl EvalReport {
    /// CSV with one row per `(K, γ, fold)`, each cell followed by its `mean`
    /// and `std` rows, and a closing row for the selected cell (fold column
    /// `selected`, AUC as mean).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "K,gamma,fold,auc")?;
        let folds = self.rows.len() / self.cells.len().max(1);
        for (chunk, c) in self.rows.chunks(folds.max(1)).zip(&self.cells) {
            for r in chunk {
                writeln!(out, "{},{},{},{}", r.k, r.gamma, r.fold, r.auc)?;
            }
            writeln!(out, "{},{},mean,{}", c.k, c.gamma, c.mean_auc)?;
            writeln!(out, "{},{},std,{}", c.k, c.gamma, c.std_auc)?;
        }
        let s = &self.selected;
        writeln!(out, "{},{},selected,{}", s.k, s.gamma, s.mean_auc)?;
        Ok(())
    }
}

/// Random partition of `0..num_edges` into `folds` near-equal parts.
pub fn fold_assignment(num_edges: usize, folds: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..num_edges).collect();
    order.shuffle(rng);
    let mut parts = vec![Vec::new(); folds];
    for (pos, id) in order.into_iter().enumerate() {
        parts[pos % folds].push(id);
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    parts
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// k-fold cross-validation of the test AUC over the `(K, γ)` grid.
///
/// Each fold is held out in turn; the model is fitted on the remaining
/// hyperedges (same node set and `D`) and scored with uniform negatives that
/// avoid every observed hyperedge. The selected cell maximizes mean AUC,
/// ties going to smaller `K` and then smaller `γ`.
pub fn kfold_cv(h: &Hypergraph, x: &AttributeMatrix, grid: &CvGrid) -> Result<EvalReport> {
    grid.validate()?;
    if h.num_edges() < grid.folds {
        return Err(Error::Config(format!(
            "{} hyperedges cannot fill {} folds",
            h.num_edges(),
            grid.folds
        )));
    }
    let folds = fold_assignment(h.num_edges(), grid.folds, &mut stream(grid.seed, Purpose::Folds, 0));
    let observed = h.edge_set();
    let trains: Vec<Hypergraph> = (0..grid.folds)
        .map(|f| {
            let ids: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, p)| p.iter().copied())
                .collect();
            let mut ids = ids;
            ids.sort_unstable();
            h.restrict(&ids)
        })
        .collect();
    let tests: Vec<Vec<Vec<usize>>> = folds
        .iter()
        .map(|p| p.iter().map(|&id| h.edge(id).nodes().to_vec()).collect())
        .collect();

    let mut jobs = Vec::new();
    for &k in &grid.ks {
        for &gamma in &grid.gammas {
            for fold in 0..grid.folds {
                jobs.push((k, gamma, fold));
            }
        }
    }
    let run = |&(k, gamma, fold): &(usize, f64, usize)| -> Result<CvRow> {
        let config = FitConfig {
            k,
            gamma,
            seed: grid.seed,
            ..grid.fit.clone()
        };
        let fit = em_fit(&trains[fold], x, &config)?;
        let mut rng = stream(grid.seed, Purpose::Negatives, fold as u64);
        let report = auc_prediction(&tests[fold], &fit.params, &observed, NegativeMode::Uniform, &mut rng)?;
        Ok(CvRow {
            k,
            gamma,
            fold,
            auc: report.auc,
        })
    };
    let rows = run_jobs(&jobs, grid.fit.parallel, run)?;

    let mut cells = Vec::new();
    for chunk in rows.chunks(grid.folds) {
        let aucs: Vec<f64> = chunk.iter().map(|r| r.auc).collect();
        let (mean_auc, std_auc) = mean_std(&aucs);
        cells.push(CellSummary {
            k: chunk[0].k,
            gamma: chunk[0].gamma,
            mean_auc,
            std_auc,
        });
    }
    let selected = *cells
        .iter()
        .reduce(|best, c| {
            let better = c.mean_auc > best.mean_auc
                || (c.mean_auc == best.mean_auc && (c.k, c.gamma) < (best.k, best.gamma));
            if better {
                c
            } else {
                best
            }
        })
        .expect("grid is nonempty");
    Ok(EvalReport { rows, cells, selected })
}

#[cfg(feature = "parallel")]
fn run_jobs<J: Sync, T: Send>(jobs: &[J], parallel: bool, f: impl Fn(&J) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    if parallel {
        jobs.par_iter().map(f).collect()
    } else {
        jobs.iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn run_jobs<J, T>(jobs: &[J], _parallel: bool, f: impl Fn(&J) -> Result<T>) -> Result<Vec<T>> {
    jobs.iter().map(f).collect()
}

/// Injections tried exhaustively before falling back to greedy matching.
const EXHAUSTIVE_LIMIT: f64 = 2e5;

/// Mean row-wise cosine similarity between two membership matrices after
/// relabeling the communities of the narrower one to best match the other.
///
/// Rows are compared in the wider column space; rows that are zero in
/// either matrix contribute 0. Since row norms do not depend on the
/// labeling, the score is linear in the assignment and the matching is exact
/// (exhaustive) for small `K`, greedy on the column table otherwise.
pub fn cosine_similarity(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.nrows(), b.nrows(), "membership matrices must cover the same nodes");
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let (small, large) = if a.ncols() <= b.ncols() { (a, b) } else { (b, a) };
    let (ks, kl) = (small.ncols(), large.ncols());
    let mut table = Array2::<f64>::zeros((ks, kl));
    for i in 0..n {
        let rs = small.row(i);
        let rl = large.row(i);
        let norm = rs.dot(&rs).sqrt() * rl.dot(&rl).sqrt();
        if norm == 0.0 {
            continue;
        }
        for p in 0..ks {
            if rs[p] == 0.0 {
                continue;
            }
            for q in 0..kl {
                table[[p, q]] += rs[p] * rl[q] / norm;
            }
        }
    }
    let injections: f64 = (0..ks).map(|t| (kl - t) as f64).product();
    let best = if injections <= EXHAUSTIVE_LIMIT {
        best_injection(&table)
    } else {
        greedy_injection(&table)
    };
    (best / n as f64).clamp(0.0, 1.0)
}

fn best_injection(table: &Array2<f64>) -> f64 {
    fn go(table: &Array2<f64>, row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == table.nrows() {
            *best = best.max(acc);
            return;
        }
        for q in 0..table.ncols() {
            if !used[q] {
                used[q] = true;
                go(table, row + 1, used, acc + table[[row, q]], best);
                used[q] = false;
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    go(table, 0, &mut vec![false; table.ncols()], 0.0, &mut best);
    best.max(0.0)
}

fn greedy_injection(table: &Array2<f64>) -> f64 {
    let (ks, kl) = table.dim();
    let mut row_used = vec![false; ks];
    let mut col_used = vec![false; kl];
    let mut total = 0.0;
    for _ in 0..ks {
        let mut pick = None;
        let mut best = f64::NEG_INFINITY;
        for p in (0..ks).filter(|&p| !row_used[p]) {
            for q in (0..kl).filter(|&q| !col_used[q]) {
                if table[[p, q]] > best {
                    best = table[[p, q]];
                    pick = Some((p, q));
                }
            }
        }
        let (p, q) = pick.expect("free row and column remain");
        row_used[p] = true;
        col_used[q] = true;
        total += best;
    }
    total
}
