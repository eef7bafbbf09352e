//! Model parameters and the likelihood of hyperedges and attributes.
//!
//! Hyperedge weights are Poisson with mean `λ_e / κ_e`, where
//! `λ_e = Σ_{i<j∈e} u_iᵀ w u_j` and `κ_d = d(d−1)/2 · binom(N−2, d−2)`.
//! Attributes are Bernoulli with success probability `π = u β`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::attributes::AttributeMatrix;
use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;

/// Lower clamp applied to every argument of a logarithm.
pub const LOG_FLOOR: f64 = 1e-30;

/// Number of communities and the structure/attribute balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub k: usize,
    pub gamma: f64,
}

impl Hyperparams {
    pub fn new(k: usize, gamma: f64) -> Result<Self> {
        let hp = Hyperparams { k, gamma };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        Ok(())
    }
}

/// Memberships `u` (N×K), affinity `w` (K×K) and attribute mixing `β` (K×Z).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub u: Array2<f64>,
    pub w: Array2<f64>,
    pub beta: Array2<f64>,
}

impl ModelParams {
    pub fn new(u: Array2<f64>, w: Array2<f64>, beta: Array2<f64>) -> Result<Self> {
        let p = ModelParams { u, w, beta };
        p.check_shapes()?;
        Ok(p)
    }

    pub fn num_nodes(&self) -> usize {
        self.u.nrows()
    }

    pub fn num_communities(&self) -> usize {
        self.u.ncols()
    }

    pub fn num_attributes(&self) -> usize {
        self.beta.ncols()
    }

    pub fn check_shapes(&self) -> Result<()> {
        let k = self.u.ncols();
        if self.w.dim() != (k, k) {
            return Err(Error::Shape(format!("w is {:?}, expected ({k}, {k})", self.w.dim())));
        }
        if self.beta.nrows() != k {
            return Err(Error::Shape(format!(
                "beta has {} rows, expected {k}",
                self.beta.nrows()
            )));
        }
        Ok(())
    }

    /// Largest violation of the parameter constraints: `u ∈ [0,1]`, `w`
    /// symmetric and nonnegative, columns of `β` summing to one.
    pub fn constraint_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for &v in &self.u {
            worst = worst.max(-v).max(v - 1.0);
            if !v.is_finite() {
                return f64::INFINITY;
            }
        }
        let k = self.w.nrows();
        for a in 0..k {
            for b in 0..k {
                let v = self.w[[a, b]];
                if !v.is_finite() {
                    return f64::INFINITY;
                }
                worst = worst.max(-v).max((v - self.w[[b, a]]).abs());
            }
        }
        for col in self.beta.columns() {
            worst = worst.max((col.sum() - 1.0).abs());
            for &v in col {
                worst = worst.max(-v);
            }
        }
        worst
    }
}

/// `log binom(n, k)` by direct summation of logs; `-inf` when `k > n`.
pub fn log_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (1..=k).map(|t| ((n - k + t) as f64 / t as f64).ln()).sum()
}

/// `log κ_d` with `κ_d = d(d−1)/2 · binom(N−2, d−2)`.
pub fn log_kappa(size: usize, num_nodes: usize) -> Result<f64> {
    if size < 2 {
        return Err(Error::EdgeTooSmall { index: 0, size });
    }
    if size > num_nodes {
        return Err(Error::SizeExceedsNodes { size, num_nodes });
    }
    let pairs = (size * (size - 1)) as f64 / 2.0;
    Ok(pairs.ln() + log_binomial((num_nodes - 2) as u64, (size - 2) as u64))
}

/// Normalizer `κ_d`. Overflows to `inf` for very large `N` and `d`; use
/// [`log_kappa`] where that matters.
pub fn kappa(size: usize, num_nodes: usize) -> Result<f64> {
    log_kappa(size, num_nodes).map(f64::exp)
}

/// Coefficient `C = Σ_{d=2}^{D} binom(N−2, d−2) / κ_d` of the all-pairs
/// penalty. The binomials cancel, leaving the telescoping sum `2(1 − 1/D)`.
pub fn budget_constant(_num_nodes: usize, max_size: usize) -> f64 {
    if max_size < 2 {
        return 0.0;
    }
    2.0 * (1.0 - 1.0 / max_size as f64)
}

/// Per-hypergraph constants shared by the likelihood and the updates.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralConstants {
    pub c: f64,
    /// `log κ_d` indexed by `d`; entries below 2 are unused.
    pub log_kappa: Vec<f64>,
}

impl StructuralConstants {
    pub fn new(num_nodes: usize, max_size: usize) -> Result<Self> {
        let mut log_kappa = vec![f64::NAN; max_size + 1];
        for (d, slot) in log_kappa.iter_mut().enumerate().skip(2) {
            *slot = self::log_kappa(d, num_nodes)?;
        }
        Ok(StructuralConstants {
            c: budget_constant(num_nodes, max_size),
            log_kappa,
        })
    }

    pub fn for_hypergraph(h: &Hypergraph) -> Result<Self> {
        Self::new(h.num_nodes(), h.max_size())
    }
}

/// `λ_e = Σ_{i<j∈e} u_iᵀ w u_j`, evaluated as `½(s_eᵀ w s_e − Σ_{i∈e} u_iᵀ w u_i)`
/// with `s_e = Σ_{i∈e} u_i`.
pub fn edge_intensity(nodes: &[usize], u: &Array2<f64>, w: &Array2<f64>) -> Result<f64> {
    if nodes.len() < 2 {
        return Err(Error::EdgeTooSmall {
            index: 0,
            size: nodes.len(),
        });
    }
    let k = u.ncols();
    let mut s = Array1::zeros(k);
    let mut self_terms = 0.0;
    for &i in nodes {
        let ui = u.row(i);
        s += &ui;
        self_terms += bilinear(ui, w.view(), ui);
    }
    let lambda = 0.5 * (bilinear(s.view(), w.view(), s.view()) - self_terms);
    Ok(lambda.max(0.0))
}

/// `aᵀ w b`.
pub(crate) fn bilinear(a: ArrayView1<f64>, w: ArrayView2<f64>, b: ArrayView1<f64>) -> f64 {
    let mut total = 0.0;
    for (ka, &va) in a.iter().enumerate() {
        if va == 0.0 {
            continue;
        }
        let row = w.row(ka);
        let mut inner = 0.0;
        for (kb, &vb) in b.iter().enumerate() {
            inner += row[kb] * vb;
        }
        total += va * inner;
    }
    total
}

/// `π = u β`, the Bernoulli probability of each node carrying each attribute.
pub fn attribute_prob(u: &Array2<f64>, beta: &Array2<f64>) -> Array2<f64> {
    u.dot(beta)
}

/// All-pairs sum `Σ_{i<j∈V} u_iᵀ w u_j` in `O(NK + K²)`.
pub(crate) fn all_pairs_intensity(u: &Array2<f64>, w: &Array2<f64>) -> f64 {
    let s = u.sum_axis(Axis(0));
    let total = bilinear(s.view(), w.view(), s.view());
    let self_terms: f64 = u.rows().into_iter().map(|r| bilinear(r, w.view(), r)).sum();
    (0.5 * (total - self_terms)).max(0.0)
}

/// Structural log-likelihood with parameter-independent constants dropped:
/// `L_A = −C Σ_{i<j∈V} u_iᵀ w u_j + Σ_{e∈E} A_e log λ_e`.
pub fn loglik_structure(h: &Hypergraph, u: &Array2<f64>, w: &Array2<f64>) -> f64 {
    loglik_structure_counted(h, u, w).0
}

/// As [`loglik_structure`], also returning how many observed hyperedges had
/// their intensity clamped at [`LOG_FLOOR`].
pub fn loglik_structure_counted(h: &Hypergraph, u: &Array2<f64>, w: &Array2<f64>) -> (f64, usize) {
    let c = budget_constant(h.num_nodes(), h.max_size());
    let k = u.ncols();
    let wu = u.dot(&w.t());
    let self_terms: Vec<f64> = u.rows().into_iter().zip(wu.rows()).map(|(a, b)| a.dot(&b)).collect();
    let mut s = vec![0.0; k];
    let mut ws = vec![0.0; k];
    let mut clamped = 0;
    let mut observed = 0.0;
    for e in h.edges() {
        s.fill(0.0);
        ws.fill(0.0);
        let mut diagonal = 0.0;
        for &i in e.nodes() {
            for q in 0..k {
                s[q] += u[[i, q]];
                ws[q] += wu[[i, q]];
            }
            diagonal += self_terms[i];
        }
        let pairs: f64 = s.iter().zip(&ws).map(|(a, b)| a * b).sum();
        let lambda = (0.5 * (pairs - diagonal)).max(0.0);
        if lambda < LOG_FLOOR {
            clamped += 1;
        }
        observed += e.weight() as f64 * lambda.max(LOG_FLOOR).ln();
    }
    if clamped > 0 {
        log::debug!("{clamped} observed hyperedge(s) with intensity below {LOG_FLOOR:e}");
    }
    (-c * all_pairs_intensity(u, w) + observed, clamped)
}

/// Attribute log-likelihood
/// `Σ_{i,z} x_iz log Σ_k u_ik β_kz + (1 − x_iz) log Σ_k (1 − u_ik) β_kz`.
pub fn loglik_attributes(x: &AttributeMatrix, u: &Array2<f64>, beta: &Array2<f64>) -> f64 {
    let xm = x.matrix();
    let (n, z_count) = xm.dim();
    let k = u.ncols();
    let mut total = 0.0;
    for i in 0..n {
        for z in 0..z_count {
            let present = xm[[i, z]] != 0.0;
            let mut arg = 0.0;
            for c in 0..k {
                let m = if present { u[[i, c]] } else { 1.0 - u[[i, c]] };
                arg += m * beta[[c, z]];
            }
            total += arg.clamp(LOG_FLOOR, 1.0).ln();
        }
    }
    total
}

/// The three log-likelihood values tracked during fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLik {
    pub structure: f64,
    pub attributes: f64,
    pub total: f64,
}

/// `L = (1 − γ) L_A + γ L_X`.
pub fn total_loglik(h: &Hypergraph, x: &AttributeMatrix, params: &ModelParams, gamma: f64) -> LogLik {
    let structure = loglik_structure(h, &params.u, &params.w);
    let attributes = if x.num_attributes() > 0 {
        loglik_attributes(x, &params.u, &params.beta)
    } else {
        0.0
    };
    LogLik {
        structure,
        attributes,
        total: blend(structure, attributes, gamma),
    }
}

pub fn blend(structure: f64, attributes: f64, gamma: f64) -> f64 {
    let mut total = 0.0;
    if gamma != 1.0 {
        total += (1.0 - gamma) * structure;
    }
    if gamma != 0.0 {
        total += gamma * attributes;
    }
    total
}

/// On-disk form of fitted parameters. Matrices are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDocument {
    pub num_nodes: usize,
    pub k: usize,
    pub z: usize,
    pub gamma: f64,
    pub seed: u64,
    pub loglik: f64,
    #[serde(default)]
    pub max_size: usize,
    #[serde(default)]
    pub node_ids: Vec<String>,
    #[serde(default)]
    pub attribute_names: Vec<String>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ParamsDocument {
    pub fn from_params(params: &ModelParams, gamma: f64, seed: u64, loglik: f64) -> Self {
        ParamsDocument {
            num_nodes: params.num_nodes(),
            k: params.num_communities(),
            z: params.num_attributes(),
            gamma,
            seed,
            loglik,
            max_size: 0,
            node_ids: Vec::new(),
            attribute_names: Vec::new(),
            u: params.u.iter().copied().collect(),
            w: params.w.iter().copied().collect(),
            beta: params.beta.iter().copied().collect(),
        }
    }

    pub fn to_params(&self) -> Result<ModelParams> {
        let shape = |v: &[f64], r: usize, c: usize, name: &str| {
            Array2::from_shape_vec((r, c), v.to_vec())
                .map_err(|_| Error::Shape(format!("{name} has {} values, expected {r}x{c}", v.len())))
        };
        ModelParams::new(
            shape(&self.u, self.num_nodes, self.k, "u")?,
            shape(&self.w, self.k, self.k, "w")?,
            shape(&self.beta, self.k, self.z, "beta")?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn naive_intensity(nodes: &[usize], u: &Array2<f64>, w: &Array2<f64>) -> f64 {
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

    #[test]
    fn intensity_examples() {
        let u = array![[1.0], [1.0]];
        let w = array![[1.0]];
        assert_eq!(edge_intensity(&[0, 1], &u, &w).unwrap(), 1.0);

        let u = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let w = array![[1.0, 2.0], [2.0, 3.0]];
        assert_eq!(naive_intensity(&[1, 2, 3], &u, &w), 10.0);
        assert_relative_eq!(edge_intensity(&[1, 2, 3], &u, &w).unwrap(), 10.0, epsilon = 1e-12);

        let z = Array2::zeros((3, 2));
        assert_eq!(edge_intensity(&[0, 1, 2], &z, &w).unwrap(), 0.0);
        assert!(edge_intensity(&[0], &u, &w).is_err());
    }

    #[test]
    fn kappa_values() {
        for n in [2, 5, 100, 10_000] {
            assert_relative_eq!(kappa(2, n).unwrap(), 1.0);
        }
        // 3 pairs times binom(8, 1)
        assert_relative_eq!(kappa(3, 10).unwrap(), 24.0, max_relative = 1e-14);
        let ratio = (log_binomial(98, 3) - log_kappa(5, 100).unwrap()).exp();
        assert_relative_eq!(ratio, 0.1, max_relative = 1e-13);
        assert!(kappa(11, 10).is_err());
        // binom(4998, 48) overflows u64 but not the log form
        assert!(log_kappa(50, 5000).unwrap().is_finite());
    }

    #[test]
    fn budget_examples() {
        assert_eq!(budget_constant(10, 2), 1.0);
        assert_relative_eq!(budget_constant(10, 3), 4.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(budget_constant(5000, 1000), 1.998, max_relative = 1e-15);
    }

    #[test]
    fn attribute_prob_examples() {
        let beta = array![[0.2, 0.6], [0.8, 0.4]];
        let u = array![[1.0, 0.0], [0.0, 0.0], [0.5, 0.5]];
        let pi = attribute_prob(&u, &beta);
        assert_eq!(pi.row(0).to_vec(), vec![0.2, 0.6]);
        assert_eq!(pi.row(1).to_vec(), vec![0.0, 0.0]);
        assert_relative_eq!(pi[[2, 0]], 0.5);
    }

    #[test]
    fn structure_examples() {
        let h = Hypergraph::from_indices(2, vec![(vec![0, 1], 1)]).unwrap();
        let u = array![[1.0], [1.0]];
        assert_relative_eq!(loglik_structure(&h, &u, &array![[1.0]]), -1.0, epsilon = 1e-15);

        let (v, clamped) = loglik_structure_counted(&h, &Array2::zeros((2, 1)), &array![[1.0]]);
        assert_eq!(clamped, 1);
        assert_relative_eq!(v, LOG_FLOOR.ln());
    }

    #[test]
    fn attribute_examples() {
        let x = AttributeMatrix::from_dense(array![[1.0]]).unwrap();
        assert_relative_eq!(
            loglik_attributes(&x, &array![[0.5]], &array![[1.0]]),
            -std::f64::consts::LN_2,
            epsilon = 1e-12
        );
        assert_eq!(loglik_attributes(&x, &array![[1.0]], &array![[1.0]]), 0.0);

        let x = AttributeMatrix::from_dense(array![[0.0]]).unwrap();
        let v = loglik_attributes(&x, &array![[1.0, 1.0]], &array![[0.5], [0.5]]);
        assert_relative_eq!(v, LOG_FLOOR.ln());
    }

    #[test]
    fn blend_is_linear() {
        assert_eq!(blend(-2.0, -4.0, 0.5), -3.0);
        assert_eq!(blend(-2.0, f64::NEG_INFINITY, 0.0), -2.0);
        assert_eq!(blend(f64::NEG_INFINITY, -4.0, 1.0), -4.0);
    }

    #[test]
    fn document_round_trip() {
        let p = ModelParams::new(
            array![[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]],
            array![[1.0, 0.5], [0.5, 2.0]],
            array![[0.25, 1.0, 0.0], [0.75, 0.0, 1.0]],
        )
        .unwrap();
        let doc = ParamsDocument::from_params(&p, 0.3, 7, -12.5);
        let text = serde_json::to_string(&doc).unwrap();
        let back: ParamsDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_params().unwrap(), p);
    }
}
