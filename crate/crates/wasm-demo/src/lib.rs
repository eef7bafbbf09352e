//! Browser bindings: build a planted attributed hypergraph, fit it, and sweep
//! the balance between structure and attributes.

use hycosbm::eval::cosine_similarity;
use hycosbm::synth::{dominant, generate, Dataset, GenConfig, Planted};
use hycosbm::{em_fit, FitConfig};
use wasm_bindgen::prelude::*;

fn js_err(e: hycosbm::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// The benchmark size profile, rescaled to `n` nodes. Sizes above `n / 2`
/// are dropped so that every size stays far from saturation.
fn scaled_sequence(n: usize) -> std::collections::BTreeMap<usize, usize> {
    GenConfig::benchmark_dim_seq()
        .into_iter()
        .filter(|&(d, _)| d <= n / 2)
        .map(|(d, c)| (d, ((c * n) as f64 / 500.0).round().max(1.0) as usize))
        .collect()
}

#[wasm_bindgen]
pub struct Demo {
    data: Dataset,
    k: usize,
}

#[wasm_bindgen]
impl Demo {
    /// Samples a hypergraph on `n` nodes with `k` planted communities and
    /// one attribute set to the dominant community on a `rho_match` fraction
    /// of nodes and drawn at random elsewhere.
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, k: usize, rho_match: f64, seed: u32) -> Result<Demo, JsError> {
        let config = GenConfig {
            n,
            k,
            dim_seq: scaled_sequence(n),
            planted: Planted::default(),
            rho_match,
            seed: seed.into(),
        };
        let data = generate(&config).map_err(js_err)?;
        Ok(Demo { data, k })
    }

    #[wasm_bindgen(getter)]
    pub fn num_nodes(&self) -> usize {
        self.data.hypergraph.num_nodes()
    }

    #[wasm_bindgen(getter)]
    pub fn num_edges(&self) -> usize {
        self.data.hypergraph.num_edges()
    }

    #[wasm_bindgen(getter)]
    pub fn k(&self) -> usize {
        self.k
    }

    /// Planted memberships, row-major `N × K`.
    pub fn truth(&self) -> Vec<f64> {
        self.data.truth.u.iter().copied().collect()
    }

    /// Dominant planted community of each node.
    pub fn truth_labels(&self) -> Vec<u32> {
        self.data.truth.u.rows().into_iter().map(|r| dominant(r) as u32).collect()
    }

    /// Attribute level of each node.
    pub fn attribute_labels(&self) -> Vec<u32> {
        let x = &self.data.attributes;
        (0..x.num_nodes())
            .map(|i| (0..x.num_attributes()).position(|z| x.get(i, z)).unwrap_or(0) as u32)
            .collect()
    }

    /// Fits `k` communities with balance `gamma`.
    pub fn fit(&self, k: usize, gamma: f64, restarts: usize, seed: u32) -> Result<FitView, JsError> {
        let config = FitConfig {
            restarts,
            ..FitConfig::new(k, gamma, seed.into())
        };
        let fit = em_fit(&self.data.hypergraph, &self.data.attributes, &config).map_err(js_err)?;
        Ok(FitView {
            cosine: cosine_similarity(&self.data.truth.u, &fit.params.u),
            loglik: fit.final_loglik,
            iterations: fit.iterations_run,
            k,
            memberships: fit.params.u.iter().copied().collect(),
        })
    }

    /// Cosine similarity to the planted memberships for each `gamma`.
    pub fn sweep(&self, k: usize, gammas: Vec<f64>, restarts: usize, seed: u32) -> Result<Vec<f64>, JsError> {
        gammas
            .into_iter()
            .map(|g| self.fit(k, g, restarts, seed).map(|f| f.cosine))
            .collect()
    }
}

#[wasm_bindgen]
pub struct FitView {
    cosine: f64,
    loglik: f64,
    iterations: usize,
    k: usize,
    memberships: Vec<f64>,
}

#[wasm_bindgen]
impl FitView {
    #[wasm_bindgen(getter)]
    pub fn cosine(&self) -> f64 {
        self.cosine
    }

    #[wasm_bindgen(getter)]
    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    #[wasm_bindgen(getter)]
    pub fn k(&self) -> usize {
        self.k
    }

    /// Fitted memberships, row-major `N × K`.
    pub fn memberships(&self) -> Vec<f64> {
        self.memberships.clone()
    }
}
