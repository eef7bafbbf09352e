//! Variational EM for the joint hyperedge/attribute model.
//!
//! The auxiliary distributions `ρ`, `h` and `h′` that make the Jensen bounds
//! tight are never stored. Every update consumes them through the sums they
//! appear in, which collapse to per-hyperedge aggregates `s_e = Σ_{i∈e} u_i`:
//!
//! * `Σ_{j≠i∈e} Σ_q ρ_ijkq = u_ik [w (s_e − u_i)]_k / λ_e`
//! * `Σ_{i<j∈e} (ρ_ijkq + ρ_ijqk) = w_kq (s_ek s_eq − Σ_{i∈e} u_ik u_iq) / λ_e`
//!
//! One iteration costs `O(K (K + Z) (N + |E|) + K Σ_e |e|)`.

use ndarray::{Array2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attributes::AttributeMatrix;
use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::rng::{stream, Purpose};
use crate::model::{budget_constant, total_loglik, Hyperparams, LogLik, ModelParams, LOG_FLOOR};

/// Controls for [`em_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub k: usize,
    pub gamma: f64,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    /// Iterations between log-likelihood evaluations.
    pub check_every: usize,
    /// Absolute change in total log-likelihood counted as converged.
    pub tol: f64,
    /// Consecutive converged checks required to stop.
    pub patience: usize,
    /// Upper bound on `K (K + Z) (N + |E|)`.
    pub memory_budget: u64,
    /// Run restarts on the rayon pool when the `parallel` feature is on.
    /// Results do not depend on this flag.
    pub parallel: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            k: 2,
            gamma: 0.0,
            seed: 0,
            restarts: 10,
            max_iters: 1000,
            check_every: 10,
            tol: 1e-2,
            patience: 2,
            memory_budget: 1 << 32,
            parallel: false,
        }
    }
}

impl FitConfig {
    pub fn new(k: usize, gamma: f64, seed: u64) -> Self {
        FitConfig {
            k,
            gamma,
            seed,
            ..Default::default()
        }
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            k: self.k,
            gamma: self.gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hyperparams().validate()?;
        for (name, v) in [
            ("restarts", self.restarts),
            ("max_iters", self.max_iters),
            ("check_every", self.check_every),
            ("patience", self.patience),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::Config("tol must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Counts of guarded numerical events. None of these should occur on
/// well-posed inputs; they are reported rather than silently absorbed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Observed hyperedges whose intensity fell below the log floor.
    pub clamped_intensities: u64,
    /// Quadratic updates with a non-finite or negative discriminant.
    pub discriminant_clamps: u64,
    /// `w` entries with an all-zero denominator, set to 0.
    pub zero_w_denominators: u64,
    /// `β` columns with an all-zero numerator, reset to uniform.
    pub degenerate_beta_columns: u64,
    /// `γ = 0` updates with zero denominator and positive numerator, set to 1.
    pub saturated_memberships: u64,
}

impl Diagnostics {
    pub fn merge(&mut self, other: &Diagnostics) {
        self.clamped_intensities += other.clamped_intensities;
        self.discriminant_clamps += other.discriminant_clamps;
        self.zero_w_denominators += other.zero_w_denominators;
        self.degenerate_beta_columns += other.degenerate_beta_columns;
        self.saturated_memberships += other.saturated_memberships;
    }

    pub fn is_clean(&self) -> bool {
        *self == Diagnostics::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub structure: f64,
    pub attributes: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub index: usize,
    pub final_loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub aborted: Option<String>,
    /// Log-likelihood at iteration 0 and at every check.
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ModelParams,
    pub final_loglik: f64,
    pub loglik: LogLik,
    pub iterations_run: usize,
    pub converged: bool,
    pub best_restart: usize,
    /// Log-likelihood at iteration 0 and at every check of the best restart.
    pub trace: Vec<TracePoint>,
    pub restarts: Vec<RestartSummary>,
    pub diagnostics: Diagnostics,
}

/// Per-hyperedge aggregates of the current `(u, w)`.
struct EdgeAggregates {
    /// `s_e`, one row per hyperedge.
    sums: Array2<f64>,
    /// `w s_e`, one row per hyperedge.
    projected: Array2<f64>,
    /// `A_e / λ_e` with `λ_e` floored at [`LOG_FLOOR`].
    ratio: Vec<f64>,
}

fn edge_aggregates(h: &Hypergraph, u: &Array2<f64>, wu: &Array2<f64>, diag: &mut Diagnostics) -> EdgeAggregates {
    let k = u.ncols();
    let m = h.num_edges();
    let u_flat = u.as_slice().expect("standard layout");
    let wu_flat = wu.as_slice().expect("standard layout");
    let self_terms: Vec<f64> = u_flat
        .chunks_exact(k.max(1))
        .zip(wu_flat.chunks_exact(k.max(1)))
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum())
        .collect();
    let mut sums = vec![0.0; m * k];
    let mut projected = vec![0.0; m * k];
    let mut ratio = Vec::with_capacity(m);
    for (id, e) in h.edges().iter().enumerate() {
        let s = &mut sums[id * k..(id + 1) * k];
        let ws = &mut projected[id * k..(id + 1) * k];
        let mut diagonal = 0.0;
        for &i in e.nodes() {
            let (ui, wui) = (&u_flat[i * k..(i + 1) * k], &wu_flat[i * k..(i + 1) * k]);
            for q in 0..k {
                s[q] += ui[q];
                ws[q] += wui[q];
            }
            diagonal += self_terms[i];
        }
        let pairs: f64 = s.iter().zip(ws.iter()).map(|(x, y)| x * y).sum();
        let lambda = 0.5 * (pairs - diagonal);
        if lambda < LOG_FLOOR {
            diag.clamped_intensities += 1;
        }
        ratio.push(e.weight() as f64 / lambda.max(LOG_FLOOR));
    }
    EdgeAggregates {
        sums: Array2::from_shape_vec((m, k), sums).expect("shape"),
        projected: Array2::from_shape_vec((m, k), projected).expect("shape"),
        ratio,
    }
}

/// Rows `w u_i` for every node.
fn node_projections(u: &Array2<f64>, w: &Array2<f64>) -> Array2<f64> {
    u.dot(&w.t())
}

/// Closed-form update of the affinity matrix with the memberships held fixed.
pub fn update_w(h: &Hypergraph, u: &Array2<f64>, w_old: &Array2<f64>, diag: &mut Diagnostics) -> Array2<f64> {
    let (n, k) = u.dim();
    let wu = node_projections(u, w_old);
    let agg = edge_aggregates(h, u, &wu, diag);

    // Σ_e (A_e/λ_e) (s_e s_eᵀ − Σ_{i∈e} u_i u_iᵀ)
    let mut numerator = Array2::<f64>::zeros((k, k));
    let mut node_ratio = vec![0.0; n];
    for (id, e) in h.edges().iter().enumerate() {
        let f = agg.ratio[id];
        let s = agg.sums.row(id);
        for a in 0..k {
            let fa = f * s[a];
            for b in 0..k {
                numerator[[a, b]] += fa * s[b];
            }
        }
        for &i in e.nodes() {
            node_ratio[i] += f;
        }
    }
    let total = u.sum_axis(Axis(0));
    let mut denominator = Array2::<f64>::zeros((k, k));
    for a in 0..k {
        for b in 0..k {
            denominator[[a, b]] = total[a] * total[b];
        }
    }
    for (i, row) in u.rows().into_iter().enumerate() {
        let r = node_ratio[i];
        for a in 0..k {
            let ua = row[a];
            for b in 0..k {
                numerator[[a, b]] -= r * ua * row[b];
                denominator[[a, b]] -= ua * row[b];
            }
        }
    }

    let c = budget_constant(h.num_nodes(), h.max_size());
    let mut w_new = Array2::zeros((k, k));
    for a in 0..k {
        for b in a..k {
            let num = (numerator[[a, b]] + numerator[[b, a]]).max(0.0);
            let den = c * (denominator[[a, b]] + denominator[[b, a]]);
            let v = if den > 0.0 {
                w_old[[a, b]] * num / den
            } else {
                diag.zero_w_denominators += 1;
                0.0
            };
            w_new[[a, b]] = v;
            w_new[[b, a]] = v;
        }
    }
    w_new
}

/// Posterior-weight sums of the attribute bounds:
/// `hx[i,k] = Σ_z x_iz h_izk` and `hbar[i,k] = Σ_z (1 − x_iz) h′_izk`.
fn attribute_responsibilities(x: &AttributeMatrix, u: &Array2<f64>, beta: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (n, k) = u.dim();
    let xm = x.matrix();
    let mut hx = Array2::zeros((n, k));
    let mut hbar = Array2::zeros((n, k));
    let mut scratch = vec![0.0; k];
    for i in 0..n {
        for z in 0..xm.ncols() {
            let present = xm[[i, z]] != 0.0;
            let mut norm = 0.0;
            for c in 0..k {
                let m = if present { u[[i, c]] } else { 1.0 - u[[i, c]] };
                scratch[c] = beta[[c, z]] * m;
                norm += scratch[c];
            }
            if norm <= 0.0 {
                continue;
            }
            let target = if present { &mut hx } else { &mut hbar };
            for c in 0..k {
                target[[i, c]] += scratch[c] / norm;
            }
        }
    }
    (hx, hbar)
}

/// Closed-form update of `β`: each column is the normalized sum of the
/// tight-bound weights `x_iz h_izk + (1 − x_iz) h′_izk` over nodes.
pub fn update_beta(x: &AttributeMatrix, u: &Array2<f64>, beta_old: &Array2<f64>, diag: &mut Diagnostics) -> Array2<f64> {
    let (n, k) = u.dim();
    let xm = x.matrix();
    let z_count = xm.ncols();
    let mut beta = Array2::zeros((k, z_count));
    let mut scratch = vec![0.0; k];
    for z in 0..z_count {
        for i in 0..n {
            let present = xm[[i, z]] != 0.0;
            let mut norm = 0.0;
            for c in 0..k {
                let m = if present { u[[i, c]] } else { 1.0 - u[[i, c]] };
                scratch[c] = beta_old[[c, z]] * m;
                norm += scratch[c];
            }
            if norm <= 0.0 {
                continue;
            }
            for c in 0..k {
                beta[[c, z]] += scratch[c] / norm;
            }
        }
        let mut col = beta.column_mut(z);
        let total: f64 = col.sum();
        if total > 0.0 && total.is_finite() {
            col /= total;
        } else {
            diag.degenerate_beta_columns += 1;
            col.fill(1.0 / k as f64);
        }
    }
    beta
}

/// Coefficients of `a u² − (a + b + c) u + b = 0` for every `(i, k)`,
/// all computed from the same snapshot of the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct UCoefficients {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub c: Array2<f64>,
}

pub fn u_coefficients(
    h: &Hypergraph,
    x: Option<&AttributeMatrix>,
    params: &ModelParams,
    gamma: f64,
    diag: &mut Diagnostics,
) -> UCoefficients {
    let (structural_num, structural_den) = structural_terms(h, params, diag);
    let mut a = structural_den;
    let mut b = structural_num;
    a *= 1.0 - gamma;
    b *= 1.0 - gamma;
    let mut c = Array2::zeros(params.u.dim());
    if let Some(x) = x.filter(|x| gamma > 0.0 && x.num_attributes() > 0) {
        let (hx, hbar) = attribute_responsibilities(x, &params.u, &params.beta);
        b.scaled_add(gamma, &hx);
        c.scaled_add(gamma, &hbar);
    }
    UCoefficients { a, b, c }
}

/// `(u_ik Σ_{e∋i} (A_e/λ_e) [w(s_e − u_i)]_k,  C Σ_q w_kq (S_q − u_iq))`.
fn structural_terms(h: &Hypergraph, params: &ModelParams, diag: &mut Diagnostics) -> (Array2<f64>, Array2<f64>) {
    let u = &params.u;
    let w = &params.w;
    let (n, k) = u.dim();
    let wu = node_projections(u, w);
    let agg = edge_aggregates(h, u, &wu, diag);

    let wu_flat = wu.as_slice().expect("standard layout");
    let mut acc = vec![0.0; n * k];
    for (id, e) in h.edges().iter().enumerate() {
        let f = agg.ratio[id];
        let ws = &agg.projected.as_slice().expect("standard layout")[id * k..(id + 1) * k];
        for &i in e.nodes() {
            let row = &mut acc[i * k..(i + 1) * k];
            let proj = &wu_flat[i * k..(i + 1) * k];
            for q in 0..k {
                row[q] += f * (ws[q] - proj[q]);
            }
        }
    }
    let acc = Array2::from_shape_vec((n, k), acc).expect("shape");
    let numerator = acc * u;

    let c = budget_constant(h.num_nodes(), h.max_size());
    let ws_all = w.dot(&u.sum_axis(Axis(0)));
    let mut denominator = Array2::zeros((n, k));
    for i in 0..n {
        for q in 0..k {
            denominator[[i, q]] = c * (ws_all[q] - wu[[i, q]]).max(0.0);
        }
    }
    (numerator, denominator)
}

/// Smallest root of `a u² − (a + b + c) u + b` for nonnegative `a, b, c`.
///
/// The polynomial is `b ≥ 0` at 0 and `−c ≤ 0` at 1, so the smallest root
/// lies in `[0, 1]`. The discriminant is written as `(a − b)² + c (c + 2a + 2b)`,
/// a sum of nonnegative terms, and the root as `2b / (B + √Δ)` so that
/// neither step cancels. With `a = 0` this reduces to `b / (b + c)`.
pub fn smallest_root(a: f64, b: f64, c: f64) -> f64 {
    smallest_root_checked(a, b, c).0
}

fn smallest_root_checked(a: f64, b: f64, c: f64) -> (f64, bool) {
    let sum = a + b + c;
    let disc = (a - b) * (a - b) + c * (c + 2.0 * a + 2.0 * b);
    let (disc, clamped) = if disc >= 0.0 && disc.is_finite() {
        (disc, false)
    } else {
        (0.0, true)
    };
    let denom = sum + disc.sqrt();
    let root = if denom > 0.0 { (2.0 * b / denom).clamp(0.0, 1.0) } else { 0.0 };
    (root, clamped)
}

/// Membership update for `γ > 0`: the smallest root of the per-entry quadratic.
/// At `γ = 0` it coincides with [`update_u_gamma0`].
pub fn update_u_quadratic(
    h: &Hypergraph,
    x: Option<&AttributeMatrix>,
    params: &ModelParams,
    gamma: f64,
    diag: &mut Diagnostics,
) -> Array2<f64> {
    let coef = u_coefficients(h, x, params, gamma, diag);
    let mut u = Array2::zeros(params.u.dim());
    Zip::from(&mut u)
        .and(&coef.a)
        .and(&coef.b)
        .and(&coef.c)
        .for_each(|u, &a, &b, &c| {
            let (root, clamped) = smallest_root_checked(a, b, c);
            if clamped {
                diag.discriminant_clamps += 1;
            }
            *u = root;
        });
    u
}

/// Structure-only membership update, `u_ik = min(1, num / den)`; the cap is
/// where the multiplier of the `u_ik ≤ 1` constraint becomes active.
pub fn update_u_gamma0(h: &Hypergraph, params: &ModelParams, diag: &mut Diagnostics) -> Array2<f64> {
    let (num, den) = structural_terms(h, params, diag);
    let mut u = Array2::zeros(params.u.dim());
    Zip::from(&mut u).and(&num).and(&den).for_each(|u, &n, &d| {
        *u = if d > 0.0 {
            (n / d).min(1.0)
        } else if n > 0.0 {
            diag.saturated_memberships += 1;
            1.0
        } else {
            0.0
        };
    });
    u
}

/// One pass of the algorithm: memberships, then affinity (unless `γ = 1`),
/// then attribute mixing (unless `γ = 0`). Each family sees the values
/// already updated earlier in the pass.
pub fn em_step(h: &Hypergraph, x: Option<&AttributeMatrix>, params: &mut ModelParams, gamma: f64, diag: &mut Diagnostics) {
    params.u = if gamma == 0.0 {
        update_u_gamma0(h, params, diag)
    } else {
        update_u_quadratic(h, x, params, gamma, diag)
    };
    if gamma != 1.0 {
        params.w = update_w(h, &params.u, &params.w, diag);
    }
    if gamma != 0.0 {
        if let Some(x) = x.filter(|x| x.num_attributes() > 0) {
            params.beta = update_beta(x, &params.u, &params.beta, diag);
        }
    }
}

fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let v: f64 = rng.gen();
        if v > 0.0 {
            return v;
        }
    }
}

/// Random interior starting point: `u, w ~ U(0,1)` (w symmetrized), `β`
/// columns normalized from `U(0,1)` draws.
pub fn random_init(n: usize, k: usize, z: usize, rng: &mut ChaCha8Rng) -> ModelParams {
    let u = Array2::from_shape_simple_fn((n, k), || open_unit(rng));
    let mut w = Array2::zeros((k, k));
    for a in 0..k {
        for b in a..k {
            let v = open_unit(rng);
            w[[a, b]] = v;
            w[[b, a]] = v;
        }
    }
    let mut beta = Array2::from_shape_simple_fn((k, z), || open_unit(rng));
    for mut col in beta.columns_mut() {
        let s = col.sum();
        col /= s;
    }
    ModelParams { u, w, beta }
}

/// Random stream for restart `index` under `seed`.
pub fn restart_rng(seed: u64, index: usize) -> ChaCha8Rng {
    stream(seed, Purpose::Init, index as u64)
}

struct RestartOutcome {
    params: ModelParams,
    loglik: LogLik,
    summary: RestartSummary,
    diagnostics: Diagnostics,
}

fn run_restart(h: &Hypergraph, x: &AttributeMatrix, config: &FitConfig, index: usize) -> RestartOutcome {
    let mut rng = restart_rng(config.seed, index);
    let mut params = random_init(h.num_nodes(), config.k, x.num_attributes(), &mut rng);
    let attrs = (x.num_attributes() > 0).then_some(x);
    let gamma = config.gamma;
    let mut diag = Diagnostics::default();

    let point = |iteration: usize, ll: LogLik| TracePoint {
        iteration,
        structure: ll.structure,
        attributes: ll.attributes,
        total: ll.total,
    };
    let mut ll = total_loglik(h, x, &params, gamma);
    let mut trace = vec![point(0, ll)];
    let mut passes = 0;
    let mut converged = false;
    let mut aborted = None;
    let mut iterations = 0;
    while iterations < config.max_iters {
        em_step(h, attrs, &mut params, gamma, &mut diag);
        iterations += 1;
        if iterations % config.check_every == 0 || iterations == config.max_iters {
            let next = total_loglik(h, x, &params, gamma);
            trace.push(point(iterations, next));
            if next.total.is_nan() {
                aborted = Some(format!("log-likelihood became NaN at iteration {iterations}"));
                ll = next;
                break;
            }
            if (next.total - ll.total).abs() < config.tol {
                passes += 1;
            } else {
                passes = 0;
            }
            ll = next;
            if passes >= config.patience {
                converged = true;
                break;
            }
        }
    }
    if aborted.is_none() && params.constraint_violation().is_nan() {
        aborted = Some("non-finite parameters".into());
    }
    RestartOutcome {
        summary: RestartSummary {
            index,
            final_loglik: ll.total,
            iterations,
            converged,
            aborted,
            trace,
        },
        params,
        loglik: ll,
        diagnostics: diag,
    }
}

/// Fits the model from `config.restarts` random starts and keeps the one with
/// the highest final log-likelihood. `x` may have zero columns when `γ = 0`.
pub fn em_fit(h: &Hypergraph, x: &AttributeMatrix, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    if x.num_nodes() != h.num_nodes() {
        return Err(Error::Shape(format!(
            "{} attribute rows for {} nodes",
            x.num_nodes(),
            h.num_nodes()
        )));
    }
    let cells = (config.k as u64)
        .checked_mul((config.k + x.num_attributes()) as u64)
        .and_then(|v| v.checked_mul((h.num_nodes() + h.num_edges()) as u64));
    match cells {
        Some(c) if c <= config.memory_budget => {}
        _ => {
            return Err(Error::Config(format!(
                "K(K+Z)(N+|E|) exceeds the memory budget of {}",
                config.memory_budget
            )))
        }
    }

    let outcomes = run_all(h, x, config);
    let mut diagnostics = Diagnostics::default();
    let mut best: Option<usize> = None;
    for (i, o) in outcomes.iter().enumerate() {
        diagnostics.merge(&o.diagnostics);
        if let Some(reason) = &o.summary.aborted {
            log::warn!("restart {i} aborted: {reason}");
            continue;
        }
        if best.is_none_or(|b| o.summary.final_loglik > outcomes[b].summary.final_loglik) {
            best = Some(i);
        }
    }
    let best = best.ok_or_else(|| Error::Numerical("every restart aborted".into()))?;
    let restarts = outcomes.iter().map(|o| o.summary.clone()).collect();
    let chosen = outcomes.into_iter().nth(best).expect("index in range");
    if !diagnostics.is_clean() {
        log::debug!("fit diagnostics: {diagnostics:?}");
    }
    Ok(FitResult {
        final_loglik: chosen.loglik.total,
        loglik: chosen.loglik,
        iterations_run: chosen.summary.iterations,
        converged: chosen.summary.converged,
        best_restart: best,
        trace: chosen.summary.trace,
        params: chosen.params,
        restarts,
        diagnostics,
    })
}

#[cfg(feature = "parallel")]
fn run_all(h: &Hypergraph, x: &AttributeMatrix, config: &FitConfig) -> Vec<RestartOutcome> {
    use rayon::prelude::*;
    if config.parallel {
        (0..config.restarts)
            .into_par_iter()
            .map(|i| run_restart(h, x, config, i))
            .collect()
    } else {
        (0..config.restarts).map(|i| run_restart(h, x, config, i)).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn run_all(h: &Hypergraph, x: &AttributeMatrix, config: &FitConfig) -> Vec<RestartOutcome> {
    (0..config.restarts).map(|i| run_restart(h, x, config, i)).collect()
}
