mod common;

use common::*;
use hycosbm::em::{em_step, smallest_root, u_coefficients, update_u_gamma0, update_u_quadratic};
use hycosbm::model::total_loglik;
use hycosbm::{em_fit, AttributeMatrix, Diagnostics, FitConfig, Hypergraph, ModelParams};
use ndarray::{array, Array2};
use proptest::prelude::*;

fn residual(a: f64, b: f64, c: f64, r: f64) -> f64 {
    (a * r * r - (a + b + c) * r + b).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn root_is_smallest_and_in_unit_interval(a in 0.0f64..50.0, b in 0.0f64..50.0, c in 0.0f64..50.0) {
        let r = smallest_root(a, b, c);
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert!(residual(a, b, c, r) < 1e-8 * (a + b + c).max(1.0));
        if a > 0.0 {
            let other = (a + b + c) / a - r;
            prop_assert!(other >= r - 1e-12);
        }
    }

    #[test]
    fn quadratic_update_at_zero_gamma_is_the_closed_form(seed in any::<u64>()) {
        let mut r = rng(seed);
        let h = random_hypergraph(&mut r, 12, 4, 15);
        let x = random_one_hot(&mut r, 12, 3);
        let p = random_params(&mut r, 12, 3, 3);
        let mut diag = Diagnostics::default();
        let quad = update_u_quadratic(&h, Some(&x), &p, 0.0, &mut diag);
        let closed = update_u_gamma0(&h, &p, &mut diag);
        for (q, c) in quad.iter().zip(closed.iter()) {
            prop_assert!((q - c).abs() <= 1e-12);
        }
    }

    #[test]
    fn iterates_stay_feasible(seed in any::<u64>(), gamma in prop::sample::select(vec![0.0, 0.2, 0.5, 0.9, 1.0])) {
        let mut r = rng(seed);
        let h = random_hypergraph(&mut r, 15, 5, 20);
        let x = random_one_hot(&mut r, 15, 4);
        let mut p = random_params(&mut r, 15, 3, 4);
        let mut diag = Diagnostics::default();
        for _ in 0..30 {
            em_step(&h, Some(&x), &mut p, gamma, &mut diag);
            prop_assert!(p.constraint_violation() <= 1e-9);
        }
    }
}

/// Every entry of the fresh `u` is a root of its quadratic, and no smaller
/// root exists in `[0, 1]`.
#[test]
fn membership_entries_solve_their_quadratic() {
    for seed in 0..10 {
        let mut r = rng(seed);
        let h = random_hypergraph(&mut r, 14, 4, 20);
        let x = random_one_hot(&mut r, 14, 3);
        let mut p = random_params(&mut r, 14, 3, 3);
        let mut diag = Diagnostics::default();
        for _ in 0..10 {
            let coef = u_coefficients(&h, Some(&x), &p, 0.6, &mut diag);
            em_step(&h, Some(&x), &mut p, 0.6, &mut diag);
            for ((&a, &b), (&c, &u)) in coef.a.iter().zip(coef.b.iter()).zip(coef.c.iter().zip(p.u.iter())) {
                assert!(residual(a, b, c, u) < 1e-8, "residual {}", residual(a, b, c, u));
            }
        }
    }
}

#[test]
fn em_increases_loglik_on_random_instances() {
    for seed in 0..6 {
        for &gamma in &[0.0, 0.3, 0.8, 1.0] {
            let mut r = rng(seed);
            let h = random_hypergraph(&mut r, 20, 5, 30);
            let x = random_one_hot(&mut r, 20, 3);
            let mut p = random_params(&mut r, 20, 3, 3);
            let mut diag = Diagnostics::default();
            let mut prev = total_loglik(&h, &x, &p, gamma).total;
            for it in 0..100 {
                em_step(&h, Some(&x), &mut p, gamma, &mut diag);
                let next = total_loglik(&h, &x, &p, gamma).total;
                let slack = 1e-8 * prev.abs().max(1.0);
                assert!(next >= prev - slack, "seed {seed} gamma {gamma} iteration {it}: {prev} -> {next}");
                prev = next;
            }
        }
    }
}

/// A fully converged point is left unchanged by another pass.
#[test]
fn converged_point_is_a_fixed_point() {
    let (h, x) = load("office");
    let mut r = rng(3);
    let mut p = random_params(&mut r, h.num_nodes(), 2, x.num_attributes());
    let mut diag = Diagnostics::default();
    for _ in 0..20_000 {
        em_step(&h, Some(&x), &mut p, 0.5, &mut diag);
    }
    let before = p.clone();
    em_step(&h, Some(&x), &mut p, 0.5, &mut diag);
    let delta = max_abs_diff(&before.u, &p.u)
        .max(max_abs_diff(&before.w, &p.w))
        .max(max_abs_diff(&before.beta, &p.beta));
    assert!(delta < 1e-10, "delta {delta}");
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn fit_is_bit_reproducible() {
    let (h, x) = load("planted_k2");
    let config = FitConfig {
        restarts: 3,
        ..FitConfig::new(2, 0.5, 11)
    };
    let a = em_fit(&h, &x, &config).unwrap();
    let b = em_fit(&h, &x, &config).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.final_loglik.to_bits(), b.final_loglik.to_bits());
    assert_eq!(a.trace, b.trace);
    let c = em_fit(&h, &x, &FitConfig { seed: 12, ..config }).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn single_pair_is_fitted_exactly() {
    let h = Hypergraph::from_indices(2, vec![(vec![0, 1], 1)]).unwrap();
    let x = AttributeMatrix::empty(2);
    let fit = em_fit(&h, &x, &FitConfig::new(1, 0.0, 0)).unwrap();
    let p = &fit.params;
    let lambda = p.u[[0, 0]] * p.u[[1, 0]] * p.w[[0, 0]];
    assert!((lambda - 1.0).abs() < 1e-3, "lambda {lambda}");
}

#[test]
fn attribute_only_fit_recovers_labels() {
    let (h, x) = load("planted_k3");
    let fit = em_fit(&h, &x, &FitConfig::new(3, 1.0, 5)).unwrap();
    let pi = fit.params.u.dot(&fit.params.beta);
    let mut correct = 0;
    for i in 0..x.num_nodes() {
        let pred = (0..3).max_by(|&a, &b| pi[[i, a]].total_cmp(&pi[[i, b]])).unwrap();
        correct += x.get(i, pred) as usize;
    }
    assert_eq!(correct, x.num_nodes());
}

#[test]
fn fit_rejects_mismatched_attributes() {
    let (h, _) = load("office");
    let x = AttributeMatrix::from_labels(&[0, 1, 0], 2).unwrap();
    assert!(em_fit(&h, &x, &FitConfig::new(2, 0.5, 0)).is_err());
    let x = AttributeMatrix::empty(h.num_nodes());
    let bad = FitConfig::new(0, 0.5, 0);
    assert!(em_fit(&h, &x, &bad).is_err());
}

#[test]
fn restarts_all_report_traces() {
    let (h, x) = load("office");
    let fit = em_fit(&h, &x, &FitConfig { restarts: 4, ..FitConfig::new(2, 0.3, 1) }).unwrap();
    assert_eq!(fit.restarts.len(), 4);
    let best = fit.restarts.iter().map(|r| r.final_loglik).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(best, fit.final_loglik);
    for r in &fit.restarts {
        assert_eq!(r.trace[0].iteration, 0);
        assert_eq!(r.trace.last().unwrap().iteration, r.iterations);
    }
}

#[test]
fn hand_computed_affinity_step() {
    // two disjoint pairs with crisp memberships
    let h = Hypergraph::from_indices(4, vec![(vec![0, 1], 1), (vec![2, 3], 1)]).unwrap();
    let u = array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]];
    let w = array![[2.0, 0.5], [0.5, 2.0]];
    let beta = array![[1.0], [1.0]];
    let mut p = ModelParams::new(u, w, beta).unwrap();
    let mut diag = Diagnostics::default();
    p.w = hycosbm::em::update_w(&h, &p.u, &p.w, &mut diag);
    // C = 1 for D = 2; one observed pair per block gives w_kk = 1
    assert!((p.w[[0, 0]] - 1.0).abs() < 1e-12);
    assert!((p.w[[1, 1]] - 1.0).abs() < 1e-12);
    assert_eq!(p.w[[0, 1]], 0.0);
}
