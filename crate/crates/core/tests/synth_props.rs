mod common;

use std::collections::BTreeMap;

use hycosbm::rng::{stream, Purpose};
use hycosbm::synth::{dominant, generate, generate_attributes, GenConfig, Planted};
use ndarray::Array2;
use rand::Rng;

/// Fraction of nodes whose attribute equals their dominant community.
fn agreement(u: &Array2<f64>, rho: f64, seed: u64) -> f64 {
    let k = u.ncols();
    let x = generate_attributes(u, rho, k, &mut stream(seed, Purpose::Attributes, 0)).unwrap();
    let hits = (0..u.nrows()).filter(|&i| x.get(i, dominant(u.row(i)))).count();
    hits as f64 / u.nrows() as f64
}

fn random_memberships(n: usize, k: usize, seed: u64) -> Array2<f64> {
    let mut r = common::rng(seed);
    Array2::from_shape_fn((n, k), |_| r.gen::<f64>())
}

#[test]
fn unmatched_attributes_agree_at_chance() {
    let u = random_memberships(20_000, 5, 1);
    let a = agreement(&u, 0.0, 1);
    assert!((a - 0.2).abs() < 0.01, "{a}");
}

#[test]
fn mostly_matched_attributes_agree_above_the_mixture_rate() {
    for k in [2, 3, 5] {
        let u = random_memberships(5000, k, k as u64);
        let a = agreement(&u, 0.9, 7);
        let expected = 0.9 + 0.1 / k as f64;
        assert!((a - expected).abs() < 0.01, "K={k}: {a} vs {expected}");
    }
}

#[test]
fn agreement_is_monotone_in_rho() {
    let rhos = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut means = Vec::new();
    for &rho in &rhos {
        let total: f64 = (0..10)
            .map(|seed| agreement(&random_memberships(400, 3, seed), rho, seed))
            .sum();
        means.push(total / 10.0);
    }
    assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
    assert_eq!(*means.last().unwrap(), 1.0);
}

#[test]
fn generated_dataset_matches_the_requested_sequence() {
    let dim_seq: BTreeMap<usize, usize> = [(2, 50), (3, 40), (6, 20), (9, 5)].into_iter().collect();
    let config = GenConfig {
        n: 80,
        k: 3,
        dim_seq: dim_seq.clone(),
        planted: Planted::default(),
        rho_match: 0.6,
        seed: 4,
    };
    let data = generate(&config).unwrap();
    let counts = data.hypergraph.size_counts();
    for (&d, &c) in &dim_seq {
        assert_eq!(counts[d], c);
    }
    assert_eq!(data.hypergraph.edge_set().len(), 115);
    assert_eq!(data.attributes.num_nodes(), 80);
    assert_eq!(data.truth.u.dim(), (80, 3));
    for i in 0..80 {
        let row = data.truth.u.row(i);
        let top = row[dominant(row)];
        assert!((0.7..=1.0).contains(&top));
        assert!(row.iter().filter(|&&v| v >= 0.7).count() == 1);
    }
}

#[test]
fn given_planted_parameters_are_used_verbatim() {
    let u: Vec<Vec<f64>> = (0..30).map(|i| if i < 15 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).collect();
    let config = GenConfig {
        n: 30,
        k: 2,
        dim_seq: [(2, 60)].into_iter().collect(),
        planted: Planted::Given {
            u: u.clone(),
            w: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        },
        rho_match: 1.0,
        seed: 2,
    };
    let data = generate(&config).unwrap();
    // no cross-block affinity, so a pair spanning both blocks has zero intensity
    for e in data.hypergraph.edges() {
        let block = e.nodes()[0] / 15;
        assert!(e.nodes().iter().all(|&v| v / 15 == block));
    }
}
