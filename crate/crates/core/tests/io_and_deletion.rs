mod common;

use std::io::Cursor;

use hycosbm::deletion::delete_edges;
use hycosbm::hypergraph::count_components;
use hycosbm::model::ParamsDocument;
use hycosbm::rng::{stream, Purpose};
use hycosbm::{build_hypergraph, read_hypergraph, Error, FitConfig, RawEdge};

#[test]
fn edge_file_round_trips() {
    let (h, _) = common::load("office");
    let mut buf = Vec::new();
    h.write_edges(&mut buf).unwrap();
    let back = read_hypergraph(Cursor::new(buf)).unwrap();
    assert_eq!(back.node_ids(), h.node_ids());
    assert_eq!(back.edges(), h.edges());
    assert_eq!(back.total_weight(), h.total_weight());
}

#[test]
fn malformed_input_is_rejected_with_its_reason() {
    type Check = fn(&Error) -> bool;
    let cases: [(&str, Check); 4] = [
        ("a,b\na\n", |e| matches!(e, Error::EdgeTooSmall { .. })),
        ("a,b,a\n", |e| matches!(e, Error::RepeatedNode { .. })),
        ("a,b\t0\n", |e| matches!(e, Error::NonPositiveWeight { .. })),
        ("# nothing here\n", |e| matches!(e, Error::EmptyInput)),
    ];
    for (text, check) in cases {
        let err = read_hypergraph(Cursor::new(text)).unwrap_err();
        assert!(check(&err), "{text:?} gave {err}");
        assert!(!err.is_numerical());
    }
}

#[test]
fn duplicate_lines_merge_into_weights() {
    let h = build_hypergraph(vec![
        RawEdge::new(["x", "y"], None),
        RawEdge::new(["y", "x"], Some(2)),
        RawEdge::new(["x", "y", "z"], None),
    ])
    .unwrap();
    assert_eq!(h.num_edges(), 2);
    assert_eq!(h.edge(0).weight(), 3);
    assert_eq!(h.max_size(), 3);
}

#[test]
fn deletion_keeps_fixture_connected() {
    let (h, _) = common::load("planted_k3");
    let before = count_components(h.num_nodes(), h.edges().iter().map(|e| e.nodes()));
    for seed in 0..5 {
        let d = delete_edges(&h, 0.6, true, &mut stream(seed, Purpose::Deletion, 0)).unwrap();
        let g = &d.hypergraph;
        assert!(g.num_edges() >= d.target);
        assert_eq!(count_components(g.num_nodes(), g.edges().iter().map(|e| e.nodes())), before);
        let kept = g.edge_set();
        assert!(kept.is_subset(&h.edge_set()));
    }
}

#[test]
fn params_document_round_trips_a_fit() {
    let (h, x) = common::load("office");
    let fit = hycosbm::em_fit(&h, &x, &FitConfig { restarts: 2, ..FitConfig::new(2, 0.4, 3) }).unwrap();
    let doc = ParamsDocument::from_params(&fit.params, 0.4, 3, fit.final_loglik);
    let json = serde_json::to_string(&doc).unwrap();
    let back: ParamsDocument = serde_json::from_str(&json).unwrap();
    assert_eq!(back.to_params().unwrap(), fit.params);
}
