use std::collections::HashSet;
use std::io::Cursor;
use std::path::Path;

use hycosbm::deletion::delete_edges;
use hycosbm::eval::{auc_prediction, kfold_cv, AucReport, CvGrid, NegativeMode};
use hycosbm::hypergraph::read_edges;
use hycosbm::rng::{stream, Purpose};
use hycosbm::synth::{generate, GenConfig, SizeStats};
use hycosbm::{em_fit, incidence_index, one_hot_encode, read_attribute_table, read_hypergraph};
use hycosbm::{AttributeMatrix, FitConfig, Hypergraph, ParamsDocument};
use serde::Serialize;

use crate::error::CliError;
use crate::manifest::{sibling, ManifestBuilder};
use crate::{AucArgs, Cli, Command, CvArgs, DeleteArgs, FitArgs, FitControls, GenerateArgs, GlobalOpts, ModeArg};

pub fn run(cli: &Cli, parallel: bool) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Fit(a) => fit(g, a, parallel),
        Command::Cv(a) => cv(g, a, parallel),
        Command::Auc(a) => auc(g, a),
        Command::Generate(a) => generate_cmd(g, a),
        Command::DeleteEdges(a) => delete(g, a),
    }
}

/// Everything needed to replay a run: global flags, arguments as given and
/// the configuration they resolve to.
fn describe(global: &GlobalOpts, args: &impl Serialize, resolved: &impl Serialize) -> serde_json::Value {
    serde_json::json!({ "global": global, "args": args, "resolved": resolved })
}

fn input_err(path: &Path) -> impl FnOnce(hycosbm::Error) -> CliError + '_ {
    move |source| CliError::Input {
        path: path.to_path_buf(),
        source,
    }
}

fn json_bytes(path: &Path, value: &impl Serialize) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn load_hypergraph(m: &mut ManifestBuilder, path: &Path) -> Result<Hypergraph, CliError> {
    let bytes = m.input(path)?;
    read_hypergraph(Cursor::new(bytes)).map_err(input_err(path))
}

/// Attribute matrix for `h`; required whenever some gamma is positive.
fn load_attributes(
    m: &mut ManifestBuilder,
    path: Option<&Path>,
    h: &Hypergraph,
    needed: bool,
) -> Result<AttributeMatrix, CliError> {
    match path {
        Some(path) => {
            let bytes = m.input(path)?;
            let table = read_attribute_table(bytes.as_slice()).map_err(input_err(path))?;
            one_hot_encode(&table, h).map_err(input_err(path))
        }
        None if needed => Err(CliError::Usage("gamma > 0 requires --attributes".into())),
        None => Ok(AttributeMatrix::empty(h.num_nodes())),
    }
}

fn fit_config(c: &FitControls, k: usize, gamma: f64, seed: u64, parallel: bool) -> FitConfig {
    FitConfig {
        restarts: c.restarts,
        max_iters: c.max_iter,
        tol: c.tol,
        check_every: c.check_every,
        parallel,
        ..FitConfig::new(k, gamma, seed)
    }
}

fn fit(g: &GlobalOpts, a: &FitArgs, parallel: bool) -> Result<(), CliError> {
    let config = fit_config(&a.controls, a.k, a.gamma, a.seed, parallel);
    config.validate()?;
    let mut m = ManifestBuilder::start("fit", describe(g, a, &config), a.seed);
    let h = load_hypergraph(&mut m, &a.edges)?;
    let x = load_attributes(&mut m, a.attributes.as_deref(), &h, a.gamma > 0.0)?;
    log::info!(
        "{} nodes, {} hyperedges (max size {}), {} attribute columns",
        h.num_nodes(),
        h.num_edges(),
        h.max_size(),
        x.num_attributes()
    );

    let result = em_fit(&h, &x, &config)?;
    if !result.diagnostics.is_clean() {
        log::warn!("numerical guards triggered: {:?}", result.diagnostics);
    }
    let mut doc = ParamsDocument::from_params(&result.params, a.gamma, a.seed, result.final_loglik);
    doc.max_size = h.max_size();
    doc.node_ids = h.node_ids().to_vec();
    doc.attribute_names = x.column_names();
    m.output(&a.out, &json_bytes(&a.out, &doc)?)?;

    let mut trace = String::from("iteration,L_A,L_X,L\n");
    for p in &result.trace {
        trace.push_str(&format!("{},{},{},{}\n", p.iteration, p.structure, p.attributes, p.total));
    }
    m.output(&sibling(&a.out, "trace.csv"), trace.as_bytes())?;

    println!(
        "K={} gamma={} loglik={:.6} restart={} iterations={} converged={}",
        a.k, a.gamma, result.final_loglik, result.best_restart, result.iterations_run, result.converged
    );
    m.finish(&sibling(&a.out, "manifest.json"))
}

fn parse_ks(list: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse K list `{list}`"));
    let mut ks = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: usize = lo.trim().parse().map_err(|_| bad())?;
                let hi: usize = hi.trim().parse().map_err(|_| bad())?;
                if lo > hi {
                    return Err(bad());
                }
                ks.extend(lo..=hi);
            }
            None => ks.push(part.parse().map_err(|_| bad())?),
        }
    }
    ks.sort_unstable();
    ks.dedup();
    Ok(ks)
}

fn parse_gammas(list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| CliError::Usage(format!("cannot parse gamma `{p}`"))))
        .collect()
}

fn cv(g: &GlobalOpts, a: &CvArgs, parallel: bool) -> Result<(), CliError> {
    let grid = CvGrid {
        ks: parse_ks(&a.k_range)?,
        gammas: parse_gammas(&a.gamma_grid)?,
        folds: a.folds,
        seed: a.seed,
        fit: fit_config(&a.controls, 1, 0.0, a.seed, parallel),
    };
    grid.validate()?;
    grid.fit.validate()?;
    let mut m = ManifestBuilder::start("cv", describe(g, a, &grid), a.seed);
    let h = load_hypergraph(&mut m, &a.edges)?;
    let needs_x = grid.gammas.iter().any(|&g| g > 0.0);
    let x = load_attributes(&mut m, a.attributes.as_deref(), &h, needs_x)?;
    log::info!(
        "{} cells x {} folds on {} hyperedges",
        grid.ks.len() * grid.gammas.len(),
        grid.folds,
        h.num_edges()
    );

    let report = kfold_cv(&h, &x, &grid)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    m.output(&a.out, &csv)?;
    let s = report.selected;
    println!(
        "selected K={} gamma={} mean AUC={:.4} (std {:.4})",
        s.k, s.gamma, s.mean_auc, s.std_auc
    );
    m.finish(&sibling(&a.out, "manifest.json"))
}

/// Maps a hyperedge file onto the node numbering of a parameter document.
/// Lines mentioning unknown nodes are an error when `strict`, else skipped.
fn resolve_edges(
    path: &Path,
    bytes: &[u8],
    doc: &ParamsDocument,
    strict: bool,
) -> Result<Vec<Vec<usize>>, CliError> {
    let raw = read_edges(Cursor::new(bytes)).map_err(input_err(path))?;
    let index: std::collections::HashMap<&str, usize> =
        doc.node_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let lookup = |id: &str| -> Option<usize> {
        if doc.node_ids.is_empty() {
            id.parse().ok().filter(|&i| i < doc.num_nodes)
        } else {
            index.get(id).copied()
        }
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for edge in raw {
        let mut nodes = Vec::with_capacity(edge.nodes.len());
        let mut unknown = None;
        for id in &edge.nodes {
            match lookup(id) {
                Some(i) => nodes.push(i),
                None => unknown = Some(id.clone()),
            }
        }
        if let Some(id) = unknown {
            if strict {
                return Err(CliError::Input {
                    path: path.to_path_buf(),
                    source: hycosbm::Error::UnknownNode(id),
                });
            }
            continue;
        }
        nodes.sort_unstable();
        if seen.insert(nodes.clone()) {
            out.push(nodes);
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct AucOutput<'a> {
    mode: ModeArg,
    #[serde(flatten)]
    report: &'a AucReport,
}

fn auc(g: &GlobalOpts, a: &AucArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::start("auc", describe(g, a, &()), a.seed);
    let doc_bytes = m.input(&a.params)?;
    let doc: ParamsDocument = serde_json::from_slice(&doc_bytes).map_err(|source| CliError::Json {
        path: a.params.clone(),
        source,
    })?;
    let params = doc.to_params().map_err(input_err(&a.params))?;
    let test_bytes = m.input(&a.edges)?;
    let test = resolve_edges(&a.edges, &test_bytes, &doc, true)?;
    let mut observed: HashSet<Vec<usize>> = test.iter().cloned().collect();
    for path in &a.exclude {
        let bytes = m.input(path)?;
        observed.extend(resolve_edges(path, &bytes, &doc, false)?);
    }
    let mode = match a.mode {
        ModeArg::Uniform => NegativeMode::Uniform,
        ModeArg::Soo => NegativeMode::Soo,
    };
    let mut rng = stream(a.seed, Purpose::Negatives, 0);
    let report = auc_prediction(&test, &params, &observed, mode, &mut rng).map_err(input_err(&a.edges))?;

    println!("AUC {:.4} over {} comparisons", report.auc, report.comparisons);
    if report.resample_failures > 0 {
        println!("{} negatives coincide with observed hyperedges", report.resample_failures);
    }
    if matches!(a.mode, ModeArg::Soo) {
        for s in &report.jaccard_by_size {
            println!("size {:>3}: {:>6} pairs, mean Jaccard {:.4}", s.size, s.count, s.mean_jaccard);
        }
    }
    let out = AucOutput {
        mode: a.mode,
        report: &report,
    };
    m.output(&a.out, &json_bytes(&a.out, &out)?)?;
    m.finish(&sibling(&a.out, "manifest.json"))
}

fn generate_cmd(g: &GlobalOpts, a: &GenerateArgs) -> Result<(), CliError> {
    if a.instances == 0 {
        return Err(CliError::Usage("--instances must be at least 1".into()));
    }
    let bytes = std::fs::read(&a.config).map_err(|source| CliError::Io {
        path: a.config.clone(),
        source,
    })?;
    let base: GenConfig = serde_json::from_slice(&bytes).map_err(|source| CliError::Json {
        path: a.config.clone(),
        source,
    })?;
    base.validate().map_err(input_err(&a.config))?;
    let mut m = ManifestBuilder::start("generate", describe(g, a, &base), base.seed);
    m.input(&a.config)?;

    for i in 0..a.instances {
        let config = GenConfig {
            seed: base.seed + i as u64,
            ..base.clone()
        };
        let dir = if a.instances == 1 {
            a.out_dir.clone()
        } else {
            a.out_dir.join(format!("instance_{i:03}"))
        };
        let data = generate(&config)?;
        let h = &data.hypergraph;

        let mut edges = Vec::new();
        h.write_edges(&mut edges)?;
        m.output(&dir.join("edges.txt"), &edges)?;

        let idx = incidence_index(h);
        let present: Vec<usize> = (0..h.num_nodes()).filter(|&v| idx.degree(v) > 0).collect();
        if present.len() < h.num_nodes() {
            log::warn!(
                "instance {i}: {} nodes lie in no hyperedge and are left out of attributes.csv",
                h.num_nodes() - present.len()
            );
        }
        let ids: Vec<String> = present.iter().map(|&v| h.node_ids()[v].clone()).collect();
        let mut attrs = Vec::new();
        data.attributes.select_rows(&present).write_csv(&ids, &mut attrs)?;
        m.output(&dir.join("attributes.csv"), &attrs)?;

        let mut truth = ParamsDocument::from_params(&data.truth, 0.0, config.seed, 0.0);
        truth.max_size = h.max_size();
        truth.node_ids = h.node_ids().to_vec();
        truth.attribute_names = data.attributes.column_names();
        m.output(&dir.join("truth.json"), &json_bytes(&dir, &truth)?)?;
        m.output(&dir.join("stats.json"), &json_bytes(&dir, &data.stats)?)?;
        log_stats(i, &data.stats);
        println!(
            "{}: {} nodes, {} hyperedges",
            dir.display(),
            h.num_nodes(),
            h.num_edges()
        );
    }
    m.finish(&a.out_dir.join("manifest.json"))
}

fn log_stats(instance: usize, stats: &[SizeStats]) {
    for s in stats {
        log::info!(
            "instance {instance} size {}: {} accepted, acceptance {:.4}, {} duplicates",
            s.size,
            s.count,
            s.acceptance_rate(),
            s.duplicates
        );
    }
}

fn delete(g: &GlobalOpts, a: &DeleteArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::start("delete-edges", describe(g, a, &()), a.seed);
    let h = load_hypergraph(&mut m, &a.edges)?;
    let mut rng = stream(a.seed, Purpose::Deletion, 0);
    let d = delete_edges(&h, a.keep_fraction, a.keep_connected, &mut rng)?;
    let mut out = Vec::new();
    d.hypergraph.write_edges(&mut out)?;
    m.output(&a.out, &out)?;
    println!(
        "kept {} of {} hyperedges (target {}{})",
        d.hypergraph.num_edges(),
        h.num_edges(),
        d.target,
        if d.reached { "" } else { ", not reachable while connected" }
    );
    m.finish(&sibling(&a.out, "manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_lists() {
        assert_eq!(parse_ks("2-4,7").unwrap(), vec![2, 3, 4, 7]);
        assert_eq!(parse_ks("5").unwrap(), vec![5]);
        assert!(parse_ks("4-2").is_err());
        assert!(parse_ks("x").is_err());
    }

    #[test]
    fn gamma_lists() {
        assert_eq!(parse_gammas("0, 0.5,1").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_gammas("0,a").is_err());
    }
}
