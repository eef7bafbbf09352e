//! Random hyperedge removal for partial-observation experiments.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hypergraph::{count_components, Hypergraph};

#[derive(Debug, Clone)]
pub struct Deletion {
    pub hypergraph: Hypergraph,
    /// Number of hyperedges the caller asked to keep.
    pub target: usize,
    /// False when connectivity prevented reaching `target`.
    pub reached: bool,
}

/// Keeps `round(keep_fraction · |E|)` hyperedges (at least one), removing
/// the others in uniformly random order.
///
/// With `keep_connected`, a removal is skipped when it would increase the
/// number of connected components of the node set, where two nodes are
/// adjacent when some hyperedge contains both. If the target cannot be
/// reached the smallest achievable hypergraph is returned with
/// `reached = false`.
pub fn delete_edges(h: &Hypergraph, keep_fraction: f64, keep_connected: bool, rng: &mut ChaCha8Rng) -> Result<Deletion> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::Config(format!("keep fraction {keep_fraction} outside (0, 1]")));
    }
    let m = h.num_edges();
    let target = ((keep_fraction * m as f64).round() as usize).clamp(1, m);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);

    let mut alive = vec![true; m];
    let mut kept = m;
    let baseline = count_components(h.num_nodes(), h.edges().iter().map(|e| e.nodes()));
    for &id in &order {
        if kept == target {
            break;
        }
        alive[id] = false;
        if keep_connected {
            let remaining = h
                .edges()
                .iter()
                .enumerate()
                .filter(|&(j, _)| alive[j])
                .map(|(_, e)| e.nodes());
            if count_components(h.num_nodes(), remaining) > baseline {
                alive[id] = true;
                continue;
            }
        }
        kept -= 1;
    }
    let reached = kept == target;
    if !reached {
        log::warn!("kept {kept} hyperedges; target {target} would disconnect the hypergraph");
    }
    let ids: Vec<usize> = (0..m).filter(|&j| alive[j]).collect();
    Ok(Deletion {
        hypergraph: h.restrict(&ids),
        target,
        reached,
    })
}
