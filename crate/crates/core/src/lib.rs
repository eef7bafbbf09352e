//! Overlapping community detection in hypergraphs with node attributes.
//!
//! Hyperedges are modelled as Poisson counts whose rate is driven by
//! mixed-membership vectors `u` and a community affinity matrix `w`; one-hot
//! node attributes are Bernoulli draws with probabilities `u β`. The two
//! log-likelihoods are blended by `γ ∈ [0, 1]` and maximized with a
//! variational EM whose per-iteration cost is linear in nodes and hyperedges.

pub mod attributes;
pub mod deletion;
pub mod em;
pub mod error;
pub mod eval;
pub mod hypergraph;
pub mod model;
pub mod rng;
pub mod synth;

pub use attributes::{one_hot_encode, read_attribute_table, AttributeMatrix, AttributeTable};
pub use em::{em_fit, Diagnostics, FitConfig, FitResult};
pub use error::{Error, Result};
pub use hypergraph::{build_hypergraph, incidence_index, read_hypergraph, Hypergraph, IncidenceIndex, RawEdge};
pub use model::{Hyperparams, ModelParams, ParamsDocument};
