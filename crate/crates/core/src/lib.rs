//! Perturbation-sensitivity profiling of graph datasets.
//!
//! A dataset is transformed by a fixed suite of perturbations (dropping node
//! features, replacing them by degree one-hots, removing or completing the
//! edge set, fragmenting the graph into local balls). A fixed GNN stack is
//! trained and scored by AUROC on each variant, and the ratios to the
//! unperturbed score form the dataset's sensitivity profile. Profiles of many
//! datasets are then grouped with Ward-linkage agglomerative clustering.
//!
//! Module map:
//!
//! * [`graph`]: graphs, datasets, BFS balls, components
//! * [`perturb`]: the perturbation suite
//! * [`nn`]: dense tensors, a small reverse-mode tape, batch norm, Adam
//! * [`models`]: GCN / GAT / GIN / ChebNet layers and the fixed network
//! * [`eval`]: stratified folds, AUROC, training loop, evaluation protocol
//! * [`profiler`]: sensitivity profiles, Ward clustering, CSV/JSON/SVG export
//! * [`data`]: TU text format, synthetic generators, run configuration
//! * [`cli`]: the `graphtax` command line

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod models;
pub mod nn;
pub mod par;
pub mod perturb;
pub mod profiler;

pub use error::{Error, Result};
pub use graph::{Dataset, Graph, SplitSpec, TaskKind};
pub use models::{ModelConfig, ModelKind};
pub use perturb::{PerturbationKind, SeedPolicy};
