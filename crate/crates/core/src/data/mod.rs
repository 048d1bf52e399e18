//! Dataset I/O, synthetic generators and run configuration.

pub mod config;
pub mod synth;
pub mod tu;

pub use config::{DatasetSource, RunConfig};
pub use synth::{feature_only_rule, gen_feature_only, gen_sbm_cluster, gen_structure_only, SbmSpec};
pub use tu::{load_dir, load_tu, write_tu};
