//! Sensitivity profiles and the dataset taxonomy built from them.

mod export;
mod profile;
mod ward;

use std::collections::BTreeMap;

pub use export::{
    read_profiles_csv, render_heatmap_svg, taxonomy_json, write_heatmap_svg, write_profiles_csv,
    write_taxonomy_json, PROFILES_HEADER,
};
pub use profile::{
    compute_profile, profile_with_runs, ProfileEntry, ProfileRun, SensitivityProfile,
    DEFAULT_CHANCE_MARGIN,
};
pub use ward::{check_monotone, flat_clusters, leaf_order, ward_linkage, Merge};

use crate::error::{Error, Result};
use crate::perturb::PerturbationKind;

/// Default number of flat clusters.
pub const DEFAULT_CLUSTERS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TaxonomyResult {
    /// Full perturbation suite shared by all profiles.
    pub suite: Vec<PerturbationKind>,
    /// Dataset names, sorted; leaf `i` of the dendrogram is `datasets[i]`.
    pub datasets: Vec<String>,
    /// Clustering features: relative scores in suite order without identity.
    pub matrix: Vec<Vec<f64>>,
    pub merges: Vec<Merge>,
    /// Flat cluster id per dataset, parallel to `datasets`.
    pub clusters: Vec<usize>,
}

impl TaxonomyResult {
    pub fn cluster_of(&self, dataset: &str) -> Option<usize> {
        self.datasets.iter().position(|d| d == dataset).map(|i| self.clusters[i])
    }

    pub fn cluster_map(&self) -> BTreeMap<String, usize> {
        self.datasets.iter().cloned().zip(self.clusters.iter().copied()).collect()
    }
}

/// Ward clustering of profiles on their relative scores. Input order does
/// not matter: profiles are sorted by dataset name first.
pub fn cluster_profiles(profiles: &[SensitivityProfile], n_clusters: usize) -> Result<TaxonomyResult> {
    if profiles.len() < 2 {
        return Err(Error::input("clustering needs at least two profiles"));
    }
    let mut sorted: Vec<&SensitivityProfile> = profiles.iter().collect();
    sorted.sort_by(|a, b| a.dataset.cmp(&b.dataset));
    if sorted.windows(2).any(|w| w[0].dataset == w[1].dataset) {
        return Err(Error::input("each dataset may appear only once per taxonomy"));
    }
    let suite = sorted[0].suite();
    if let Some(bad) = sorted.iter().find(|p| p.suite() != suite) {
        return Err(Error::input(format!(
            "profile of {} uses a different perturbation suite",
            bad.dataset
        )));
    }
    let matrix: Vec<Vec<f64>> = sorted
        .iter()
        .map(|p| {
            p.entries
                .iter()
                .filter(|e| e.perturbation != PerturbationKind::Identity)
                .map(|e| e.relative)
                .collect()
        })
        .collect();
    let merges = ward_linkage(&matrix)?;
    let clusters = flat_clusters(matrix.len(), &merges, n_clusters);
    Ok(TaxonomyResult {
        suite,
        datasets: sorted.iter().map(|p| p.dataset.clone()).collect(),
        matrix,
        merges,
        clusters,
    })
}
