//! δ-nets, the heat-kernel and eigenfunction embeddings, and their dilatation
//! and injectivity measurements.

mod maps;
mod net;
mod report;

use thiserror::Error;

pub use maps::{evaluate_map, scale_f, scale_g, scale_h, EmbeddingMap, MapKind, TargetMap, TargetNorm};
pub use net::{build_net, covering_radius, replicate_net, replication_counts, sample_spacing, voronoi_weights, Net, ReplicatedNet};
pub use report::{
    continuous_dilatation, dilatation_of, dilatation_report, injectivity_of, injectivity_report, scan_t, t_grid, ContinuousDilatation,
    DilatationReport, EmbeddingReport, InjectivityReport, Pair, PairRatio, PairSet, ScanReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("net finer than discretization: delta {delta} below sample spacing {spacing}")]
    NetTooFine { delta: f64, spacing: f64 },
    #[error("no sampled pairs at threshold {threshold}")]
    NoPairs { threshold: f64 },
}
