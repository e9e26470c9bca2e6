//! Real-versus-synthetic distribution diagnostics and the structure gate.

mod curves;
mod ks;
mod pca;
mod structure;
mod tsne;

pub use curves::{ecdf, kde, silverman_bandwidth, DensityCurve, EcdfCurve, KDE_GRID_POINTS};
pub use ks::{chi_square_homogeneity, chi_square_sf, kolmogorov_sf, ks_two_sample, KsResult};
pub use pca::{pca_fit, pca_project, PcaModel};
pub use structure::{
    central_box_overlap, structure_check, ColumnKs, ColumnL1, FidelityReport, StructureThresholds,
};
pub use tsne::{conditional_affinities, tsne, Embedding2D, TsneConfig};
