//! Spectral embeddings of closed manifolds and numerical checks of their bounds.

pub mod linalg;
pub mod manifold;
pub mod quadrature;
pub mod spectrum;
pub mod heat;
pub mod embed;
pub mod charts;
pub mod radius;
pub mod parallel;
