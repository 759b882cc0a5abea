//! Exact deformation theory of logarithmic Higgs and de Rham bundles on
//! curves over truncated Witt vectors.

pub mod expr;
pub mod field;
pub mod flow;
pub mod geometry;
pub mod bundle;
pub mod cartier;
pub mod cech;
pub mod deform;
pub mod linalg;
pub mod poly;
pub mod samples;
pub mod smat;
pub mod witt;
