//! Lattice side of the dimer engine: Temperleyan regions, Kasteleyn linear
//! algebra, exact sampling and height functions.

pub mod domain;
pub mod error;
pub mod height;
pub mod kasteleyn;
pub mod region;
pub mod sampler;
pub mod scalar;

pub use domain::{ComponentId, DomainSpec, Point, Rasterization, Shape};
pub use error::{HeightError, KasteleynError, RegionError};
pub use height::{
    expected_height_field, height_field, hole_and_centered, ExpectedHeightField, HeightField, HoleHeights,
    VertexFunction, VertexIndex,
};
pub use kasteleyn::{
    build_system, count_tilings, edge_probabilities, enumerate_tilings, Domino, KasteleynSystem, TilingCount,
    Tiling,
};
pub use region::{
    build_temperleyan, color_of, validate_region, LatticeSquare, LatticeVertex, PolyominoRegion, RegionReport,
    SquareColor,
};
pub use sampler::{sample_exact, sample_many, sample_seed_rng};
pub use scalar::Real;
