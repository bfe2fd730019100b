use thiserror::Error;

use crate::region::LatticeSquare;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error("invalid domain spec: {0}")]
    InvalidSpec(String),
    #[error("infeasible geometry: {0}")]
    InfeasibleGeometry(String),
    #[error("unbalanced region: {white} white vs {black} black squares")]
    UnbalancedRegion { white: usize, black: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KasteleynError {
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error("region has {squares} squares, enumeration is limited to {limit}")]
    RegionTooLarge { squares: usize, limit: usize },
    #[error("invalid edge {0:?} - {1:?}")]
    InvalidEdge(LatticeSquare, LatticeSquare),
    #[error("region has no domino tiling")]
    Untileable,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeightError {
    #[error("inconsistent tiling: {0}")]
    InconsistentTiling(String),
    #[error("missing harmonic data: {0}")]
    MissingHarmonicData(String),
    #[error(transparent)]
    Kasteleyn(#[from] KasteleynError),
}
