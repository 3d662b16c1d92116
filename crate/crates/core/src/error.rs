use thiserror::Error;

use crate::lattice::{OrientedEdge, Vertex};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("level {level} out of range: must be in 1..={max} (flow values up to 2^(2n) - 2^(n+1) must fit in i64)")]
    LevelOutOfRange { level: u32, max: u32 },

    #[error("level {level} is too large to materialize (limit {max}); use the implicit evaluator")]
    NotMaterializable { level: u32, max: u32 },

    #[error("edge {edge} leaves the {side}x{side} fragment grid")]
    OutOfBounds { edge: OrientedEdge, side: i64 },

    #[error("window of {size} edges exceeds capacity {max}")]
    WindowTooLarge { size: usize, max: usize },

    #[error("laws are defined on different edge windows")]
    MismatchedWindows,

    #[error("point ({x}, {y}) lies on a half-integer gridline where the smoothed divergence is undefined")]
    SingularLocus { x: f64, y: f64 },

    #[error("finite-difference stencil at ({x}, {y}) with step {h} crosses a kink line")]
    StencilCrossesKink { x: f64, y: f64, h: f64 },

    #[error("vertex {0} is outside the fragment grid")]
    VertexOutOfBounds(Vertex),

    #[error("{0}")]
    Capacity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
