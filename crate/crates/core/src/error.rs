use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid surface parameters: {0}")]
    InvalidSurface(String),

    #[error("degenerate level-set gradient |grad phi| = {norm:e} at ({x}, {y}, {z})")]
    DegenerateGradient { norm: f64, x: f64, y: f64, z: f64 },

    #[error("refinement level {0} exceeds the memory guard (max 10)")]
    LevelTooLarge(u32),

    #[error("surface does not intersect the mesh at refinement level {0}")]
    SurfaceOutsideDomain(u32),

    #[error("empty active set")]
    EmptyActiveSet,

    #[error("mesh quality check failed: {0}")]
    MeshQuality(String),

    #[error("point lies outside tetrahedron {tet} (min barycentric {min_bary:e})")]
    PointOutsideTet { tet: usize, min_bary: f64 },

    #[error("unsupported {what}: {value}")]
    Unsupported { what: &'static str, value: String },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("non-finite value in {field} at step {step}")]
    NonFinite { field: &'static str, step: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate heavy-phase weight (integral {0:e})")]
    DegenerateWeight(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
