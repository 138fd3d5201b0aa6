use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("cloud `{cloud}` is empty")]
    EmptyCloud { cloud: String },
    #[error("cloud `{cloud}` has {got} points, at least {needed} required")]
    TooFewPoints { cloud: String, needed: usize, got: usize },
    #[error("cloud `{cloud}` is degenerate: all points coincide (radius 0)")]
    DegenerateCloud { cloud: String },
    #[error("non-finite coordinate at point {index}")]
    NonFinite { index: usize },
    #[error("face {face} references vertex {vertex} but the cloud has {count} points")]
    FaceOutOfRange { face: usize, vertex: usize, count: usize },
    #[error("mesh faces are required")]
    MissingFaces,
    #[error("zero-length edge between coincident centroids")]
    ZeroLengthEdge,
    #[error("graph `{graph}` has no edges")]
    NoEdges { graph: String },
    #[error("graph is degenerate: {0}")]
    DegenerateGraph(String),
    #[error("NaN in profit matrix at ({row}, {col})")]
    NanProfit { row: usize, col: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("degenerate configuration: points are collinear or coincident")]
    Collinear,
    #[error("insufficient consensus: best model has {inliers} inliers")]
    InsufficientConsensus { inliers: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}
