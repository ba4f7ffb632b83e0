use thiserror::Error;

/// Errors raised by the geometry pipeline.
#[derive(Debug, Error)]
pub enum GeomError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("point on forbidden ray: <u,w> = {value:e}")]
    ForbiddenRay { value: f64 },

    #[error("non-positive conformal factor {value:e} at sample {index:?}")]
    NonPositiveFactor { index: Vec<usize>, value: f64 },

    #[error("<F,w> = {value:e} is not positive at sample {index:?}")]
    NotUpperCone { index: Vec<usize>, value: f64 },

    #[error("grid too small: axis {axis} has {count} samples, need at least {need}")]
    GridTooSmall { axis: usize, count: usize, need: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("degenerate metric at sample {index:?} (det = {det:e})")]
    DegenerateMetric { index: Vec<usize>, det: f64 },

    #[error("ill-conditioned immersion at sample {index:?} (cond = {cond:e})")]
    IllConditioned { index: Vec<usize>, cond: f64 },

    #[error("not in the class: no eigenvalue of multiplicity {mult} at sample {index:?} (spread {spread:e}, gap {gap:e})")]
    Multiplicity { index: Vec<usize>, mult: usize, spread: f64, gap: f64 },

    #[error("principal curvature vanishes at sample {index:?}")]
    VanishingCurvature { index: Vec<usize> },

    #[error("signature of span{{s,s_u,s_v}} degenerate at sample {index:?}")]
    EnvelopeSignature { index: Vec<usize> },

    #[error("congruence is not two-parameter: leaf dependence {value:e}")]
    NotTwoParameter { value: f64 },

    #[error("conjugate structure is {kind}: {detail}")]
    Conjugate { kind: String, detail: String },

    #[error("sign conditions fail at sample {index:?}")]
    SignConditions { index: Vec<usize> },

    #[error("degenerate candidate at sample {index:?}: {detail}")]
    DegenerateCandidate { index: Vec<usize>, detail: String },

    #[error("square-root branch flip at sample {index:?}")]
    BranchFlip { index: Vec<usize> },

    #[error("asymmetric (A - lambda I) D_{which}: residual {value:e}")]
    Asymmetric { which: usize, value: f64 },

    #[error("structure equations violated at scale h: path mismatch {value:e}")]
    PathDependence { value: f64 },

    #[error("quadrature left the domain rho > 0 at u = {u}")]
    Quadrature { u: f64 },

    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("stage `{stage}` failed: {detail}")]
    Stage { stage: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, GeomError>;
