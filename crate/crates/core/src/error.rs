use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Bessel order {order} exceeds the supported maximum {max}")]
    UnsupportedOrder { order: u32, max: u32 },

    #[error("requested {requested} spatial modes but only {available} are available")]
    PoolExhausted { requested: usize, available: usize },

    #[error("stencil width must be odd, got {0}")]
    EvenStencil(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{what} = {value} is not a multiple of the channel step {step}")]
    OffLattice {
        what: &'static str,
        value: f64,
        step: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at byte offset {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("image file holds {images} items but label file holds {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("relative error undefined: reference norm is zero")]
    UndefinedError,

    #[error("assumption {assumption} violated: {detail}")]
    Precondition {
        assumption: &'static str,
        detail: String,
    },

    #[error("sweep cell (K={k}, L_alpha={l_alpha}, seed={seed}) failed: {source}")]
    Cell {
        k: usize,
        l_alpha: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
