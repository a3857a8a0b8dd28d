use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed user input: map specs, SFT specs, literals, hole data.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("map is not Markov: {0}")]
    NotMarkov(String),

    #[error("orbit of {point} meets the singular point {singular} after {step} step(s); derivative undefined")]
    SingularOrbit {
        point: String,
        singular: String,
        step: usize,
    },

    #[error("power iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("matrix is reducible on its surviving support ({components} non-trivial components)")]
    Reducible { components: usize },

    #[error("transition graph is irreducible but periodic with period {period}")]
    Periodic { period: usize },

    #[error("hole has zero mass; q_k series undefined")]
    ZeroMassHole,

    #[error("leading eigenvalue is zero; escape rate is infinite")]
    InfiniteEscape,

    #[error("block {0} is already forbidden")]
    BlockForbidden(String),

    #[error("level t = {t} unreachable: n * mu0(support) = {max}")]
    LevelOutOfRange { t: f64, max: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
