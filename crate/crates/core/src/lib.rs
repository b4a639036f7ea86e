//! Exact computation of single Bernoulli numbers.
//!
//! The n-th Bernoulli number is recovered from the Genocchi number
//! `G_n = 2(1 - 2^n) B_n`, an integer, which is computed modulo many
//! prime powers `p^s` at once and reconstructed by the Chinese
//! remainder theorem. Each residue comes from a short alternating sum
//! whose inputs are values of one fixed polynomial, evaluated
//! simultaneously for every prime in a batch over `Z/2^M Z` via a
//! subproduct tree. A slow exact oracle (`oracle`) validates every
//! stage and serves small inputs.

pub mod cli;
pub mod engine;
pub mod genocchi;
pub mod modring;
pub mod oracle;
pub mod polyeval;
pub mod primes;
pub mod scheduler;

pub use rug::{Integer, Rational};

/// Exact rational number in lowest terms with positive denominator.
pub type ExactRational = Rational;

/// Rational brackets of pi used wherever a magnitude bound must be
/// rounded safely: `LO_NUM / 10^14 < pi < HI_NUM / 10^14`.
pub(crate) mod pi_bracket {
    pub const LO_NUM: u64 = 314_159_265_358_979;
    pub const HI_NUM: u64 = 314_159_265_358_980;
    pub const SCALE: u64 = 100_000_000_000_000;
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 for bad arguments, 2 for
    /// violated internal assertions.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 1,
            Error::Internal(_) => 2,
        }
    }
}
