// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mode pair: {0}")]
    InvalidPair(String),

    #[error("unknown pair index {0}")]
    UnknownPair(u32),

    #[error("pair indices overlap: {0:?}")]
    OverlappingPairs(Vec<u32>),

    #[error("state is not normalized (norm² = {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    #[error("state does not match geometry: {0}")]
    GeometryMismatch(String),

    #[error("mixture weights must be non-negative and sum to 1 (sum = {sum})")]
    BadWeights { sum: f64 },

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("closed form requires full-order absorption (order {order}, total photons {photons})")]
    ClosedFormOrder { order: u32, photons: u32 },

    #[error("absorption order must be at least 1")]
    ZeroOrder,

    #[error("lower-order profile requires 1 <= K < M (K = {order}, M = {photons})")]
    LowerOrder { order: u32, photons: u32 },

    #[error("cannot normalize: {0}")]
    Normalization(String),

    #[error("grid does not span an integer number of periods ({span} / {period})")]
    NonCommensurate { span: f64, period: f64 },

    #[error("incommensurate geometry: {0}")]
    Incommensurate(String),

    #[error("pixel {index} outside 1..={count}")]
    PixelOutOfRange { index: i64, count: usize },

    #[error("pattern has no targets")]
    EmptyPattern,

    #[error("negative plan: {0}")]
    Negative(String),

    #[error("M must be >= N >= 1 (N = {resolution}, M = {total})")]
    ChainPhotons { resolution: u32, total: u32 },

    #[error("profile has no peak")]
    FlatProfile,

    #[error("invalid film model: {0}")]
    Film(String),

    #[error("absorption probability exceeds 1 (q * rate = {0})")]
    ProbabilityOverflow(f64),

    #[error("target mean {target} unreachable with {grains} grains")]
    Unreachable { target: f64, grains: u32 },

    #[error("transmission must lie in [0, 1], got {0}")]
    Transmission(f64),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}
