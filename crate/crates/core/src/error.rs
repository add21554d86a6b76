use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    DimensionMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("{op}: H {h:?}, W {w:?}, Y {y:?} are not conformable")]
    FactorMismatch {
        op: &'static str,
        h: (usize, usize),
        w: (usize, usize),
        y: (usize, usize),
    },

    #[error("matrix data length {len} does not match {rows}x{cols}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        len: usize,
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("non-finite objective at iteration {iteration}; check input scaling")]
    NonFiniteObjective { iteration: usize },

    #[error("invalid episode: {0}")]
    InvalidEpisode(String),

    #[error("invalid solver config: {0}")]
    InvalidConfig(String),

    #[error("class {class} has no support columns")]
    EmptyClass { class: usize },

    #[error("prototype {class} has zero norm")]
    ZeroNormPrototype { class: usize },

    #[error("infeasible episode spec: {0}")]
    InfeasibleSpec(String),

    #[error("empty accuracy sequence")]
    EmptySequence,

    #[error("bad magic: expected EMB1, found {found:?}")]
    MagicMismatch { found: [u8; 4] },

    #[error("truncated payload: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("dimension mismatch in bank: {0}")]
    BankDimMismatch(String),

    #[error("negative entry {value} in class {class:?} (vector {index}, component {component})")]
    NegativeEntry {
        class: String,
        index: usize,
        component: usize,
        value: f32,
    },

    #[error("non-finite entry in class {class:?} (vector {index})")]
    NonFiniteEntry { class: String, index: usize },

    #[error("bank class {0:?} has no vectors")]
    EmptyBankClass(String),

    #[error("invalid bank: {0}")]
    InvalidBank(String),

    #[error("invalid UTF-8 in {0}")]
    Utf8(&'static str),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}
