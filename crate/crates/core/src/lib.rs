//! Transductive one-shot classification by joint non-negative subspace
//! decomposition of support and query embeddings.
//!
//! Embeddings from a frozen backbone are stacked as the columns of `H` and
//! factored as `H ≈ W·Y` with both factors nonnegative. `W` holds one
//! primitive per class, initialized from the support set; `Y` holds each
//! sample's coefficients, initialized one-hot on the support columns. Query
//! labels are read off as the argmax of their `Y` columns.

pub mod baselines;
pub mod data_io;
pub mod decomposition;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod rng;

pub use baselines::{fit_prototypes, predict_cosine, predict_euclidean, PrototypeSet};
pub use data_io::{
    gen_synthetic, load_bank, save_bank, BankClass, BankFormat, EmbeddingBank, LoadOptions,
    PrototypeStyle, SyntheticSpec,
};
pub use decomposition::{
    classify, grad_w, grad_y, init_basis, init_coefficients, objective, predict_labels,
    prototype_readout, solve, Decomposition, EpisodeMatrices, SolverConfig,
};
pub use error::{Error, Result};
pub use harness::{
    confidence_interval, run_benchmark, run_benchmark_with, sample_episode, BenchmarkReport,
    EpisodeSpec, Method, SampledEpisode,
};
pub use linalg::Matrix;
pub use rng::SplitMix64;
