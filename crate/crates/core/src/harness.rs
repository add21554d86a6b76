//! N-way K-shot episode sampling, per-method evaluation and accuracy
//! aggregation with 95% confidence intervals.
//!
//! Episode `i` of a run draws from its own generator
//! `SplitMix64::stream(spec.seed, i)`: first `n_way` classes by partial
//! Fisher-Yates over the bank's class indices, then for each chosen class (in
//! draw order, which fixes its episode label) `k_shot + n_query_per_class`
//! vectors by partial Fisher-Yates over that class; the first `k_shot` are
//! support, the rest query. Query columns are finally shuffled together.
//! Episodes can therefore be evaluated in any order or in parallel.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{fit_prototypes, predict_cosine, predict_euclidean};
use crate::data_io::EmbeddingBank;
use crate::decomposition::{classify, EpisodeMatrices, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SplitMix64;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub n_way: usize,
    pub k_shot: usize,
    pub n_query_per_class: usize,
    pub n_episodes: usize,
    pub seed: u64,
    /// Scale every embedding column to unit L2 norm before solving.
    #[serde(default)]
    pub l2_normalize_columns: bool,
}

impl EpisodeSpec {
    pub fn check_feasible(&self, bank: &EmbeddingBank) -> Result<()> {
        for (name, v) in [
            ("n_way", self.n_way),
            ("k_shot", self.k_shot),
            ("n_query_per_class", self.n_query_per_class),
            ("n_episodes", self.n_episodes),
        ] {
            if v == 0 {
                return Err(Error::InfeasibleSpec(format!("{name} must be positive")));
            }
        }
        if self.n_way > bank.n_classes() {
            return Err(Error::InfeasibleSpec(format!(
                "n_way {} exceeds the bank's {} classes",
                self.n_way,
                bank.n_classes()
            )));
        }
        let needed = self.k_shot + self.n_query_per_class;
        if let Some((c, class)) = bank
            .classes()
            .iter()
            .enumerate()
            .find(|(c, _)| bank.class_len(*c) < needed)
        {
            return Err(Error::InfeasibleSpec(format!(
                "k_shot + n_query_per_class = {needed} exceeds the {} vectors of class {:?}",
                bank.class_len(c),
                class.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledEpisode {
    pub matrices: EpisodeMatrices,
    /// Ground truth for each query column, kept apart from the solver input.
    pub query_labels: Vec<usize>,
    /// Bank class index behind each episode label.
    pub classes: Vec<usize>,
}

pub fn sample_episode(
    bank: &EmbeddingBank,
    spec: &EpisodeSpec,
    episode_index: u64,
) -> Result<SampledEpisode> {
    spec.check_feasible(bank)?;
    let mut rng = SplitMix64::stream(spec.seed, episode_index);

    let mut class_order: Vec<usize> = (0..bank.n_classes()).collect();
    rng.partial_shuffle(&mut class_order, spec.n_way);
    let classes = class_order[..spec.n_way].to_vec();

    let per_class = spec.k_shot + spec.n_query_per_class;
    let mut support = Vec::with_capacity(spec.n_way * spec.k_shot);
    let mut support_labels = Vec::with_capacity(spec.n_way * spec.k_shot);
    let mut queries = Vec::with_capacity(spec.n_way * spec.n_query_per_class);
    for (label, &class) in classes.iter().enumerate() {
        let mut picks: Vec<usize> = (0..bank.class_len(class)).collect();
        rng.partial_shuffle(&mut picks, per_class);
        for &k in &picks[..spec.k_shot] {
            support.push(bank.vector(class, k));
            support_labels.push(label);
        }
        for &k in &picks[spec.k_shot..per_class] {
            queries.push((bank.vector(class, k), label));
        }
    }
    rng.shuffle(&mut queries);

    let dim = bank.dim();
    let total = support.len() + queries.len();
    let mut h = Matrix::zeros(dim, total);
    let columns = support
        .iter()
        .copied()
        .chain(queries.iter().map(|(v, _)| *v));
    for (j, vector) in columns.enumerate() {
        for (i, &v) in vector.iter().enumerate() {
            h[(i, j)] = f64::from(v);
        }
    }
    let mut matrices = EpisodeMatrices::new(h, spec.n_way, support_labels)?;
    if spec.l2_normalize_columns {
        matrices = matrices.l2_normalized();
    }
    Ok(SampledEpisode {
        matrices,
        query_labels: queries.iter().map(|(_, l)| *l).collect(),
        classes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "subspace")]
    Subspace,
    #[serde(rename = "proto-euclid")]
    ProtoEuclidean,
    #[serde(rename = "proto-cosine")]
    ProtoCosine,
}

impl Method {
    pub const ALL: [Method; 3] = [
        Method::Subspace,
        Method::ProtoEuclidean,
        Method::ProtoCosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Subspace => "subspace",
            Method::ProtoEuclidean => "proto-euclid",
            Method::ProtoCosine => "proto-cosine",
        }
    }

    /// Predicted label for every query column of the episode.
    pub fn predict(self, ep: &EpisodeMatrices, cfg: &SolverConfig) -> Result<Vec<usize>> {
        match self {
            Method::Subspace => classify(ep, cfg),
            Method::ProtoEuclidean => predict_euclidean(&fit_prototypes(ep)?, &ep.query()),
            Method::ProtoCosine => predict_cosine(&fit_prototypes(ep)?, &ep.query()),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                format!("unknown method {s:?} (expected subspace, proto-euclid or proto-cosine)")
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeFailure {
    pub episode_index: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub method_name: String,
    pub spec: EpisodeSpec,
    /// SHA-256 of the solver config as JSON.
    pub config_digest: String,
    /// Accuracy of every successful episode, in episode order.
    pub per_episode_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub ci95_halfwidth: f64,
    pub failure_count: usize,
    pub failures: Vec<EpisodeFailure>,
    pub warning: Option<String>,
}

impl BenchmarkReport {
    /// `method: 67.55% ± 0.24%`
    pub fn summary_line(&self) -> String {
        format_summary(&self.method_name, self.mean_accuracy, self.ci95_halfwidth)
    }
}

pub fn format_summary(name: &str, mean: f64, halfwidth: f64) -> String {
    format!("{name}: {:.2}% ± {:.2}%", 100.0 * mean, 100.0 * halfwidth)
}

/// Mean and `1.96 · s / √n` with the sample (n − 1) standard deviation. A
/// single value has halfwidth 0.
pub fn confidence_interval(accs: &[f64]) -> Result<(f64, f64)> {
    if accs.is_empty() {
        return Err(Error::EmptySequence);
    }
    // Welford: a constant sequence yields exactly zero spread.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, &a) in accs.iter().enumerate() {
        let delta = a - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (a - mean);
    }
    if accs.len() == 1 {
        return Ok((mean, 0.0));
    }
    let n = accs.len() as f64;
    let var = m2 / (n - 1.0);
    Ok((mean, Z95 * var.sqrt() / n.sqrt()))
}

pub fn config_digest(cfg: &SolverConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    debug_assert_eq!(predicted.len(), truth.len());
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    correct as f64 / truth.len() as f64
}

/// Runs one of the built-in methods over `spec.n_episodes` episodes. Uses the
/// ambient rayon pool; results are merged in episode order.
pub fn run_benchmark(
    bank: &EmbeddingBank,
    spec: &EpisodeSpec,
    method: Method,
    cfg: &SolverConfig,
) -> Result<BenchmarkReport> {
    cfg.validate()?;
    run_benchmark_with(bank, spec, method.name(), &config_digest(cfg), |ep| {
        method.predict(ep, cfg)
    })
}

/// Like [`run_benchmark`] with an arbitrary predictor mapping an episode to
/// one label per query column.
pub fn run_benchmark_with<F>(
    bank: &EmbeddingBank,
    spec: &EpisodeSpec,
    method_name: &str,
    digest: &str,
    predictor: F,
) -> Result<BenchmarkReport>
where
    F: Fn(&EpisodeMatrices) -> Result<Vec<usize>> + Sync,
{
    spec.check_feasible(bank)?;
    let outcomes: Vec<Result<f64>> = (0..spec.n_episodes as u64)
        .into_par_iter()
        .map(|i| {
            let episode = sample_episode(bank, spec, i)?;
            let predicted = predictor(&episode.matrices)?;
            if predicted.len() != episode.query_labels.len() {
                return Err(Error::InvalidEpisode(format!(
                    "predictor returned {} labels for {} queries",
                    predicted.len(),
                    episode.query_labels.len()
                )));
            }
            Ok(accuracy(&predicted, &episode.query_labels))
        })
        .collect();

    let mut per_episode_accuracy = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(acc) => per_episode_accuracy.push(acc),
            Err(e) => failures.push(EpisodeFailure {
                episode_index: i as u64,
                message: e.to_string(),
            }),
        }
    }

    let (mean_accuracy, ci95_halfwidth, warning) = match confidence_interval(&per_episode_accuracy)
    {
        Ok((m, h)) if failures.is_empty() => (m, h, None),
        Ok((m, h)) => (
            m,
            h,
            Some(format!(
                "{} of {} episodes failed and are excluded from the mean",
                failures.len(),
                spec.n_episodes
            )),
        ),
        Err(_) => (0.0, 0.0, Some("all episodes failed".to_string())),
    };

    Ok(BenchmarkReport {
        method_name: method_name.to_string(),
        spec: spec.clone(),
        config_digest: digest.to_string(),
        per_episode_accuracy,
        mean_accuracy,
        ci95_halfwidth,
        failure_count: failures.len(),
        failures,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::{gen_synthetic, PrototypeStyle, SyntheticSpec};

    fn bank(classes: usize, per_class: usize) -> EmbeddingBank {
        gen_synthetic(&SyntheticSpec {
            n_classes: classes,
            per_class,
            dim: 12,
            noise_sigma: 0.3,
            style: PrototypeStyle::RandomNonneg,
            seed: 3,
        })
        .unwrap()
    }

    fn spec(n_way: usize) -> EpisodeSpec {
        EpisodeSpec {
            n_way,
            k_shot: 1,
            n_query_per_class: 3,
            n_episodes: 20,
            seed: 7,
            l2_normalize_columns: false,
        }
    }

    #[test]
    fn ci_hand_computed() {
        let (m, h) = confidence_interval(&[0.8, 1.0, 0.6]).unwrap();
        assert!((m - 0.8).abs() < 1e-15);
        assert!((h - 1.96 * 0.2 / 3f64.sqrt()).abs() < 1e-15);
        assert!((h - 0.2263).abs() < 5e-5);

        let (m, h) = confidence_interval(&[0.0, 1.0]).unwrap();
        assert_eq!(m, 0.5);
        assert!((h - 1.96 * 0.5f64.sqrt() / 2f64.sqrt()).abs() < 1e-15);
        assert!((h - 0.98).abs() < 1e-12);

        assert_eq!(confidence_interval(&[0.4; 7]).unwrap().1, 0.0);
        assert_eq!(confidence_interval(&[0.3]).unwrap(), (0.3, 0.0));
        assert!(matches!(
            confidence_interval(&[]),
            Err(Error::EmptySequence)
        ));
    }

    #[test]
    fn forced_class_selection() {
        let b = bank(5, 6);
        for i in 0..10 {
            let ep = sample_episode(&b, &spec(5), i).unwrap();
            let mut classes = ep.classes.clone();
            classes.sort_unstable();
            assert_eq!(classes, vec![0, 1, 2, 3, 4]);
            assert_eq!(ep.matrices.n_support(), 5);
            assert_eq!(ep.query_labels.len(), 15);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_index() {
        let b = bank(8, 6);
        let a = sample_episode(&b, &spec(5), 3).unwrap();
        assert_eq!(a, sample_episode(&b, &spec(5), 3).unwrap());
        assert_ne!(a, sample_episode(&b, &spec(5), 4).unwrap());
    }

    #[test]
    fn infeasible_specs_name_the_bound() {
        let b = bank(4, 3);
        let err = sample_episode(&b, &spec(5), 0).unwrap_err().to_string();
        assert!(err.contains("n_way 5"), "{err}");
        let err = sample_episode(&b, &spec(3), 0).unwrap_err().to_string();
        assert!(err.contains("class_000"), "{err}");
        let zero = EpisodeSpec {
            k_shot: 0,
            ..spec(2)
        };
        assert!(zero.check_feasible(&b).is_err());
    }

    #[test]
    fn support_and_queries_are_disjoint_draws() {
        let b = bank(6, 10);
        let s = EpisodeSpec {
            k_shot: 2,
            n_query_per_class: 8,
            ..spec(3)
        };
        let ep = sample_episode(&b, &s, 1).unwrap();
        let h = ep.matrices.embeddings();
        let cols: Vec<Vec<u64>> = (0..h.cols())
            .map(|j| h.column(j).iter().map(|v| v.to_bits()).collect())
            .collect();
        for a in 0..cols.len() {
            for c in a + 1..cols.len() {
                assert_ne!(cols[a], cols[c], "columns {a} and {c} repeat a vector");
            }
        }
    }

    #[test]
    fn method_names_parse() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("maml".parse::<Method>().is_err());
    }

    #[test]
    fn failures_are_counted_not_averaged() {
        let b = bank(5, 6);
        let report = run_benchmark_with(&b, &spec(3), "flaky", "none", |ep| {
            if ep.embeddings()[(0, 0)] > 0.5 {
                Err(Error::InvalidConfig("boom".into()))
            } else {
                Ok(vec![0; ep.n_query()])
            }
        })
        .unwrap();
        assert_eq!(report.failure_count + report.per_episode_accuracy.len(), 20);
        assert!(report.failure_count > 0, "fixture should trigger failures");
        assert!(report.warning.is_some());
        let (m, h) = confidence_interval(&report.per_episode_accuracy).unwrap();
        assert_eq!((m, h), (report.mean_accuracy, report.ci95_halfwidth));
    }

    #[test]
    fn summary_format() {
        assert_eq!(
            format_summary("subspace", 0.6755, 0.0024),
            "subspace: 67.55% ± 0.24%"
        );
    }
}
