//! Joint non-negative factorization of support and query embeddings.
//!
//! The embedding matrix `H` (p x M, one column per sample, support columns
//! first) is factored as `H ≈ W·Y` with `W ≥ 0` (p x N, one primitive per class)
//! and `Y ≥ 0` (N x M, per-sample coefficients). The objective
//! `‖H − W·Y‖²_F` is minimized by alternating projected gradient steps on `W`
//! and `Y`, each with Armijo backtracking. A query sample is labelled with the
//! row holding the largest coefficient in its column of `Y`.
//!
//! Internally the solver works with `f = ½‖H − WY‖²_F` so the gradients are
//! `(WY − H)Yᵀ` and `Wᵀ(WY − H)`; the reported trace is `2f`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{argmax_cols, frobenius_norm_sq, Matrix};

const MAX_BACKTRACKS: usize = 60;

/// One episode laid out for the solver: `H` holds all `L` support columns
/// followed by all `U` query columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMatrices {
    embeddings: Matrix,
    n_classes: usize,
    support_labels: Vec<usize>,
}

impl EpisodeMatrices {
    /// Validates the layout: `H ≥ 0`, every support label below `n_classes`,
    /// and every class holding the same nonzero number of support columns.
    pub fn new(embeddings: Matrix, n_classes: usize, support_labels: Vec<usize>) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::InvalidEpisode("n_classes must be positive".into()));
        }
        if support_labels.len() > embeddings.cols() {
            return Err(Error::InvalidEpisode(format!(
                "{} support labels for {} columns",
                support_labels.len(),
                embeddings.cols()
            )));
        }
        if let Some(&bad) = support_labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidEpisode(format!(
                "support label {bad} out of range for {n_classes} classes"
            )));
        }
        if !embeddings.is_nonneg() {
            return Err(Error::InvalidEpisode(format!(
                "embeddings must be nonnegative (min entry {})",
                embeddings.min()
            )));
        }
        let mut counts = vec![0usize; n_classes];
        for &l in &support_labels {
            counts[l] += 1;
        }
        if let Some(class) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyClass { class });
        }
        if counts.iter().any(|&c| c != counts[0]) {
            return Err(Error::InvalidEpisode(format!(
                "unequal support counts per class: {counts:?}"
            )));
        }
        Ok(Self {
            embeddings,
            n_classes,
            support_labels,
        })
    }

    pub fn embeddings(&self) -> &Matrix {
        &self.embeddings
    }

    pub fn dim(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_support(&self) -> usize {
        self.support_labels.len()
    }

    pub fn n_query(&self) -> usize {
        self.embeddings.cols() - self.support_labels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn k_shot(&self) -> usize {
        self.n_support() / self.n_classes
    }

    pub fn support_labels(&self) -> &[usize] {
        &self.support_labels
    }

    pub fn support(&self) -> Matrix {
        self.embeddings.columns(0..self.n_support())
    }

    pub fn query(&self) -> Matrix {
        self.embeddings.columns(self.n_support()..self.n_samples())
    }

    /// Same episode with every embedding column scaled to unit L2 norm.
    pub fn l2_normalized(&self) -> Self {
        Self {
            embeddings: self.embeddings.l2_normalize_columns(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Maximum number of full (W, Y) sweeps. Zero skips optimization entirely.
    pub max_iters: usize,
    /// Stop once one sweep lowers the objective by less than this fraction.
    pub rel_tol: f64,
    pub armijo_shrink: f64,
    pub armijo_c: f64,
    /// Step tried first on every half-step.
    pub init_step: f64,
    /// Keep support columns of `Y` pinned to their one-hot labels.
    pub freeze_support_columns: bool,
    /// Added to every entry of the initial basis.
    pub basis_jitter_eps: f64,
    /// Recorded for run manifests; the solver itself draws no random numbers.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            rel_tol: 1e-6,
            armijo_shrink: 0.5,
            armijo_c: 1e-4,
            init_step: 1.0,
            freeze_support_columns: false,
            basis_jitter_eps: 1e-6,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "rel_tol {} must be positive",
                self.rel_tol
            )));
        }
        if !open_unit(self.armijo_shrink) {
            return Err(Error::InvalidConfig(format!(
                "armijo_shrink {} must lie in (0, 1)",
                self.armijo_shrink
            )));
        }
        if !open_unit(self.armijo_c) {
            return Err(Error::InvalidConfig(format!(
                "armijo_c {} must lie in (0, 1)",
                self.armijo_c
            )));
        }
        if !(self.init_step > 0.0 && self.init_step.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "init_step {} must be positive",
                self.init_step
            )));
        }
        if !(self.basis_jitter_eps >= 0.0 && self.basis_jitter_eps.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "basis_jitter_eps {} must be nonnegative",
                self.basis_jitter_eps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// `W`, p x N.
    pub basis: Matrix,
    /// `Y`, N x M.
    pub coefficients: Matrix,
    /// `‖H − WY‖²_F` at initialization and after every accepted sweep.
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
}

impl Decomposition {
    pub fn final_objective(&self) -> f64 {
        *self
            .objective_trace
            .last()
            .expect("trace holds the initial objective")
    }

    /// Columns of `Y` pushed through a softmax, for callers wanting a
    /// categorical distribution per sample. Argmax is unchanged by this.
    pub fn label_distribution(&self) -> Matrix {
        self.coefficients.softmax_cols()
    }
}

/// Column `n` is the mean of class `n`'s support embeddings plus
/// `basis_jitter_eps` on every entry.
pub fn init_basis(ep: &EpisodeMatrices, cfg: &SolverConfig) -> Result<Matrix> {
    let p = ep.dim();
    let mut basis = Matrix::zeros(p, ep.n_classes());
    let mut counts = vec![0usize; ep.n_classes()];
    let h = ep.embeddings();
    for (j, &label) in ep.support_labels().iter().enumerate() {
        counts[label] += 1;
        for i in 0..p {
            basis[(i, label)] += h[(i, j)];
        }
    }
    for (n, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::EmptyClass { class: n });
        }
        for i in 0..p {
            basis[(i, n)] = basis[(i, n)] / count as f64 + cfg.basis_jitter_eps;
        }
    }
    Ok(basis)
}

/// Support columns one-hot at their label, query columns uniform `1/N`.
pub fn init_coefficients(ep: &EpisodeMatrices, _cfg: &SolverConfig) -> Result<Matrix> {
    let n = ep.n_classes();
    let mut y = Matrix::zeros(n, ep.n_samples());
    for (j, &label) in ep.support_labels().iter().enumerate() {
        if label >= n {
            return Err(Error::InvalidEpisode(format!(
                "support label {label} out of range for {n} classes"
            )));
        }
        y[(label, j)] = 1.0;
    }
    let uniform = 1.0 / n as f64;
    for j in ep.n_support()..ep.n_samples() {
        for i in 0..n {
            y[(i, j)] = uniform;
        }
    }
    Ok(y)
}

fn check_factor_dims(op: &'static str, h: &Matrix, w: &Matrix, y: &Matrix) -> Result<()> {
    if w.rows() != h.rows() || w.cols() != y.rows() || y.cols() != h.cols() {
        return Err(Error::FactorMismatch {
            op,
            h: h.shape(),
            w: w.shape(),
            y: y.shape(),
        });
    }
    Ok(())
}

fn residual(h: &Matrix, w: &Matrix, y: &Matrix) -> Result<Matrix> {
    w.matmul(y)?.sub(h)
}

/// `‖H − WY‖²_F`.
pub fn objective(h: &Matrix, w: &Matrix, y: &Matrix) -> Result<f64> {
    check_factor_dims("objective", h, w, y)?;
    Ok(frobenius_norm_sq(&residual(h, w, y)?))
}

/// `(WY − H)·Yᵀ`, the gradient of `½‖H − WY‖²_F` with respect to `W`.
pub fn grad_w(h: &Matrix, w: &Matrix, y: &Matrix) -> Result<Matrix> {
    check_factor_dims("grad_w", h, w, y)?;
    residual(h, w, y)?.matmul_t(y)
}

/// `Wᵀ·(WY − H)`, the gradient of `½‖H − WY‖²_F` with respect to `Y`.
pub fn grad_y(h: &Matrix, w: &Matrix, y: &Matrix) -> Result<Matrix> {
    check_factor_dims("grad_y", h, w, y)?;
    w.t_matmul(&residual(h, w, y)?)
}

/// Which factor a half-step updates. The objective is quadratic in either
/// factor, so the change from a step `D` is `<D, G> + ½·q(D)` with
/// `q(D) = <D, D·YYᵀ>` for `W` and `<D, WᵀW·D>` for `Y`.
enum Factor<'a> {
    Basis {
        gram: &'a Matrix,
    },
    Coefficients {
        gram: &'a Matrix,
        frozen: Option<(&'a Matrix, usize)>,
    },
}

impl Factor<'_> {
    fn curvature(&self, d: &Matrix) -> Result<f64> {
        match self {
            Factor::Basis { gram } => d.dot(&d.matmul(gram)?),
            Factor::Coefficients { gram, .. } => d.dot(&gram.matmul(d)?),
        }
    }

    fn project(&self, candidate: Matrix) -> Matrix {
        let mut projected = candidate.project_nonneg();
        if let Factor::Coefficients {
            frozen: Some((init, n_support)),
            ..
        } = self
        {
            for j in 0..*n_support {
                projected.set_column(j, &init.column(j));
            }
        }
        projected
    }
}

/// One projected-gradient half-step with Armijo backtracking. Returns the new
/// iterate, or `None` when no step in the schedule decreases the objective.
fn armijo_step(
    current: &Matrix,
    grad: &Matrix,
    factor: &Factor<'_>,
    cfg: &SolverConfig,
) -> Result<Option<Matrix>> {
    let mut step = cfg.init_step;
    for _ in 0..MAX_BACKTRACKS {
        let candidate = factor.project(current.add_scaled(-step, grad)?);
        let d = candidate.sub(current)?;
        let slope = d.dot(grad)?;
        if slope >= 0.0 {
            // Projection left the iterate unchanged, or the direction is not
            // a descent direction at this step length.
            if d.as_slice().iter().all(|&v| v == 0.0) {
                return Ok(None);
            }
        } else {
            let change = slope + 0.5 * factor.curvature(&d)?;
            if !change.is_finite() {
                return Err(Error::NonFinite("armijo_step"));
            }
            if change <= cfg.armijo_c * slope {
                return Ok(Some(candidate));
            }
        }
        step *= cfg.armijo_shrink;
    }
    Ok(None)
}

/// Alternating projected gradient descent on `‖H − WY‖²_F` over `W, Y ≥ 0`.
///
/// A sweep updates `W` then `Y`. The loop stops when a sweep lowers the
/// objective by less than `rel_tol` relative to its start, when the objective
/// reaches zero, or after `max_iters` sweeps. A sweep whose recomputed
/// objective is higher than the last recorded value (possible only through
/// rounding) is discarded and the solver reports convergence.
pub fn solve(ep: &EpisodeMatrices, cfg: &SolverConfig) -> Result<Decomposition> {
    cfg.validate()?;
    let h = ep.embeddings();
    let mut w = init_basis(ep, cfg)?;
    let mut y = init_coefficients(ep, cfg)?;
    let y_init = y.clone();
    let frozen = cfg
        .freeze_support_columns
        .then_some((&y_init, ep.n_support()));

    check_factor_dims("solve", h, &w, &y)?;
    // Objective together with the residual it was computed from, which the
    // next sweep reuses for the gradient in `W`.
    let eval = |w: &Matrix, y: &Matrix, iteration: usize| -> Result<(f64, Matrix)> {
        match residual(h, w, y) {
            Ok(r) => {
                let f = frobenius_norm_sq(&r);
                if f.is_finite() {
                    Ok((f, r))
                } else {
                    Err(Error::NonFiniteObjective { iteration })
                }
            }
            Err(Error::NonFinite(_)) => Err(Error::NonFiniteObjective { iteration }),
            Err(e) => Err(e),
        }
    };

    let (mut current, mut resid) = eval(&w, &y, 0)?;
    let mut trace = vec![current];
    let mut converged = current == 0.0;
    let mut iterations_run = 0;

    let non_finite = |iteration: usize| {
        move |e: Error| match e {
            Error::NonFinite(_) => Error::NonFiniteObjective { iteration },
            other => other,
        }
    };

    while !converged && iterations_run < cfg.max_iters {
        let iteration = iterations_run + 1;

        let gram_y = y.matmul_t(&y).map_err(non_finite(iteration))?;
        let g_w = resid.matmul_t(&y).map_err(non_finite(iteration))?;
        let next_w = armijo_step(&w, &g_w, &Factor::Basis { gram: &gram_y }, cfg)
            .map_err(non_finite(iteration))?
            .unwrap_or_else(|| w.clone());

        let gram_w = next_w.t_matmul(&next_w).map_err(non_finite(iteration))?;
        let g_y = next_w
            .t_matmul(&residual(h, &next_w, &y).map_err(non_finite(iteration))?)
            .map_err(non_finite(iteration))?;
        let next_y = armijo_step(
            &y,
            &g_y,
            &Factor::Coefficients {
                gram: &gram_w,
                frozen,
            },
            cfg,
        )
        .map_err(non_finite(iteration))?
        .unwrap_or_else(|| y.clone());

        let (next, next_resid) = eval(&next_w, &next_y, iteration)?;
        if next > current {
            converged = true;
            break;
        }
        w = next_w;
        y = next_y;
        resid = next_resid;
        iterations_run = iteration;
        trace.push(next);
        if next == 0.0 || (current - next) / current < cfg.rel_tol {
            converged = true;
        }
        current = next;
    }

    Ok(Decomposition {
        basis: w,
        coefficients: y,
        objective_trace: trace,
        iterations_run,
        converged,
    })
}

/// Predicted class per query column: the row of the largest coefficient,
/// ties to the lowest class index.
pub fn predict_labels(dec: &Decomposition, ep: &EpisodeMatrices) -> Vec<usize> {
    let query = dec.coefficients.columns(ep.n_support()..ep.n_samples());
    argmax_cols(&query)
}

/// `Ŵᵀ·H` where `Ŵ` is the initial basis with unit-norm columns. With one
/// support sample per class and unit-norm embeddings, each query column holds
/// cosine similarities to the class prototypes.
pub fn prototype_readout(ep: &EpisodeMatrices, cfg: &SolverConfig) -> Result<Matrix> {
    let basis = init_basis(ep, cfg)?.l2_normalize_columns();
    basis.t_matmul(ep.embeddings())
}

/// Labels for the query columns: the prototype readout when `max_iters` is
/// zero, otherwise the argmax of the solved coefficients.
pub fn classify(ep: &EpisodeMatrices, cfg: &SolverConfig) -> Result<Vec<usize>> {
    if cfg.max_iters == 0 {
        cfg.validate()?;
        let scores = prototype_readout(ep, cfg)?;
        return Ok(argmax_cols(&scores.columns(ep.n_support()..ep.n_samples())));
    }
    let dec = solve(ep, cfg)?;
    Ok(predict_labels(&dec, ep))
}
