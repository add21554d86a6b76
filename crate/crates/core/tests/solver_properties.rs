mod common;

use common::{finite_difference_grad, half_objective, random_matrix};
use proptest::prelude::*;
use subspace_shot_core::{
    classify, fit_prototypes, gen_synthetic, grad_w, grad_y, objective, predict_cosine,
    predict_labels, sample_episode, solve, EpisodeMatrices, EpisodeSpec, Matrix, PrototypeStyle,
    SolverConfig, SplitMix64, SyntheticSpec,
};

fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    let diff = a.sub(b).unwrap().frobenius_norm_sq().sqrt();
    diff / b.frobenius_norm_sq().sqrt().max(1e-12)
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = SplitMix64::new(99);
    for _ in 0..20 {
        let p = 2 + rng.below(7) as usize;
        let n = 1 + rng.below(4) as usize;
        let m = n + rng.below((11 - n) as u64) as usize;
        let h = random_matrix(&mut rng, p, m, 0.0, 2.0);
        let w = random_matrix(&mut rng, p, n, 0.0, 1.0);
        let y = random_matrix(&mut rng, n, m, 0.0, 1.0);
        let gw = grad_w(&h, &w, &y).unwrap();
        let gy = grad_y(&h, &w, &y).unwrap();
        assert!(rel_err(&gw, &finite_difference_grad(&h, &w, &y, true, 1e-6)) < 1e-5);
        assert!(rel_err(&gy, &finite_difference_grad(&h, &w, &y, false, 1e-6)) < 1e-5);
        let f = objective(&h, &w, &y).unwrap();
        assert!((f - 2.0 * half_objective(&h, &w, &y)).abs() <= 1e-12 * f.max(1.0));
    }
}

fn episode_from_seed(seed: u64, sigma: f64) -> EpisodeMatrices {
    let bank = gen_synthetic(&SyntheticSpec {
        n_classes: 6,
        per_class: 12,
        dim: 18,
        noise_sigma: sigma,
        style: PrototypeStyle::OnehotBlocks,
        seed,
    })
    .unwrap();
    let spec = EpisodeSpec {
        n_way: 3,
        k_shot: 1,
        n_query_per_class: 4,
        n_episodes: 1,
        seed,
        l2_normalize_columns: false,
    };
    sample_episode(&bank, &spec, 0).unwrap().matrices
}

fn permute_queries(ep: &EpisodeMatrices, perm: &[usize]) -> EpisodeMatrices {
    let h = ep.embeddings();
    let s = ep.n_support();
    let mut order: Vec<usize> = (0..s).collect();
    order.extend(perm.iter().map(|&j| s + j));
    let cols: Vec<Vec<f64>> = order.iter().map(|&j| h.column(j)).collect();
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let h = Matrix::from_columns(h.rows(), &refs).unwrap();
    EpisodeMatrices::new(h, ep.n_classes(), ep.support_labels().to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn query_permutation_permutes_labels(seed in 0u64..10_000, shuffle_seed: u64) {
        let ep = episode_from_seed(seed, 0.1);
        let mut perm: Vec<usize> = (0..ep.n_query()).collect();
        SplitMix64::new(shuffle_seed).shuffle(&mut perm);
        let permuted = permute_queries(&ep, &perm);
        let cfg = SolverConfig::default();
        let a = solve(&ep, &cfg).unwrap();
        let b = solve(&permuted, &cfg).unwrap();
        let la = predict_labels(&a, &ep);
        let lb = predict_labels(&b, &permuted);
        for (j, &src) in perm.iter().enumerate() {
            prop_assert_eq!(lb[j], la[src]);
        }
        let (fa, fb) = (a.final_objective(), b.final_objective());
        prop_assert!((fa - fb).abs() <= 1e-6 * fa.max(1e-9));
    }

    #[test]
    fn solve_is_deterministic_and_feasible(seed in 0u64..10_000, freeze: bool) {
        let ep = episode_from_seed(seed, 0.5);
        let cfg = SolverConfig { freeze_support_columns: freeze, ..SolverConfig::default() };
        let a = solve(&ep, &cfg).unwrap();
        let b = solve(&ep, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.basis.is_nonneg() && a.coefficients.is_nonneg());
        prop_assert_eq!(a.objective_trace.len(), a.iterations_run + 1);
        for pair in a.objective_trace.windows(2) {
            prop_assert!(pair[1] <= pair[0]);
        }
        let recomputed = objective(ep.embeddings(), &a.basis, &a.coefficients).unwrap();
        prop_assert!((recomputed - a.final_objective()).abs() <= 1e-9 * recomputed.max(1.0));
    }

    #[test]
    fn readout_ignores_query_scale(seed in 0u64..10_000, scale in 0.01f64..100.0) {
        let ep = episode_from_seed(seed, 0.3).l2_normalized();
        let s = ep.n_support();
        let h = ep.embeddings();
        let scaled: Vec<Vec<f64>> = (0..h.cols())
            .map(|j| {
                let c = h.column(j);
                if j < s { c } else { c.iter().map(|v| v * scale).collect() }
            })
            .collect();
        let refs: Vec<&[f64]> = scaled.iter().map(Vec::as_slice).collect();
        let h2 = Matrix::from_columns(h.rows(), &refs).unwrap();
        let ep2 = EpisodeMatrices::new(h2, ep.n_classes(), ep.support_labels().to_vec()).unwrap();
        let cfg = SolverConfig { max_iters: 0, basis_jitter_eps: 0.0, ..SolverConfig::default() };
        prop_assert_eq!(classify(&ep, &cfg).unwrap(), classify(&ep2, &cfg).unwrap());
        let ps = fit_prototypes(&ep).unwrap();
        prop_assert_eq!(
            predict_cosine(&ps, &ep.query()).unwrap(),
            predict_cosine(&ps, &ep2.query()).unwrap()
        );
    }
}
