//! Reference computations that share no code with the solver path.

#![allow(dead_code)]

use subspace_shot_core::{Matrix, SplitMix64};

pub fn random_matrix(rng: &mut SplitMix64, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| lo + (hi - lo) * rng.next_f64())
        .collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// `½‖H − WY‖²_F` with plain loops.
pub fn half_objective(h: &Matrix, w: &Matrix, y: &Matrix) -> f64 {
    let mut total = 0.0;
    for i in 0..h.rows() {
        for j in 0..h.cols() {
            let mut wy = 0.0;
            for k in 0..w.cols() {
                wy += w[(i, k)] * y[(k, j)];
            }
            total += (h[(i, j)] - wy).powi(2);
        }
    }
    0.5 * total
}

/// Central differences of `½‖H − WY‖²_F` in every entry of `W` (or `Y`).
pub fn finite_difference_grad(
    h: &Matrix,
    w: &Matrix,
    y: &Matrix,
    wrt_w: bool,
    step: f64,
) -> Matrix {
    let target = if wrt_w { w } else { y };
    let mut grad = Matrix::zeros(target.rows(), target.cols());
    for i in 0..target.rows() {
        for j in 0..target.cols() {
            let mut plus = target.clone();
            let mut minus = target.clone();
            plus[(i, j)] += step;
            minus[(i, j)] -= step;
            let (fp, fm) = if wrt_w {
                (half_objective(h, &plus, y), half_objective(h, &minus, y))
            } else {
                (half_objective(h, w, &plus), half_objective(h, w, &minus))
            };
            grad[(i, j)] = (fp - fm) / (2.0 * step);
        }
    }
    grad
}

/// Exact nonnegative least squares for one column with two basis vectors, by
/// enumerating the four possible supports.
fn nnls2(h: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot = |u: [f64; 3], v: [f64; 3]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let resid = |ya: f64, yb: f64| {
        (0..3)
            .map(|i| (h[i] - ya * a[i] - yb * b[i]).powi(2))
            .sum::<f64>()
    };
    let (aa, bb, ab, ha, hb) = (dot(a, a), dot(b, b), dot(a, b), dot(h, a), dot(h, b));
    let mut best = dot(h, h);
    if aa > 0.0 {
        best = best.min(resid((ha / aa).max(0.0), 0.0));
    }
    if bb > 0.0 {
        best = best.min(resid(0.0, (hb / bb).max(0.0)));
    }
    let det = aa * bb - ab * ab;
    if det > 1e-14 * aa.max(1.0) * bb.max(1.0) {
        let ya = (ha * bb - hb * ab) / det;
        let yb = (hb * aa - ha * ab) / det;
        if ya >= 0.0 && yb >= 0.0 {
            best = best.min(resid(ya, yb));
        }
    }
    best
}

/// Best `‖H − WY‖²_F` for a 3 x M matrix `H` and a fixed pair of basis
/// directions, with `Y ≥ 0` solved exactly per column.
fn objective_for_basis(h_cols: &[[f64; 3]], a: [f64; 3], b: [f64; 3]) -> f64 {
    h_cols.iter().map(|&h| nnls2(h, a, b)).sum()
}

fn simplex_point(u: f64, v: f64) -> Option<[f64; 3]> {
    let w = 1.0 - u - v;
    (u >= -1e-15 && v >= -1e-15 && w >= -1e-15).then(|| [u.max(0.0), v.max(0.0), w.max(0.0)])
}

/// Global minimum of `‖H − WY‖²_F` over `W ≥ 0` (3 x 2) and `Y ≥ 0` by grid
/// search.
///
/// The objective is unchanged when a column of `W` is rescaled and the
/// matching row of `Y` divided by the same factor, so each basis column is
/// searched over directions on the probability simplex. An exhaustive pass
/// over all direction pairs on a `1/coarse` lattice is followed by a shrinking
/// local lattice around the incumbent. For each candidate basis the
/// coefficients are exact.
pub fn grid_search_rank2(h: &Matrix, coarse: usize) -> f64 {
    assert_eq!(h.rows(), 3);
    let h_cols: Vec<[f64; 3]> = (0..h.cols())
        .map(|j| [h[(0, j)], h[(1, j)], h[(2, j)]])
        .collect();

    let step = 1.0 / coarse as f64;
    let mut lattice = Vec::new();
    for i in 0..=coarse {
        for j in 0..=coarse - i {
            lattice.push((i as f64 * step, j as f64 * step));
        }
    }
    let mut best = f64::INFINITY;
    let mut best_at = ((0.0, 0.0), (0.0, 0.0));
    for (x, &pa) in lattice.iter().enumerate() {
        let a = simplex_point(pa.0, pa.1).unwrap();
        for &pb in &lattice[x..] {
            let b = simplex_point(pb.0, pb.1).unwrap();
            let f = objective_for_basis(&h_cols, a, b);
            if f < best {
                best = f;
                best_at = (pa, pb);
            }
        }
    }

    let mut delta = step / 2.0;
    while delta > 1e-7 {
        let mut improved = true;
        while improved {
            improved = false;
            let ((au, av), (bu, bv)) = best_at;
            for da in [-delta, 0.0, delta] {
                for db in [-delta, 0.0, delta] {
                    for dc in [-delta, 0.0, delta] {
                        for dd in [-delta, 0.0, delta] {
                            let pa = (au + da, av + db);
                            let pb = (bu + dc, bv + dd);
                            let (Some(a), Some(b)) =
                                (simplex_point(pa.0, pa.1), simplex_point(pb.0, pb.1))
                            else {
                                continue;
                            };
                            let f = objective_for_basis(&h_cols, a, b);
                            if f < best - 1e-15 {
                                best = f;
                                best_at = (pa, pb);
                                improved = true;
                            }
                        }
                    }
                }
            }
        }
        delta /= 2.0;
    }
    best
}

/// Instance for the grid oracle: entries on the 0.25 lattice in `[0, 2]`.
pub fn coarse_grid_instance(rng: &mut SplitMix64) -> Matrix {
    let data = (0..12).map(|_| 0.25 * rng.below(9) as f64).collect();
    Matrix::new(3, 4, data).unwrap()
}
