use emspec_core::linalg::{Matrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense Householder reduction to tridiagonal form, applying each reflector
/// as a full `n x n` matrix product.
fn oracle_tridiagonal(a: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<f64> = (k + 1..n).map(|i| m[i][k]).collect();
        let alpha = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
        let mut v = x.clone();
        v[0] += sign * alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        let mut h = vec![vec![0.0; n]; n];
        for (i, row) in h.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for i in 0..v.len() {
            for j in 0..v.len() {
                h[k + 1 + i][k + 1 + j] -= 2.0 * v[i] * v[j] / vnorm2;
            }
        }
        let prod = |p: &Vec<Vec<f64>>, q: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (0..n).map(|l| p[i][l] * q[l][j]).sum())
                        .collect()
                })
                .collect()
        };
        m = prod(&prod(&h, &m), &h);
    }
    let diag = (0..n).map(|i| m[i][i]).collect();
    let off = (1..n).map(|i| 0.5 * (m[i][i - 1] + m[i - 1][i])).collect();
    (diag, off)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`
/// (Sturm sequence of leading principal minors).
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        let denom = if q == 0.0 {
            f64::EPSILON * (e[i - 1].abs() + 1e-300)
        } else {
            q
        };
        q = d[i] - x - e[i - 1] * e[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn oracle_eigenvalues(a: &Matrix) -> Vec<f64> {
    let (d, e) = oracle_tridiagonal(a);
    let n = d.len();
    let bound = (0..n)
        .map(|i| {
            d[i].abs()
                + if i > 0 { e[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { e[i].abs() } else { 0.0 }
        })
        .fold(0.0, f64::max)
        + 1.0;
    (0..n)
        .map(|k| {
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if sturm_count(&d, &e, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Trigonometric solution of the characteristic cubic of a symmetric 3x3.
fn cubic_eigenvalues(a: &Matrix) -> Vec<f64> {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    let q = a.trace() / 3.0;
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return vec![q; 3];
    }
    let b = Matrix::from_fn(3, 3, |i, j| (a[(i, j)] - if i == j { q } else { 0.0 }) / p);
    let det_b = b[(0, 0)] * (b[(1, 1)] * b[(2, 2)] - b[(1, 2)] * b[(2, 1)])
        - b[(0, 1)] * (b[(1, 0)] * b[(2, 2)] - b[(1, 2)] * b[(2, 0)])
        + b[(0, 2)] * (b[(1, 0)] * b[(2, 1)] - b[(1, 1)] * b[(2, 0)]);
    let r = (det_b / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let mut v = vec![e1, 3.0 * q - e1 - e3, e3];
    v.sort_by(f64::total_cmp);
    v
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = rng.random_range(-5.0..5.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

#[test]
fn five_hundred_random_matrices_match_sturm_bisection() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_val = 0.0f64;
    let mut worst_res = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(1..=12);
        let a = random_symmetric(&mut rng, n);
        let eig = SymmetricEigen::new(&a).unwrap();
        let want = oracle_eigenvalues(&a);
        for (g, w) in eig.values.iter().zip(&want) {
            worst_val = worst_val.max((g - w).abs());
        }
        let r = eig.reconstruct().unwrap();
        let res = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (r[(i, j)] - a[(i, j)]).abs())
            .fold(0.0, f64::max);
        worst_res = worst_res.max(res);
    }
    assert!(worst_val <= 1e-10, "eigenvalue deviation {worst_val:e}");
    assert!(worst_res <= 1e-9, "reconstruction residual {worst_res:e}");
}

#[test]
fn three_by_three_matches_closed_form_cubic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let a = random_symmetric(&mut rng, 3);
        let got = SymmetricEigen::values_only(&a).unwrap();
        let want = cubic_eigenvalues(&a);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10, "{got:?} vs {want:?}");
        }
    }
}

#[test]
fn repeated_eigenvalues_are_resolved() {
    // Projector onto a 2-dimensional subspace plus identity: spectrum {1, 1, 1, 2, 2}.
    let u = [0.5, 0.5, 0.5, 0.5, 0.0];
    let v = [0.5, -0.5, 0.5, -0.5, 0.0];
    let a = Matrix::from_fn(5, 5, |i, j| {
        (if i == j { 1.0 } else { 0.0 }) + u[i] * u[j] + v[i] * v[j]
    });
    let got = SymmetricEigen::values_only(&a).unwrap();
    for (g, w) in got.iter().zip([1.0, 1.0, 1.0, 2.0, 2.0]) {
        assert!((g - w).abs() < 1e-13);
    }
}

proptest! {
    #[test]
    fn eigenvalues_sum_to_trace(seed in any::<u64>(), n in 1usize..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_symmetric(&mut rng, n);
        let vals = SymmetricEigen::values_only(&a).unwrap();
        let s: f64 = vals.iter().sum();
        prop_assert!((s - a.trace()).abs() < 1e-10 * (1.0 + a.frobenius_norm()));
        prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigenvectors_are_orthonormal(seed in any::<u64>(), n in 1usize..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_symmetric(&mut rng, n);
        let eig = SymmetricEigen::new(&a).unwrap();
        let v = eig.vectors.as_ref().unwrap();
        let vtv = v.transpose().matmul(v);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((vtv[(i, j)] - want).abs() < 1e-12);
            }
        }
        prop_assert!(eig.max_residual(&a).unwrap() < 1e-11);
    }

    #[test]
    fn spectrum_shifts_and_scales(seed in any::<u64>(), n in 2usize..10, s in 0.1f64..10.0, c in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_symmetric(&mut rng, n);
        let b = a.map(|i, j, x| s * x + if i == j { c } else { 0.0 });
        let va = SymmetricEigen::values_only(&a).unwrap();
        let vb = SymmetricEigen::values_only(&b).unwrap();
        for (x, y) in va.iter().zip(&vb) {
            prop_assert!((s * x + c - y).abs() < 1e-9 * (1.0 + s * 10.0));
        }
    }
}
