//! Small numerical kernels: Gauss-Legendre rules, deterministic summation,
//! symmetric 2x2 eigensolves, Richardson tables, adaptive Simpson.

use nalgebra::{Matrix2, Vector2, Vector4};

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence. Deterministic for a given order.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be at least 1");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(order: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(order);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| w * half).collect(),
    )
}

/// Pairwise summation: deterministic, O(log n) error growth. All quadrature
/// accumulations go through this so results do not depend on traversal
/// batching.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Eigenvalues and eigenvectors of a symmetric 2x2 matrix, eigenvalues in
/// nonincreasing order. Closed form; the matrix is symmetrized first.
pub fn sym_eigen_2x2(m: &Matrix2<f64>) -> ([f64; 2], [Vector2<f64>; 2]) {
    let a = m[(0, 0)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let d = m[(1, 1)];
    let tr = a + d;
    let gap = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let l1 = 0.5 * tr + gap;
    let l2 = 0.5 * tr - gap;
    let v1 = if b.abs() > 1e-300 {
        Vector2::new(l1 - d, b).normalize()
    } else if a >= d {
        Vector2::new(1.0, 0.0)
    } else {
        Vector2::new(0.0, 1.0)
    };
    let v2 = Vector2::new(-v1.y, v1.x);
    ([l1, l2], [v1, v2])
}

/// Richardson extrapolation for a sequence F(h_k) on a geometric grid
/// h_k = h_0 / ratio^k, assuming an expansion in integer powers of h.
/// Returns the extrapolated limit and the last correction size.
pub fn richardson(values: &[f64], ratio: f64) -> (f64, f64) {
    let n = values.len();
    assert!(n >= 2, "richardson needs at least two levels");
    let mut table: Vec<f64> = values.to_vec();
    let mut last_correction = f64::INFINITY;
    for m in 1..n {
        let factor = ratio.powi(m as i32);
        for k in (m..n).rev() {
            table[k] = (factor * table[k] - table[k - 1]) / (factor - 1.0);
        }
        last_correction = (table[n - 1] - table[n - 2]).abs();
    }
    (table[n - 1], last_correction)
}

/// Adaptive Simpson quadrature of f on [a, b] to absolute tolerance tol.
pub fn adaptive_simpson(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &mut dyn FnMut(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let err = left + right - whole;
        if depth == 0 || err.abs() <= 15.0 * tol {
            left + right + err / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Gamma function at half-integer and integer arguments n/2 (n >= 1),
/// by the recursion from Gamma(1/2) = sqrt(pi), Gamma(1) = 1.
pub fn gamma_half(n_halves: u32) -> f64 {
    assert!(n_halves >= 1);
    let mut val = if n_halves % 2 == 0 {
        1.0
    } else {
        std::f64::consts::PI.sqrt()
    };
    let mut k = if n_halves % 2 == 0 { 2 } else { 1 };
    while k + 2 <= n_halves {
        val *= k as f64 / 2.0;
        k += 2;
    }
    val
}

/// Gram-Schmidt with a caller-supplied bilinear form. Returns the orthonormal
/// vectors and the change-of-basis coefficients A with b_i = sum_j A[i][j] v_j.
/// Fails (returns None) on rank deficiency relative to `tol`.
pub fn metric_gram_schmidt(
    vectors: &[Vector4<f64>],
    inner: &dyn Fn(&Vector4<f64>, &Vector4<f64>) -> f64,
    tol: f64,
) -> Option<(Vec<Vector4<f64>>, Vec<Vec<f64>>)> {
    let mut basis: Vec<Vector4<f64>> = Vec::with_capacity(vectors.len());
    let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for (i, v) in vectors.iter().enumerate() {
        let mut w = *v;
        let mut row = vec![0.0; vectors.len()];
        row[i] = 1.0;
        for (j, b) in basis.iter().enumerate() {
            let proj = inner(&w, b);
            w -= proj * b;
            for (rk, ck) in row.iter_mut().zip(coeffs[j].iter()) {
                *rk -= proj * ck;
            }
        }
        let norm2 = inner(&w, &w);
        if norm2 <= tol * tol {
            return None;
        }
        let norm = norm2.sqrt();
        w /= norm;
        for rk in row.iter_mut() {
            *rk /= norm;
        }
        basis.push(w);
        coeffs.push(row);
    }
    Some((basis, coeffs))
}
