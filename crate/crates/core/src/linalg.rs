//! Small dense helpers: LU determinants, Gram-Schmidt frames, quadrature.

use nalgebra::{DMatrix, DVector};

/// Determinant together with a flag raised when a pivot fell below
/// `1e-12 * scale`, `scale` being the largest absolute entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Determinant {
    pub value: f64,
    pub ill_conditioned: bool,
}

/// Determinant of a row-major `n x n` matrix by LU with partial pivoting.
pub fn lu_det(entries: &[f64], n: usize) -> Determinant {
    assert_eq!(entries.len(), n * n, "matrix is not square");
    if n == 0 {
        return Determinant { value: 1.0, ill_conditioned: false };
    }
    let mut m = entries.to_vec();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut det = 1.0;
    let mut ill = false;
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].abs();
        for row in col + 1..n {
            let v = m[row * n + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best <= 1e-12 * scale {
            ill = true;
        }
        if best == 0.0 {
            return Determinant { value: 0.0, ill_conditioned: true };
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            det = -det;
        }
        let p = m[col * n + col];
        det *= p;
        for row in col + 1..n {
            let factor = m[row * n + col] / p;
            if factor != 0.0 {
                for k in col + 1..n {
                    m[row * n + k] -= factor * m[col * n + k];
                }
            }
        }
    }
    Determinant { value: det, ill_conditioned: ill }
}

pub fn det(m: &DMatrix<f64>) -> f64 {
    assert_eq!(m.nrows(), m.ncols());
    let n = m.nrows();
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            rows.push(m[(i, j)]);
        }
    }
    lu_det(&rows, n).value
}

/// Orthonormalize `vectors` in order. Vectors whose residual norm drops
/// below `tol` times their original norm are skipped.
pub fn gram_schmidt(vectors: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let norm0 = v.norm();
        if norm0 == 0.0 {
            continue;
        }
        let mut w = v.clone();
        // two passes keep the frame orthogonal to working precision
        for _ in 0..2 {
            for e in &out {
                let c = e.dot(&w);
                w -= e * c;
            }
        }
        let nw = w.norm();
        if nw > tol * norm0 {
            out.push(w / nw);
        }
    }
    out
}

/// Orthonormal basis of the orthogonal complement of `span(vectors)` in R^dim.
pub fn orthogonal_complement(vectors: &[DVector<f64>], dim: usize) -> Vec<DVector<f64>> {
    let span = gram_schmidt(vectors, 1e-10);
    let mut all = span.clone();
    let mut comp = Vec::new();
    for i in 0..dim {
        let e = DVector::from_fn(dim, |k, _| if k == i { 1.0 } else { 0.0 });
        let extended = gram_schmidt(&[all.clone(), vec![e]].concat(), 1e-8);
        if extended.len() > all.len() {
            let new = extended.last().unwrap().clone();
            all.push(new.clone());
            comp.push(new);
        }
        if all.len() == dim {
            break;
        }
    }
    comp
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
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
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}
