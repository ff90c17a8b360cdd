//! Small dense linear-algebra helpers on top of `nalgebra`.
//!
//! Everything here works on `DMatrix<f64>`; dimensions never exceed the
//! compound size of an 8×8 matrix (70), so clarity wins over blocking.

use nalgebra::{Complex, DMatrix, DVector, Schur, SymmetricEigen};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Largest dimension accepted for a cocycle.
pub const MAX_DIM: usize = 8;

/// Spectral norm (largest singular value).
pub fn op_norm(m: &Mat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.singular_values().max()
}

/// Smallest singular value of a square matrix.
pub fn min_singular(m: &Mat) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    m.singular_values().min()
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(m: &Mat) -> f64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "determinant of a non-square matrix");
    match n {
        0 => return 1.0,
        1 => return m[(0, 0)],
        2 => return m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => {}
    }
    let mut a = m.clone();
    let mut sign = 1.0;
    let mut acc = 1.0;
    for col in 0..n {
        let mut piv = col;
        let mut best = a[(col, col)].abs();
        for r in (col + 1)..n {
            let v = a[(r, col)].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap_rows(piv, col);
            sign = -sign;
        }
        let p = a[(col, col)];
        acc *= p;
        for r in (col + 1)..n {
            let f = a[(r, col)] / p;
            if f != 0.0 {
                for c in (col + 1)..n {
                    let v = a[(col, c)];
                    a[(r, c)] -= f * v;
                }
            }
        }
    }
    sign * acc
}

/// Complex eigenvalues of a square matrix via the real Schur form.
pub fn eigenvalues(m: &Mat) -> Vec<Complex<f64>> {
    let n = m.nrows();
    if n == 1 {
        return vec![Complex::new(m[(0, 0)], 0.0)];
    }
    if n == 2 {
        // closed form keeps exact zeros exact
        let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let tr = a + d;
        let dt = a * d - b * c;
        let half = 0.5 * tr;
        let disc = half * half - dt;
        if disc >= 0.0 {
            let s = disc.sqrt();
            // avoid cancellation: compute the larger root first
            let r1 = if half >= 0.0 { half + s } else { half - s };
            let r2 = if r1 != 0.0 { dt / r1 } else { half - s.copysign(half) };
            return vec![Complex::new(r1, 0.0), Complex::new(r2, 0.0)];
        }
        let s = (-disc).sqrt();
        return vec![Complex::new(half, s), Complex::new(half, -s)];
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 100_000)
        .unwrap_or_else(|| Schur::new(m.clone()));
    schur.complex_eigenvalues().iter().copied().collect()
}

/// Eigenvalue moduli sorted non-increasing.
pub fn eigen_moduli_desc(m: &Mat) -> Vec<f64> {
    let mut v: Vec<f64> = eigenvalues(m).iter().map(|z| z.norm()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Orthonormal basis of the column span, keeping `rank` columns.
pub fn orthonormalize(m: &Mat, rank: usize) -> Mat {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let cols: Vec<Vector> = idx[..rank].iter().map(|&i| u.column(i).into_owned()).collect();
    Mat::from_columns(&cols)
}

/// Orthonormal basis (as columns) of the `dim` right-singular directions with
/// the smallest singular values.
pub fn near_null_space(m: &Mat, dim: usize) -> Mat {
    let n = m.ncols();
    if dim == 0 {
        return Mat::zeros(n, 0);
    }
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let cols: Vec<Vector> = idx[..dim]
        .iter()
        .map(|&i| vt.row(i).transpose().into_owned())
        .collect();
    Mat::from_columns(&cols)
}

/// Smallest principal angle between the spans of two orthonormal bases.
pub fn min_principal_angle(a: &Mat, b: &Mat) -> f64 {
    if a.ncols() == 0 || b.ncols() == 0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let cross = a.transpose() * b;
    let s = op_norm(&cross).min(1.0);
    s.acos()
}

/// Norm of the component of the columns of `v` outside span(`basis`),
/// relative to the norm of `v`. `basis` must be orthonormal.
pub fn subspace_residual(v: &Mat, basis: &Mat) -> f64 {
    let scale = op_norm(v);
    if scale == 0.0 {
        return 0.0;
    }
    let proj = basis * (basis.transpose() * v);
    op_norm(&(v - proj)) / scale
}

/// Square root and inverse square root of a symmetric positive definite matrix.
pub fn sym_sqrt_pair(g: &Mat) -> (Mat, Mat) {
    let eig = SymmetricEigen::new(g.clone());
    let n = g.nrows();
    let mut s = Mat::zeros(n, n);
    let mut si = Mat::zeros(n, n);
    for k in 0..n {
        let lam = eig.eigenvalues[k].max(0.0);
        let v = eig.eigenvectors.column(k);
        let outer = v * v.transpose();
        s += &outer * lam.sqrt();
        if lam > 0.0 {
            si += outer / lam.sqrt();
        }
    }
    (s, si)
}

/// Extreme eigenvalues (min, max) of a symmetric matrix.
pub fn sym_extremes(g: &Mat) -> (f64, f64) {
    let ev = SymmetricEigen::new(g.clone()).eigenvalues;
    (ev.min(), ev.max())
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as usize
}
