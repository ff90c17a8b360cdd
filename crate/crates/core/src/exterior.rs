//! Compound matrices (exterior powers) and induced cocycles.

use crate::cocycle::MatrixCocycle;
use crate::error::{LabError, Result};
use crate::linalg::{binomial, det, Mat};
use crate::spectrum::LyapunovSpectrum;

/// The `C(d, i)` increasing multi-indices of size `i`, lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompoundIndexing {
    pub d: usize,
    pub i: usize,
    pub indices: Vec<Vec<usize>>,
}

impl CompoundIndexing {
    pub fn new(d: usize, i: usize) -> Self {
        let mut indices = Vec::with_capacity(binomial(d, i));
        let mut cur = Vec::with_capacity(i);
        fn rec(start: usize, d: usize, i: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == i {
                out.push(cur.clone());
                return;
            }
            for s in start..d {
                cur.push(s);
                rec(s + 1, d, i, cur, out);
                cur.pop();
            }
        }
        rec(0, d, i, &mut cur, &mut indices);
        CompoundIndexing { d, i, indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Position of a multi-index, if present.
    pub fn position(&self, idx: &[usize]) -> Option<usize> {
        self.indices.binary_search_by(|probe| probe.as_slice().cmp(idx)).ok()
    }
}

/// `i`-th compound: entry `(I, J)` is the minor with rows `I` and columns `J`.
pub fn compound(m: &Mat, i: usize) -> Mat {
    let d = m.nrows();
    assert_eq!(d, m.ncols(), "compound of a non-square matrix");
    assert!(i >= 1 && i <= d, "compound degree {i} outside 1..={d}");
    if i == 1 {
        return m.clone();
    }
    let ix = CompoundIndexing::new(d, i);
    let n = ix.len();
    let mut out = Mat::zeros(n, n);
    let mut sub = Mat::zeros(i, i);
    for (r, rows) in ix.indices.iter().enumerate() {
        for (c, cols) in ix.indices.iter().enumerate() {
            for (a, &ri) in rows.iter().enumerate() {
                for (b, &ci) in cols.iter().enumerate() {
                    sub[(a, b)] = m[(ri, ci)];
                }
            }
            out[(r, c)] = det(&sub);
        }
    }
    out
}

/// The cocycle `x ↦ Λ^i A(x)`.
pub fn induced_cocycle(a: &MatrixCocycle, i: usize) -> Result<MatrixCocycle> {
    let d = a.dim();
    if i == 0 || i > d {
        return Err(LabError::InvalidArgument(format!(
            "exterior degree {i} outside 1..={d}"
        )));
    }
    if i == 1 {
        return Ok(a.clone());
    }
    Ok(MatrixCocycle::compound_of(a, i, binomial(d, i)))
}

/// `γ₁ + … + γ_i`, with `−∞` absorbing.
pub fn exponent_sums(spectrum: &LyapunovSpectrum, i: usize) -> f64 {
    let vals = spectrum.values();
    assert!(i >= 1 && i <= vals.len(), "sum index {i} outside 1..={}", vals.len());
    let head = &vals[..i];
    if head.contains(&f64::NEG_INFINITY) {
        f64::NEG_INFINITY
    } else {
        head.iter().sum()
    }
}
